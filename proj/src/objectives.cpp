#include <cmath>
#include <limits>
#include <numbers>

#include "cyber/games.hpp"

namespace cyber {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m) {
  return m.ldlt().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

// Terms shared by the Gaussian objectives. c : Z -> X with x ~ N(A z + b, Sn),
// q : X -> Z with z ~ N(W x + v, T), prior N(mu0, S0), data N(m, P).
struct GaussianTerms {
  Eigen::MatrixXd m_map;     // I - A W
  Eigen::VectorXd resid;     // (I - A W) m - A v - b
  Eigen::VectorXd offset;    // W m + v - mu0
  Eigen::MatrixXd qn, q0;    // Sn^-1, S0^-1
  double recon = 0.0;        // E[-log p_c(x|z)]
  double prior_quad = 0.0;   // E[(z - mu0)' S0^-1 (z - mu0)]
};

GaussianTerms gaussian_terms(const GaussianChanneld& c, const GaussianChanneld& q, const GaussianStated& prior,
                             const GaussianStated& data) {
  const int n = prior.dim(), m = data.dim();
  if (c.domain().dim() != n || c.codomain().dim() != m || q.domain().dim() != m || q.codomain().dim() != n)
    throw DimensionMismatch("Gaussian objective: channel shapes do not match prior and data");
  const auto& a = c.weight();
  const auto& w = q.weight();
  GaussianTerms t;
  t.m_map = Eigen::MatrixXd::Identity(m, m) - a * w;
  t.resid = t.m_map * data.mean() - a * q.bias() - c.bias();
  t.offset = w * data.mean() + q.bias() - prior.mean();
  if (!detail::invertible<double>(prior.cov())) throw SupportViolation("Gaussian objective: prior covariance is singular");
  t.q0 = inverse_spd(prior.cov());
  t.prior_quad = (t.q0 * q.noise()).trace() + t.offset.dot(t.q0 * t.offset) + (t.q0 * w * data.cov() * w.transpose()).trace();
  if (!detail::invertible<double>(c.noise())) {
    t.recon = kInf;
    return t;
  }
  t.qn = inverse_spd(c.noise());
  double quad = (t.qn * a * q.noise() * a.transpose()).trace() + t.resid.dot(t.qn * t.resid) +
                (t.qn * t.m_map * data.cov() * t.m_map.transpose()).trace();
  t.recon = 0.5 * (m * kLog2Pi + log_det<double>(c.noise()) + quad);
  return t;
}

double finite_reconstruction(const FiniteChanneld& c, const FiniteChanneld& q, const FiniteDistd& data) {
  double total = 0.0;
  for (std::size_t x = 0; x < data.size(); ++x) {
    if (!(data[x] > 0.0)) continue;
    double inner = 0.0;
    for (std::size_t z = 0; z < c.domain().size(); ++z) {
      double qz = q(z, x);
      if (!(qz > 0.0)) continue;
      inner += qz * -log_density(c, x, z);
    }
    total += data[x] * inner;
  }
  return total;
}

double finite_inference(const FiniteChanneld& c, const FiniteChanneld& q, const FiniteDistd& prior,
                        const FiniteDistd& data, const Divergence& d) {
  double total = 0.0;
  const State prior_state = prior;
  for (std::size_t x = 0; x < data.size(); ++x) {
    if (!(data[x] > 0.0)) continue;
    double inner = 0.0;
    for (std::size_t z = 0; z < c.domain().size(); ++z) {
      double qz = q(z, x);
      if (!(qz > 0.0)) continue;
      inner += qz * -log_density(c, x, z);
    }
    total += data[x] * (inner + d(State(q.row(x)), prior_state));
  }
  return total;
}

struct Resolved {
  Channel q;
  State data;
};

Resolved resolve(const Channel& c, const StateDependentChannel& back, const Context& ctx) {
  if (!compatible(space_of(ctx.prior), domain_of(c)))
    throw DimensionMismatch("objective: prior is not on the forward channel's domain");
  return {back(ctx.prior), observed_state(c, ctx)};
}

}  // namespace

State observed_state(const Channel& c, const Context& ctx) {
  return pushforward(ctx.continuation, pushforward(c, ctx.prior));
}

double mle_objective(const State& pi, const Context& ctx, MleIntegrand integrand) {
  State rho = pushforward(ctx.continuation, pi);
  if (const auto* p = std::get_if<FiniteDistd>(&pi)) {
    const auto& r = std::get<FiniteDistd>(rho);
    if (!(r.space() == p->space())) throw DimensionMismatch("mle_objective: continuation is not an endochannel");
    if (integrand == MleIntegrand::Mass) return -r.probs().dot(p->probs());
    double total = 0.0;
    for (std::size_t x = 0; x < r.size(); ++x) {
      if (!(r[x] > 0.0)) continue;
      if (!((*p)[x] > 0.0)) return kInf;
      total -= r[x] * std::log((*p)[x]);
    }
    return total;
  }
  const auto& p = std::get<GaussianStated>(pi);
  const auto& r = std::get<GaussianStated>(rho);
  if (r.dim() != p.dim()) throw DimensionMismatch("mle_objective: continuation is not an endochannel");
  if (integrand == MleIntegrand::Mass) {
    // integral of N(x; m_r, P_r) N(x; m_p, P_p) dx = N(m_r; m_p, P_r + P_p)
    Eigen::MatrixXd s = r.cov() + p.cov();
    if (!detail::invertible<double>(s)) return -kInf;
    return -std::exp(gaussian_log_pdf<double>(r.mean(), p.mean(), s));
  }
  if (!detail::invertible<double>(p.cov())) return kInf;
  Eigen::MatrixXd qp = inverse_spd(p.cov());
  Eigen::VectorXd dm = r.mean() - p.mean();
  return 0.5 * (p.dim() * kLog2Pi + log_det<double>(p.cov()) + (qp * r.cov()).trace() + dm.dot(qp * dm));
}

double vae_objective(const FiniteChanneld& c, const FiniteChanneld& q, const FiniteDistd& prior,
                     const FiniteDistd& data) {
  double total = 0.0;
  for (std::size_t x = 0; x < data.size(); ++x) {
    if (!(data[x] > 0.0)) continue;
    double inner = 0.0;
    for (std::size_t z = 0; z < prior.size(); ++z) {
      double qz = q(z, x);
      if (!(qz > 0.0)) continue;
      if (!(prior[z] > 0.0)) return kInf;
      inner += qz * (std::log(qz) - log_density(c, x, z) - std::log(prior[z]));
    }
    total += data[x] * inner;
  }
  return total;
}

double vae_objective(const GaussianChanneld& c, const GaussianChanneld& q, const GaussianStated& prior,
                     const GaussianStated& data) {
  GaussianTerms t = gaussian_terms(c, q, prior, data);
  const int n = prior.dim();
  if (!detail::invertible<double>(q.noise())) return kInf;
  double log_q = -0.5 * (n * kLog2Pi + n + log_det<double>(q.noise()));
  double cross_prior = 0.5 * (n * kLog2Pi + log_det<double>(prior.cov()) + t.prior_quad);
  return log_q + t.recon + cross_prior;
}

double inference_objective(const Channel& c, const StateDependentChannel& back, const Divergence& d,
                           const Context& ctx, const EvalOptions& opts) {
  Resolved r = resolve(c, back, ctx);
  if (const auto* cf = std::get_if<FiniteChanneld>(&c))
    return finite_inference(*cf, std::get<FiniteChanneld>(r.q), std::get<FiniteDistd>(ctx.prior),
                            std::get<FiniteDistd>(r.data), d);

  const auto& cg = std::get<GaussianChanneld>(c);
  const auto& q = std::get<GaussianChanneld>(r.q);
  const auto& prior = std::get<GaussianStated>(ctx.prior);
  const auto& data = std::get<GaussianStated>(r.data);
  GaussianTerms t = gaussian_terms(cg, q, prior, data);
  if (d.is_kl()) {
    if (!detail::invertible<double>(q.noise())) return kInf;
    const int n = prior.dim();
    double expected_kl = 0.5 * (t.prior_quad - n + log_det<double>(prior.cov()) - log_det<double>(q.noise()));
    return t.recon + expected_kl;
  }
  Rng rng(opts.seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < opts.samples; ++i) acc += d(State(q.at(sample(data, rng))), State(prior));
  return t.recon + acc / static_cast<double>(opts.samples);
}

double vae_objective(const Channel& c, const StateDependentChannel& back, const Context& ctx) {
  Resolved r = resolve(c, back, ctx);
  if (const auto* cf = std::get_if<FiniteChanneld>(&c))
    return vae_objective(*cf, std::get<FiniteChanneld>(r.q), std::get<FiniteDistd>(ctx.prior),
                         std::get<FiniteDistd>(r.data));
  return vae_objective(std::get<GaussianChanneld>(c), std::get<GaussianChanneld>(r.q),
                       std::get<GaussianStated>(ctx.prior), std::get<GaussianStated>(r.data));
}

double autoencoder_objective(const Channel& c, const StateDependentChannel& back, const Divergence& d,
                             const Context& ctx, AutoencoderForm form, const EvalOptions& opts) {
  if (form == AutoencoderForm::Pointwise) return inference_objective(c, back, d, ctx, opts);
  Resolved r = resolve(c, back, ctx);
  State aggregate = pushforward(r.q, r.data);
  if (const auto* cf = std::get_if<FiniteChanneld>(&c))
    return finite_reconstruction(*cf, std::get<FiniteChanneld>(r.q), std::get<FiniteDistd>(r.data)) +
           d(aggregate, ctx.prior);
  GaussianTerms t = gaussian_terms(std::get<GaussianChanneld>(c), std::get<GaussianChanneld>(r.q),
                                   std::get<GaussianStated>(ctx.prior), std::get<GaussianStated>(r.data));
  return t.recon + d(aggregate, ctx.prior);
}

double latent_mutual_information(const Channel& c, const StateDependentChannel& back, const Context& ctx) {
  Resolved r = resolve(c, back, ctx);
  if (const auto* q = std::get_if<FiniteChanneld>(&r.q)) {
    const auto& data = std::get<FiniteDistd>(r.data);
    FiniteDistd aggregate = pushforward(*q, data);
    double total = 0.0;
    for (std::size_t x = 0; x < data.size(); ++x)
      if (data[x] > 0.0) total += data[x] * kl(q->row(x), aggregate);
    return total;
  }
  const auto& q = std::get<GaussianChanneld>(r.q);
  const auto& data = std::get<GaussianStated>(r.data);
  Eigen::MatrixXd agg = q.weight() * data.cov() * q.weight().transpose() + q.noise();
  return 0.5 * (log_det<double>(agg) - log_det<double>(q.noise()));
}

GaussianVaeGradient vae_gradient(const GaussianChanneld& c, const GaussianChanneld& q, const GaussianStated& prior,
                                 const GaussianStated& data) {
  GaussianTerms t = gaussian_terms(c, q, prior, data);
  if (!std::isfinite(t.recon)) throw Error("vae_gradient: forward noise covariance is singular");
  const auto& a = c.weight();
  Eigen::MatrixXd at_qn = a.transpose() * t.qn;
  Eigen::MatrixXd lambda = at_qn * a + t.q0;
  Eigen::MatrixXd g = lambda * q.weight() - at_qn;
  Eigen::VectorXd h = lambda * q.bias() + at_qn * c.bias() - t.q0 * prior.mean();
  const Eigen::VectorXd& m = data.mean();

  GaussianVaeGradient out;
  out.d_bias = g * m + h;
  out.d_weight = g * (data.cov() + m * m.transpose()) + h * m.transpose();
  out.d_cov = 0.5 * (lambda - inverse_spd(q.noise()));
  out.d_data_mean = t.m_map.transpose() * t.qn * t.resid + q.weight().transpose() * t.q0 * t.offset;
  return out;
}

Eigen::VectorXd inference_softmax_gradient(const FiniteChanneld& c, const Eigen::MatrixXd& logits,
                                           const FiniteDistd& prior, const FiniteDistd& data) {
  const Eigen::Index nx = logits.rows(), nz = logits.cols();
  Eigen::VectorXd flat(nx * nz);
  for (Eigen::Index x = 0; x < nx; ++x)
    for (Eigen::Index z = 0; z < nz; ++z) flat(x * nz + z) = logits(x, z);
  Eigen::MatrixXd q = softmax_rows(flat, nx, nz);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nx * nz);
  for (Eigen::Index x = 0; x < nx; ++x) {
    const double w = data[static_cast<std::size_t>(x)];
    if (!(w > 0.0)) continue;
    Eigen::VectorXd g(nz);
    for (Eigen::Index z = 0; z < nz; ++z)
      g(z) = -log_density(c, static_cast<std::size_t>(x), static_cast<std::size_t>(z)) + std::log(q(x, z)) -
             std::log(prior[static_cast<std::size_t>(z)]);
    const double mean = q.row(x).dot(g);
    for (Eigen::Index z = 0; z < nz; ++z) grad(x * nz + z) = w * q(x, z) * (g(z) - mean);
  }
  return grad;
}

}  // namespace cyber
