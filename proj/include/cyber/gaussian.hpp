#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <utility>

#include "cyber/core.hpp"
#include "cyber/space.hpp"

namespace cyber {

namespace detail {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
Mat<Scalar> checked_covariance(Mat<Scalar> cov, const char* what) {
  if (cov.rows() != cov.cols()) throw DimensionMismatch(std::string(what) + ": covariance is not square");
  if (cov.size() == 0) return cov;
  if (!cov.allFinite()) throw InvalidDistribution(std::string(what) + ": covariance has non-finite entries");
  using std::abs;
  Scalar scale = std::max(Scalar(1), cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > Scalar(kTol.sym) * scale)
    throw InvalidDistribution(std::string(what) + ": covariance is not symmetric");
  Mat<Scalar> sym = (cov + cov.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -Scalar(kTol.psd) * scale)
    throw InvalidDistribution(std::string(what) + ": covariance is not positive semidefinite");
  return sym;
}

template <typename Scalar>
Mat<Scalar> block_diagonal(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  Mat<Scalar> out = Mat<Scalar>::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// Smallest eigenvalue must clear this (relative to the largest) for a
/// covariance to be treated as invertible.
inline constexpr double kPdRelative = 1e-12;

template <typename Scalar>
bool invertible(const Mat<Scalar>& cov) {
  if (cov.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(cov, Eigen::EigenvaluesOnly);
  Scalar hi = std::max(Scalar(1), es.eigenvalues().maxCoeff());
  return es.eigenvalues().minCoeff() > Scalar(kPdRelative) * hi;
}

}  // namespace detail

/// Gaussian state N(mean, cov) on a Euclidean space.
template <typename Scalar>
class GaussianState {
 public:
  using Vector = detail::Vec<Scalar>;
  using Matrix = detail::Mat<Scalar>;

  GaussianState() = default;

  GaussianState(const Vector& mean, const Matrix& cov)
      : GaussianState(EuclideanSpace(static_cast<int>(mean.size())), mean, cov) {}

  GaussianState(EuclideanSpace space, Vector mean, Matrix cov) : space_(std::move(space)), mean_(std::move(mean)) {
    if (mean_.size() != space_.dim() || cov.rows() != space_.dim())
      throw DimensionMismatch("Gaussian state: mean/cov size does not match its space");
    if (!mean_.allFinite()) throw InvalidDistribution("Gaussian state: non-finite mean");
    cov_ = detail::checked_covariance<Scalar>(std::move(cov), "Gaussian state");
  }

  const EuclideanSpace& space() const { return space_; }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  int dim() const { return space_.dim(); }

 private:
  EuclideanSpace space_;
  Vector mean_;
  Matrix cov_;
};

/// Linear-Gaussian kernel x -> N(weight x + bias, noise).
template <typename Scalar>
class GaussianChannel {
 public:
  using Vector = detail::Vec<Scalar>;
  using Matrix = detail::Mat<Scalar>;

  GaussianChannel() = default;

  GaussianChannel(const Matrix& weight, const Vector& bias, const Matrix& noise)
      : GaussianChannel(EuclideanSpace(static_cast<int>(weight.cols())), EuclideanSpace(static_cast<int>(weight.rows())),
                        weight, bias, noise) {}

  GaussianChannel(EuclideanSpace domain, EuclideanSpace codomain, Matrix weight, Vector bias, Matrix noise)
      : domain_(std::move(domain)), codomain_(std::move(codomain)), weight_(std::move(weight)), bias_(std::move(bias)) {
    if (weight_.rows() != codomain_.dim() || weight_.cols() != domain_.dim() || bias_.size() != codomain_.dim() ||
        noise.rows() != codomain_.dim())
      throw DimensionMismatch("Gaussian channel: weight/bias/noise shapes are inconsistent");
    if (!weight_.allFinite() || !bias_.allFinite()) throw InvalidDistribution("Gaussian channel: non-finite parameters");
    noise_ = detail::checked_covariance<Scalar>(std::move(noise), "Gaussian channel");
  }

  static GaussianChannel identity(const EuclideanSpace& space) {
    const int n = space.dim();
    return GaussianChannel(space, space, Matrix::Identity(n, n), Vector::Zero(n), Matrix::Zero(n, n));
  }

  static GaussianChannel constant(const EuclideanSpace& domain, const GaussianState<Scalar>& out) {
    return GaussianChannel(domain, out.space(), Matrix::Zero(out.dim(), domain.dim()), out.mean(), out.cov());
  }

  static GaussianChannel from_state(const GaussianState<Scalar>& s) { return constant(EuclideanSpace::unit(), s); }

  static GaussianChannel discard(const EuclideanSpace& domain) {
    return GaussianChannel(domain, EuclideanSpace::unit(), Matrix::Zero(0, domain.dim()), Vector::Zero(0),
                           Matrix::Zero(0, 0));
  }

  const EuclideanSpace& domain() const { return domain_; }
  const EuclideanSpace& codomain() const { return codomain_; }
  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }
  const Matrix& noise() const { return noise_; }

  GaussianState<Scalar> at(const Vector& x) const {
    if (x.size() != domain_.dim()) throw DimensionMismatch("Gaussian channel: input has wrong dimension");
    return GaussianState<Scalar>(codomain_, weight_ * x + bias_, noise_);
  }

 private:
  EuclideanSpace domain_;
  EuclideanSpace codomain_;
  Matrix weight_;
  Vector bias_;
  Matrix noise_;
};

using GaussianStated = GaussianState<double>;
using GaussianChanneld = GaussianChannel<double>;

// ---------------------------------------------------------------------------
// Operations

template <typename Scalar>
GaussianState<Scalar> pushforward(const GaussianChannel<Scalar>& c, const GaussianState<Scalar>& pi) {
  if (c.domain().dim() != pi.space().dim())
    throw DimensionMismatch("pushforward: state is not on the channel's domain");
  return GaussianState<Scalar>(c.codomain(), c.weight() * pi.mean() + c.bias(),
                               c.weight() * pi.cov() * c.weight().transpose() + c.noise());
}

template <typename Scalar>
GaussianChannel<Scalar> compose(const GaussianChannel<Scalar>& d, const GaussianChannel<Scalar>& c) {
  if (c.codomain().dim() != d.domain().dim()) throw DimensionMismatch("compose: codomain of c != domain of d");
  return GaussianChannel<Scalar>(c.domain(), d.codomain(), d.weight() * c.weight(), d.weight() * c.bias() + d.bias(),
                                 d.weight() * c.noise() * d.weight().transpose() + d.noise());
}

template <typename Scalar>
GaussianChannel<Scalar> tensor(const GaussianChannel<Scalar>& c1, const GaussianChannel<Scalar>& c2) {
  detail::Vec<Scalar> bias(c1.bias().size() + c2.bias().size());
  bias << c1.bias(), c2.bias();
  return GaussianChannel<Scalar>(c1.domain() * c2.domain(), c1.codomain() * c2.codomain(),
                                 detail::block_diagonal<Scalar>(c1.weight(), c2.weight()), bias,
                                 detail::block_diagonal<Scalar>(c1.noise(), c2.noise()));
}

template <typename Scalar>
GaussianState<Scalar> tensor(const GaussianState<Scalar>& p1, const GaussianState<Scalar>& p2) {
  detail::Vec<Scalar> mean(p1.dim() + p2.dim());
  mean << p1.mean(), p2.mean();
  return GaussianState<Scalar>(p1.space() * p2.space(), mean, detail::block_diagonal<Scalar>(p1.cov(), p2.cov()));
}

/// Conjugate inversion as a linear-Gaussian channel y -> N(mu + K(y - A mu - b), Sigma - K A Sigma)
/// with gain K = Sigma A^T (A Sigma A^T + noise)^-1.
template <typename Scalar>
GaussianChannel<Scalar> bayes_inverse(const GaussianChannel<Scalar>& c, const GaussianState<Scalar>& pi) {
  if (c.domain().dim() != pi.space().dim())
    throw DimensionMismatch("bayes_inverse: prior is not on the channel's domain");
  using Matrix = detail::Mat<Scalar>;
  const Matrix& a = c.weight();
  Matrix s = a * pi.cov() * a.transpose() + c.noise();
  s = (s + s.transpose()) / Scalar(2);
  if (!detail::invertible<Scalar>(s))
    throw UnsupportedOutcome("bayes_inverse: predictive covariance is singular");
  Matrix gain = s.ldlt().solve(a * pi.cov()).transpose();
  Matrix post_cov = pi.cov() - gain * a * pi.cov();
  post_cov = (post_cov + post_cov.transpose()) / Scalar(2);
  // Clip round-off below zero along degenerate directions.
  Eigen::SelfAdjointEigenSolver<Matrix> es(post_cov);
  if (post_cov.size() > 0 && es.eigenvalues().minCoeff() < Scalar(0)) {
    detail::Vec<Scalar> ev = es.eigenvalues().cwiseMax(Scalar(0));
    post_cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }
  detail::Vec<Scalar> bias = pi.mean() - gain * (a * pi.mean() + c.bias());
  return GaussianChannel<Scalar>(c.codomain(), c.domain(), gain, bias, post_cov);
}

template <typename Scalar>
GaussianState<Scalar> posterior(const GaussianChannel<Scalar>& c, const GaussianState<Scalar>& pi,
                                const detail::Vec<Scalar>& y) {
  return bayes_inverse(c, pi).at(y);
}

/// log N(y; mean, cov) for an invertible covariance.
template <typename Scalar>
Scalar gaussian_log_pdf(const detail::Vec<Scalar>& y, const detail::Vec<Scalar>& mean, const detail::Mat<Scalar>& cov) {
  if (!detail::invertible<Scalar>(cov)) throw Error("log density: singular covariance");
  Eigen::LLT<detail::Mat<Scalar>> llt(cov);
  detail::Vec<Scalar> r = y - mean;
  Scalar quad = r.dot(llt.solve(r));
  Scalar logdet = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  using std::log;
  return Scalar(-0.5) * (Scalar(r.size()) * log(Scalar(2) * std::numbers::pi_v<Scalar>) + logdet + quad);
}

template <typename Scalar>
Scalar log_density(const GaussianChannel<Scalar>& c, const detail::Vec<Scalar>& y, const detail::Vec<Scalar>& x) {
  if (x.size() != c.domain().dim() || y.size() != c.codomain().dim())
    throw DimensionMismatch("log_density: argument dimensions do not match the channel");
  return gaussian_log_pdf<Scalar>(y, c.weight() * x + c.bias(), c.noise());
}

template <typename Scalar>
Scalar log_density(const GaussianState<Scalar>& pi, const detail::Vec<Scalar>& x) {
  return gaussian_log_pdf<Scalar>(x, pi.mean(), pi.cov());
}

template <typename Scalar>
Scalar log_det(const detail::Mat<Scalar>& m) {
  if (m.size() == 0) return Scalar(0);
  Eigen::LLT<detail::Mat<Scalar>> llt(m);
  if (llt.info() != Eigen::Success) return Scalar(kLogZero);
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

template <typename Scalar>
Scalar kl(const GaussianState<Scalar>& p, const GaussianState<Scalar>& q) {
  if (p.space().dim() != q.space().dim()) throw DimensionMismatch("kl: states live on different spaces");
  if (!detail::invertible<Scalar>(q.cov())) throw SupportViolation("kl: reference covariance is singular");
  if (!detail::invertible<Scalar>(p.cov())) return std::numeric_limits<Scalar>::infinity();
  Eigen::LDLT<detail::Mat<Scalar>> qs(q.cov());
  detail::Vec<Scalar> d = q.mean() - p.mean();
  Scalar tr = qs.solve(p.cov()).trace();
  Scalar quad = d.dot(qs.solve(d));
  return Scalar(0.5) * (tr + quad - Scalar(p.dim()) + log_det<Scalar>(q.cov()) - log_det<Scalar>(p.cov()));
}

template <typename Scalar>
GaussianState<Scalar> marginal(const GaussianState<Scalar>& pi, std::size_t first, std::size_t count) {
  EuclideanSpace target = pi.space().slice(first, count);
  int off = pi.space().offset(first);
  int n = target.dim();
  return GaussianState<Scalar>(target, pi.mean().segment(off, n), pi.cov().block(off, off, n, n));
}

template <typename Scalar>
GaussianChannel<Scalar> projection(const EuclideanSpace& s, std::size_t first, std::size_t count) {
  EuclideanSpace target = s.slice(first, count);
  int off = s.offset(first);
  detail::Mat<Scalar> w = detail::Mat<Scalar>::Zero(target.dim(), s.dim());
  w.block(0, off, target.dim(), target.dim()).setIdentity();
  return GaussianChannel<Scalar>(s, target, w, detail::Vec<Scalar>::Zero(target.dim()),
                                 detail::Mat<Scalar>::Zero(target.dim(), target.dim()));
}

/// Sup-norm gap between two y-indexed Gaussian families on the support of
/// ref: noise covariances, means at ref's mean, and the weights along the
/// directions ref spreads mass over.
template <typename Scalar>
Scalar worst_supported_gap(const GaussianChannel<Scalar>& f1, const GaussianChannel<Scalar>& f2,
                           const GaussianState<Scalar>& ref) {
  if (f1.domain().dim() != f2.domain().dim() || f1.codomain().dim() != f2.codomain().dim() ||
      ref.space().dim() != f1.domain().dim())
    throw DimensionMismatch("almost_equal: families are not indexed by the reference space");
  Scalar gap = (f1.noise() - f2.noise()).cwiseAbs().maxCoeff();
  detail::Vec<Scalar> m1 = f1.weight() * ref.mean() + f1.bias();
  detail::Vec<Scalar> m2 = f2.weight() * ref.mean() + f2.bias();
  if (m1.size() > 0) gap = std::max(gap, (m1 - m2).cwiseAbs().maxCoeff());
  if (ref.dim() > 0 && f1.weight().size() > 0) {
    Eigen::SelfAdjointEigenSolver<detail::Mat<Scalar>> es(ref.cov());
    for (int i = 0; i < ref.dim(); ++i) {
      if (!(es.eigenvalues()(i) > Scalar(kTol.supp))) continue;
      detail::Vec<Scalar> dir = (f1.weight() - f2.weight()) * es.eigenvectors().col(i);
      gap = std::max(gap, dir.cwiseAbs().maxCoeff());
    }
  }
  return gap;
}

template <typename Scalar>
bool almost_equal(const GaussianChannel<Scalar>& f1, const GaussianChannel<Scalar>& f2,
                  const GaussianState<Scalar>& ref, Scalar tol = Scalar(kTol.almost_eq)) {
  return worst_supported_gap(f1, f2, ref) <= tol;
}

template <typename Scalar>
detail::Vec<Scalar> sample(const GaussianState<Scalar>& pi, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  detail::Vec<Scalar> z(pi.dim());
  for (int i = 0; i < pi.dim(); ++i) z(i) = Scalar(n01(rng));
  if (pi.dim() == 0) return z;
  Eigen::SelfAdjointEigenSolver<detail::Mat<Scalar>> es(pi.cov());
  detail::Vec<Scalar> root = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return pi.mean() + es.eigenvectors() * root.asDiagonal() * z;
}

template <typename Scalar>
detail::Vec<Scalar> sample(const GaussianChannel<Scalar>& c, const detail::Vec<Scalar>& x, Rng& rng) {
  return sample(c.at(x), rng);
}

/// Monte Carlo estimate; always reports how many draws produced it.
template <typename Scalar>
struct MonteCarloEstimate {
  Scalar value;
  Scalar std_error;
  std::size_t samples;
};

template <typename Scalar>
MonteCarloEstimate<Scalar> expectation(const GaussianState<Scalar>& pi,
                                       const std::function<Scalar(const detail::Vec<Scalar>&)>& f, std::uint64_t seed,
                                       std::size_t samples) {
  if (samples == 0) throw Error("expectation: sample count must be positive");
  Rng rng(seed);
  Scalar mean(0), m2(0);
  for (std::size_t i = 0; i < samples; ++i) {
    Scalar v = f(sample(pi, rng));
    Scalar delta = v - mean;
    mean += delta / Scalar(i + 1);
    m2 += delta * (v - mean);
  }
  using std::sqrt;
  Scalar var = samples > 1 ? m2 / Scalar(samples - 1) : Scalar(0);
  return {mean, sqrt(var / Scalar(samples)), samples};
}

}  // namespace cyber
