#include "cyber/bayes_lens.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "cyber/random.hpp"
#include "cyber/serialize.hpp"

namespace cyber {

StateDependentChannel::StateDependentChannel(Space base, Space input, Space output, Fn fn)
    : base_(std::move(base)), input_(std::move(input)), output_(std::move(output)), fn_(std::move(fn)) {
  if (base_.index() != input_.index() || base_.index() != output_.index())
    throw BackendMismatch("state-dependent channel: mixed finite and Euclidean objects");
}

StateDependentChannel StateDependentChannel::constant(Space base, Channel c) {
  Space in = domain_of(c), out = codomain_of(c);
  return StateDependentChannel(std::move(base), std::move(in), std::move(out),
                               [c = std::move(c)](const State&) { return c; });
}

Channel StateDependentChannel::operator()(const State& pi) const {
  if (!compatible(space_of(pi), base_))
    throw DimensionMismatch("backward channel: state on " + describe(space_of(pi)) + ", expected " + describe(base_));
  Channel c = fn_(pi);
  if (!compatible(domain_of(c), input_) || !compatible(codomain_of(c), output_))
    throw DimensionMismatch("backward channel returned the wrong shape");
  return c;
}

BayesLens::BayesLens(Channel forward, StateDependentChannel backward)
    : forward_(std::move(forward)), backward_(std::move(backward)) {
  if (!compatible(domain_of(forward_), backward_.base()))
    throw DimensionMismatch("lens: backward part is indexed by states on the wrong space");
}

BayesLens identity_lens(const Space& space) { return identity_lens(space, space); }

BayesLens identity_lens(const Space& y, const Space& a) {
  return BayesLens(identity_channel(y), StateDependentChannel::constant(y, identity_channel(a)));
}

BayesLens compose_lens(const BayesLens& g, const BayesLens& f) {
  if (!compatible(f.y(), g.x()) || !compatible(f.b(), g.a()))
    throw DimensionMismatch("compose_lens: middle objects do not match (" + describe(f.y()) + " vs " +
                            describe(g.x()) + ")");
  Channel fwd = compose(g.forward(), f.forward());
  Channel f_fwd = f.forward();
  StateDependentChannel f_back = f.backward();
  StateDependentChannel g_back = g.backward();
  return BayesLens(std::move(fwd), StateDependentChannel(f.x(), g.b(), f.a(), [=](const State& pi) {
                     return compose(f_back(pi), g_back(pushforward(f_fwd, pi)));
                   }));
}

BayesLens tensor_lens(const BayesLens& f, const BayesLens& g) {
  if (f.forward().index() != g.forward().index()) throw BackendMismatch("tensor_lens: mixed backends");
  const std::size_t nf = num_factors(f.x());
  const std::size_t ng = num_factors(g.x());
  StateDependentChannel f_back = f.backward();
  StateDependentChannel g_back = g.backward();
  return BayesLens(tensor(f.forward(), g.forward()),
                   StateDependentChannel(tensor(f.x(), g.x()), tensor(f.b(), g.b()), tensor(f.a(), g.a()),
                                         [=](const State& pi) {
                                           return tensor(f_back(marginal(pi, 0, nf)), g_back(marginal(pi, nf, ng)));
                                         }));
}

BayesLens exact_lens_of(const Channel& c) {
  Space x = domain_of(c), y = codomain_of(c);
  return BayesLens(c, StateDependentChannel(x, y, x, [c](const State& pi) { return bayes_inverse(c, pi); }));
}

double exactness_gap(const BayesLens& lens, const std::vector<State>& priors) {
  if (!lens.is_simple()) throw DimensionMismatch("exactness is defined for simple lenses only");
  double worst = 0.0;
  for (const auto& pi : priors) {
    Channel truth = bayes_inverse(lens.forward(), pi);
    worst = std::max(worst, almost_equal_gap(lens.backward(pi), truth, pushforward(lens.forward(), pi)));
  }
  return worst;
}

bool is_exact(const BayesLens& lens, const std::vector<State>& priors, double tol) {
  return exactness_gap(lens, priors) <= tol;
}

FiniteChanneld swap_entries(const FiniteChanneld& c) {
  Eigen::MatrixXd m = c.rows();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index hi = 0, lo = 0;
    m.row(i).maxCoeff(&hi);
    m.row(i).minCoeff(&lo);
    std::swap(m(i, hi), m(i, lo));
  }
  return FiniteChanneld(c.domain(), c.codomain(), m);
}

nlohmann::json OpticalBayesReport::to_json() const {
  return nlohmann::json{{"trials", trials},   {"passes", passes},     {"failures", failures},
                        {"worst_tv", worst_tv}, {"seed", seed},         {"resampled", resampled}};
}

namespace {

struct TrialOutcome {
  double tv = 0.0;
  std::size_t resampled = 0;
  std::optional<nlohmann::json> witness;
  std::exception_ptr error;
};

TrialOutcome run_trial(const OpticalBayesOptions& o, std::uint64_t trial) {
  Rng rng = stream_rng(o.seed, trial);
  std::uniform_int_distribution<int> dim(2, o.max_dim);
  TrialOutcome out;
  for (;;) {
    const int nx = dim(rng);
    const int ny = o.permutations ? nx : dim(rng);
    const int nz = o.permutations ? nx : dim(rng);
    FiniteSpace sx = FiniteSpace::range(static_cast<std::size_t>(nx));
    FiniteSpace sy = FiniteSpace::range(static_cast<std::size_t>(ny));
    FiniteSpace sz = FiniteSpace::range(static_cast<std::size_t>(nz));
    FiniteDistd pi = random_prior(sx, rng);
    FiniteChanneld c = o.permutations ? random_permutation_channel(sx, rng) : random_channel(sx, sy, rng, o.zero_prob);
    FiniteChanneld d = o.permutations ? random_permutation_channel(sy, rng) : random_channel(sy, sz, rng, o.zero_prob);
    FiniteDistd ref = pushforward(d, pushforward(c, pi));
    if (!(ref.probs().maxCoeff() > kTol.supp)) {
      ++out.resampled;
      continue;
    }

    Channel composite = compose_lens(exact_lens_of(d), exact_lens_of(c)).backward(State(pi));
    auto composite_f = std::get<FiniteChanneld>(composite);
    if (o.corrupt) composite_f = o.corrupt(composite_f);
    FiniteChanneld direct = bayes_inverse(compose(d, c), pi);
    out.tv = worst_supported_tv(composite_f, direct, ref);
    if (!(out.tv <= o.tol)) {
      out.witness = nlohmann::json{{"trial", trial},
                                   {"tv", out.tv},
                                   {"prior", to_json(pi)},
                                   {"c", to_json(c)},
                                   {"d", to_json(d)},
                                   {"composite_backward", to_json(composite_f)},
                                   {"direct_backward", to_json(direct)}};
    }
    return out;
  }
}

}  // namespace

OpticalBayesReport verify_optical_bayes(const OpticalBayesOptions& o) {
  if (o.trials < 1) throw Error("verify_optical_bayes: trials must be at least 1");
  if (o.max_dim < 2 || o.max_dim > 8) throw Error("verify_optical_bayes: max_dim must lie in [2, 8]");

  std::vector<TrialOutcome> outcomes(o.trials);
  const unsigned workers = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(o.trials)));
  auto work = [&](unsigned w) {
    for (std::size_t t = w; t < o.trials; t += workers) {
      try {
        outcomes[t] = run_trial(o, t);
      } catch (...) {
        outcomes[t].error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  OpticalBayesReport r;
  r.trials = o.trials;
  r.seed = o.seed;
  for (auto& out : outcomes) {
    if (out.error) std::rethrow_exception(out.error);
    r.worst_tv = std::max(r.worst_tv, out.tv);
    r.resampled += out.resampled;
    if (out.witness)
      r.failures.push_back(std::move(*out.witness));
    else
      ++r.passes;
  }
  return r;
}

}  // namespace cyber
