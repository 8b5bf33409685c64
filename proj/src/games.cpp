#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "cyber/games.hpp"

namespace cyber {

namespace {

std::atomic<unsigned> g_workers{0};

bool same_strategy(const Strategy& a, const Strategy& b) {
  return a.size() == b.size() && (a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

Strategy concat(const Strategy& a, const Strategy& b) {
  Strategy s(a.size() + b.size());
  s << a, b;
  return s;
}

double rank_value(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

Space unit_like(const Space& s) {
  if (std::holds_alternative<FiniteSpace>(s)) return FiniteSpace::unit();
  return EuclideanSpace::unit();
}

std::vector<StrategyBlock> shifted(const std::vector<StrategyBlock>& blocks, int by) {
  std::vector<StrategyBlock> out = blocks;
  for (auto& b : out) b.offset += by;
  return out;
}

std::vector<Strategy> cartesian(const std::vector<Strategy>& left, const std::vector<Strategy>& right) {
  std::vector<Strategy> out;
  out.reserve(left.size() * right.size());
  for (const auto& l : left)
    for (const auto& r : right) out.push_back(concat(l, r));
  return out;
}

bool contains(const std::vector<Strategy>& set, const Strategy& s) {
  return std::any_of(set.begin(), set.end(), [&](const Strategy& t) { return same_strategy(s, t); });
}

// Values of `fitness` along one block with the rest of s fixed.
std::vector<double> block_values(const OpenGame::Fitness& fitness, const StrategyBlock& block, const Strategy& s,
                                 const Context& ctx) {
  if (!block.space.enumerable()) throw Error("block '" + block.name + "' is a box and cannot be enumerated");
  const int d = block.space.dim();
  return evaluate_all(block.space.size(), [&](std::size_t i) {
    Strategy t = s;
    t.segment(block.offset, d) = block.space.at(i);
    return fitness(t, ctx);
  });
}

std::vector<Strategy> blockwise_br(const OpenGame::Fitness& fitness, const std::vector<StrategyBlock>& blocks,
                                   const Context& ctx, const Strategy& s) {
  std::vector<Strategy> out{Strategy(0)};
  for (const auto& block : blocks) {
    std::vector<Strategy> best;
    for (std::size_t i : argmin_ties(block_values(fitness, block, s, ctx))) best.push_back(block.space.at(i));
    out = cartesian(out, best);
  }
  return out;
}

bool blockwise_equilibrium(const OpenGame::Fitness& fitness, const std::vector<StrategyBlock>& blocks,
                           const Context& ctx, const Strategy& s) {
  const double here = rank_value(fitness(s, ctx));
  for (const auto& block : blocks) {
    auto values = block_values(fitness, block, s, ctx);
    double best = std::numeric_limits<double>::infinity();
    for (double v : values) best = std::min(best, rank_value(v));
    if (std::isinf(best) && std::isinf(here)) continue;
    if (!(here <= best + kTol.tie)) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

void set_default_workers(unsigned n) { g_workers.store(n); }

unsigned default_workers() {
  unsigned n = g_workers.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

std::vector<double> evaluate_all(std::size_t n, const std::function<double(std::size_t)>& f) {
  std::vector<double> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(default_workers(), std::max<std::size_t>(1, n / 64)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) out[i] = f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<std::size_t> argmin_ties(const std::vector<double>& values, double tie) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : values) best = std::min(best, rank_value(v));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = rank_value(values[i]);
    if (std::isinf(best) ? std::isinf(v) : v <= best + tie) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

OpenGame::OpenGame(std::string name, Space x, Space a, Space y, Space b, StrategySpace strategies, Play play,
                   Fitness fitness)
    : name_(std::move(name)),
      x_(std::move(x)),
      a_(std::move(a)),
      y_(std::move(y)),
      b_(std::move(b)),
      strategies_(std::move(strategies)),
      play_(std::move(play)),
      fitness_(std::move(fitness)) {
  blocks_ = {StrategyBlock{name_, 0, strategies_}};
}

std::vector<double> OpenGame::objective_table(const Context& ctx) const {
  return evaluate_all(strategies_.size(), [&](std::size_t i) { return fitness_(strategies_.at(i), ctx); });
}

std::vector<Strategy> OpenGame::best_response(const Context& ctx, const Strategy& s) const {
  if (best_response_) return best_response_(ctx, s);
  std::vector<Strategy> out;
  for (std::size_t i : argmin_ties(objective_table(ctx))) out.push_back(strategies_.at(i));
  return out;
}

bool OpenGame::is_equilibrium(const Strategy& s, const Context& ctx) const {
  if (equilibrium_test_) return equilibrium_test_(s, ctx);
  return contains(best_response(ctx, s), s);
}

std::vector<Strategy> OpenGame::equilibria(const Context& ctx) const {
  if (equilibria_) return equilibria_(ctx);
  if (atomic_) {
    Strategy any = strategies_.enumerable() ? strategies_.at(0) : strategies_.lower();
    return best_response(ctx, any);
  }
  std::vector<Strategy> out;
  for (std::size_t i = 0; i < strategies_.size(); ++i) {
    Strategy s = strategies_.at(i);
    if (is_equilibrium(s, ctx)) out.push_back(std::move(s));
  }
  return out;
}

Eigen::VectorXd OpenGame::gradient(const Strategy& s, const Context& ctx) const {
  if (!gradient_) throw Error("game '" + name_ + "' has no analytic gradient");
  return gradient_(s, ctx);
}

OpenGame& OpenGame::with_best_response(BestResponse br, bool atomic) {
  best_response_ = std::move(br);
  atomic_ = atomic;
  return *this;
}

OpenGame& OpenGame::with_equilibria(Equilibria eq) {
  equilibria_ = std::move(eq);
  return *this;
}

OpenGame& OpenGame::with_equilibrium_test(std::function<bool(const Strategy&, const Context&)> test) {
  equilibrium_test_ = std::move(test);
  return *this;
}

OpenGame& OpenGame::with_gradient(Gradient g) {
  gradient_ = std::move(g);
  return *this;
}

OpenGame& OpenGame::with_blocks(std::vector<StrategyBlock> blocks) {
  blocks_ = std::move(blocks);
  return *this;
}

// ---------------------------------------------------------------------------
// Constructors

namespace {

std::size_t index_of_strategy(const Strategy& s, std::size_t n) {
  if (s.size() != 1) throw Error("enumerated strategy must be a single index");
  auto i = static_cast<long long>(std::llround(s(0)));
  if (i < 0 || static_cast<std::size_t>(i) >= n) throw Error("strategy index out of range");
  return static_cast<std::size_t>(i);
}

// For a linear-Gaussian backward family: the member minimizing the KL
// inference (equivalently VAE) objective against forward c and prior pi.
// Weight and bias match the conjugate posterior; the diagonal variances are
// 1 / diag(precision).
Strategy gaussian_backward_optimum(const GaussianChanneld& c, const GaussianStated& prior) {
  if (!detail::invertible<double>(c.noise()) || !detail::invertible<double>(prior.cov()))
    throw Error("closed-form best response needs invertible covariances");
  const Eigen::MatrixXd qn = c.noise().ldlt().solve(Eigen::MatrixXd::Identity(c.noise().rows(), c.noise().cols()));
  const Eigen::MatrixXd q0 = prior.cov().ldlt().solve(Eigen::MatrixXd::Identity(prior.dim(), prior.dim()));
  const Eigen::MatrixXd& a = c.weight();
  const Eigen::MatrixXd lambda = a.transpose() * qn * a + q0;
  const Eigen::MatrixXd w = lambda.ldlt().solve(a.transpose() * qn);
  const Eigen::VectorXd v = lambda.ldlt().solve(q0 * prior.mean() - a.transpose() * qn * c.bias());
  const int n = prior.dim(), m = c.codomain().dim();
  Strategy s(n * m + 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) s(i * m + j) = w(i, j);
  s.segment(n * m, n) = v;
  for (int i = 0; i < n; ++i) s(n * m + n + i) = -0.5 * std::log(lambda(i, i));
  return s;
}

bool closed_form_backward(const BackwardFamily& back) { return back.name == "linear_gaussian"; }

// Gradient of the VAE (equivalently KL inference) objective with respect to
// the parameters (W, b, s) of a constant linear-Gaussian backward channel.
Eigen::VectorXd linear_gaussian_gradient(const GaussianChanneld& c, const Strategy& params, const Context& ctx) {
  const int m = c.codomain().dim(), n = c.domain().dim();
  const GaussianChanneld q = linear_gaussian(params, m, n);
  const auto data = std::get<GaussianStated>(observed_state(Channel(c), ctx));
  const GaussianVaeGradient g = vae_gradient(c, q, std::get<GaussianStated>(ctx.prior), data);
  Eigen::VectorXd out(params.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out(i * m + j) = g.d_weight(i, j);
  out.segment(n * m, n) = g.d_bias;
  for (int i = 0; i < n; ++i) out(n * m + n + i) = g.d_cov(i, i) * 2.0 * q.noise()(i, i);
  return out;
}

}  // namespace

OpenGame make_mle_game(std::vector<State> candidates, MleIntegrand integrand) {
  if (candidates.empty()) throw Error("make_mle_game: no candidates");
  const Space x = space_of(candidates.front());
  for (const auto& c : candidates)
    if (!compatible(space_of(c), x)) throw DimensionMismatch("make_mle_game: candidates live on different spaces");
  const Space unit = unit_like(x);
  auto shared = std::make_shared<const std::vector<State>>(std::move(candidates));
  const std::size_t n = shared->size();
  return OpenGame(
      "mle", unit, unit, x, x, StrategySpace::enumeration(n),
      [=](const Strategy& s) {
        return BayesLens(state_channel((*shared)[index_of_strategy(s, n)]),
                         StateDependentChannel::constant(unit, discard_channel(x)));
      },
      [=](const Strategy& s, const Context& ctx) {
        return mle_objective((*shared)[index_of_strategy(s, n)], ctx, integrand);
      });
}

OpenGame make_inference_game(const Channel& c, const BackwardFamily& back, const Divergence& d,
                             const EvalOptions& opts) {
  const Space z = domain_of(c), x = codomain_of(c);
  if (!compatible(back.input, x) || !compatible(back.output, z))
    throw DimensionMismatch("make_inference_game: backward family has the wrong shape");
  auto inst = back.instantiate;
  OpenGame game(
      "inference", z, z, x, x, back.params, [=](const Strategy& s) { return BayesLens(c, inst(s)); },
      [=](const Strategy& s, const Context& ctx) { return inference_objective(c, inst(s), d, ctx, opts); });
  if (!back.params.enumerable() && d.is_kl() && closed_form_backward(back) &&
      std::holds_alternative<GaussianChanneld>(c)) {
    const auto gc = std::get<GaussianChanneld>(c);
    const StrategySpace space = back.params;
    game.with_best_response(
        [gc, space](const Context& ctx, const Strategy&) {
          return std::vector<Strategy>{space.clamp(gaussian_backward_optimum(gc, std::get<GaussianStated>(ctx.prior)))};
        },
        true);
    game.with_gradient([gc](const Strategy& s, const Context& ctx) { return linear_gaussian_gradient(gc, s, ctx); });
  }
  if (d.is_kl() && back.name == "softmax" && std::holds_alternative<FiniteChanneld>(c)) {
    const auto fc = std::get<FiniteChanneld>(c);
    const auto nx = static_cast<Eigen::Index>(fc.codomain().size());
    const auto nz = static_cast<Eigen::Index>(fc.domain().size());
    game.with_gradient([fc, nx, nz](const Strategy& s, const Context& ctx) {
      Eigen::MatrixXd logits(nx, nz);
      for (Eigen::Index x = 0; x < nx; ++x)
        for (Eigen::Index z = 0; z < nz; ++z) logits(x, z) = s(x * nz + z);
      return inference_softmax_gradient(fc, logits, std::get<FiniteDistd>(ctx.prior),
                                        std::get<FiniteDistd>(observed_state(Channel(fc), ctx)));
    });
  }
  return game;
}

namespace {

// `vae_valued` marks objectives equal to the VAE objective, which admit the
// closed-form response and gradient below.
OpenGame joint_game(std::string name, const ChannelFamily& forward, const BackwardFamily& back,
                    std::function<double(const Channel&, const StateDependentChannel&, const Context&)> objective,
                    bool vae_valued) {
  if (!compatible(back.input, forward.codomain) || !compatible(back.output, forward.domain))
    throw DimensionMismatch(name + ": forward and backward families do not fit together");
  const int df = forward.params.dim();
  auto fwd = forward.instantiate;
  auto bwd = back.instantiate;
  StrategySpace space = StrategySpace::product(forward.params, back.params);
  OpenGame game(
      std::move(name), forward.domain, forward.domain, forward.codomain, forward.codomain, space,
      [=](const Strategy& s) {
        return BayesLens(fwd(s.head(df)), bwd(s.tail(s.size() - df)));
      },
      [=](const Strategy& s, const Context& ctx) { return objective(fwd(s.head(df)), bwd(s.tail(s.size() - df)), ctx); });
  game.with_blocks({StrategyBlock{"forward", 0, forward.params}, StrategyBlock{"backward", df, back.params}});
  if (vae_valued && !space.enumerable() && forward.params.enumerable() && forward.params.size() == 1 &&
      closed_form_backward(back)) {
    const Strategy f0 = forward.params.at(0);
    const Channel c = fwd(f0);
    if (const auto* gc = std::get_if<GaussianChanneld>(&c)) {
      const GaussianChanneld g = *gc;
      const StrategySpace bspace = back.params;
      game.with_best_response(
          [=](const Context& ctx, const Strategy&) {
            return std::vector<Strategy>{
                concat(f0, bspace.clamp(gaussian_backward_optimum(g, std::get<GaussianStated>(ctx.prior))))};
          },
          true);
      game.with_gradient([=](const Strategy& s, const Context& ctx) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(s.size());
        out.tail(s.size() - df) = linear_gaussian_gradient(g, s.tail(s.size() - df), ctx);
        return out;
      });
    }
  }
  return game;
}

}  // namespace

OpenGame make_vae_game(const ChannelFamily& forward, const BackwardFamily& back) {
  return joint_game("vae", forward, back, [](const Channel& c, const StateDependentChannel& q, const Context& ctx) {
    return vae_objective(c, q, ctx);
  }, true);
}

OpenGame make_autoencoder_game(const ChannelFamily& forward, const BackwardFamily& back, const Divergence& d,
                               AutoencoderForm form, const EvalOptions& opts) {
  const bool kl_pointwise = d.is_kl() && form == AutoencoderForm::Pointwise;
  auto game = joint_game(
      "autoencoder", forward, back,
      [=](const Channel& c, const StateDependentChannel& q, const Context& ctx) {
        return autoencoder_objective(c, q, d, ctx, form, opts);
      },
      kl_pointwise);
  if (!kl_pointwise && !game.strategies().enumerable())
    game.with_best_response([](const Context&, const Strategy&) -> std::vector<Strategy> {
      throw Error("autoencoder game: no closed-form best response for this divergence");
    }, true);
  return game;
}

OpenGame identity_game(const Space& x, const Space& a) {
  OpenGame game(
      "identity", x, a, x, a, StrategySpace::singleton(), [=](const Strategy&) { return identity_lens(x, a); },
      [](const Strategy&, const Context&) { return 0.0; });
  game.with_best_response([](const Context&, const Strategy&) { return std::vector<Strategy>{Strategy(0)}; }, true);
  game.with_blocks({});
  return game;
}

// ---------------------------------------------------------------------------
// Composition

Context seq_second_context(const OpenGame& g, const Strategy& sg, const Context& ctx) {
  return Context{pushforward(g.play(sg).forward(), ctx.prior), ctx.continuation};
}

Context seq_first_context(const OpenGame& g, const OpenGame& h, const Strategy& sg, const Strategy& sh,
                          const Context& ctx) {
  State mid = pushforward(g.play(sg).forward(), ctx.prior);
  BayesLens hl = h.play(sh);
  Channel k = compose(hl.backward(mid), compose(ctx.continuation, hl.forward()));
  return Context{ctx.prior, std::move(k)};
}

Context par_first_context(const OpenGame& g, const OpenGame& h, const Strategy& sh, const Context& ctx) {
  const std::size_t n1 = num_factors(g.x()), n2 = num_factors(h.x());
  State p1 = marginal(ctx.prior, 0, n1);
  State p2 = marginal(ctx.prior, n1, n2);
  State other = pushforward(h.play(sh).forward(), p2);
  Channel fill = tensor(identity_channel(g.y()), constant_channel(unit_like(g.y()), other));
  Channel proj = projection(codomain_of(ctx.continuation), 0, num_factors(g.b()));
  return Context{p1, compose(proj, compose(ctx.continuation, fill))};
}

Context par_second_context(const OpenGame& g, const OpenGame& h, const Strategy& sg, const Context& ctx) {
  const std::size_t n1 = num_factors(g.x()), n2 = num_factors(h.x());
  State p1 = marginal(ctx.prior, 0, n1);
  State p2 = marginal(ctx.prior, n1, n2);
  State other = pushforward(g.play(sg).forward(), p1);
  Channel fill = tensor(constant_channel(unit_like(h.y()), other), identity_channel(h.y()));
  Channel proj = projection(codomain_of(ctx.continuation), num_factors(g.b()), num_factors(h.b()));
  return Context{p2, compose(proj, compose(ctx.continuation, fill))};
}

namespace {

using ContextPair = std::function<std::pair<Context, Context>(const Strategy&, const Strategy&, const Context&)>;

OpenGame combine(std::string name, const OpenGame& g, const OpenGame& h, Space x, Space a, Space y, Space b,
                 OpenGame::Play play, ContextPair contexts) {
  const int dg = g.strategies().dim();
  auto split = [dg](const Strategy& s) { return std::make_pair(s.head(dg).eval(), s.tail(s.size() - dg).eval()); };
  OpenGame game(
      std::move(name), std::move(x), std::move(a), std::move(y), std::move(b),
      StrategySpace::product(g.strategies(), h.strategies()), std::move(play),
      [=](const Strategy& s, const Context& ctx) {
        auto [sg, sh] = split(s);
        auto [cg, ch] = contexts(sg, sh, ctx);
        return g.fitness(sg, cg) + h.fitness(sh, ch);
      });
  game.with_best_response(
      [=](const Context& ctx, const Strategy& s) {
        auto [sg, sh] = split(s);
        auto [cg, ch] = contexts(sg, sh, ctx);
        return cartesian(g.best_response(cg, sg), h.best_response(ch, sh));
      },
      false);
  game.with_equilibrium_test([=](const Strategy& s, const Context& ctx) {
    auto [sg, sh] = split(s);
    auto [cg, ch] = contexts(sg, sh, ctx);
    return g.is_equilibrium(sg, cg) && h.is_equilibrium(sh, ch);
  });
  auto blocks = g.blocks();
  for (auto& blk : shifted(h.blocks(), dg)) blocks.push_back(blk);
  game.with_blocks(std::move(blocks));
  return game;
}

}  // namespace

OpenGame compose_seq(const OpenGame& g, const OpenGame& h) {
  if (!compatible(g.y(), h.x()) || !compatible(g.b(), h.a()))
    throw DimensionMismatch("compose_seq: objects of '" + g.name() + "' and '" + h.name() + "' do not meet");
  const int dg = g.strategies().dim();
  return combine(
      g.name() + ";" + h.name(), g, h, g.x(), g.a(), h.y(), h.b(),
      [g, h, dg](const Strategy& s) {
        return compose_lens(h.play(s.tail(s.size() - dg)), g.play(s.head(dg)));
      },
      [g, h](const Strategy& sg, const Strategy& sh, const Context& ctx) {
        return std::make_pair(seq_first_context(g, h, sg, sh, ctx), seq_second_context(g, sg, ctx));
      });
}

OpenGame compose_par(const OpenGame& g, const OpenGame& h) {
  if (g.x().index() != h.x().index()) throw BackendMismatch("compose_par: mixed backends");
  const int dg = g.strategies().dim();
  return combine(
      g.name() + "|" + h.name(), g, h, tensor(g.x(), h.x()), tensor(g.a(), h.a()), tensor(g.y(), h.y()),
      tensor(g.b(), h.b()),
      [g, h, dg](const Strategy& s) { return tensor_lens(g.play(s.head(dg)), h.play(s.tail(s.size() - dg))); },
      [g, h](const Strategy& sg, const Strategy& sh, const Context& ctx) {
        return std::make_pair(par_first_context(g, h, sh, ctx), par_second_context(g, h, sg, ctx));
      });
}

// ---------------------------------------------------------------------------
// Active inference

std::vector<Strategy> blockwise_best_response(const OpenGame& game, const Context& ctx, const Strategy& s) {
  return blockwise_br([&game](const Strategy& t, const Context& c) { return game.fitness(t, c); }, game.blocks(),
                      ctx, s);
}

OpenGame make_active_inference_game(const std::vector<ActiveInferenceLevel>& levels,
                                    std::function<double(const Strategy&)> extra_cost, FactorObjective factor) {
  if (levels.empty()) throw Error("active inference game needs at least one level");
  auto factor_game = [factor](const FactorFamilies& f) {
    if (factor == FactorObjective::Vae) return make_vae_game(f.forward, f.backward);
    return make_autoencoder_game(f.forward, f.backward, Divergence::kl(), AutoencoderForm::Pointwise);
  };
  std::vector<OpenGame> per_level;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].pass_through) {
      per_level.push_back(identity_game(*levels[i].pass_through));
      continue;
    }
    OpenGame s = factor_game(levels[i].sensory);
    OpenGame a = factor_game(levels[i].action);
    OpenGame both = compose_par(s, a);
    auto blocks = both.blocks();
    const std::string tag = "level" + std::to_string(i) + ".";
    const char* names[] = {"sensory.forward", "sensory.backward", "action.forward", "action.backward"};
    for (std::size_t k = 0; k < blocks.size() && k < 4; ++k) blocks[k].name = tag + names[k];
    both.with_blocks(std::move(blocks));
    per_level.push_back(std::move(both));
  }
  OpenGame composite = per_level.back();
  for (std::size_t i = levels.size() - 1; i-- > 0;) {
    if (!compatible(composite.y(), per_level[i].x()))
      throw DimensionMismatch("active inference: level " + std::to_string(i + 1) + " does not feed level " +
                              std::to_string(i));
    composite = compose_seq(composite, per_level[i]);
  }

  auto inner = std::make_shared<const OpenGame>(composite);
  OpenGame::Fitness fitness = [inner, extra_cost](const Strategy& s, const Context& ctx) {
    double f = inner->fitness(s, ctx);
    return extra_cost ? f + extra_cost(s) : f;
  };
  OpenGame game(
      "active_inference", composite.x(), composite.a(), composite.y(), composite.b(), composite.strategies(),
      [inner](const Strategy& s) { return inner->play(s); }, fitness);
  auto blocks = composite.blocks();
  game.with_blocks(blocks);
  game.with_best_response(
      [fitness, blocks](const Context& ctx, const Strategy& s) { return blockwise_br(fitness, blocks, ctx, s); },
      false);
  game.with_equilibrium_test([fitness, blocks](const Strategy& s, const Context& ctx) {
    return blockwise_equilibrium(fitness, blocks, ctx, s);
  });
  return game;
}

}  // namespace cyber
