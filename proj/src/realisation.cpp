#include "cyber/realisation.hpp"

#include <cmath>

namespace cyber {

namespace {

Vec concat(std::initializer_list<Vec> parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vec out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

json strategy_json(const Strategy& s) { return cyber::to_json(Eigen::VectorXd(s)); }

}  // namespace

// ---------------------------------------------------------------------------

int encoded_dim(const Space& s) {
  if (const auto* f = std::get_if<FiniteSpace>(&s)) return static_cast<int>(f->size());
  const int d = std::get<EuclideanSpace>(s).dim();
  return d + d * d;
}

Vec encode_state(const State& s) {
  if (const auto* f = std::get_if<FiniteDistd>(&s)) return f->probs();
  const auto& g = std::get<GaussianStated>(s);
  const Eigen::Index d = g.dim();
  Vec out(d + d * d);
  out.head(d) = g.mean();
  out.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(g.cov().data(), d * d);
  return out;
}

State decode_state(const Vec& v, const Space& s) {
  if (v.size() != encoded_dim(s)) throw DimensionMismatch("decode_state: encoding has the wrong length");
  if (const auto* f = std::get_if<FiniteSpace>(&s)) return FiniteDistd(*f, v);
  const auto& e = std::get<EuclideanSpace>(s);
  const Eigen::Index d = e.dim();
  Eigen::MatrixXd cov = Eigen::Map<const Eigen::MatrixXd>(v.data() + d, d, d);
  return GaussianStated(e, v.head(d), cov);
}

DynContext lift_context(const Context& ctx, LiftMode mode) {
  const Space x = space_of(ctx.prior);
  const Space y = domain_of(ctx.continuation);
  const Space b = codomain_of(ctx.continuation);
  const Channel k = ctx.continuation;
  if (mode == LiftMode::Distribution) {
    auto emitter = constant_system(EuclideanSpace(encoded_dim(x)), encode_state(ctx.prior));
    auto responder = memoryless_system("respond", EuclideanSpace(encoded_dim(y)), EuclideanSpace(encoded_dim(b)),
                                       [k, y](const Vec& in) { return encode_state(pushforward(k, decode_state(in, y))); });
    return DynContext(emitter, responder, EuclideanSpace::unit());
  }
  const auto* fk = std::get_if<FiniteChanneld>(&k);
  if (!fk) throw BackendMismatch("lift_context: sample mode needs a finite context");
  const auto& pi = std::get<FiniteDistd>(ctx.prior);
  const FiniteSpace fx = pi.space(), fb = fk->codomain();
  auto emitter = DynSystem::from_channel("emit", Channel(FiniteChanneld::constant(fx, pi)), fx,
                                         [](const Vec& s) { return s; });
  // Row (b, y) of the responder's update is k(y): the stored outcome is
  // overwritten every step.
  const FiniteSpace by = fb * fk->domain();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(by.size()), static_cast<Eigen::Index>(fb.size()));
  for (std::size_t i = 0; i < by.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) = fk->rows().row(static_cast<Eigen::Index>(i % fk->domain().size()));
  auto responder = DynSystem::from_channel("respond", Channel(FiniteChanneld(by, fb, rows)), fb,
                                           [](const Vec& s) { return s; });
  return DynContext(emitter, responder, FiniteSpace::unit());
}

// ---------------------------------------------------------------------------

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Strategy&)>& f, const Strategy& theta,
                                           double h) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Strategy up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    g(i) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd GradientDynamics::gradient_at(const Strategy& theta) const {
  if (options.mode == GradientMode::Analytic) {
    if (!gradient) throw Error("gradient dynamics: no analytic gradient; use finite differences");
    return gradient(theta);
  }
  return finite_difference_gradient(objective, theta, options.h);
}

Strategy GradientDynamics::project(const Strategy& theta) const {
  if (lower.size() == 0) return theta;
  return theta.cwiseMax(lower).cwiseMin(upper);
}

Strategy GradientDynamics::step(const Strategy& theta) const {
  const Eigen::VectorXd g = gradient_at(theta);
  if (!options.line_search) return project(theta - options.eta * g);
  const double f0 = objective(theta);
  double t = options.eta;
  for (int i = 0; i <= options.max_halvings; ++i, t *= 0.5) {
    Strategy next = project(theta - t * g);
    const double f1 = objective(next);
    if (std::isfinite(f1) && f1 <= f0 - options.armijo * g.dot(theta - next)) return next;
  }
  return theta;
}

GradientDynamics gradient_dynamics(const OpenGame& game, const Context& ctx, const GradientOptions& options) {
  GradientDynamics d;
  d.objective = [game, ctx](const Strategy& s) { return game.fitness(s, ctx); };
  if (game.has_gradient()) d.gradient = [game, ctx](const Strategy& s) { return game.gradient(s, ctx); };
  d.options = options;
  if (game.strategies().kind() == StrategyKind::Box) {
    d.lower = game.strategies().lower();
    d.upper = game.strategies().upper();
  }
  return d;
}

// ---------------------------------------------------------------------------

DynLens Realisation::dyn_lens(const Context& ctx) const {
  const Space xs = space_of(ctx.prior), ys = game.y(), as = game.a(), bs = game.b();
  const int dt = game.strategies().dim(), xe = encoded_dim(xs), ye = encoded_dim(ys), ae = encoded_dim(as),
            be = encoded_dim(bs);
  const OpenGame g = game;
  const GradientOptions opts = options;
  const Channel k = ctx.continuation;

  auto forward = DynSystem::from_map(
      "learn", EuclideanSpace(dt + xe), EuclideanSpace(xe), EuclideanSpace(dt + xe + ye),
      [g, dt, xs](const Vec& s) {
        const Vec theta = s.head(dt);
        const State pi = decode_state(s.tail(s.size() - dt), xs);
        return concat({s, encode_state(pushforward(g.play(theta).forward(), pi))});
      },
      [g, dt, xs, k, opts](const Vec& s, const Vec& x) {
        const Context local{decode_state(x, xs), k};
        return concat({Vec(gradient_dynamics(g, local, opts).step(s.head(dt))), x});
      });
  auto backward = memoryless_system(
      "infer", EuclideanSpace(dt + xe + be), EuclideanSpace(ae), [g, dt, xe, xs, bs](const Vec& in) {
        const Vec theta = in.head(dt);
        const State pi = decode_state(in.segment(dt, xe), xs);
        const State b = decode_state(in.tail(in.size() - dt - xe), bs);
        return encode_state(pushforward(g.play(theta).backward(pi), b));
      });
  return DynLens(forward, backward, EuclideanSpace(dt + xe));
}

ClosedSystem Realisation::closed(const Context& ctx) const {
  ClosedSystem sys = close(dyn_lens(ctx), lift(ctx));
  for (int i = 0; i < game.strategies().dim(); ++i) sys.state_labels[static_cast<std::size_t>(i)] = "theta" + std::to_string(i);
  return sys;
}

Vec Realisation::initial_state(const Context& ctx, const Strategy& theta0) const {
  if (theta0.size() != game.strategies().dim()) throw DimensionMismatch("initial_state: theta0 has the wrong length");
  const BayesLens lens = game.play(theta0);
  const State y = pushforward(lens.forward(), ctx.prior);
  const State b = pushforward(ctx.continuation, y);
  const State a = pushforward(lens.backward(ctx.prior), b);
  return concat({Vec(theta0), encode_state(ctx.prior), encode_state(b), encode_state(a)});
}

Strategy Realisation::strategy_of(const Vec& z) const { return z.head(game.strategies().dim()); }

std::string to_string(RealiseStatus s) {
  switch (s) {
    case RealiseStatus::Converged: return "converged";
    case RealiseStatus::NoFixedPoint: return "no_fixed_point";
    case RealiseStatus::Diverged: return "diverged";
  }
  return "?";
}

RealisationResult realise_gradient(const Realisation& r, const Context& ctx, const Strategy& theta0,
                                   const RealiseOptions& o) {
  if (o.window == 0) throw Error("realise_gradient: window must be positive");
  const ClosedSystem sys = r.closed(ctx);
  RealisationResult out;
  out.trajectory.state_labels = sys.state_labels;
  out.trajectory.observable_labels = sys.observable_labels;
  out.trajectory.extra_labels = {"objective"};

  Rng rng(0);  // the distribution-mode system never draws
  Vec z = r.initial_state(ctx, theta0);
  std::size_t calm = 0;
  double prev_move = 0.0;
  for (;;) {
    const Strategy theta = r.strategy_of(z);
    double f;
    Vec obs;
    try {
      f = r.fitness(theta, ctx);
      obs = sys.observe(z);
    } catch (const Error&) {
      out.status = RealiseStatus::Diverged;
      break;
    }
    out.trajectory.states.push_back(z);
    out.trajectory.observables.push_back(obs);
    out.trajectory.extras.push_back(Vec::Constant(1, f));
    out.strategies.push_back(theta);
    out.objectives.push_back(f);
    if (!std::isfinite(f) || f > o.diverge_at) {
      out.status = RealiseStatus::Diverged;
      break;
    }
    if (calm >= o.window) {
      out.status = RealiseStatus::Converged;
      out.fixed_point = theta;
      break;
    }
    if (out.steps >= o.max_steps) {
      out.status = RealiseStatus::NoFixedPoint;
      break;
    }
    Vec next;
    try {
      next = step(sys, z, rng).next;
    } catch (const Error&) {
      out.status = RealiseStatus::Diverged;
      break;
    }
    if (!next.allFinite()) {
      out.status = RealiseStatus::Diverged;
      break;
    }
    // A step counts as settled when it is short and, judging by the ratio of
    // successive steps, the remaining distance to the limit is short too.
    const double move = next.size() ? (next - z).cwiseAbs().maxCoeff() : 0.0;
    const double ratio = prev_move > 0.0 ? move / prev_move : 1.0;
    const double remaining = move == 0.0 ? 0.0 : ratio < 1.0 ? move * ratio / (1.0 - ratio) : move;
    calm = move < o.eps_fix && remaining < o.eps_fix ? calm + 1 : 0;
    prev_move = move;
    z = std::move(next);
    ++out.steps;
  }
  for (std::size_t t = 1; t < out.objectives.size(); ++t)
    if (!(out.objectives[t] <= out.objectives[t - 1] + o.eps_mono)) out.monotone = false;
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

json CyberneticReport::to_json() const {
  json j;
  j["status"] = to_string(status);
  j["phi_dynamic"] = phi_dynamic;
  j["phi_static"] = phi_static;
  j["steps_to_fix"] = steps_to_fix ? json(*steps_to_fix) : json(nullptr);
  j["trajectory_csv"] = trajectory_csv;
  j["run_status"] = to_string(run.status);
  j["steps"] = run.steps;
  j["monotone"] = run.monotone;
  j["sigma_star"] = strategy_json(sigma_star);
  j["theta_star"] = theta_star ? strategy_json(*theta_star) : json(nullptr);
  j["theta_final"] = run.strategies.empty() ? json(nullptr) : strategy_json(run.strategies.back());
  return j;
}

CyberneticReport cybernetic_check(const Realisation& r, const Context& ctx, const Strategy& theta0, double tol,
                                  const RealiseOptions& o) {
  CyberneticReport rep;
  const auto eq = r.game.equilibria(ctx);
  if (eq.empty()) throw Error("cybernetic_check: the game has no static equilibrium in this context");
  rep.phi_static = std::numeric_limits<double>::infinity();
  for (const auto& s : eq) {
    const double f = r.fitness(s, ctx);
    if (f < rep.phi_static) {
      rep.phi_static = f;
      rep.sigma_star = s;
    }
  }
  rep.run = realise_gradient(r, ctx, theta0, o);
  rep.phi_dynamic = rep.run.objectives.empty() ? std::numeric_limits<double>::quiet_NaN() : rep.run.objectives.back();
  switch (rep.run.status) {
    case RealiseStatus::Diverged:
      rep.status = CheckStatus::Fail;
      break;
    case RealiseStatus::NoFixedPoint:
      rep.status = CheckStatus::Inconclusive;
      break;
    case RealiseStatus::Converged:
      rep.theta_star = rep.run.fixed_point;
      rep.steps_to_fix = rep.run.steps;
      rep.status = rep.phi_dynamic <= rep.phi_static + tol ? CheckStatus::Pass : CheckStatus::Fail;
      break;
  }
  return rep;
}

// ---------------------------------------------------------------------------

OpenGame active_inference_game(const ActiveInferenceSetup& setup, FactorObjective factor) {
  OpenGame g = make_active_inference_game(setup.levels, setup.extra_cost, factor);
  if (setup.gradient) g.with_gradient(setup.gradient);
  if (setup.equilibria) g.with_equilibria(setup.equilibria);
  return g;
}

CyberneticReport realise_fep(const ActiveInferenceSetup& setup, const Context& ctx, const GradientOptions& dyn,
                             const Strategy& theta0, double tol, const RealiseOptions& o) {
  return cybernetic_check(Realisation{active_inference_game(setup, FactorObjective::Autoencoder), dyn}, ctx, theta0,
                          tol, o);
}

CyberneticReport realise_deep_ai(const ActiveInferenceSetup& setup, const Context& ctx, const GradientOptions& dyn,
                                 const Strategy& theta0, double tol, const RealiseOptions& o) {
  return cybernetic_check(Realisation{active_inference_game(setup, FactorObjective::Vae), dyn}, ctx, theta0, tol, o);
}

// ---------------------------------------------------------------------------
// Thermostat

namespace {

GaussianChanneld sensing_channel(const ThermostatConfig& cfg) {
  return GaussianChanneld(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1),
                          Eigen::MatrixXd::Constant(1, 1, cfg.sense_var));
}

GaussianChanneld belief_channel(const Strategy& p) {
  return GaussianChanneld(Eigen::MatrixXd::Zero(1, 1), p.head(1), Eigen::MatrixXd::Constant(1, 1, std::exp(2.0 * p(1))));
}

GaussianChanneld action_channel(double a, double var) {
  return GaussianChanneld(EuclideanSpace::unit(), EuclideanSpace(1), Eigen::MatrixXd(1, 0),
                          Eigen::VectorXd::Constant(1, a), Eigen::MatrixXd::Constant(1, 1, var));
}

double positive(const json& j, const char* key, double fallback) {
  double v = j.value(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("thermostat: '") + key + "' must be positive");
  return v;
}

}  // namespace

ActiveInferenceSetup thermostat_setup(const ThermostatConfig& cfg) {
  const Space s1 = EuclideanSpace(1), a1 = EuclideanSpace::unit(), s0 = EuclideanSpace(1), a0 = EuclideanSpace(1);
  const double bound = cfg.bound;
  auto box = [bound](int n) {
    return StrategySpace::box(Eigen::VectorXd::Constant(n, -bound), Eigen::VectorXd::Constant(n, bound));
  };

  ChannelFamily belief{"gaussian_constant", s0, s1, box(2),
                       [](const Strategy& p) -> Channel { return belief_channel(p); }};
  const double tau2 = cfg.action_var;
  ChannelFamily act{"action", a1, a0, box(1),
                    [tau2](const Strategy& p) -> Channel { return action_channel(p(0), tau2); }};

  ActiveInferenceLevel bottom;
  bottom.sensory = FactorFamilies{singleton_family(sensing_channel(cfg)), constant_backward(belief, s1)};
  bottom.action = FactorFamilies{act, constant_backward(singleton_family(discard_channel(a0)), a1)};

  ActiveInferenceSetup setup;
  setup.levels.push_back(bottom);
  for (int i = 1; i < cfg.levels; ++i) setup.levels.push_back(ActiveInferenceLevel::identity(tensor(s1, a1)));

  const double lambda = cfg.action_cost;
  setup.extra_cost = [lambda](const Strategy& s) { return 0.5 * lambda * s(2) * s(2); };

  // Only the sensory factor depends on the parameters: its belief through
  // (mu, log t), and its data mean through the action.
  const GaussianChanneld sense = sensing_channel(cfg);
  setup.gradient = [sense, lambda, tau2](const Strategy& s, const Context& ctx) {
    const State p1 = marginal(ctx.prior, 0, 1);
    const auto& k = std::get<GaussianChanneld>(ctx.continuation);
    const State joint = tensor(pushforward(Channel(sense), p1), State(action_channel(s(2), tau2).at(Eigen::VectorXd(0))));
    const auto data = std::get<GaussianStated>(marginal(pushforward(ctx.continuation, joint), 0, 1));
    const GaussianChanneld q = belief_channel(s.segment(0, 2));
    const auto g = vae_gradient(sense, q, std::get<GaussianStated>(p1), data);
    Eigen::VectorXd out(3);
    out(0) = g.d_bias(0);
    out(1) = g.d_cov(0, 0) * 2.0 * q.noise()(0, 0);
    out(2) = g.d_data_mean(0) * k.weight()(0, 1) + lambda * s(2);
    return out;
  };
  const Strategy opt = thermostat_optimum(cfg);
  setup.equilibria = [opt](const Context&) { return std::vector<Strategy>{opt}; };
  return setup;
}

Context thermostat_context(const ThermostatConfig& cfg) {
  State prior = GaussianStated(Eigen::VectorXd::Constant(1, cfg.goal), Eigen::MatrixXd::Constant(1, 1, cfg.goal_var));
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 0, 1;
  Eigen::VectorXd b(2);
  b << cfg.x0, 0;
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(2, 2);
  noise(0, 0) = cfg.env_noise_var;
  const auto blocks = EuclideanSpace::from_blocks({1, 1});
  return Context{prior, GaussianChanneld(blocks, blocks, w, b, noise)};
}

Strategy thermostat_optimum(const ThermostatConfig& cfg) {
  const double precision = 1.0 / cfg.sense_var + 1.0 / cfg.goal_var;
  const double a = (cfg.goal - cfg.x0) / (1.0 + cfg.action_cost * (cfg.sense_var + cfg.goal_var));
  const double m = cfg.x0 + a;
  Strategy s(3);
  s << (m / cfg.sense_var + cfg.goal / cfg.goal_var) / precision, -0.5 * std::log(precision), a;
  return s;
}

json ThermostatConfig::to_json() const {
  return json{{"goal", goal},
              {"goal_var", goal_var},
              {"sense_var", sense_var},
              {"x0", x0},
              {"env_noise_var", env_noise_var},
              {"action_cost", action_cost},
              {"action_var", action_var},
              {"bound", bound},
              {"levels", levels},
              {"theta0", strategy_json(theta0)},
              {"eta", dynamics.eta},
              {"grad", dynamics.mode == GradientMode::Analytic ? "analytic" : "fd"},
              {"h", dynamics.h},
              {"line_search", dynamics.line_search},
              {"max_steps", realise.max_steps},
              {"eps_fix", realise.eps_fix},
              {"window", realise.window},
              {"tol", tol}};
}

ThermostatConfig ThermostatConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error("thermostat config must be a JSON object");
  ThermostatConfig c;
  c.goal = j.value("goal", c.goal);
  c.x0 = j.value("x0", c.x0);
  c.goal_var = positive(j, "goal_var", c.goal_var);
  c.sense_var = positive(j, "sense_var", c.sense_var);
  c.action_var = positive(j, "action_var", c.action_var);
  c.bound = positive(j, "bound", c.bound);
  c.env_noise_var = j.value("env_noise_var", c.env_noise_var);
  c.action_cost = j.value("action_cost", c.action_cost);
  if (c.env_noise_var < 0 || c.action_cost < 0) throw Error("thermostat: noise and action cost must be non-negative");
  c.levels = j.value("levels", c.levels);
  if (c.levels < 1) throw Error("thermostat: levels must be at least 1");
  if (j.contains("theta0")) c.theta0 = vector_from_json(j.at("theta0"));
  if (c.theta0.size() != 3) throw Error("thermostat: theta0 must have three entries (mu, log t, a)");
  c.dynamics.eta = positive(j, "eta", c.dynamics.eta);
  c.dynamics.h = positive(j, "h", c.dynamics.h);
  const std::string grad = j.value("grad", std::string("analytic"));
  if (grad != "analytic" && grad != "fd") throw Error("thermostat: grad must be \"analytic\" or \"fd\"");
  c.dynamics.mode = grad == "analytic" ? GradientMode::Analytic : GradientMode::FiniteDifference;
  c.dynamics.line_search = j.value("line_search", c.dynamics.line_search);
  c.realise.max_steps = j.value("max_steps", c.realise.max_steps);
  c.realise.eps_fix = positive(j, "eps_fix", c.realise.eps_fix);
  c.realise.window = j.value("window", c.realise.window);
  c.tol = positive(j, "tol", c.tol);
  return c;
}

json ThermostatReport::to_json() const {
  json j = check.to_json();
  j["sensed_mean"] = sensed_mean;
  j["goal_gap"] = goal_gap;
  return j;
}

ThermostatReport run_thermostat(const ThermostatConfig& cfg, Framework framework) {
  const auto setup = thermostat_setup(cfg);
  const auto ctx = thermostat_context(cfg);
  ThermostatReport rep;
  rep.check = framework == Framework::FreeEnergy
                  ? realise_fep(setup, ctx, cfg.dynamics, cfg.theta0, cfg.tol, cfg.realise)
                  : realise_deep_ai(setup, ctx, cfg.dynamics, cfg.theta0, cfg.tol, cfg.realise);
  const auto& strategies = rep.check.run.strategies;
  const double a = strategies.empty() ? cfg.theta0(2) : strategies.back()(2);
  rep.sensed_mean = cfg.x0 + a;
  rep.goal_gap = std::abs(rep.sensed_mean - cfg.goal);
  return rep;
}

}  // namespace cyber
