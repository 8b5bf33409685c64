#include "cyber/config.hpp"

#include <set>

namespace cyber {
namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where + ": missing \"" + key + "\"");
  return j.at(key);
}

void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) fail(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!keys.count(k)) fail(where + ": unknown key \"" + k + "\"");
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + ": \"" + key + "\" has the wrong type");
  }
}

double positive(const json& j, const char* key, double fallback, const std::string& where) {
  const double v = get<double>(j, key, fallback, where);
  if (!(v > 0)) fail(where + ": \"" + key + "\" must be positive");
  return v;
}

FiniteSpace finite_space(const json& j, const std::string& where) {
  const Space s = space_from_json(j);
  if (const auto* f = std::get_if<FiniteSpace>(&s)) return *f;
  fail(where + ": expected a finite space");
}

Divergence divergence_from(const json& j, const std::string& where) {
  const auto name = get<std::string>(j, "divergence", "kl", where);
  if (name == "kl") return Divergence::kl();
  if (name == "zero") return Divergence::zero();
  fail(where + ": divergence must be \"kl\" or \"zero\"");
}

FactorFamilies factor_from(const json& j, const std::string& where) {
  allow_keys(j, {"forward", "backward"}, where);
  ChannelFamily f = family_from_json(need(j, "forward", where));
  BackwardFamily b = backward_from_json(need(j, "backward", where), f.domain);
  return {std::move(f), std::move(b)};
}

Context context_from(const json& j, const OpenGame& game) {
  const std::string where = "context";
  allow_keys(j, {"prior", "continuation"}, where);
  State prior = j.contains("prior") ? state_from_json(j.at("prior")) : State(FiniteDistd());
  Channel k = identity_channel(game.y());
  if (j.contains("continuation") && !(j.at("continuation").is_string() && j.at("continuation") == "identity"))
    k = channel_from_json(j.at("continuation"));
  if (!compatible(space_of(prior), game.x()))
    fail("context: prior lives on " + describe(space_of(prior)) + ", the game expects " + describe(game.x()));
  if (!compatible(domain_of(k), game.y()) || !compatible(codomain_of(k), game.b()))
    fail("context: continuation must map " + describe(game.y()) + " to " + describe(game.b()));
  return Context{std::move(prior), std::move(k)};
}

OpenGame build_game(const json& j, const std::string& kind, const EvalOptions& eval) {
  static const std::set<std::string> common{"game", "backend", "context", "seed", "eta", "grad", "h",
                                            "line_search", "max_steps", "eps_fix", "window", "diverge_at",
                                            "tol", "theta0", "samples"};
  auto keys = [&](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    allow_keys(j, extra, kind);
  };
  if (kind == "mle") {
    keys({"candidates", "integrand"});
    const auto& cands = need(j, "candidates", kind);
    if (!cands.is_array() || cands.empty()) fail("mle: candidates must be a non-empty array");
    std::vector<State> states;
    for (const auto& c : cands) states.push_back(state_from_json(c));
    const auto integrand = get<std::string>(j, "integrand", "mass", kind);
    if (integrand != "mass" && integrand != "log") fail("mle: integrand must be \"mass\" or \"log\"");
    return make_mle_game(std::move(states), integrand == "mass" ? MleIntegrand::Mass : MleIntegrand::Log);
  }
  if (kind == "inference") {
    keys({"channel", "backward", "divergence"});
    const Channel c = channel_from_json(need(j, "channel", kind));
    const auto back = backward_from_json(need(j, "backward", kind), domain_of(c), &c);
    return make_inference_game(c, back, divergence_from(j, kind), eval);
  }
  if (kind == "vae" || kind == "autoencoder") {
    keys({"forward", "backward", "divergence", "form"});
    const auto f = family_from_json(need(j, "forward", kind));
    const auto b = backward_from_json(need(j, "backward", kind), f.domain);
    if (kind == "vae") {
      if (j.contains("divergence") || j.contains("form")) fail("vae: divergence and form apply to autoencoders");
      return make_vae_game(f, b);
    }
    const auto form = get<std::string>(j, "form", "pointwise", kind);
    if (form != "pointwise" && form != "aggregate") fail("autoencoder: form must be \"pointwise\" or \"aggregate\"");
    return make_autoencoder_game(f, b, divergence_from(j, kind),
                                 form == "pointwise" ? AutoencoderForm::Pointwise : AutoencoderForm::Aggregate, eval);
  }
  if (kind == "active_inference") {
    keys({"levels", "factor"});
    const auto& lv = need(j, "levels", kind);
    if (!lv.is_array() || lv.empty()) fail("active_inference: levels must be a non-empty array");
    std::vector<ActiveInferenceLevel> levels;
    for (const auto& l : lv) {
      if (l.is_object() && l.contains("identity")) {
        allow_keys(l, {"identity"}, "level");
        levels.push_back(ActiveInferenceLevel::identity(space_from_json(l.at("identity"))));
        continue;
      }
      allow_keys(l, {"sensory", "action"}, "level");
      ActiveInferenceLevel level;
      level.sensory = factor_from(need(l, "sensory", "level"), "sensory");
      level.action = factor_from(need(l, "action", "level"), "action");
      levels.push_back(std::move(level));
    }
    const auto factor = get<std::string>(j, "factor", "vae", kind);
    if (factor != "vae" && factor != "autoencoder") fail("active_inference: factor must be \"vae\" or \"autoencoder\"");
    return make_active_inference_game(levels, {},
                                      factor == "vae" ? FactorObjective::Vae : FactorObjective::Autoencoder);
  }
  fail("unknown game \"" + kind + "\"");
}

}  // namespace

Space space_from_json(const json& j) {
  if (j.is_array()) return FiniteSpace::of(j.get<std::vector<std::string>>());
  if (!j.is_object()) fail("space: expected an array of labels or an object");
  if (j.contains("size")) return FiniteSpace::range(j.at("size").get<std::size_t>());
  if (j.contains("factors")) return FiniteSpace::from_factors(j.at("factors").get<std::vector<std::vector<std::string>>>());
  if (j.contains("dim")) {
    const int d = j.at("dim").get<int>();
    if (d < 0) fail("space: dim must be non-negative");
    return EuclideanSpace(d);
  }
  fail("space: expected \"size\", \"factors\" or \"dim\"");
}

ChannelFamily family_from_json(const json& j) {
  const std::string name = get<std::string>(j, "family", "", "family");
  const std::string where = "family " + name;
  if (name == "singleton") {
    allow_keys(j, {"family", "channel"}, where);
    return singleton_family(channel_from_json(need(j, "channel", where)));
  }
  if (name == "list") {
    allow_keys(j, {"family", "channels"}, where);
    const auto& cs = need(j, "channels", where);
    if (!cs.is_array() || cs.empty()) fail(where + ": channels must be a non-empty array");
    std::vector<Channel> channels;
    for (const auto& c : cs) channels.push_back(channel_from_json(c));
    return listed_family(std::move(channels));
  }
  if (name == "grid" || name == "deterministic" || name == "softmax") {
    allow_keys(j, {"family", "domain", "codomain", "step", "bound"}, where);
    const auto dom = finite_space(need(j, "domain", where), where);
    const auto cod = finite_space(need(j, "codomain", where), where);
    if (name == "grid") {
      need(j, "step", where);
      return stochastic_grid_family(dom, cod, positive(j, "step", 1.0, where));
    }
    if (name == "deterministic") return deterministic_family(dom, cod);
    return softmax_family(dom, cod, positive(j, "bound", 30.0, where));
  }
  if (name == "linear_gaussian") {
    allow_keys(j, {"family", "in_dim", "out_dim", "lo", "hi"}, where);
    const int in = get<int>(j, "in_dim", -1, where);
    const int out = get<int>(j, "out_dim", -1, where);
    if (in < 0 || out < 1) fail(where + ": need in_dim >= 0 and out_dim >= 1");
    const double lo = get<double>(j, "lo", -50.0, where);
    const double hi = get<double>(j, "hi", 50.0, where);
    if (!(lo < hi)) fail(where + ": lo must be below hi");
    return linear_gaussian_family(in, out, lo, hi);
  }
  fail("unknown family \"" + name + "\"");
}

BackwardFamily backward_from_json(const json& j, const Space& base, const Channel* forward) {
  if (j.is_object() && j.value("family", std::string()) == "exact") {
    allow_keys(j, {"family"}, "family exact");
    if (forward == nullptr) fail("family exact: only inference games have a fixed channel to invert");
    return exact_backward(*forward);
  }
  return constant_backward(family_from_json(j), base);
}

GameSetup game_from_json(const json& j, std::uint64_t seed) {
  try {
    if (!j.is_object()) fail("config must be a JSON object");
    const auto kind = get<std::string>(j, "game", "", "config");
    if (kind.empty()) fail("config: missing \"game\"");
    const auto backend = get<std::string>(j, "backend", "", "config");
    if (!backend.empty() && backend != "finite" && backend != "gaussian")
      fail("config: backend must be \"finite\" or \"gaussian\"");
    EvalOptions eval;
    eval.seed = seed;
    eval.samples = get<std::size_t>(j, "samples", eval.samples, "config");
    OpenGame game = build_game(j, kind, eval);
    Context ctx = context_from(j.contains("context") ? j.at("context") : json::object(), game);
    if (!backend.empty() && (backend == "finite") != is_finite(ctx.prior) &&
        !std::holds_alternative<FiniteSpace>(game.x()))
      fail("config: backend \"" + backend + "\" disagrees with the context");
    if (!backend.empty() && (backend == "finite") != std::holds_alternative<FiniteSpace>(game.y()))
      fail("config: backend \"" + backend + "\" disagrees with the game's spaces");
    return GameSetup{std::move(game), std::move(ctx), seed};
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RealiseSetup realise_from_json(const json& j, std::uint64_t seed) {
  RealiseSetup r{game_from_json(j, seed), {}, {}, {}, 1e-3};
  const std::string where = "realise";
  const auto& space = r.game.game.strategies();
  if (space.kind() != StrategyKind::Box)
    fail("realise: gradient dynamics need a continuous strategy space; this game's is enumerated");
  try {
    r.dynamics.eta = positive(j, "eta", r.dynamics.eta, where);
    r.dynamics.h = positive(j, "h", r.dynamics.h, where);
    const auto grad = get<std::string>(j, "grad", "analytic", where);
    if (grad != "analytic" && grad != "fd") fail("realise: grad must be \"analytic\" or \"fd\"");
    r.dynamics.mode = grad == "analytic" ? GradientMode::Analytic : GradientMode::FiniteDifference;
    if (r.dynamics.mode == GradientMode::Analytic && !r.game.game.has_gradient())
      fail("realise: this game has no analytic gradient; use \"grad\": \"fd\"");
    r.dynamics.line_search = get<bool>(j, "line_search", false, where);
    r.realise.max_steps = get<std::size_t>(j, "max_steps", r.realise.max_steps, where);
    if (r.realise.max_steps == 0) fail("realise: max_steps must be positive");
    r.realise.eps_fix = positive(j, "eps_fix", r.realise.eps_fix, where);
    r.realise.window = get<std::size_t>(j, "window", r.realise.window, where);
    if (r.realise.window == 0) fail("realise: window must be positive");
    r.realise.diverge_at = positive(j, "diverge_at", r.realise.diverge_at, where);
    r.tol = positive(j, "tol", r.tol, where);
    if (j.contains("theta0")) {
      r.theta0 = vector_from_json(j.at("theta0"));
      if (r.theta0.size() != space.dim())
        fail("realise: theta0 has " + std::to_string(r.theta0.size()) + " entries, the game has " +
             std::to_string(space.dim()) + " parameters");
    } else {
      r.theta0 = space.clamp(Strategy::Zero(space.dim()));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("realise: ") + e.what());
  }
  return r;
}

}  // namespace cyber
