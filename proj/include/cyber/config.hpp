#pragma once

// JSON descriptions of games, contexts and realisation runs.
//
//   space      ["a", "b"] | {"size": n} | {"factors": [[...], ...]} | {"dim": n}
//   family     {"family": "singleton", "channel": <channel>}
//              {"family": "list", "channels": [<channel>, ...]}
//              {"family": "grid", "domain": <space>, "codomain": <space>, "step": s}
//              {"family": "deterministic" | "softmax", "domain": ..., "codomain": ...}
//              {"family": "linear_gaussian", "in_dim": n, "out_dim": m, "lo": l, "hi": h}
//   backward   a family, or {"family": "exact"} (inference games only)
//   context    {"prior": <state>, "continuation": <channel> | "identity"}
//
// A game config is {"game": kind, "backend": "finite" | "gaussian", ...,
// "context": {...}, "seed": n} with kind one of mle, inference, vae,
// autoencoder, active_inference.

#include <cstdint>

#include "cyber/realisation.hpp"

namespace cyber {

/// Schema violations. The CLI maps these to its usage/config exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

Space space_from_json(const json& j);
ChannelFamily family_from_json(const json& j);
/// `forward` is the channel to invert for {"family": "exact"}.
BackwardFamily backward_from_json(const json& j, const Space& base, const Channel* forward = nullptr);

struct GameSetup {
  OpenGame game;
  Context context;
  std::uint64_t seed = 0;
};

/// Parses a game config. Every malformed or inconsistent input is reported
/// as ConfigError.
GameSetup game_from_json(const json& j, std::uint64_t seed);

struct RealiseSetup {
  GameSetup game;
  GradientOptions dynamics;
  RealiseOptions realise;
  Strategy theta0;
  double tol = 1e-3;
};

/// A game config plus eta, grad ("analytic" | "fd"), h, line_search,
/// max_steps, eps_fix, window, diverge_at, tol and theta0 (default: the
/// origin clamped into the strategy box).
RealiseSetup realise_from_json(const json& j, std::uint64_t seed);

}  // namespace cyber
