#pragma once

// Gradient-descent realisations of optimization games.
//
// The parameter vector of a game becomes the state of a forward system; the
// static context is lifted to a constant emitter and a memoryless responder;
// closing the two gives an autonomous system whose fixed points are compared
// with the static equilibria.

#include <optional>
#include <string>
#include <vector>

#include "cyber/dynamics.hpp"
#include "cyber/games.hpp"
#include "cyber/serialize.hpp"

namespace cyber {

// ---------------------------------------------------------------------------
// Encoded states on wires

/// Finite states are their probability vectors; Gaussian states are the mean
/// followed by the covariance, column major.
int encoded_dim(const Space& s);
Vec encode_state(const State& s);
State decode_state(const Vec& v, const Space& s);

enum class LiftMode {
  Distribution,  // wires carry encoded states
  Sample         // wires carry outcomes (finite contexts only)
};

/// Constant emitter of the prior and a responder applying the continuation.
/// In distribution mode the responder stores encode(k o decode(y)); in
/// sample mode it stores a draw from k(y).
DynContext lift_context(const Context& ctx, LiftMode mode = LiftMode::Distribution);

// ---------------------------------------------------------------------------
// Gradient dynamics

enum class GradientMode { Analytic, FiniteDifference };

struct GradientOptions {
  double eta = 0.05;
  GradientMode mode = GradientMode::Analytic;
  double h = 1e-5;
  /// Armijo backtracking from eta, halving up to max_halvings times.
  bool line_search = false;
  int max_halvings = 40;
  double armijo = 1e-4;
};

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Strategy&)>& f, const Strategy& theta,
                                           double h);

/// theta' = clamp(theta - eta * grad(theta)).
struct GradientDynamics {
  std::function<double(const Strategy&)> objective;
  std::function<Eigen::VectorXd(const Strategy&)> gradient;  // analytic; may be empty
  GradientOptions options;
  Eigen::VectorXd lower, upper;  // empty means unbounded

  Eigen::VectorXd gradient_at(const Strategy& theta) const;
  Strategy project(const Strategy& theta) const;
  Strategy step(const Strategy& theta) const;
};

/// Objective = game fitness in ctx; bounds from a box strategy space.
GradientDynamics gradient_dynamics(const OpenGame& game, const Context& ctx, const GradientOptions& options);

// ---------------------------------------------------------------------------
// Realisations

/// A game together with its gradient dynamics. The forward system keeps
/// (theta, x) and emits (theta, x) as residual and the encoded forward state
/// as output; the backward system stores the encoded state of A.
struct Realisation {
  OpenGame game;
  GradientOptions options;

  DynLens dyn_lens(const Context& ctx) const;
  DynContext lift(const Context& ctx) const { return lift_context(ctx); }
  ClosedSystem closed(const Context& ctx) const;
  /// Joint state with every wire consistent with theta0.
  Vec initial_state(const Context& ctx, const Strategy& theta0) const;
  /// The projection to strategies: the parameter block of the forward state.
  Strategy strategy_of(const Vec& z) const;
  double fitness(const Strategy& theta, const Context& ctx) const { return game.fitness(theta, ctx); }
};

/// A run is at a fixed point once `window` consecutive steps each move less
/// than eps_fix in sup-norm and the geometric estimate of the distance still
/// to go, move * r / (1 - r) with r the ratio of successive moves, is below
/// eps_fix as well.
struct RealiseOptions {
  std::size_t max_steps = 5000;
  double eps_fix = 1e-9;
  std::size_t window = 5;
  double diverge_at = 1e9;
  double eps_mono = 1e-7;
};

enum class RealiseStatus { Converged, NoFixedPoint, Diverged };
std::string to_string(RealiseStatus s);

struct RealisationResult {
  RealiseStatus status = RealiseStatus::NoFixedPoint;
  Trajectory trajectory;  // extra column "objective"
  std::vector<Strategy> strategies;
  std::vector<double> objectives;
  std::optional<Strategy> fixed_point;
  std::size_t steps = 0;  // steps taken
  bool monotone = true;   // objectives non-increasing within eps_mono
};

RealisationResult realise_gradient(const Realisation& r, const Context& ctx, const Strategy& theta0,
                                   const RealiseOptions& o = {});
inline RealisationResult realise_gradient(const OpenGame& game, const Context& ctx, const GradientOptions& dyn,
                                          const Strategy& theta0, const RealiseOptions& o = {}) {
  return realise_gradient(Realisation{game, dyn}, ctx, theta0, o);
}

enum class CheckStatus { Pass, Fail, Inconclusive };
std::string to_string(CheckStatus s);

struct CyberneticReport {
  CheckStatus status = CheckStatus::Inconclusive;
  double phi_dynamic = 0.0;
  double phi_static = 0.0;
  std::optional<std::size_t> steps_to_fix;
  Strategy sigma_star;
  std::optional<Strategy> theta_star;
  RealisationResult run;
  std::string trajectory_csv;  // path, filled in by whoever writes it

  json to_json() const;
};

/// Pass iff the fixed point's loss is at most the static equilibrium's loss
/// plus tol. No fixed point is inconclusive; divergence fails.
CyberneticReport cybernetic_check(const Realisation& r, const Context& ctx, const Strategy& theta0, double tol,
                                  const RealiseOptions& o = {});

// ---------------------------------------------------------------------------
// Active inference

struct ActiveInferenceSetup {
  std::vector<ActiveInferenceLevel> levels;
  std::function<double(const Strategy&)> extra_cost;
  /// Optional closed forms; without them the static side must be enumerable
  /// and the dynamics use finite differences.
  OpenGame::Gradient gradient;
  OpenGame::Equilibria equilibria;
};

OpenGame active_inference_game(const ActiveInferenceSetup& setup, FactorObjective factor);

/// Free-energy realisation: factors scored by the pointwise KL autoencoder
/// objective.
CyberneticReport realise_fep(const ActiveInferenceSetup& setup, const Context& ctx, const GradientOptions& dyn,
                             const Strategy& theta0, double tol, const RealiseOptions& o = {});
/// The same with VAE-scored factors.
CyberneticReport realise_deep_ai(const ActiveInferenceSetup& setup, const Context& ctx, const GradientOptions& dyn,
                                 const Strategy& theta0, double tol, const RealiseOptions& o = {});

// ---------------------------------------------------------------------------
// Thermostat

/// A room at temperature x0 + a, sensed with noise, and a goal prior on the
/// sensed temperature. Strategy = (mu, log t, a): the belief N(mu, t^2) about
/// the temperature and the action a.
struct ThermostatConfig {
  double goal = 21.0;
  double goal_var = 0.25;
  double sense_var = 0.25;
  double x0 = 15.0;
  double env_noise_var = 0.25;
  double action_cost = 0.1;  // lambda * a^2 / 2
  double action_var = 1e-4;  // spread of the action channel
  double bound = 100.0;      // box on every parameter
  int levels = 1;            // 2 adds a pass-through upper level
  Strategy theta0 = Strategy::Zero(3);
  GradientOptions dynamics;
  RealiseOptions realise{500, 1e-9, 5, 1e9, 1e-7};
  double tol = 1e-3;

  json to_json() const;
  static ThermostatConfig from_json(const json& j);
};

ActiveInferenceSetup thermostat_setup(const ThermostatConfig& cfg);
Context thermostat_context(const ThermostatConfig& cfg);
/// Closed-form minimizer of the thermostat free energy.
Strategy thermostat_optimum(const ThermostatConfig& cfg);

enum class Framework { FreeEnergy, DeepActiveInference };

struct ThermostatReport {
  CyberneticReport check;
  double sensed_mean = 0.0;  // x0 + a at the end of the run
  double goal_gap = 0.0;     // |sensed_mean - goal|

  json to_json() const;
};

ThermostatReport run_thermostat(const ThermostatConfig& cfg, Framework framework = Framework::FreeEnergy);

}  // namespace cyber
