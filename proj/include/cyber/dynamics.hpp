#pragma once

// Discrete-time dynamical systems as lenses.
//
// A system has a state space S, an input A and an output B, a deterministic
// readout S -> B and a stochastic update S (x) A -> S. States and wire values
// are coordinate vectors: one factor index per factor for finite spaces, the
// coordinates themselves for Euclidean spaces. Tensor products concatenate
// coordinates.
//
// Composites step synchronously. Every component reads the wires emitted by
// the current readouts and updates once, so each hop along a wire costs one
// step of delay. Readouts depend on the state only, so the joint state fixes
// every wire and z0 alone determines the first step.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyber/prob.hpp"

namespace cyber {

using Vec = Eigen::VectorXd;

/// Number of coordinates of a point of s.
int coord_dim(const Space& s);
/// Flat outcome index of a finite point given by factor coordinates.
std::size_t flat_index(const FiniteSpace& s, const Vec& coords);
Vec coords_of(const FiniteSpace& s, std::size_t index);

class DynSystem {
 public:
  using Readout = std::function<Vec(const Vec& s)>;
  using Sampler = std::function<Vec(const Vec& s, const Vec& a, Rng& rng)>;
  /// Exact next-state distribution over the flat outcomes of a finite S.
  using Exact = std::function<Eigen::VectorXd(const Vec& s, const Vec& a)>;
  using Map = std::function<Vec(const Vec& s, const Vec& a)>;

  DynSystem(std::string name, Space state, Space input, Space output, Readout readout, Sampler sampler,
            Exact exact = {}, bool deterministic = false);

  /// Update given by a channel S (x) A -> S; S is its codomain and A the
  /// remaining factors of its domain.
  static DynSystem from_channel(std::string name, const Channel& update, Space output, Readout readout);
  /// Update given by a deterministic map.
  static DynSystem from_map(std::string name, Space state, Space input, Space output, Readout readout, Map map);

  const std::string& name() const { return name_; }
  const Space& state() const { return state_; }
  const Space& input() const { return input_; }
  const Space& output() const { return output_; }
  bool has_exact() const { return static_cast<bool>(exact_); }
  bool is_deterministic() const { return deterministic_; }

  Vec readout(const Vec& s) const;
  Vec next(const Vec& s, const Vec& a, Rng& rng) const;
  Eigen::VectorXd next_distribution(const Vec& s, const Vec& a) const;

 private:
  std::string name_;
  Space state_, input_, output_;
  Readout readout_;
  Sampler sampler_;
  Exact exact_;
  bool deterministic_ = false;
};

/// S = A, readout the identity, and the input becomes the next state.
DynSystem noop_system(const Space& a);
/// No state; emits `value` forever.
DynSystem constant_system(const Space& output, Vec value);
/// Stores f(input) and emits it on the next step.
DynSystem memoryless_system(std::string name, const Space& input, const Space& output,
                            std::function<Vec(const Vec&)> f);

/// Routes an outer input and the current readouts of the parts to the
/// inputs of the parts.
using Router = std::function<std::vector<Vec>(const Vec& input, const std::vector<Vec>& readouts)>;
using Emitter = std::function<Vec(const std::vector<Vec>& readouts)>;

/// Synchronous wiring of several systems. The joint state is the tensor of
/// the parts' states in the order given.
DynSystem wire(std::string name, std::vector<DynSystem> parts, Space input, Space output, Router route,
               Emitter emit);

/// f then g: g reads f's output.
DynSystem compose_dyn(const DynSystem& f, const DynSystem& g);
DynSystem tensor_dyn(const DynSystem& f, const DynSystem& g);

// ---------------------------------------------------------------------------
// Lenses and contexts

/// Forward X -> M (x) Y and backward M (x) B -> A, coupled along the
/// residual M.
struct DynLens {
  DynSystem forward;
  DynSystem backward;
  Space residual;

  DynLens(DynSystem forward, DynSystem backward, Space residual);
  Space x() const { return forward.input(); }
  Space y() const;
  Space a() const { return backward.output(); }
  Space b() const;
};

DynLens identity_dyn_lens(const Space& x, const Space& a);
/// g after f. Residual M_f (x) M_g.
DynLens compose_dyn_lens(const DynLens& g, const DynLens& f);

/// An autonomous system emitting X (x) M and a responder Y (x) M -> B.
struct DynContext {
  DynSystem autonomous;
  DynSystem responder;
  Space residual;

  DynContext(DynSystem autonomous, DynSystem responder, Space residual);
};

struct ClosedSystem {
  DynSystem system;  // unit input; output = observables
  std::vector<std::string> state_labels;
  std::vector<std::string> observable_labels;

  Vec observe(const Vec& z) const { return system.readout(z); }
};

/// Wraps a system with unit input.
ClosedSystem autonomous(const DynSystem& sys, std::vector<std::string> state_labels = {},
                        std::vector<std::string> observable_labels = {});

/// Joint state (context, forward, responder, backward). Observables are the
/// wires x, m_ctx, m, y, b and the discarded a, in that order.
ClosedSystem close(const DynLens& lens, const DynContext& ctx);

// ---------------------------------------------------------------------------
// Running

struct StepResult {
  Vec next;
  Vec observables;  // emitted by the state the step started from
};

StepResult step(const ClosedSystem& sys, const Vec& z, Rng& rng);

/// One exact step of the state distribution over the flat outcomes of Z.
Eigen::VectorXd propagate(const ClosedSystem& sys, const Eigen::VectorXd& dist);
/// The total update as a channel Z -> Z.
FiniteChanneld total_kernel(const ClosedSystem& sys);

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<Vec> states;       // states[0] = z0
  std::vector<Vec> observables;  // observables[t] emitted by states[t]
  std::vector<std::string> state_labels;
  std::vector<std::string> observable_labels;
  /// Optional extra per-step columns, appended after the observables.
  std::vector<std::string> extra_labels;
  std::vector<Vec> extras;

  std::size_t length() const { return states.size(); }
  std::string to_csv() const;
};

Trajectory run(const ClosedSystem& sys, const Vec& z0, std::size_t steps, std::uint64_t seed);

struct FixedPointOptions {
  std::size_t max_steps = 10000;
  double eps = 1e-9;
  std::size_t window = 5;
  std::uint64_t seed = 0;
  /// Finite systems only: accept a visited z once P(z -> z) >= 1 - eps.
  bool exact = false;
};

struct FixedPoint {
  Vec state;
  std::size_t step = 0;  // index of `state` along the run
};

/// Deterministic mode: the state reached at the end of the first run of
/// `window` consecutive steps that each move less than eps in sup-norm.
/// Exact mode: the first visited state whose one-step distribution is within
/// eps in total variation of the point mass at itself.
std::optional<FixedPoint> find_fixed_point(const ClosedSystem& sys, const Vec& z0, const FixedPointOptions& o);

}  // namespace cyber
