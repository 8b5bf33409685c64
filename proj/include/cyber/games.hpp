#pragma once

// Optimization games over Bayesian lenses. Every fitness is a loss: lower is
// better, and best responses are arg-min sets.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyber/bayes_lens.hpp"

namespace cyber {

/// Strategies are parameter vectors. Enumerated spaces store the index as a
/// one-element vector; grids store the parameters themselves.
using Strategy = Eigen::VectorXd;

/// A prior on the game's domain and a continuation from its output to its
/// feedback object (an endochannel for simple games).
struct Context {
  State prior;
  Channel continuation;
};

// ---------------------------------------------------------------------------
// Strategy spaces

enum class StrategyKind { Enumeration, Grid, Box };

class StrategySpace {
 public:
  static StrategySpace enumeration(std::size_t n);
  static StrategySpace grid(std::vector<Strategy> points);
  /// Grid whose points are generated on demand.
  static StrategySpace lazy_grid(std::size_t count, int dim, std::function<Strategy(std::size_t)> at);
  static StrategySpace box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static StrategySpace singleton(Strategy s = Strategy(0)) { return grid({std::move(s)}); }
  /// Strategies of `a` followed by strategies of `b`. A box times a
  /// one-point grid stays a box; a box times a larger grid is rejected.
  static StrategySpace product(const StrategySpace& a, const StrategySpace& b);

  StrategyKind kind() const { return kind_; }
  bool enumerable() const { return kind_ != StrategyKind::Box; }
  int dim() const { return dim_; }
  std::size_t size() const;
  Strategy at(std::size_t i) const;
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  Strategy clamp(const Strategy& s) const;

 private:
  StrategyKind kind_ = StrategyKind::Grid;
  int dim_ = 0;
  std::size_t count_ = 0;
  std::function<Strategy(std::size_t)> at_;
  Eigen::VectorXd lower_, upper_;
};

// ---------------------------------------------------------------------------
// Parameterized families

struct ChannelFamily {
  std::string name;
  Space domain;
  Space codomain;
  StrategySpace params;
  std::function<Channel(const Strategy&)> instantiate;

  Channel operator()(const Strategy& s) const { return instantiate(s); }
};

struct BackwardFamily {
  std::string name;
  Space base;
  Space input;
  Space output;
  StrategySpace params;
  std::function<StateDependentChannel(const Strategy&)> instantiate;

  StateDependentChannel operator()(const Strategy& s) const { return instantiate(s); }
};

ChannelFamily singleton_family(const Channel& c);
/// Fixed list of channels; strategy = index.
ChannelFamily listed_family(std::vector<Channel> channels);
/// Every row-stochastic table whose entries are multiples of `step`.
/// Strategy = the table flattened row by row.
ChannelFamily stochastic_grid_family(const FiniteSpace& domain, const FiniteSpace& codomain, double step);
/// Every deterministic map, encoded as its 0/1 table flattened row by row.
ChannelFamily deterministic_family(const FiniteSpace& domain, const FiniteSpace& codomain);
/// Row-wise softmax of unconstrained logits (flattened row by row).
ChannelFamily softmax_family(const FiniteSpace& domain, const FiniteSpace& codomain, double bound = 30.0);
Eigen::MatrixXd softmax_rows(const Strategy& logits, Eigen::Index rows, Eigen::Index cols);

/// x -> N(W x + b, diag(exp(2 s))); strategy = (W row by row, b, s).
/// Bounds apply to every coordinate.
ChannelFamily linear_gaussian_family(int in_dim, int out_dim, double lo = -50.0, double hi = 50.0);
GaussianChanneld linear_gaussian(const Strategy& params, int in_dim, int out_dim);

/// Backward family that ignores the prior.
BackwardFamily constant_backward(const ChannelFamily& f, const Space& base);
/// The single member pi -> Bayesian inversion of c at pi.
BackwardFamily exact_backward(const Channel& c);

// ---------------------------------------------------------------------------
// Objectives

enum class MleIntegrand { Mass, Log };

/// -E_{k o pi}[pi] (or -E_{k o pi}[log pi]). Here pi is the played state and
/// k the context's continuation.
double mle_objective(const State& pi, const Context& ctx, MleIntegrand integrand = MleIntegrand::Mass);

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 20000;  // Monte Carlo draws when no closed form exists
};

/// E_{x ~ k c pi}[ E_{z ~ c'(x)}[-log p_c(x|z)] + D(c'(x), pi) ] for a forward
/// channel c : Z -> X and backward c' = back(pi) : X -> Z.
double inference_objective(const Channel& c, const StateDependentChannel& back, const Divergence& d,
                           const Context& ctx, const EvalOptions& opts = {});

/// E_{x ~ k c pi} E_{z ~ c'(x)}[log q(z|x) - log p_c(x|z) - log p_pi(z)].
double vae_objective(const Channel& c, const StateDependentChannel& back, const Context& ctx);

/// Pointwise: the divergence is taken per observation, as in
/// inference_objective. Aggregate: it is taken once, between the aggregate
/// posterior c'(k c pi) and the prior. For KL the two differ by the mutual
/// information between observation and latent.
enum class AutoencoderForm { Pointwise, Aggregate };

double autoencoder_objective(const Channel& c, const StateDependentChannel& back, const Divergence& d,
                             const Context& ctx, AutoencoderForm form = AutoencoderForm::Pointwise,
                             const EvalOptions& opts = {});

/// Mutual information of (x, z) under x ~ k c pi, z ~ c'(x).
double latent_mutual_information(const Channel& c, const StateDependentChannel& back, const Context& ctx);

/// The data distribution k o c o pi the objectives average over.
State observed_state(const Channel& c, const Context& ctx);

// Kernels on explicit data distributions.
double vae_objective(const FiniteChanneld& c, const FiniteChanneld& q, const FiniteDistd& prior,
                     const FiniteDistd& data);
double vae_objective(const GaussianChanneld& c, const GaussianChanneld& q, const GaussianStated& prior,
                     const GaussianStated& data);

/// Derivatives of the Gaussian VAE objective with respect to the backward
/// weight, bias and (symmetric) covariance, and to the data mean.
struct GaussianVaeGradient {
  Eigen::MatrixXd d_weight;
  Eigen::VectorXd d_bias;
  Eigen::MatrixXd d_cov;
  Eigen::VectorXd d_data_mean;
};
GaussianVaeGradient vae_gradient(const GaussianChanneld& c, const GaussianChanneld& q, const GaussianStated& prior,
                                 const GaussianStated& data);

/// Gradient of the finite KL inference objective with respect to the
/// row-wise softmax logits of a constant backward channel.
Eigen::VectorXd inference_softmax_gradient(const FiniteChanneld& c, const Eigen::MatrixXd& logits,
                                           const FiniteDistd& prior, const FiniteDistd& data);

// ---------------------------------------------------------------------------
// Open games

/// A contiguous run of strategy coordinates owned by one component game.
struct StrategyBlock {
  std::string name;
  int offset = 0;
  StrategySpace space;
};

class OpenGame {
 public:
  using Play = std::function<BayesLens(const Strategy&)>;
  using Fitness = std::function<double(const Strategy&, const Context&)>;
  using BestResponse = std::function<std::vector<Strategy>(const Context&, const Strategy&)>;
  using Equilibria = std::function<std::vector<Strategy>(const Context&)>;
  using Gradient = std::function<Eigen::VectorXd(const Strategy&, const Context&)>;

  /// Game (X, A) -> (Y, B). Without further configuration the best response
  /// is the constant arg-min of the fitness over the strategy space.
  OpenGame(std::string name, Space x, Space a, Space y, Space b, StrategySpace strategies, Play play,
           Fitness fitness);

  const std::string& name() const { return name_; }
  const Space& x() const { return x_; }
  const Space& a() const { return a_; }
  const Space& y() const { return y_; }
  const Space& b() const { return b_; }
  const StrategySpace& strategies() const { return strategies_; }
  const std::vector<StrategyBlock>& blocks() const { return blocks_; }
  bool is_atomic() const { return atomic_; }

  BayesLens play(const Strategy& s) const { return play_(s); }
  double fitness(const Strategy& s, const Context& ctx) const { return fitness_(s, ctx); }
  std::vector<Strategy> best_response(const Context& ctx, const Strategy& s) const;
  bool is_equilibrium(const Strategy& s, const Context& ctx) const;
  std::vector<Strategy> equilibria(const Context& ctx) const;
  /// Fitness of every enumerable strategy, in index order.
  std::vector<double> objective_table(const Context& ctx) const;

  bool has_gradient() const { return static_cast<bool>(gradient_); }
  Eigen::VectorXd gradient(const Strategy& s, const Context& ctx) const;

  OpenGame& with_best_response(BestResponse br, bool atomic);
  OpenGame& with_equilibria(Equilibria eq);
  OpenGame& with_equilibrium_test(std::function<bool(const Strategy&, const Context&)> test);
  OpenGame& with_gradient(Gradient g);
  OpenGame& with_blocks(std::vector<StrategyBlock> blocks);

 private:
  std::string name_;
  Space x_, a_, y_, b_;
  StrategySpace strategies_;
  Play play_;
  Fitness fitness_;
  BestResponse best_response_;
  Equilibria equilibria_;
  std::function<bool(const Strategy&, const Context&)> equilibrium_test_;
  Gradient gradient_;
  std::vector<StrategyBlock> blocks_;
  bool atomic_ = true;
};

/// Argmin support: all indices within kTol.tie of the smallest value.
/// Non-finite values rank as +inf; if every value is +inf all of them tie.
std::vector<std::size_t> argmin_ties(const std::vector<double>& values, double tie = kTol.tie);
/// f(0..n-1) evaluated on the shared worker pool; the result is independent
/// of the worker count.
std::vector<double> evaluate_all(std::size_t n, const std::function<double(std::size_t)>& f);
void set_default_workers(unsigned n);
unsigned default_workers();

OpenGame make_mle_game(std::vector<State> candidates, MleIntegrand integrand = MleIntegrand::Mass);
OpenGame make_inference_game(const Channel& c, const BackwardFamily& back, const Divergence& d,
                             const EvalOptions& opts = {});
OpenGame make_vae_game(const ChannelFamily& forward, const BackwardFamily& back);
OpenGame make_autoencoder_game(const ChannelFamily& forward, const BackwardFamily& back, const Divergence& d,
                               AutoencoderForm form = AutoencoderForm::Pointwise, const EvalOptions& opts = {});

/// Identity game on (X, A): one strategy, the identity lens, zero loss.
OpenGame identity_game(const Space& x, const Space& a);
inline OpenGame identity_game(const Space& x) { return identity_game(x, x); }

/// G then H. Local contexts: G sees (pi, H.backward(G.forward pi) k H.forward),
/// H sees (G.forward pi, k). Fitness is the sum of the local fitnesses.
OpenGame compose_seq(const OpenGame& g, const OpenGame& h);
/// G beside H. G sees the first marginal of the prior and the continuation
/// with H's output held at H.forward applied to the second marginal;
/// symmetrically for H.
OpenGame compose_par(const OpenGame& g, const OpenGame& h);

/// Local contexts used by the composites, exposed for testing.
Context seq_first_context(const OpenGame& g, const OpenGame& h, const Strategy& sg, const Strategy& sh,
                          const Context& ctx);
Context seq_second_context(const OpenGame& g, const Strategy& sg, const Context& ctx);
Context par_first_context(const OpenGame& g, const OpenGame& h, const Strategy& sh, const Context& ctx);
Context par_second_context(const OpenGame& g, const OpenGame& h, const Strategy& sg, const Context& ctx);

// ---------------------------------------------------------------------------
// Active inference

/// Forward and backward families of one marginal autoencoder factor.
struct FactorFamilies {
  ChannelFamily forward;
  BackwardFamily backward;
};

/// Level i maps beliefs over S_{i+1} (x) A_{i+1} to S_i (x) A_i.
struct ActiveInferenceLevel {
  FactorFamilies sensory;
  FactorFamilies action;
  /// Set for a pass-through level: the identity game on this space.
  std::optional<Space> pass_through;

  static ActiveInferenceLevel identity(const Space& s) {
    ActiveInferenceLevel level;
    level.pass_through = s;
    return level;
  }
};

/// Objective of each factor game: the VAE objective, or the pointwise KL
/// autoencoder objective. The two agree in value; they differ in which
/// closed forms the games expose.
enum class FactorObjective { Vae, Autoencoder };

/// Levels are listed bottom first. Each level is a sensory and an action
/// VAE game composed in parallel; levels are composed in sequence from the
/// top. The fitness is the total free energy (sum of the factor VAE
/// objectives in their local contexts, plus `extra_cost`). Each strategy
/// block best-responds to the total free energy with the other blocks held
/// fixed, which is how actions see their sensory consequences; the game is
/// therefore not atomic.
OpenGame make_active_inference_game(const std::vector<ActiveInferenceLevel>& levels,
                                    std::function<double(const Strategy&)> extra_cost = {},
                                    FactorObjective factor = FactorObjective::Vae);

/// Blockwise arg-min of `game`'s fitness holding the other blocks at s.
std::vector<Strategy> blockwise_best_response(const OpenGame& game, const Context& ctx, const Strategy& s);

}  // namespace cyber
