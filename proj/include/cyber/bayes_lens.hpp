#pragma once

// Bayesian lenses: a forward channel X -> Y paired with a backward channel
// B -> A that may depend on the prior over X.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"

#include "cyber/prob.hpp"

namespace cyber {

/// A map from states on `base` to channels `input -> output`.
class StateDependentChannel {
 public:
  using Fn = std::function<Channel(const State&)>;

  StateDependentChannel(Space base, Space input, Space output, Fn fn);

  /// Ignores the state.
  static StateDependentChannel constant(Space base, Channel c);

  const Space& base() const { return base_; }
  const Space& input() const { return input_; }
  const Space& output() const { return output_; }

  /// Checks the state's space and the returned channel's shape.
  Channel operator()(const State& pi) const;

 private:
  Space base_;
  Space input_;
  Space output_;
  Fn fn_;
};

/// Lens (X, A) -> (Y, B): forward X -> Y, backward B -> A indexed by states on X.
/// A simple lens has A = X and B = Y.
class BayesLens {
 public:
  BayesLens(Channel forward, StateDependentChannel backward);

  const Channel& forward() const { return forward_; }
  const StateDependentChannel& backward() const { return backward_; }
  Channel backward(const State& pi) const { return backward_(pi); }

  Space x() const { return domain_of(forward_); }
  Space y() const { return codomain_of(forward_); }
  const Space& a() const { return backward_.output(); }
  const Space& b() const { return backward_.input(); }
  bool is_simple() const { return compatible(x(), a()) && compatible(y(), b()); }

 private:
  Channel forward_;
  StateDependentChannel backward_;
};

BayesLens identity_lens(const Space& space);
/// Identity on (Y, A): both parts are identity channels.
BayesLens identity_lens(const Space& y, const Space& a);

/// g after f. Backward at pi is f.backward(pi) after g.backward(f.forward o pi).
BayesLens compose_lens(const BayesLens& g, const BayesLens& f);

/// Parallel product. The backward part evaluates each factor at the marginal
/// of the joint prior; this is exact for product priors and a mean-field
/// approximation otherwise.
BayesLens tensor_lens(const BayesLens& f, const BayesLens& g);

/// Simple lens whose backward part is the Bayesian inversion of c.
BayesLens exact_lens_of(const Channel& c);

/// Worst almost-equality gap between L.backward(pi) and the true inversion
/// of L.forward at pi, over the given priors (0 for an empty list).
double exactness_gap(const BayesLens& lens, const std::vector<State>& priors);
bool is_exact(const BayesLens& lens, const std::vector<State>& priors, double tol = kTol.almost_eq);

// ---------------------------------------------------------------------------
// Randomized check that exact lenses compose to the exact lens of the
// composite channel.

struct OpticalBayesOptions {
  std::size_t trials = 1000;
  int max_dim = 5;
  std::uint64_t seed = 42;
  double tol = kTol.almost_eq;
  unsigned workers = 1;
  double zero_prob = 0.25;
  /// Draw both channels as random permutations.
  bool permutations = false;
  /// Applied to the composite backward channel before comparison.
  std::function<FiniteChanneld(const FiniteChanneld&)> corrupt;
};

struct OpticalBayesReport {
  std::size_t trials = 0;
  std::size_t passes = 0;
  std::size_t resampled = 0;
  double worst_tv = 0.0;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> failures;

  nlohmann::json to_json() const;
};

OpticalBayesReport verify_optical_bayes(const OpticalBayesOptions& options);

/// Swaps the largest and smallest entries in every row. A deliberate fault
/// for negative controls.
FiniteChanneld swap_entries(const FiniteChanneld& c);

}  // namespace cyber
