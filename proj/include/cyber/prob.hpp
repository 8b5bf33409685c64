#pragma once

// One interface over the two channel backends. Every function throws
// BackendMismatch when given a mix of finite and Gaussian arguments.

#include <functional>
#include <string>
#include <variant>

#include "cyber/finite.hpp"
#include "cyber/gaussian.hpp"

namespace cyber {

using State = std::variant<FiniteDistd, GaussianStated>;
using Channel = std::variant<FiniteChanneld, GaussianChanneld>;

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

Space space_of(const State& s);
Space domain_of(const Channel& c);
Space codomain_of(const Channel& c);
bool is_finite(const State& s);
bool is_finite(const Channel& c);

Channel identity_channel(const Space& s);
Channel discard_channel(const Space& s);
Channel constant_channel(const Space& domain, const State& out);
/// A state seen as a channel out of the unit space.
Channel state_channel(const State& s);
/// The state emitted by a channel out of the unit space.
State channel_state(const Channel& c);
Channel projection(const Space& s, std::size_t first, std::size_t count);

State pushforward(const Channel& c, const State& pi);
/// d after c.
Channel compose(const Channel& d, const Channel& c);
Channel tensor(const Channel& c1, const Channel& c2);
State tensor(const State& s1, const State& s2);
Channel bayes_inverse(const Channel& c, const State& pi);
State marginal(const State& pi, std::size_t first, std::size_t count);
inline State marginal(const State& pi, std::size_t factor) { return marginal(pi, factor, 1); }
double kl(const State& p, const State& q);

/// Sup over supported outcomes of the gap between two outcome-indexed
/// families (TV for finite, mean/cov sup-norm for Gaussian).
double almost_equal_gap(const Channel& f1, const Channel& f2, const State& ref);
bool almost_equal(const Channel& f1, const Channel& f2, const State& ref, double tol = kTol.almost_eq);

/// A scorer D(p, q) between states. KL is the reference choice.
class Divergence {
 public:
  using Fn = std::function<double(const State&, const State&)>;

  Divergence(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  static Divergence kl() {
    return Divergence("kl", [](const State& p, const State& q) { return cyber::kl(p, q); });
  }
  static Divergence zero() {
    return Divergence("zero", [](const State&, const State&) { return 0.0; });
  }

  const std::string& name() const { return name_; }
  bool is_kl() const { return name_ == "kl"; }
  double operator()(const State& p, const State& q) const { return fn_(p, q); }

 private:
  std::string name_;
  Fn fn_;
};

}  // namespace cyber
