#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cyber/core.hpp"
#include "cyber/space.hpp"

namespace cyber {

/// Exact finite probability distribution: a state I -> X.
template <typename Scalar>
class FiniteDist {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  FiniteDist() : FiniteDist(FiniteSpace::unit(), Vector::Ones(1)) {}

  FiniteDist(FiniteSpace space, Vector probs) : space_(std::move(space)), probs_(std::move(probs)) {
    if (static_cast<std::size_t>(probs_.size()) != space_.size())
      throw DimensionMismatch("distribution has " + std::to_string(probs_.size()) + " entries for a space of " +
                              std::to_string(space_.size()));
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      using std::isfinite;
      if (!isfinite(probs_(i)) || probs_(i) < Scalar(-kTol.norm))
        throw InvalidDistribution("probability entry out of range");
      if (probs_(i) < Scalar(0)) probs_(i) = Scalar(0);
    }
    using std::abs;
    if (abs(probs_.sum() - Scalar(1)) > Scalar(kTol.norm)) throw InvalidDistribution("probabilities do not sum to 1");
  }

  static FiniteDist point(const FiniteSpace& space, std::size_t index) {
    Vector p = Vector::Zero(static_cast<Eigen::Index>(space.size()));
    p(static_cast<Eigen::Index>(index)) = Scalar(1);
    return FiniteDist(space, p);
  }

  static FiniteDist uniform(const FiniteSpace& space) {
    auto n = static_cast<Eigen::Index>(space.size());
    return FiniteDist(space, Vector::Constant(n, Scalar(1) / Scalar(n)));
  }

  const FiniteSpace& space() const { return space_; }
  const Vector& probs() const { return probs_; }
  std::size_t size() const { return space_.size(); }
  Scalar operator[](std::size_t i) const { return probs_(static_cast<Eigen::Index>(i)); }

 private:
  FiniteSpace space_;
  Vector probs_;
};

/// Row-stochastic conditional table p(y|x); rows indexed by the domain.
template <typename Scalar>
class FiniteChannel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  FiniteChannel() : FiniteChannel(FiniteSpace::unit(), FiniteSpace::unit(), Matrix::Ones(1, 1)) {}

  FiniteChannel(FiniteSpace domain, FiniteSpace codomain, Matrix rows)
      : domain_(std::move(domain)), codomain_(std::move(codomain)), rows_(std::move(rows)) {
    if (static_cast<std::size_t>(rows_.rows()) != domain_.size() ||
        static_cast<std::size_t>(rows_.cols()) != codomain_.size())
      throw DimensionMismatch("channel table shape does not match its domain/codomain");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
        using std::isfinite;
        if (!isfinite(rows_(i, j)) || rows_(i, j) < Scalar(-kTol.norm))
          throw InvalidDistribution("channel entry out of range");
        if (rows_(i, j) < Scalar(0)) rows_(i, j) = Scalar(0);
      }
      using std::abs;
      if (abs(rows_.row(i).sum() - Scalar(1)) > Scalar(kTol.norm))
        throw InvalidDistribution("channel row " + std::to_string(i) + " does not sum to 1");
    }
  }

  static FiniteChannel identity(const FiniteSpace& space) {
    auto n = static_cast<Eigen::Index>(space.size());
    return FiniteChannel(space, space, Matrix::Identity(n, n));
  }

  /// Deterministic channel x -> map[x].
  static FiniteChannel deterministic(const FiniteSpace& domain, const FiniteSpace& codomain,
                                     const std::vector<std::size_t>& map) {
    if (map.size() != domain.size()) throw DimensionMismatch("deterministic map size != domain size");
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(domain.size()), static_cast<Eigen::Index>(codomain.size()));
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map[i] >= codomain.size()) throw DimensionMismatch("deterministic map target out of range");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(map[i])) = Scalar(1);
    }
    return FiniteChannel(domain, codomain, m);
  }

  /// Every input goes to the same state.
  static FiniteChannel constant(const FiniteSpace& domain, const FiniteDist<Scalar>& out) {
    Matrix m = out.probs().transpose().replicate(static_cast<Eigen::Index>(domain.size()), 1);
    return FiniteChannel(domain, out.space(), m);
  }

  /// A state seen as a channel from the unit space.
  static FiniteChannel from_state(const FiniteDist<Scalar>& s) { return constant(FiniteSpace::unit(), s); }

  /// The unique channel X -> I.
  static FiniteChannel discard(const FiniteSpace& domain) {
    return FiniteChannel(domain, FiniteSpace::unit(), Matrix::Ones(static_cast<Eigen::Index>(domain.size()), 1));
  }

  const FiniteSpace& domain() const { return domain_; }
  const FiniteSpace& codomain() const { return codomain_; }
  const Matrix& rows() const { return rows_; }
  Scalar operator()(std::size_t y, std::size_t x) const {
    return rows_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }

  FiniteDist<Scalar> row(std::size_t x) const {
    return FiniteDist<Scalar>(codomain_, rows_.row(static_cast<Eigen::Index>(x)).transpose());
  }

 private:
  FiniteSpace domain_;
  FiniteSpace codomain_;
  Matrix rows_;
};

using FiniteDistd = FiniteDist<double>;
using FiniteChanneld = FiniteChannel<double>;

// ---------------------------------------------------------------------------
// Operations

template <typename Scalar>
FiniteDist<Scalar> pushforward(const FiniteChannel<Scalar>& c, const FiniteDist<Scalar>& pi) {
  if (!(c.domain() == pi.space())) throw DimensionMismatch("pushforward: state is not on the channel's domain");
  return FiniteDist<Scalar>(c.codomain(), c.rows().transpose() * pi.probs());
}

/// d after c.
template <typename Scalar>
FiniteChannel<Scalar> compose(const FiniteChannel<Scalar>& d, const FiniteChannel<Scalar>& c) {
  if (!(c.codomain() == d.domain())) throw DimensionMismatch("compose: codomain of c != domain of d");
  return FiniteChannel<Scalar>(c.domain(), d.codomain(), c.rows() * d.rows());
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kronecker(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

template <typename Scalar>
FiniteChannel<Scalar> tensor(const FiniteChannel<Scalar>& c1, const FiniteChannel<Scalar>& c2) {
  return FiniteChannel<Scalar>(c1.domain() * c2.domain(), c1.codomain() * c2.codomain(),
                               kronecker<Scalar>(c1.rows(), c2.rows()));
}

template <typename Scalar>
FiniteDist<Scalar> tensor(const FiniteDist<Scalar>& p1, const FiniteDist<Scalar>& p2) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k = kronecker<Scalar>(p1.probs(), p2.probs());
  return FiniteDist<Scalar>(p1.space() * p2.space(), k.col(0));
}

/// Posterior over the domain after observing outcome y. Throws
/// UnsupportedOutcome when (c o pi)(y) carries no mass.
template <typename Scalar>
FiniteDist<Scalar> posterior(const FiniteChannel<Scalar>& c, const FiniteDist<Scalar>& pi, std::size_t y) {
  if (!(c.domain() == pi.space())) throw DimensionMismatch("posterior: prior is not on the channel's domain");
  if (y >= c.codomain().size()) throw DimensionMismatch("posterior: outcome out of range");
  auto col = c.rows().col(static_cast<Eigen::Index>(y));
  typename FiniteDist<Scalar>::Vector joint = col.cwiseProduct(pi.probs());
  Scalar evidence = joint.sum();
  if (!(evidence > Scalar(kTol.supp)))
    throw UnsupportedOutcome("conditioning on zero-mass outcome '" + c.codomain().label(y) + "'");
  return FiniteDist<Scalar>(pi.space(), joint / evidence);
}

/// Bayesian inversion as a total channel Y -> X. Rows at outcomes without
/// mass under c o pi are set to pi; they are irrelevant up to almost-equality.
template <typename Scalar>
FiniteChannel<Scalar> bayes_inverse(const FiniteChannel<Scalar>& c, const FiniteDist<Scalar>& pi) {
  if (!(c.domain() == pi.space())) throw DimensionMismatch("bayes_inverse: prior is not on the channel's domain");
  using Matrix = typename FiniteChannel<Scalar>::Matrix;
  Matrix joint = c.rows().transpose() * pi.probs().asDiagonal();  // (y, x) -> p(y|x) pi(x)
  for (Eigen::Index y = 0; y < joint.rows(); ++y) {
    Scalar evidence = joint.row(y).sum();
    if (evidence > Scalar(kTol.supp))
      joint.row(y) /= evidence;
    else
      joint.row(y) = pi.probs().transpose();
  }
  return FiniteChannel<Scalar>(c.codomain(), c.domain(), joint);
}

template <typename Scalar>
Scalar log_density(const FiniteChannel<Scalar>& c, std::size_t y, std::size_t x) {
  if (x >= c.domain().size() || y >= c.codomain().size()) throw DimensionMismatch("log_density: index out of range");
  Scalar p = c(y, x);
  using std::log;
  return p > Scalar(0) ? log(p) : Scalar(kLogZero);
}

template <typename Scalar>
Scalar kl(const FiniteDist<Scalar>& p, const FiniteDist<Scalar>& q) {
  if (!(p.space() == q.space())) throw DimensionMismatch("kl: states live on different spaces");
  Scalar total(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > Scalar(0))) continue;
    if (!(q[i] > Scalar(0))) throw SupportViolation("kl: p has mass outside the support of q");
    using std::log;
    total += p[i] * (log(p[i]) - log(q[i]));
  }
  return total;
}

template <typename Scalar>
Scalar total_variation(const FiniteDist<Scalar>& p, const FiniteDist<Scalar>& q) {
  if (p.size() != q.size()) throw DimensionMismatch("total_variation: size mismatch");
  return Scalar(0.5) * (p.probs() - q.probs()).cwiseAbs().sum();
}

template <typename Scalar>
Scalar expectation(const FiniteDist<Scalar>& pi, const std::function<Scalar(std::size_t)>& f) {
  Scalar total(0);
  for (std::size_t i = 0; i < pi.size(); ++i)
    if (pi[i] > Scalar(0)) total += pi[i] * f(i);
  return total;
}

/// Marginal on factors [first, first + count).
template <typename Scalar>
FiniteDist<Scalar> marginal(const FiniteDist<Scalar>& pi, std::size_t first, std::size_t count) {
  const FiniteSpace& s = pi.space();
  if (first + count > s.num_factors()) throw UnknownFactor("marginal: factor range out of bounds");
  FiniteSpace target = s.slice(first, count);
  typename FiniteDist<Scalar>::Vector out = FiniteDist<Scalar>::Vector::Zero(static_cast<Eigen::Index>(target.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto coords = s.split(i);
    std::vector<std::size_t> kept(coords.begin() + static_cast<std::ptrdiff_t>(first),
                                  coords.begin() + static_cast<std::ptrdiff_t>(first + count));
    out(static_cast<Eigen::Index>(target.join(kept))) += pi[i];
  }
  return FiniteDist<Scalar>(target, out);
}

/// Deterministic projection channel onto factors [first, first + count).
template <typename Scalar>
FiniteChannel<Scalar> projection(const FiniteSpace& s, std::size_t first, std::size_t count) {
  FiniteSpace target = s.slice(first, count);
  std::vector<std::size_t> map(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto coords = s.split(i);
    map[i] = target.join(std::vector<std::size_t>(coords.begin() + static_cast<std::ptrdiff_t>(first),
                                                  coords.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }
  return FiniteChannel<Scalar>::deterministic(s, target, map);
}

/// Largest total-variation gap between rows y of f1 and f2 over outcomes that
/// carry mass under ref. Rows outside the support of ref are ignored.
template <typename Scalar>
Scalar worst_supported_tv(const FiniteChannel<Scalar>& f1, const FiniteChannel<Scalar>& f2,
                          const FiniteDist<Scalar>& ref) {
  if (!(f1.domain() == f2.domain()) || !(f1.codomain() == f2.codomain()) || !(ref.space() == f1.domain()))
    throw DimensionMismatch("almost_equal: families are not indexed by the reference space");
  Scalar worst(0);
  for (Eigen::Index y = 0; y < f1.rows().rows(); ++y) {
    if (!(ref[static_cast<std::size_t>(y)] > Scalar(kTol.supp))) continue;
    Scalar tv = Scalar(0.5) * (f1.rows().row(y) - f2.rows().row(y)).cwiseAbs().sum();
    if (tv > worst) worst = tv;
  }
  return worst;
}

template <typename Scalar>
bool almost_equal(const FiniteChannel<Scalar>& f1, const FiniteChannel<Scalar>& f2, const FiniteDist<Scalar>& ref,
                  Scalar tol = Scalar(kTol.almost_eq)) {
  return worst_supported_tv(f1, f2, ref) <= tol;
}

template <typename Scalar>
std::size_t sample(const FiniteDist<Scalar>& pi, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] > Scalar(0))) continue;
    acc += static_cast<double>(pi[i]);
    last = i;
    if (r < acc) return i;
  }
  return last;
}

template <typename Scalar>
std::size_t sample(const FiniteChannel<Scalar>& c, std::size_t x, Rng& rng) {
  return sample(c.row(x), rng);
}

}  // namespace cyber
