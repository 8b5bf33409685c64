#pragma once

#include <algorithm>
#include <numeric>
#include <random>

#include "cyber/finite.hpp"

namespace cyber {

/// Flat Dirichlet draw on n atoms, each atom floored at `floor`
/// (floor * n must stay below 1).
inline Eigen::VectorXd random_simplex(std::size_t n, Rng& rng, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = e(rng);
  v /= v.sum();
  return Eigen::VectorXd::Constant(v.size(), floor) + (1.0 - floor * static_cast<double>(n)) * v;
}

/// Full-support prior; each atom carries at least 1e-3.
inline FiniteDistd random_prior(const FiniteSpace& space, Rng& rng, double floor = 1e-3) {
  return FiniteDistd(space, random_simplex(space.size(), rng, floor));
}

/// Random row-stochastic table. With `zero_prob` > 0 entries are zeroed
/// independently (each row keeps at least one positive entry).
inline FiniteChanneld random_channel(const FiniteSpace& domain, const FiniteSpace& codomain, Rng& rng,
                                     double zero_prob = 0.0) {
  std::bernoulli_distribution drop(zero_prob);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(domain.size()), static_cast<Eigen::Index>(codomain.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::VectorXd row = random_simplex(codomain.size(), rng);
    if (zero_prob > 0.0) {
      Eigen::Index keep = std::uniform_int_distribution<Eigen::Index>(0, row.size() - 1)(rng);
      for (Eigen::Index j = 0; j < row.size(); ++j)
        if (j != keep && drop(rng)) row(j) = 0.0;
      row /= row.sum();
    }
    m.row(i) = row.transpose();
  }
  return FiniteChanneld(domain, codomain, m);
}

inline FiniteChanneld random_permutation_channel(const FiniteSpace& space, Rng& rng) {
  std::vector<std::size_t> perm(space.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return FiniteChanneld::deterministic(space, space, perm);
}

}  // namespace cyber
