#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace cyber {

/// Numerical tolerances shared by every module. One record so that property
/// tests and library code agree on what "equal" means.
struct Tolerances {
  double norm = 1e-9;       // row / total mass must be within this of 1
  double supp = 1e-12;      // mass above this counts as supported
  double div = 1e-12;       // divergences may dip this far below 0
  double almost_eq = 1e-9;  // default almost-equality threshold
  double sym = 1e-9;        // covariance symmetry
  double psd = 1e-9;        // covariance eigenvalues may dip this far below 0
  double tie = 1e-9;        // argmin ties
};

inline constexpr Tolerances kTol{};

/// Log of a zero mass. -inf poisons sums: any finite + kLogZero == kLogZero.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class BackendMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

/// Conditioning on an outcome the reference state gives no mass.
class UnsupportedOutcome : public Error {
 public:
  using Error::Error;
};

/// KL(p, q) with mass of p outside the support of q.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

class UnknownFactor : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-trial streams from
/// one seed by counter.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng stream_rng(std::uint64_t seed, std::uint64_t counter) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL)));
}

}  // namespace cyber
