#pragma once

#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cyber/core.hpp"

namespace cyber {

/// A finite outcome space, possibly a product. Outcomes of a product are
/// ordered lexicographically with the first factor major. The unit space I
/// has no factors and exactly one outcome.
class FiniteSpace {
 public:
  FiniteSpace() = default;

  static FiniteSpace unit() { return FiniteSpace(); }

  static FiniteSpace of(std::vector<std::string> labels) {
    if (labels.empty()) throw InvalidDistribution("finite space needs at least one outcome");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw InvalidDistribution("duplicate outcome label");
    FiniteSpace s;
    s.factors_.push_back(std::move(labels));
    return s;
  }

  /// Outcomes labelled "0", "1", ..., "n-1".
  static FiniteSpace range(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    return of(std::move(labels));
  }

  static FiniteSpace from_factors(std::vector<std::vector<std::string>> factors) {
    FiniteSpace s;
    for (auto& f : factors) {
      auto one = of(std::move(f));
      s.factors_.push_back(std::move(one.factors_.front()));
    }
    return s;
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& f : factors_) n *= f.size();
    return n;
  }

  std::size_t num_factors() const { return factors_.size(); }
  const std::vector<std::vector<std::string>>& factors() const { return factors_; }
  bool is_unit() const { return factors_.empty(); }

  /// Per-factor coordinates of a flat outcome index.
  std::vector<std::size_t> split(std::size_t index) const {
    std::vector<std::size_t> out(factors_.size());
    for (std::size_t k = factors_.size(); k-- > 0;) {
      out[k] = index % factors_[k].size();
      index /= factors_[k].size();
    }
    return out;
  }

  std::size_t join(const std::vector<std::size_t>& coords) const {
    if (coords.size() != factors_.size()) throw DimensionMismatch("coordinate count != factor count");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (coords[k] >= factors_[k].size()) throw DimensionMismatch("coordinate out of range");
      idx = idx * factors_[k].size() + coords[k];
    }
    return idx;
  }

  std::string label(std::size_t index) const {
    if (factors_.empty()) return "*";
    auto coords = split(index);
    std::string out;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (k) out += ",";
      out += factors_[k][coords[k]];
    }
    return out;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(label(i));
    return out;
  }

  std::size_t index_of(const std::string& label_text) const {
    for (std::size_t i = 0; i < size(); ++i)
      if (label(i) == label_text) return i;
    throw UnsupportedOutcome("unknown outcome label '" + label_text + "'");
  }

  /// Factors [first, first + count) as a space of their own.
  FiniteSpace slice(std::size_t first, std::size_t count) const {
    if (first + count > factors_.size()) throw UnknownFactor("factor range out of bounds");
    FiniteSpace s;
    s.factors_.assign(factors_.begin() + first, factors_.begin() + first + count);
    return s;
  }

  friend FiniteSpace operator*(const FiniteSpace& a, const FiniteSpace& b) {
    FiniteSpace s = a;
    s.factors_.insert(s.factors_.end(), b.factors_.begin(), b.factors_.end());
    return s;
  }

  friend bool operator==(const FiniteSpace& a, const FiniteSpace& b) { return a.factors_ == b.factors_; }

 private:
  std::vector<std::vector<std::string>> factors_;
};

/// R^n as a product of blocks; the unit space has no blocks and dimension 0.
class EuclideanSpace {
 public:
  EuclideanSpace() = default;
  explicit EuclideanSpace(int dim) {
    if (dim < 0) throw DimensionMismatch("negative dimension");
    if (dim > 0) blocks_.push_back(dim);
  }
  static EuclideanSpace unit() { return EuclideanSpace(); }
  static EuclideanSpace from_blocks(std::vector<int> blocks) {
    EuclideanSpace s;
    for (int b : blocks) {
      if (b <= 0) throw DimensionMismatch("block dimension must be positive");
      s.blocks_.push_back(b);
    }
    return s;
  }

  int dim() const { return std::accumulate(blocks_.begin(), blocks_.end(), 0); }
  std::size_t num_factors() const { return blocks_.size(); }
  const std::vector<int>& blocks() const { return blocks_; }

  int offset(std::size_t factor) const {
    if (factor > blocks_.size()) throw UnknownFactor("factor out of range");
    return std::accumulate(blocks_.begin(), blocks_.begin() + static_cast<std::ptrdiff_t>(factor), 0);
  }

  EuclideanSpace slice(std::size_t first, std::size_t count) const {
    if (first + count > blocks_.size()) throw UnknownFactor("factor range out of bounds");
    EuclideanSpace s;
    s.blocks_.assign(blocks_.begin() + first, blocks_.begin() + first + count);
    return s;
  }

  friend EuclideanSpace operator*(const EuclideanSpace& a, const EuclideanSpace& b) {
    EuclideanSpace s = a;
    s.blocks_.insert(s.blocks_.end(), b.blocks_.begin(), b.blocks_.end());
    return s;
  }

  friend bool operator==(const EuclideanSpace& a, const EuclideanSpace& b) { return a.blocks_ == b.blocks_; }

 private:
  std::vector<int> blocks_;
};

using Space = std::variant<FiniteSpace, EuclideanSpace>;

inline std::size_t num_factors(const Space& s) {
  return std::visit([](const auto& x) { return x.num_factors(); }, s);
}

inline Space tensor(const Space& a, const Space& b) {
  if (a.index() != b.index()) throw BackendMismatch("tensor of finite and Euclidean spaces");
  if (const auto* fa = std::get_if<FiniteSpace>(&a)) return *fa * std::get<FiniteSpace>(b);
  return std::get<EuclideanSpace>(a) * std::get<EuclideanSpace>(b);
}

/// Objects agree for wiring purposes: finite spaces must match exactly,
/// Euclidean spaces only by total dimension.
inline bool compatible(const Space& a, const Space& b) {
  if (a.index() != b.index()) return false;
  if (const auto* fa = std::get_if<FiniteSpace>(&a)) return *fa == std::get<FiniteSpace>(b);
  return std::get<EuclideanSpace>(a).dim() == std::get<EuclideanSpace>(b).dim();
}

inline std::string describe(const Space& s) {
  if (const auto* f = std::get_if<FiniteSpace>(&s)) return "finite(" + std::to_string(f->size()) + ")";
  return "R^" + std::to_string(std::get<EuclideanSpace>(s).dim());
}

inline Space slice(const Space& s, std::size_t first, std::size_t count) {
  return std::visit([&](const auto& x) -> Space { return x.slice(first, count); }, s);
}

}  // namespace cyber
