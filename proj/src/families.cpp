#include <cmath>
#include <limits>
#include <memory>

#include "cyber/games.hpp"

namespace cyber {

StrategySpace StrategySpace::enumeration(std::size_t n) {
  if (n == 0) throw Error("strategy enumeration must be nonempty");
  StrategySpace s;
  s.kind_ = StrategyKind::Enumeration;
  s.dim_ = 1;
  s.count_ = n;
  s.at_ = [](std::size_t i) { return Strategy::Constant(1, static_cast<double>(i)); };
  return s;
}

StrategySpace StrategySpace::grid(std::vector<Strategy> points) {
  if (points.empty()) throw Error("strategy grid must be nonempty");
  const auto dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw DimensionMismatch("strategy grid points differ in dimension");
  auto shared = std::make_shared<const std::vector<Strategy>>(std::move(points));
  return lazy_grid(shared->size(), static_cast<int>(dim), [shared](std::size_t i) { return (*shared)[i]; });
}

StrategySpace StrategySpace::lazy_grid(std::size_t count, int dim, std::function<Strategy(std::size_t)> at) {
  if (count == 0) throw Error("strategy grid must be nonempty");
  StrategySpace s;
  s.kind_ = StrategyKind::Grid;
  s.dim_ = dim;
  s.count_ = count;
  s.at_ = std::move(at);
  return s;
}

StrategySpace StrategySpace::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box bounds differ in dimension");
  if ((lower.array() > upper.array()).any()) throw Error("box lower bound exceeds upper bound");
  StrategySpace s;
  s.kind_ = StrategyKind::Box;
  s.dim_ = static_cast<int>(lower.size());
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

StrategySpace StrategySpace::product(const StrategySpace& a, const StrategySpace& b) {
  const int da = a.dim_, db = b.dim_;
  if (a.enumerable() && b.enumerable()) {
    const std::size_t nb = b.size();
    if (a.size() > std::numeric_limits<std::size_t>::max() / nb) throw Error("strategy product is too large");
    return lazy_grid(a.size() * nb, da + db, [a, b, nb, da, db](std::size_t i) {
      Strategy s(da + db);
      s << a.at(i / nb), b.at(i % nb);
      return s;
    });
  }
  auto bounds = [](const StrategySpace& s, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
    if (!s.enumerable()) {
      lo = s.lower_;
      hi = s.upper_;
      return;
    }
    if (s.size() != 1) throw Error("cannot combine a box with a multi-point strategy grid");
    lo = hi = s.at(0);
  };
  Eigen::VectorXd la, ha, lb, hb;
  bounds(a, la, ha);
  bounds(b, lb, hb);
  Eigen::VectorXd lo(da + db), hi(da + db);
  lo << la, lb;
  hi << ha, hb;
  return box(lo, hi);
}

std::size_t StrategySpace::size() const {
  if (!enumerable()) throw Error("a box strategy space cannot be enumerated");
  return count_;
}

Strategy StrategySpace::at(std::size_t i) const {
  if (i >= size()) throw Error("strategy index out of range");
  return at_(i);
}

Strategy StrategySpace::clamp(const Strategy& s) const {
  if (enumerable()) return s;
  return s.cwiseMax(lower_).cwiseMin(upper_);
}

// ---------------------------------------------------------------------------

namespace {

// All compositions of `total` into `parts` nonnegative integers, in
// lexicographic order.
void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int k = 0; k <= total; ++k) {
    cur.push_back(k);
    compositions(total - k, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::size_t checked_power(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (out > std::numeric_limits<std::size_t>::max() / base) throw Error("family is too large to enumerate");
    out *= base;
  }
  return out;
}

// Family whose members are tables built row by row from a shared list of
// admissible rows.
ChannelFamily row_product_family(std::string name, const FiniteSpace& domain, const FiniteSpace& codomain,
                                 std::vector<Eigen::VectorXd> rows) {
  const std::size_t nx = domain.size();
  const auto ny = static_cast<Eigen::Index>(codomain.size());
  const std::size_t per_row = rows.size();
  const std::size_t count = checked_power(per_row, nx);
  auto shared = std::make_shared<const std::vector<Eigen::VectorXd>>(std::move(rows));
  StrategySpace params =
      StrategySpace::lazy_grid(count, static_cast<int>(nx * static_cast<std::size_t>(ny)), [=](std::size_t i) {
        Strategy s(static_cast<Eigen::Index>(nx) * ny);
        for (std::size_t x = nx; x-- > 0;) {
          s.segment(static_cast<Eigen::Index>(x) * ny, ny) = (*shared)[i % per_row];
          i /= per_row;
        }
        return s;
      });
  return ChannelFamily{std::move(name), domain, codomain, params, [=](const Strategy& s) -> Channel {
                         Eigen::MatrixXd m(static_cast<Eigen::Index>(nx), ny);
                         for (Eigen::Index x = 0; x < m.rows(); ++x) m.row(x) = s.segment(x * ny, ny).transpose();
                         return FiniteChanneld(domain, codomain, m);
                       }};
}

}  // namespace

ChannelFamily singleton_family(const Channel& c) {
  return ChannelFamily{"singleton", domain_of(c), codomain_of(c), StrategySpace::singleton(),
                       [c](const Strategy&) { return c; }};
}

ChannelFamily listed_family(std::vector<Channel> channels) {
  if (channels.empty()) throw Error("listed family must be nonempty");
  for (const auto& c : channels)
    if (!compatible(domain_of(c), domain_of(channels.front())) ||
        !compatible(codomain_of(c), codomain_of(channels.front())))
      throw DimensionMismatch("listed family members differ in shape");
  auto shared = std::make_shared<const std::vector<Channel>>(std::move(channels));
  return ChannelFamily{"listed", domain_of(shared->front()), codomain_of(shared->front()),
                       StrategySpace::enumeration(shared->size()),
                       [shared](const Strategy& s) {
                         auto i = static_cast<std::size_t>(std::llround(s(0)));
                         if (s.size() != 1 || i >= shared->size()) throw Error("listed family: index out of range");
                         return (*shared)[i];
                       }};
}

ChannelFamily stochastic_grid_family(const FiniteSpace& domain, const FiniteSpace& codomain, double step) {
  if (!(step > 0.0) || step > 1.0) throw Error("grid step must lie in (0, 1]");
  const int total = static_cast<int>(std::lround(1.0 / step));
  if (std::abs(total * step - 1.0) > 1e-9) throw Error("grid step must divide 1");
  std::vector<std::vector<int>> comps;
  std::vector<int> cur;
  compositions(total, static_cast<int>(codomain.size()), cur, comps);
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(comps.size());
  for (const auto& c : comps) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) r(static_cast<Eigen::Index>(j)) = c[j] / static_cast<double>(total);
    rows.push_back(r);
  }
  return row_product_family("stochastic_grid", domain, codomain, std::move(rows));
}

ChannelFamily deterministic_family(const FiniteSpace& domain, const FiniteSpace& codomain) {
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t j = 0; j < codomain.size(); ++j)
    rows.push_back(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(codomain.size()), static_cast<Eigen::Index>(j)));
  return row_product_family("deterministic", domain, codomain, std::move(rows));
}

Eigen::MatrixXd softmax_rows(const Strategy& logits, Eigen::Index rows, Eigen::Index cols) {
  if (logits.size() != rows * cols) throw DimensionMismatch("softmax: logit count does not match the table");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index x = 0; x < rows; ++x) {
    Eigen::VectorXd r = logits.segment(x * cols, cols);
    r = (r.array() - r.maxCoeff()).exp();
    m.row(x) = (r / r.sum()).transpose();
  }
  return m;
}

ChannelFamily softmax_family(const FiniteSpace& domain, const FiniteSpace& codomain, double bound) {
  const auto nx = static_cast<Eigen::Index>(domain.size());
  const auto ny = static_cast<Eigen::Index>(codomain.size());
  return ChannelFamily{"softmax", domain, codomain,
                       StrategySpace::box(Eigen::VectorXd::Constant(nx * ny, -bound),
                                          Eigen::VectorXd::Constant(nx * ny, bound)),
                       [=](const Strategy& s) -> Channel {
                         return FiniteChanneld(domain, codomain, softmax_rows(s, nx, ny));
                       }};
}

GaussianChanneld linear_gaussian(const Strategy& p, int in_dim, int out_dim) {
  const int nw = in_dim * out_dim;
  if (p.size() != nw + 2 * out_dim) throw DimensionMismatch("linear-Gaussian parameters have the wrong length");
  Eigen::MatrixXd w(out_dim, in_dim);
  for (int i = 0; i < out_dim; ++i)
    for (int j = 0; j < in_dim; ++j) w(i, j) = p(i * in_dim + j);
  Eigen::VectorXd b = p.segment(nw, out_dim);
  Eigen::VectorXd var = (2.0 * p.segment(nw + out_dim, out_dim).array()).exp();
  return GaussianChanneld(w, b, var.asDiagonal().toDenseMatrix());
}

ChannelFamily linear_gaussian_family(int in_dim, int out_dim, double lo, double hi) {
  const int n = in_dim * out_dim + 2 * out_dim;
  return ChannelFamily{"linear_gaussian", EuclideanSpace(in_dim), EuclideanSpace(out_dim),
                       StrategySpace::box(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)),
                       [=](const Strategy& s) -> Channel { return linear_gaussian(s, in_dim, out_dim); }};
}

BackwardFamily constant_backward(const ChannelFamily& f, const Space& base) {
  auto inst = f.instantiate;
  Space b = base;
  return BackwardFamily{f.name, base, f.domain, f.codomain, f.params,
                        [inst, b](const Strategy& s) { return StateDependentChannel::constant(b, inst(s)); }};
}

BackwardFamily exact_backward(const Channel& c) {
  BayesLens lens = exact_lens_of(c);
  StateDependentChannel back = lens.backward();
  return BackwardFamily{"exact", lens.x(), lens.b(), lens.a(), StrategySpace::singleton(),
                        [back](const Strategy&) { return back; }};
}

}  // namespace cyber
