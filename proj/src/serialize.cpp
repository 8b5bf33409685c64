#include "cyber/serialize.hpp"

#include <cstdio>

namespace cyber {

namespace {

json space_labels(const FiniteSpace& s) { return s.labels(); }

FiniteSpace space_from(const json& labels, const json* factors) {
  if (factors != nullptr) return FiniteSpace::from_factors(factors->get<std::vector<std::vector<std::string>>>());
  return FiniteSpace::of(labels.get<std::vector<std::string>>());
}

void put_factors(json& j, const char* key, const FiniteSpace& s) {
  if (s.num_factors() != 1) j[key] = s.factors();
}

EuclideanSpace euclidean_from(int dim, const json& j, const char* key) {
  if (j.contains(key)) {
    auto s = EuclideanSpace::from_blocks(j.at(key).get<std::vector<int>>());
    if (s.dim() != dim) throw DimensionMismatch(std::string(key) + " do not add up to the dimension");
    return s;
  }
  return EuclideanSpace(dim);
}

void put_blocks(json& j, const char* key, const EuclideanSpace& s) {
  if (s.num_factors() != 1) j[key] = s.blocks();
}

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  auto data = j.get<std::vector<std::vector<double>>>();
  Eigen::Index r = static_cast<Eigen::Index>(data.size());
  Eigen::Index c = data.empty() ? (cols < 0 ? 0 : cols) : static_cast<Eigen::Index>(data.front().size());
  if (rows >= 0 && r != rows) throw DimensionMismatch("matrix has the wrong number of rows");
  if (cols >= 0 && c != cols) throw DimensionMismatch("matrix has the wrong number of columns");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(data[static_cast<std::size_t>(i)].size()) != c)
      throw DimensionMismatch("ragged matrix");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

json to_json(const FiniteDistd& d) {
  json j{{"support", space_labels(d.space())}, {"probs", to_json(Eigen::VectorXd(d.probs()))}};
  put_factors(j, "factors", d.space());
  return j;
}

json to_json(const FiniteChanneld& c) {
  json j{{"domain", space_labels(c.domain())},
         {"codomain", space_labels(c.codomain())},
         {"rows", to_json(Eigen::MatrixXd(c.rows()))}};
  put_factors(j, "domain_factors", c.domain());
  put_factors(j, "codomain_factors", c.codomain());
  return j;
}

json to_json(const GaussianStated& s) {
  json j{{"mean", to_json(s.mean())}, {"cov", to_json(s.cov())}};
  put_blocks(j, "blocks", s.space());
  return j;
}

json to_json(const GaussianChanneld& c) {
  json j{{"weight", to_json(c.weight())},
         {"bias", to_json(c.bias())},
         {"noise", to_json(c.noise())},
         {"domain_dim", c.domain().dim()},
         {"codomain_dim", c.codomain().dim()}};
  put_blocks(j, "domain_blocks", c.domain());
  put_blocks(j, "codomain_blocks", c.codomain());
  return j;
}

json to_json(const State& s) {
  return std::visit([](const auto& x) { return to_json(x); }, s);
}

json to_json(const Channel& c) {
  return std::visit([](const auto& x) { return to_json(x); }, c);
}

FiniteDistd finite_dist_from_json(const json& j) {
  const json* factors = j.contains("factors") ? &j.at("factors") : nullptr;
  FiniteSpace s = space_from(j.at("support"), factors);
  if (factors != nullptr && s.labels() != j.at("support").get<std::vector<std::string>>())
    throw DimensionMismatch("support labels disagree with factors");
  return FiniteDistd(s, vector_from_json(j.at("probs")));
}

FiniteChanneld finite_channel_from_json(const json& j) {
  FiniteSpace dom = space_from(j.at("domain"), j.contains("domain_factors") ? &j.at("domain_factors") : nullptr);
  FiniteSpace cod =
      space_from(j.at("codomain"), j.contains("codomain_factors") ? &j.at("codomain_factors") : nullptr);
  return FiniteChanneld(dom, cod,
                        matrix_from_json(j.at("rows"), static_cast<Eigen::Index>(dom.size()),
                                         static_cast<Eigen::Index>(cod.size())));
}

GaussianStated gaussian_state_from_json(const json& j) {
  Eigen::VectorXd mean = vector_from_json(j.at("mean"));
  auto n = mean.size();
  return GaussianStated(euclidean_from(static_cast<int>(n), j, "blocks"), mean, matrix_from_json(j.at("cov"), n, n));
}

GaussianChanneld gaussian_channel_from_json(const json& j) {
  Eigen::VectorXd bias = vector_from_json(j.at("bias"));
  int m = j.contains("codomain_dim") ? j.at("codomain_dim").get<int>() : static_cast<int>(bias.size());
  Eigen::MatrixXd w = j.contains("domain_dim") ? matrix_from_json(j.at("weight"), m, j.at("domain_dim").get<int>())
                                               : matrix_from_json(j.at("weight"), m);
  int n = static_cast<int>(w.cols());
  return GaussianChanneld(euclidean_from(n, j, "domain_blocks"), euclidean_from(m, j, "codomain_blocks"), w, bias,
                          matrix_from_json(j.at("noise"), m, m));
}

State state_from_json(const json& j) {
  if (j.contains("probs")) return finite_dist_from_json(j);
  if (j.contains("mean")) return gaussian_state_from_json(j);
  throw Error("state JSON needs either 'probs' or 'mean'");
}

Channel channel_from_json(const json& j) {
  if (j.contains("rows")) return finite_channel_from_json(j);
  if (j.contains("weight")) return gaussian_channel_from_json(j);
  throw Error("channel JSON needs either 'rows' or 'weight'");
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace cyber
