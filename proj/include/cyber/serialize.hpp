#pragma once

// JSON forms of the probability types.
//   FiniteDist      {"support": [...], "probs": [...]}
//   FiniteChannel   {"domain": [...], "codomain": [...], "rows": [[...], ...]}
//   GaussianState   {"mean": [...], "cov": [[...], ...]}
//   GaussianChannel {"weight": [[...]], "bias": [...], "noise": [[...]],
//                    "domain_dim": n, "codomain_dim": m}
// Product spaces add "factors" (finite) or "blocks" (Gaussian) entries.
// Doubles are printed in shortest round-trip form, so parse(print(x)) == x
// bit for bit.

#include <string>

#include "json.hpp"

#include "cyber/prob.hpp"

namespace cyber {

using json = nlohmann::json;

json to_json(const FiniteDistd& d);
json to_json(const FiniteChanneld& c);
json to_json(const GaussianStated& s);
json to_json(const GaussianChanneld& c);
json to_json(const State& s);
json to_json(const Channel& c);

FiniteDistd finite_dist_from_json(const json& j);
FiniteChanneld finite_channel_from_json(const json& j);
GaussianStated gaussian_state_from_json(const json& j);
GaussianChanneld gaussian_channel_from_json(const json& j);
State state_from_json(const json& j);
Channel channel_from_json(const json& j);

json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows = -1, Eigen::Index cols = -1);

/// 17 significant digits, for CSV output.
std::string format_double(double x);

}  // namespace cyber
