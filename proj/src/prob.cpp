#include "cyber/prob.hpp"

namespace cyber {

namespace {

template <typename F, typename G>
auto dispatch2(const Channel& a, const Channel& b, F&& finite, G&& gaussian, const char* what) {
  if (a.index() != b.index()) throw BackendMismatch(std::string(what) + ": mixed finite and Gaussian channels");
  if (const auto* fa = std::get_if<FiniteChanneld>(&a)) return finite(*fa, std::get<FiniteChanneld>(b));
  return gaussian(std::get<GaussianChanneld>(a), std::get<GaussianChanneld>(b));
}

void require_same_backend(const Channel& c, const State& s, const char* what) {
  if (c.index() != s.index()) throw BackendMismatch(std::string(what) + ": channel and state use different backends");
}

}  // namespace

Space space_of(const State& s) {
  return std::visit([](const auto& x) -> Space { return x.space(); }, s);
}

Space domain_of(const Channel& c) {
  return std::visit([](const auto& x) -> Space { return x.domain(); }, c);
}

Space codomain_of(const Channel& c) {
  return std::visit([](const auto& x) -> Space { return x.codomain(); }, c);
}

bool is_finite(const State& s) { return std::holds_alternative<FiniteDistd>(s); }
bool is_finite(const Channel& c) { return std::holds_alternative<FiniteChanneld>(c); }

Channel identity_channel(const Space& s) {
  return std::visit(
      overloaded{[](const FiniteSpace& f) -> Channel { return FiniteChanneld::identity(f); },
                 [](const EuclideanSpace& e) -> Channel { return GaussianChanneld::identity(e); }},
      s);
}

Channel discard_channel(const Space& s) {
  return std::visit(overloaded{[](const FiniteSpace& f) -> Channel { return FiniteChanneld::discard(f); },
                               [](const EuclideanSpace& e) -> Channel { return GaussianChanneld::discard(e); }},
                    s);
}

Channel constant_channel(const Space& domain, const State& out) {
  if (domain.index() != out.index()) throw BackendMismatch("constant_channel: mixed backends");
  if (const auto* f = std::get_if<FiniteDistd>(&out))
    return FiniteChanneld::constant(std::get<FiniteSpace>(domain), *f);
  return GaussianChanneld::constant(std::get<EuclideanSpace>(domain), std::get<GaussianStated>(out));
}

Channel state_channel(const State& s) {
  return std::visit(overloaded{[](const FiniteDistd& f) -> Channel { return FiniteChanneld::from_state(f); },
                               [](const GaussianStated& g) -> Channel { return GaussianChanneld::from_state(g); }},
                    s);
}

State channel_state(const Channel& c) {
  return std::visit(overloaded{[](const FiniteChanneld& f) -> State {
                                 if (!f.domain().is_unit()) throw DimensionMismatch("channel_state: domain is not I");
                                 return f.row(0);
                               },
                               [](const GaussianChanneld& g) -> State {
                                 if (g.domain().dim() != 0) throw DimensionMismatch("channel_state: domain is not I");
                                 return g.at(Eigen::VectorXd::Zero(0));
                               }},
                    c);
}

Channel projection(const Space& s, std::size_t first, std::size_t count) {
  return std::visit(
      overloaded{[&](const FiniteSpace& f) -> Channel { return projection<double>(f, first, count); },
                 [&](const EuclideanSpace& e) -> Channel { return projection<double>(e, first, count); }},
      s);
}

State pushforward(const Channel& c, const State& pi) {
  require_same_backend(c, pi, "pushforward");
  if (const auto* f = std::get_if<FiniteChanneld>(&c)) return pushforward(*f, std::get<FiniteDistd>(pi));
  return pushforward(std::get<GaussianChanneld>(c), std::get<GaussianStated>(pi));
}

Channel compose(const Channel& d, const Channel& c) {
  return dispatch2(
      d, c, [](const FiniteChanneld& x, const FiniteChanneld& y) -> Channel { return compose(x, y); },
      [](const GaussianChanneld& x, const GaussianChanneld& y) -> Channel { return compose(x, y); }, "compose");
}

Channel tensor(const Channel& c1, const Channel& c2) {
  return dispatch2(
      c1, c2, [](const FiniteChanneld& x, const FiniteChanneld& y) -> Channel { return tensor(x, y); },
      [](const GaussianChanneld& x, const GaussianChanneld& y) -> Channel { return tensor(x, y); }, "tensor");
}

State tensor(const State& s1, const State& s2) {
  if (s1.index() != s2.index()) throw BackendMismatch("tensor: mixed finite and Gaussian states");
  if (const auto* f = std::get_if<FiniteDistd>(&s1)) return tensor(*f, std::get<FiniteDistd>(s2));
  return tensor(std::get<GaussianStated>(s1), std::get<GaussianStated>(s2));
}

Channel bayes_inverse(const Channel& c, const State& pi) {
  require_same_backend(c, pi, "bayes_inverse");
  if (const auto* f = std::get_if<FiniteChanneld>(&c)) return bayes_inverse(*f, std::get<FiniteDistd>(pi));
  return bayes_inverse(std::get<GaussianChanneld>(c), std::get<GaussianStated>(pi));
}

State marginal(const State& pi, std::size_t first, std::size_t count) {
  return std::visit([&](const auto& s) -> State { return marginal(s, first, count); }, pi);
}

double kl(const State& p, const State& q) {
  if (p.index() != q.index()) throw BackendMismatch("kl: mixed finite and Gaussian states");
  if (const auto* f = std::get_if<FiniteDistd>(&p)) return kl(*f, std::get<FiniteDistd>(q));
  return kl(std::get<GaussianStated>(p), std::get<GaussianStated>(q));
}

double almost_equal_gap(const Channel& f1, const Channel& f2, const State& ref) {
  require_same_backend(f1, ref, "almost_equal");
  return dispatch2(
      f1, f2,
      [&](const FiniteChanneld& a, const FiniteChanneld& b) {
        return worst_supported_tv(a, b, std::get<FiniteDistd>(ref));
      },
      [&](const GaussianChanneld& a, const GaussianChanneld& b) {
        return worst_supported_gap(a, b, std::get<GaussianStated>(ref));
      },
      "almost_equal");
}

bool almost_equal(const Channel& f1, const Channel& f2, const State& ref, double tol) {
  return almost_equal_gap(f1, f2, ref) <= tol;
}

}  // namespace cyber
