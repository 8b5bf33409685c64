#include "cyber/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "cyber/serialize.hpp"

namespace cyber {

namespace {

Vec concat(std::initializer_list<Vec> parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vec out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

Space unit_like(const Space& s) {
  if (std::holds_alternative<FiniteSpace>(s)) return FiniteSpace::unit();
  return EuclideanSpace::unit();
}

// Tensor of several spaces. Spaces without coordinates never force a
// backend; a genuine mix of finite and Euclidean factors is flattened to
// plain coordinates.
Space joint_space(const std::vector<Space>& spaces) {
  std::optional<Space> out;
  bool mixed = false;
  int total = 0;
  for (const auto& s : spaces) {
    total += coord_dim(s);
    if (coord_dim(s) == 0) continue;
    if (!out) {
      out = s;
    } else if (out->index() != s.index()) {
      mixed = true;
    } else {
      out = tensor(*out, s);
    }
  }
  if (mixed) return EuclideanSpace(total);
  if (!out) return spaces.empty() ? Space(FiniteSpace::unit()) : unit_like(spaces.front());
  return *out;
}

std::vector<Vec> split_coords(const Vec& z, const std::vector<int>& dims) {
  std::vector<Vec> out;
  Eigen::Index at = 0;
  for (int d : dims) {
    out.push_back(z.segment(at, d));
    at += d;
  }
  return out;
}

void check_size(const Vec& v, const Space& s, const std::string& what) {
  if (v.size() != coord_dim(s))
    throw DimensionMismatch(what + ": expected " + std::to_string(coord_dim(s)) + " coordinates, got " +
                            std::to_string(v.size()));
}

Space rest_after(const Space& whole, const Space& head) {
  if (const auto* f = std::get_if<FiniteSpace>(&whole)) {
    std::size_t k = num_factors(head);
    return f->slice(k, f->num_factors() - k);
  }
  return EuclideanSpace(coord_dim(whole) - coord_dim(head));
}

std::vector<std::string> default_labels(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

int coord_dim(const Space& s) {
  if (const auto* f = std::get_if<FiniteSpace>(&s)) return static_cast<int>(f->num_factors());
  return std::get<EuclideanSpace>(s).dim();
}

std::size_t flat_index(const FiniteSpace& s, const Vec& coords) {
  if (coords.size() != static_cast<Eigen::Index>(s.num_factors()))
    throw DimensionMismatch("flat_index: coordinate count != factor count");
  std::vector<std::size_t> c(s.num_factors());
  for (std::size_t k = 0; k < c.size(); ++k) {
    double v = coords(static_cast<Eigen::Index>(k));
    if (!(v >= 0) || v != std::floor(v)) throw DimensionMismatch("flat_index: coordinate is not an index");
    c[k] = static_cast<std::size_t>(v);
  }
  return s.join(c);
}

Vec coords_of(const FiniteSpace& s, std::size_t index) {
  auto c = s.split(index);
  Vec out(static_cast<Eigen::Index>(c.size()));
  for (std::size_t k = 0; k < c.size(); ++k) out(static_cast<Eigen::Index>(k)) = static_cast<double>(c[k]);
  return out;
}

// ---------------------------------------------------------------------------

DynSystem::DynSystem(std::string name, Space state, Space input, Space output, Readout readout, Sampler sampler,
                     Exact exact, bool deterministic)
    : name_(std::move(name)),
      state_(std::move(state)),
      input_(std::move(input)),
      output_(std::move(output)),
      readout_(std::move(readout)),
      sampler_(std::move(sampler)),
      exact_(std::move(exact)),
      deterministic_(deterministic) {
  if (!readout_ || !sampler_) throw Error("system '" + name_ + "' needs a readout and an update");
  if (exact_ && !std::holds_alternative<FiniteSpace>(state_) && coord_dim(state_) != 0)
    throw Error("system '" + name_ + "': exact updates need a finite state space");
}

DynSystem DynSystem::from_channel(std::string name, const Channel& update, Space output, Readout readout) {
  if (const auto* c = std::get_if<FiniteChanneld>(&update)) {
    FiniteSpace s = c->codomain();
    const FiniteSpace& dom = c->domain();
    if (dom.num_factors() < s.num_factors() || !(dom.slice(0, s.num_factors()) == s))
      throw DimensionMismatch("from_channel: domain must start with the state space");
    FiniteSpace a = dom.slice(s.num_factors(), dom.num_factors() - s.num_factors());
    auto chan = *c;
    Sampler sampler = [chan, s](const Vec& st, const Vec& in, Rng& rng) {
      return coords_of(s, sample(chan, flat_index(chan.domain(), concat({st, in})), rng));
    };
    Exact exact = [chan](const Vec& st, const Vec& in) -> Eigen::VectorXd {
      return chan.rows().row(static_cast<Eigen::Index>(flat_index(chan.domain(), concat({st, in})))).transpose();
    };
    return DynSystem(std::move(name), s, a, std::move(output), std::move(readout), sampler, exact);
  }
  const auto& g = std::get<GaussianChanneld>(update);
  int ds = g.codomain().dim();
  if (g.domain().dim() < ds) throw DimensionMismatch("from_channel: domain must start with the state space");
  Sampler sampler = [g](const Vec& st, const Vec& in, Rng& rng) { return sample(g, concat({st, in}), rng); };
  bool det = g.noise().size() == 0 || g.noise().cwiseAbs().maxCoeff() == 0.0;
  return DynSystem(std::move(name), g.codomain(), EuclideanSpace(g.domain().dim() - ds), std::move(output),
                   std::move(readout), sampler, {}, det);
}

DynSystem DynSystem::from_map(std::string name, Space state, Space input, Space output, Readout readout, Map map) {
  Sampler sampler = [map](const Vec& s, const Vec& a, Rng&) { return map(s, a); };
  Exact exact;
  if (const auto* f = std::get_if<FiniteSpace>(&state)) {
    FiniteSpace fs = *f;
    exact = [map, fs](const Vec& s, const Vec& a) -> Eigen::VectorXd {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fs.size()));
      d(static_cast<Eigen::Index>(flat_index(fs, map(s, a)))) = 1.0;
      return d;
    };
  }
  return DynSystem(std::move(name), std::move(state), std::move(input), std::move(output), std::move(readout),
                   sampler, exact, true);
}

Vec DynSystem::readout(const Vec& s) const {
  check_size(s, state_, name_ + " readout");
  Vec out = readout_(s);
  check_size(out, output_, name_ + " output");
  return out;
}

Vec DynSystem::next(const Vec& s, const Vec& a, Rng& rng) const {
  check_size(s, state_, name_ + " state");
  check_size(a, input_, name_ + " input");
  Vec out = sampler_(s, a, rng);
  check_size(out, state_, name_ + " next state");
  return out;
}

Eigen::VectorXd DynSystem::next_distribution(const Vec& s, const Vec& a) const {
  if (!exact_) throw Error("system '" + name_ + "' has no exact update");
  check_size(s, state_, name_ + " state");
  check_size(a, input_, name_ + " input");
  if (coord_dim(state_) == 0) return Eigen::VectorXd::Ones(1);
  return exact_(s, a);
}

DynSystem memoryless_system(std::string name, const Space& input, const Space& output,
                            std::function<Vec(const Vec&)> f) {
  return DynSystem::from_map(
      std::move(name), output, input, output, [](const Vec& s) { return s; },
      [f](const Vec&, const Vec& a) { return f(a); });
}

DynSystem noop_system(const Space& a) {
  return memoryless_system("noop", a, a, [](const Vec& x) { return x; });
}

DynSystem constant_system(const Space& output, Vec value) {
  if (value.size() != coord_dim(output)) throw DimensionMismatch("constant_system: value size != output size");
  Space unit = unit_like(output);
  return DynSystem(
      "constant", unit, unit, output, [value](const Vec&) { return value; },
      [](const Vec&, const Vec&, Rng&) { return Vec(); }, [](const Vec&, const Vec&) { return Eigen::VectorXd::Ones(1); },
      true);
}

DynSystem wire(std::string name, std::vector<DynSystem> parts, Space input, Space output, Router route,
               Emitter emit) {
  std::vector<Space> states;
  std::vector<int> dims;
  bool exact = true, det = true;
  for (const auto& p : parts) {
    states.push_back(p.state());
    dims.push_back(coord_dim(p.state()));
    exact = exact && (p.has_exact() || coord_dim(p.state()) == 0);
    det = det && p.is_deterministic();
  }
  Space state = joint_space(states);
  exact = exact && std::holds_alternative<FiniteSpace>(state);

  auto readouts = [parts, dims](const Vec& z) {
    auto s = split_coords(z, dims);
    std::vector<Vec> r;
    for (std::size_t i = 0; i < parts.size(); ++i) r.push_back(parts[i].readout(s[i]));
    return r;
  };
  auto inputs = [parts, route](const Vec& a, const std::vector<Vec>& r) {
    auto in = route(a, r);
    if (in.size() != parts.size()) throw DimensionMismatch("wire: router returned the wrong number of inputs");
    return in;
  };

  DynSystem::Readout ro = [readouts, emit](const Vec& z) { return emit(readouts(z)); };
  DynSystem::Sampler sampler = [parts, dims, readouts, inputs](const Vec& z, const Vec& a, Rng& rng) {
    auto s = split_coords(z, dims);
    auto in = inputs(a, readouts(z));
    Vec out(z.size());
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      out.segment(at, dims[i]) = parts[i].next(s[i], in[i], rng);
      at += dims[i];
    }
    return out;
  };
  DynSystem::Exact ex;
  if (exact) {
    ex = [parts, dims, readouts, inputs](const Vec& z, const Vec& a) -> Eigen::VectorXd {
      auto s = split_coords(z, dims);
      auto in = inputs(a, readouts(z));
      Eigen::VectorXd d = Eigen::VectorXd::Ones(1);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (dims[i] == 0) continue;
        Eigen::MatrixXd k = kronecker<double>(d, parts[i].next_distribution(s[i], in[i]));
        d = k.col(0);
      }
      return d;
    };
  }
  return DynSystem(std::move(name), state, std::move(input), std::move(output), ro, sampler, ex, det);
}

DynSystem compose_dyn(const DynSystem& f, const DynSystem& g) {
  if (!compatible(f.output(), g.input()))
    throw DimensionMismatch("compose_dyn: " + describe(f.output()) + " does not feed " + describe(g.input()));
  return wire(
      f.name() + ";" + g.name(), {f, g}, f.input(), g.output(),
      [](const Vec& a, const std::vector<Vec>& r) { return std::vector<Vec>{a, r[0]}; },
      [](const std::vector<Vec>& r) { return r[1]; });
}

DynSystem tensor_dyn(const DynSystem& f, const DynSystem& g) {
  int df = coord_dim(f.input());
  return wire(
      f.name() + "*" + g.name(), {f, g}, joint_space({f.input(), g.input()}), joint_space({f.output(), g.output()}),
      [df](const Vec& a, const std::vector<Vec>&) {
        return std::vector<Vec>{a.head(df), a.tail(a.size() - df)};
      },
      [](const std::vector<Vec>& r) { return concat({r[0], r[1]}); });
}

// ---------------------------------------------------------------------------

DynLens::DynLens(DynSystem f, DynSystem b, Space m) : forward(std::move(f)), backward(std::move(b)), residual(std::move(m)) {
  if (coord_dim(forward.output()) < coord_dim(residual) || coord_dim(backward.input()) < coord_dim(residual))
    throw DimensionMismatch("DynLens: residual does not fit the forward output or backward input");
}

Space DynLens::y() const { return rest_after(forward.output(), residual); }
Space DynLens::b() const { return rest_after(backward.input(), residual); }

DynLens identity_dyn_lens(const Space& x, const Space& a) {
  return DynLens(noop_system(x), noop_system(a), unit_like(x));
}

DynLens compose_dyn_lens(const DynLens& g, const DynLens& f) {
  if (!compatible(f.y(), g.x())) throw DimensionMismatch("compose_dyn_lens: forward wires do not match");
  if (!compatible(g.a(), f.b())) throw DimensionMismatch("compose_dyn_lens: backward wires do not match");
  int mf = coord_dim(f.residual), mg = coord_dim(g.residual);
  Space m = joint_space({f.residual, g.residual});
  DynSystem fwd = wire(
      "(" + f.forward.name() + ";" + g.forward.name() + ")", {f.forward, g.forward}, f.x(),
      joint_space({f.residual, g.residual, g.y()}),
      [mf](const Vec& a, const std::vector<Vec>& r) {
        return std::vector<Vec>{a, r[0].tail(r[0].size() - mf)};
      },
      [mf, mg](const std::vector<Vec>& r) { return concat({r[0].head(mf), r[1].head(mg), r[1].tail(r[1].size() - mg)}); });
  DynSystem bwd = wire(
      "(" + g.backward.name() + ";" + f.backward.name() + ")", {g.backward, f.backward},
      joint_space({f.residual, g.residual, g.b()}), f.a(),
      [mf, mg](const Vec& in, const std::vector<Vec>& r) {
        Vec c = in.tail(in.size() - mf - mg);
        return std::vector<Vec>{concat({in.segment(mf, mg), c}), concat({in.head(mf), r[0]})};
      },
      [](const std::vector<Vec>& r) { return r[1]; });
  return DynLens(fwd, bwd, m);
}

DynContext::DynContext(DynSystem a, DynSystem r, Space m)
    : autonomous(std::move(a)), responder(std::move(r)), residual(std::move(m)) {
  if (coord_dim(autonomous.input()) != 0) throw DimensionMismatch("DynContext: the emitter must have unit input");
}

ClosedSystem autonomous(const DynSystem& sys, std::vector<std::string> state_labels,
                        std::vector<std::string> observable_labels) {
  if (coord_dim(sys.input()) != 0) throw DimensionMismatch("autonomous: system has a non-trivial input");
  if (state_labels.empty()) state_labels = default_labels("z", coord_dim(sys.state()));
  if (observable_labels.empty()) observable_labels = default_labels("o", coord_dim(sys.output()));
  if (state_labels.size() != static_cast<std::size_t>(coord_dim(sys.state())) ||
      observable_labels.size() != static_cast<std::size_t>(coord_dim(sys.output())))
    throw DimensionMismatch("autonomous: label count mismatch");
  return ClosedSystem{sys, std::move(state_labels), std::move(observable_labels)};
}

ClosedSystem close(const DynLens& lens, const DynContext& ctx) {
  int dx = coord_dim(lens.x()), dmc = coord_dim(ctx.residual), dm = coord_dim(lens.residual);
  int dy = coord_dim(lens.y()), db = coord_dim(lens.b());
  if (coord_dim(ctx.autonomous.output()) != dx + dmc)
    throw DimensionMismatch("close: context emitter does not produce X (x) M");
  if (coord_dim(ctx.responder.input()) != dy + dmc || coord_dim(ctx.responder.output()) != db)
    throw DimensionMismatch("close: context responder does not map Y (x) M to B");

  Space obs = joint_space({lens.x(), ctx.residual, lens.residual, lens.y(), lens.b(), lens.a()});
  DynSystem sys = wire(
      "closed", {ctx.autonomous, lens.forward, ctx.responder, lens.backward}, unit_like(lens.x()), obs,
      [dx, dm](const Vec&, const std::vector<Vec>& r) {
        Vec x = r[0].head(dx), mc = r[0].tail(r[0].size() - dx);
        Vec m = r[1].head(dm), y = r[1].tail(r[1].size() - dm);
        return std::vector<Vec>{Vec(), x, concat({y, mc}), concat({m, r[2]})};
      },
      [](const std::vector<Vec>& r) { return concat({r[0], r[1], r[2], r[3]}); });

  std::vector<std::string> states;
  const std::vector<const DynSystem*> parts{&ctx.autonomous, &lens.forward, &ctx.responder, &lens.backward};
  const char* tags[] = {"ctx", "fwd", "resp", "bwd"};
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (const auto& l : default_labels(std::string(tags[i]) + ".s", coord_dim(parts[i]->state()))) states.push_back(l);
  std::vector<std::string> labels;
  const std::pair<const char*, int> wires[] = {{"x", dx}, {"mctx", dmc}, {"m", dm},
                                               {"y", dy}, {"b", db},     {"a", coord_dim(lens.a())}};
  for (const auto& [tag, n] : wires)
    for (const auto& l : default_labels(std::string(tag), n)) labels.push_back(l);
  return ClosedSystem{sys, std::move(states), std::move(labels)};
}

// ---------------------------------------------------------------------------

StepResult step(const ClosedSystem& sys, const Vec& z, Rng& rng) {
  Vec obs = sys.system.readout(z);
  return {sys.system.next(z, Vec(), rng), obs};
}

FiniteChanneld total_kernel(const ClosedSystem& sys) {
  const auto* fs = std::get_if<FiniteSpace>(&sys.system.state());
  if (!fs || !sys.system.has_exact()) throw Error("total_kernel: system has no exact finite update");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(fs->size()), static_cast<Eigen::Index>(fs->size()));
  for (std::size_t i = 0; i < fs->size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) = sys.system.next_distribution(coords_of(*fs, i), Vec()).transpose();
  return FiniteChanneld(*fs, *fs, rows);
}

Eigen::VectorXd propagate(const ClosedSystem& sys, const Eigen::VectorXd& dist) {
  auto k = total_kernel(sys);
  if (dist.size() != k.rows().rows()) throw DimensionMismatch("propagate: distribution size != state count");
  return k.rows().transpose() * dist;
}

Trajectory run(const ClosedSystem& sys, const Vec& z0, std::size_t steps, std::uint64_t seed) {
  Trajectory t;
  t.seed = seed;
  t.state_labels = sys.state_labels;
  t.observable_labels = sys.observable_labels;
  Rng rng(seed);
  Vec z = z0;
  for (std::size_t i = 0; i < steps; ++i) {
    auto r = step(sys, z, rng);
    t.states.push_back(z);
    t.observables.push_back(r.observables);
    z = r.next;
  }
  t.states.push_back(z);
  t.observables.push_back(sys.observe(z));
  return t;
}

std::string Trajectory::to_csv() const {
  std::ostringstream out;
  out << "step";
  for (const auto* labels : {&state_labels, &observable_labels, &extra_labels})
    for (const auto& l : *labels) out << ',' << l;
  out << '\n';
  for (std::size_t t = 0; t < states.size(); ++t) {
    out << t;
    auto put = [&](const Vec& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
    };
    put(states[t]);
    put(observables[t]);
    if (t < extras.size()) put(extras[t]);
    out << '\n';
  }
  return out.str();
}

std::optional<FixedPoint> find_fixed_point(const ClosedSystem& sys, const Vec& z0, const FixedPointOptions& o) {
  if (o.window == 0) throw Error("find_fixed_point: window must be positive");
  Rng rng(o.seed);
  Vec z = z0;
  if (o.exact) {
    const auto* fs = std::get_if<FiniteSpace>(&sys.system.state());
    if (!fs || !sys.system.has_exact()) throw Error("find_fixed_point: exact mode needs a finite exact system");
    for (std::size_t t = 0; t <= o.max_steps; ++t) {
      auto d = sys.system.next_distribution(z, Vec());
      if (d(static_cast<Eigen::Index>(flat_index(*fs, z))) >= 1.0 - o.eps) return FixedPoint{z, t};
      if (t < o.max_steps) z = sys.system.next(z, Vec(), rng);
    }
    return std::nullopt;
  }
  std::size_t calm = 0;
  for (std::size_t t = 1; t <= o.max_steps; ++t) {
    Vec n = sys.system.next(z, Vec(), rng);
    if (!n.allFinite()) return std::nullopt;
    double move = n.size() ? (n - z).cwiseAbs().maxCoeff() : 0.0;
    calm = move < o.eps ? calm + 1 : 0;
    z = std::move(n);
    if (calm >= o.window) return FixedPoint{z, t};
  }
  return std::nullopt;
}

}  // namespace cyber
