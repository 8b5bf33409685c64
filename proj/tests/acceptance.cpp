// Acceptance suite: one line per criterion, exit status 0 iff all pass.
//
// Reference values come from oracles written here with plain loops over
// std::vector, independent of the library's Eigen code paths.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cyber/realisation.hpp"

using namespace cyber;
namespace fs = std::filesystem;

namespace {

using Table = std::vector<std::vector<double>>;  // row-stochastic, [from][to]
using Probs = std::vector<double>;

// ---------------------------------------------------------------------------
// Oracles

Table matmul(const Table& a, const Table& b) {
  Table out(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[k].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Probs push(const Probs& p, const Table& c) {
  Probs out(c.front().size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += p[i] * c[i][j];
  return out;
}

// Posterior rows by Bayes' rule; rows of unsupported outcomes are left empty.
Table invert(const Table& c, const Probs& prior) {
  const Probs marg = push(prior, c);
  Table post(marg.size());
  for (std::size_t y = 0; y < marg.size(); ++y) {
    if (!(marg[y] > 1e-300)) continue;
    post[y].resize(prior.size());
    for (std::size_t x = 0; x < prior.size(); ++x) post[y][x] = prior[x] * c[x][y] / marg[y];
  }
  return post;
}

double tv(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

// sum_x data(x) sum_z q(z|x) [log q(z|x) - log c(x|z) - log prior(z)]
double kl_inference(const Table& c, const Table& q, const Probs& prior, const Table& k) {
  const Probs data = push(push(prior, c), k);
  double total = 0;
  for (std::size_t x = 0; x < data.size(); ++x) {
    if (data[x] <= 0) continue;
    double inner = 0;
    for (std::size_t z = 0; z < prior.size(); ++z) {
      const double qz = q[x][z];
      if (qz <= 0) continue;
      inner += qz * (std::log(qz) - std::log(c[z][x]) - std::log(prior[z]));
    }
    total += data[x] * inner;
  }
  return total;
}

Table identity_table(std::size_t n) {
  Table t(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) t[i][i] = 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// Random instances and conversions

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  std::size_t dim(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

  // Dirichlet(1) draw; with zero_prob each entry may be zeroed (one survives).
  Probs simplex(std::size_t n, double zero_prob = 0.0, double floor = 0.0) {
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution zero(zero_prob);
    Probs p(n);
    double s = 0;
    const std::size_t keep = dim(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = (i != keep && zero(rng)) ? 0.0 : e(rng) + floor;
      s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
  }

  Table channel(std::size_t n, std::size_t m, double zero_prob = 0.0) {
    Table t(n);
    for (auto& row : t) row = simplex(m, zero_prob);
    return t;
  }
};

FiniteDistd to_dist(const Probs& p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) v(static_cast<Eigen::Index>(i)) = p[i];
  return FiniteDistd(FiniteSpace::range(p.size()), v);
}

FiniteChanneld to_channel(const Table& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.front().size()));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[i][j];
  return FiniteChanneld(FiniteSpace::range(t.size()), FiniteSpace::range(t.front().size()), m);
}

Table to_table(const Channel& c) {
  const auto& m = std::get<FiniteChanneld>(c).rows();
  Table t(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return t;
}

double max_abs_diff(const Table& a, const Table& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  return worst;
}

// ---------------------------------------------------------------------------
// Reporting

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Exact lenses compose optically.

Outcome optical_bayes() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen gen(20241);
  const std::size_t trials = 10000;
  double worst = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t nx = gen.dim(1, 5), ny = gen.dim(1, 5), nz = gen.dim(1, 5);
    const Probs prior = gen.simplex(nx, 0.0, 1e-3);
    const Table c = gen.channel(nx, ny, 0.25), d = gen.channel(ny, nz, 0.25);
    const BayesLens lens = compose_lens(exact_lens_of(to_channel(d)), exact_lens_of(to_channel(c)));
    const Table got = to_table(lens.backward(State(to_dist(prior))));
    const Table want = invert(matmul(c, d), prior);
    for (std::size_t z = 0; z < nz; ++z)
      if (!want[z].empty()) worst = std::max(worst, tv(got[z], want[z]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs <= 60,
          std::to_string(trials) + " trials, worst tv " + fmt(worst) + " (tol 1e-9), " + fmt(secs) + " s (limit 60)"};
}

// ---------------------------------------------------------------------------
// 2. Identity and associativity of lens composition.

BayesLens random_lens(Gen& gen, std::size_t n, std::size_t m, bool exact) {
  const auto c = to_channel(gen.channel(n, m));
  if (exact) return exact_lens_of(c);
  return BayesLens(c, StateDependentChannel::constant(FiniteSpace::range(n), Channel(to_channel(gen.channel(m, n)))));
}

double lens_gap(const BayesLens& a, const BayesLens& b, const State& pi) {
  return std::max(max_abs_diff(to_table(a.forward()), to_table(b.forward())),
                  max_abs_diff(to_table(a.backward(pi)), to_table(b.backward(pi))));
}

Outcome lens_laws() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen gen(20242);
  const std::size_t triples = 1000;
  double worst_assoc = 0, worst_unit = 0;
  for (std::size_t t = 0; t < triples; ++t) {
    const std::size_t a = gen.dim(1, 5), b = gen.dim(1, 5), c = gen.dim(1, 5), d = gen.dim(1, 5);
    const bool exact = t % 2 == 0;
    const auto f = random_lens(gen, a, b, exact), g = random_lens(gen, b, c, exact), h = random_lens(gen, c, d, exact);
    const State pi(to_dist(gen.simplex(a, 0.0, 1e-3)));
    worst_assoc = std::max(worst_assoc, lens_gap(compose_lens(h, compose_lens(g, f)),
                                                 compose_lens(compose_lens(h, g), f), pi));
    const auto ia = identity_lens(FiniteSpace::range(a)), ib = identity_lens(FiniteSpace::range(b));
    worst_unit = std::max({worst_unit, lens_gap(compose_lens(f, ia), f, pi), lens_gap(compose_lens(ib, f), f, pi)});
  }
  const double secs = seconds_since(t0);
  return {worst_assoc <= 1e-12 && worst_unit <= 1e-12 && secs <= 30,
          std::to_string(triples) + " triples, associativity " + fmt(worst_assoc) + ", unit " + fmt(worst_unit) +
              " (tol 1e-12), " + fmt(secs) + " s (limit 30)"};
}

// ---------------------------------------------------------------------------
// 3. The exact inverse minimizes the KL inference objective; grid argmins
//    approach it as the grid refines.

struct GridResult {
  double min_minus_exact = 0;  // min over the grid of J(candidate) - J(exact)
  double argmin_tv = 0;        // worst row TV of the library argmin to the exact inverse
  double oracle_check = 0;     // worst |library table - oracle| on sampled entries
  bool argmin_agrees = true;   // library argmin is an oracle argmin
};

GridResult grid_run(const Table& c, const Probs& prior, double step) {
  const std::size_t nz = prior.size(), nx = c.front().size();
  const auto zs = FiniteSpace::range(nz), xs = FiniteSpace::range(nx);
  OpenGame game = make_inference_game(to_channel(c), constant_backward(stochastic_grid_family(xs, zs, step), zs),
                                      Divergence::kl());
  const Context ctx{to_dist(prior), identity_channel(xs)};
  const Table exact = invert(c, prior);
  const double j_exact = kl_inference(c, exact, prior, identity_table(nx));

  GridResult r;
  const auto table = game.objective_table(ctx);
  const auto& space = game.strategies();
  double best = INFINITY;
  for (std::size_t i = 0; i < table.size(); ++i) {
    best = std::min(best, table[i]);
    if (i % 997 == 0) {
      const Strategy s = space.at(i);
      Table q(nx, std::vector<double>(nz));
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t z = 0; z < nz; ++z) q[x][z] = s(static_cast<Eigen::Index>(x * nz + z));
      r.oracle_check = std::max(r.oracle_check, std::abs(table[i] - kl_inference(c, q, prior, identity_table(nx))));
    }
  }
  r.min_minus_exact = best - j_exact;

  // The library's argmin set, read off the table; on coarse grids it is also
  // checked against the game's own equilibria. The objective separates over
  // rows, so the oracle argmin is computed row by row.
  std::vector<Strategy> eq;
  for (auto i : argmin_ties(table)) eq.push_back(space.at(i));
  if (step >= 0.05) r.argmin_agrees = game.equilibria(ctx) == eq;
  for (const auto& s : eq) {
    for (std::size_t x = 0; x < nx; ++x) {
      std::vector<double> row(nz);
      for (std::size_t z = 0; z < nz; ++z) row[z] = s(static_cast<Eigen::Index>(x * nz + z));
      r.argmin_tv = std::max(r.argmin_tv, tv(row, exact[x]));
    }
  }
  const double oracle_best = [&] {
    double total = 0;
    const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / step));
    for (std::size_t x = 0; x < nx; ++x) {
      double row_best = INFINITY;
      std::vector<std::size_t> k(nz, 0);
      std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
        if (pos + 1 == nz) {
          k[pos] = left;
          double v = 0;
          for (std::size_t z = 0; z < nz; ++z) {
            const double qz = static_cast<double>(k[z]) * step;
            if (qz > 0) v += qz * (std::log(qz) - std::log(c[z][x]) - std::log(prior[z]));
          }
          row_best = std::min(row_best, v);
          return;
        }
        for (std::size_t i = 0; i <= left; ++i) {
          k[pos] = i;
          rec(pos + 1, left - i);
        }
      };
      rec(0, steps);
      total += push(prior, c)[x] * row_best;
    }
    return total;
  }();
  for (const auto& s : eq) r.argmin_agrees = r.argmin_agrees && std::abs(game.fitness(s, ctx) - oracle_best) <= 1e-9;
  return r;
}

// Per model, 0.05 and 0.02 grids are not nested, so a single model can get
// worse under refinement (an exact row of (0.65, 0.35) lies on the coarse grid
// only). The refinement claim is therefore checked on the worst case over a
// batch of random models fixed in advance; per-model results are reported.
Outcome exact_inverse_optimal() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen gen(20243);
  bool pass = true;
  std::ostringstream detail;
  // (latent atoms, observed atoms, models)
  for (auto [nz, nx, models] : std::vector<std::tuple<std::size_t, std::size_t, int>>{{2, 2, 20}, {2, 3, 20}, {3, 2, 4}}) {
    double worst_gap = INFINITY, coarse_tv = 0, fine_tv = 0, oracle = 0;
    int strict = 0;
    bool agree = true;
    for (int m = 0; m < models; ++m) {
      const Probs prior = gen.simplex(nz, 0.0, 0.2);
      Table c(nz);
      for (auto& row : c) row = gen.simplex(nx, 0.0, 0.2);
      const auto coarse = grid_run(c, prior, 0.05);
      const auto fine = grid_run(c, prior, 0.02);
      worst_gap = std::min({worst_gap, coarse.min_minus_exact, fine.min_minus_exact});
      coarse_tv = std::max(coarse_tv, coarse.argmin_tv);
      fine_tv = std::max(fine_tv, fine.argmin_tv);
      oracle = std::max({oracle, coarse.oracle_check, fine.oracle_check});
      agree = agree && coarse.argmin_agrees && fine.argmin_agrees;
      strict += fine.argmin_tv < coarse.argmin_tv ? 1 : 0;
    }
    pass = pass && worst_gap >= -1e-9 && fine_tv < coarse_tv && oracle <= 1e-12 && agree;
    detail << "(" << nz << "," << nx << ") x" << models << ": min gap " << fmt(worst_gap) << ", worst tv "
           << fmt(coarse_tv) << " -> " << fmt(fine_tv) << ", strict on " << strict << "/" << models << "; ";
  }
  detail << fmt(seconds_since(t0)) << " s";
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. VAE and KL inference objectives agree.

Outcome vae_inference() {
  Gen gen(20244);
  const std::size_t instances = 1000;
  double worst = 0, worst_oracle = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t nz = gen.dim(1, 5), nx = gen.dim(1, 5);
    const Probs prior = gen.simplex(nz, 0.0, 1e-3);
    const Table c = gen.channel(nz, nx), q = gen.channel(nx, nz, 0.25), k = gen.channel(nx, nx, 0.25);
    const auto zs = FiniteSpace::range(nz);
    const Context ctx{to_dist(prior), to_channel(k)};
    const auto back = StateDependentChannel::constant(zs, to_channel(q));
    const double vae = vae_objective(to_channel(c), back, ctx);
    const double inf = inference_objective(to_channel(c), back, Divergence::kl(), ctx);
    const double oracle = kl_inference(c, q, prior, k);
    worst = std::max(worst, std::abs(vae - inf));
    worst_oracle = std::max({worst_oracle, std::abs(vae - oracle), std::abs(inf - oracle)});
  }
  return {worst <= 1e-9 && worst_oracle <= 1e-9, std::to_string(instances) + " instances, |vae - inference| " +
                                                      fmt(worst) + ", vs oracle " + fmt(worst_oracle) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------
// 5. Conjugate Gaussian VAE realised by gradient descent.

Outcome conjugate_gaussian() {
  // z ~ N(m0, v0), x | z ~ N(z, v). The posterior is N(w x + b, s2) with
  // w = v0 / (v0 + v), b = m0 v / (v0 + v), s2 = v0 v / (v0 + v).
  const double m0 = 0, v0 = 1, v = 1;
  const double w = v0 / (v0 + v), b = m0 * v / (v0 + v), s2 = v0 * v / (v0 + v);
  const Eigen::Vector3d want(w, b, 0.5 * std::log(s2));

  GaussianChanneld c(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, v));
  OpenGame game = make_vae_game(singleton_family(c), constant_backward(linear_gaussian_family(1, 1), EuclideanSpace(1)));
  const Context ctx{GaussianStated(Eigen::VectorXd::Constant(1, m0), Eigen::MatrixXd::Constant(1, 1, v0)),
                    GaussianChanneld::identity(EuclideanSpace(1))};
  const RealiseOptions o{5000, 1e-9};
  const auto rep = cybernetic_check(Realisation{game, {}}, ctx, Eigen::Vector3d::Zero(), 1e-3, o);
  const bool converged = rep.run.status == RealiseStatus::Converged && rep.theta_star.has_value();
  const double err = converged ? (*rep.theta_star - want).cwiseAbs().maxCoeff() : INFINITY;
  return {converged && err <= 1e-3 && rep.run.steps <= 5000 && rep.status == CheckStatus::Pass,
          "fixed point after " + std::to_string(rep.run.steps) + " steps, sup error " + fmt(err) +
              " (tol 1e-3), check " + to_string(rep.status)};
}

// ---------------------------------------------------------------------------
// 6. Thermostat.

// Minimizer of the quadratic free energy: beliefs combine sensing and goal
// precisions, and the action trades the goal pull against its cost.
double oracle_action(const ThermostatConfig& c) {
  return (c.goal - c.x0) / (1 + c.action_cost * (c.sense_var + c.goal_var));
}

Outcome thermostat() {
  bool pass = true;
  std::ostringstream detail;
  ThermostatConfig def;
  for (auto fw : {Framework::FreeEnergy, Framework::DeepActiveInference}) {
    const auto rep = run_thermostat(def, fw);
    const bool ok = rep.check.run.status == RealiseStatus::Converged && rep.check.run.steps <= 500 &&
                    rep.goal_gap <= 0.5 && rep.check.status == CheckStatus::Pass &&
                    std::abs(rep.sensed_mean - (def.x0 + oracle_action(def))) <= 1e-3;
    pass = pass && ok;
    detail << (fw == Framework::FreeEnergy ? "fep" : "deep_ai") << ": gap " << fmt(rep.goal_gap) << " in "
           << rep.check.run.steps << " steps, check " << to_string(rep.check.status) << "; ";
  }
  ThermostatConfig quiet;
  quiet.env_noise_var = 0;
  quiet.action_cost = 0;
  const auto rep = run_thermostat(quiet);
  const bool ok = rep.check.run.status == RealiseStatus::Converged && rep.goal_gap <= quiet.realise.eps_fix &&
                  rep.check.status == CheckStatus::Pass;
  pass = pass && ok;
  detail << "noiseless: gap " << fmt(rep.goal_gap) << " (eps_fix " << fmt(quiet.realise.eps_fix) << ")";
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. Analytic gradients against central differences.

Eigen::VectorXd central_difference(const std::function<double(const Strategy&)>& f, const Strategy& s, double h) {
  Eigen::VectorXd g(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    Strategy up = s, down = s;
    up(i) += h;
    down(i) -= h;
    g(i) = (f(up) - f(down)) / (2 * h);
  }
  return g;
}

double rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / std::max(1.0, std::abs(numeric(i))));
  return worst;
}

Outcome gradients() {
  std::mt19937_64 rng(20247);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  std::vector<std::pair<std::string, double>> worst;
  auto check = [&](const std::string& family, const OpenGame& game, const Context& ctx, const Strategy& s) {
    if (worst.empty() || worst.back().first != family) worst.emplace_back(family, 0.0);
    const auto f = [&](const Strategy& v) { return game.fitness(v, ctx); };
    worst.back().second = std::max(worst.back().second, rel_error(game.gradient(s, ctx), central_difference(f, s, 1e-5)));
  };
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd l = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return 0.5 * n(rng); });
    GaussianChanneld c(Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return n(rng); }),
                       Eigen::VectorXd::NullaryExpr(2, [&] { return n(rng); }),
                       l * l.transpose() + 0.5 * Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd pl = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return 0.5 * n(rng); });
    GaussianStated prior(Eigen::VectorXd::NullaryExpr(2, [&] { return n(rng); }),
                         pl * pl.transpose() + 0.5 * Eigen::MatrixXd::Identity(2, 2));
    GaussianChanneld k(Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return 0.5 * n(rng); }),
                       Eigen::VectorXd::NullaryExpr(2, [&] { return n(rng); }), 0.3 * Eigen::MatrixXd::Identity(2, 2));
    OpenGame game =
        make_vae_game(singleton_family(c), constant_backward(linear_gaussian_family(2, 2), EuclideanSpace(2)));
    check("gaussian vae", game, Context{prior, k}, Eigen::VectorXd::NullaryExpr(8, [&] { return u(rng); }));
  }
  for (int t = 0; t < 100; ++t) {
    GaussianChanneld c(Eigen::MatrixXd::Constant(1, 1, n(rng)), Eigen::VectorXd::Constant(1, n(rng)),
                       Eigen::MatrixXd::Constant(1, 1, 0.3 + std::abs(n(rng))));
    OpenGame game = make_inference_game(c, constant_backward(linear_gaussian_family(1, 1), EuclideanSpace(1)),
                                        Divergence::kl());
    const Context ctx{GaussianStated(Eigen::VectorXd::Constant(1, n(rng)), Eigen::MatrixXd::Constant(1, 1, 0.5 + std::abs(n(rng)))),
                      GaussianChanneld::identity(EuclideanSpace(1))};
    check("gaussian kl inference", game, ctx, Eigen::Vector3d(n(rng), n(rng), 0.5 * n(rng)));
  }
  Gen gen(20248);
  for (int t = 0; t < 100; ++t) {
    const std::size_t nz = gen.dim(2, 4), nx = gen.dim(2, 4);
    const auto zs = FiniteSpace::range(nz), xs = FiniteSpace::range(nx);
    Table c(nz);
    for (auto& row : c) row = gen.simplex(nx, 0.0, 0.05);
    OpenGame game = make_inference_game(to_channel(c), constant_backward(softmax_family(xs, zs), zs), Divergence::kl());
    const Context ctx{to_dist(gen.simplex(nz, 0.0, 0.05)), Channel(to_channel(gen.channel(nx, nx)))};
    check("softmax inference", game, ctx,
          Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(nx * nz), [&] { return n(rng); }));
  }
  std::uniform_real_distribution<double> mu(10, 30), logt(-2, 1), act(-5, 10);
  for (int levels : {1, 2}) {
    ThermostatConfig cfg;
    cfg.levels = levels;
    const auto game = active_inference_game(thermostat_setup(cfg), FactorObjective::Autoencoder);
    const auto ctx = thermostat_context(cfg);
    for (int t = 0; t < 100; ++t)
      check("thermostat " + std::to_string(levels) + "-level", game, ctx, Eigen::Vector3d(mu(rng), logt(rng), act(rng)));
  }
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [family, err] : worst) {
    pass = pass && err <= 1e-4;
    detail << family << " " << fmt(err) << "; ";
  }
  detail << "100 points each (tol 1e-4)";
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 8. CLI determinism.

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CYBER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("cyber_acceptance_" + std::to_string(::getpid()));
  const fs::path cfg = CYBER_CONFIG_DIR;
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"verify --trials 2000 --seed 11", {"report.json"}},
      {"realise " + (cfg / "conjugate_vae.json").string() + " --seed 11", {"report.json", "trajectory.csv"}},
      {"thermostat --seed 11", {"report.json", "trajectory.csv"}},
      {"thermostat --framework deep_ai --seed 11", {"report.json", "trajectory.csv"}},
      {"game " + (cfg / "inference_grid.json").string() + " --table --seed 11", {"report.json", "objective_table.csv"}}};
  std::size_t compared = 0, differing = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<fs::path> dirs;
    std::vector<int> codes;
    for (const char* workers : {"1", "1", "4"}) {
      dirs.push_back(root / (std::to_string(i) + "_" + std::to_string(dirs.size())));
      fs::remove_all(dirs.back());
      codes.push_back(run_cli(runs[i].first + " --workers " + workers + " --out " + dirs.back().string()));
    }
    for (const auto& f : runs[i].second) {
      const std::string ref = slurp(dirs[0] / f);
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        ++compared;
        if (ref.empty() || slurp(dirs[k] / f) != ref || codes[k] != codes[0]) ++differing;
      }
    }
  }
  fs::remove_all(root);
  return {differing == 0 && compared > 0, std::to_string(compared) + " output pairs (repeat and 4 workers), " +
                                              std::to_string(differing) + " differ"};
}

// ---------------------------------------------------------------------------
// 9. Sequential composite of inference games equilibrates to the composite
//    of factor equilibria.

Outcome hierarchical() {
  Gen gen(20249);
  const std::size_t instances = 200;
  double worst = 0;
  std::size_t mismatched = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t na = gen.dim(2, 3), nb = gen.dim(2, 3), nc = gen.dim(2, 3);
    const auto as = FiniteSpace::range(na), bs = FiniteSpace::range(nb), cs = FiniteSpace::range(nc);
    const Probs prior = gen.simplex(na, 0.0, 0.05);
    const Table f = gen.channel(na, nb), g = gen.channel(nb, nc);
    const Table f_inv = invert(f, prior), g_inv = invert(g, push(prior, f));
    // Each factor chooses among random channels and its exact inverse.
    auto listed = [&](const Table& exact, std::size_t n, std::size_t m, std::size_t slot) {
      std::vector<Channel> chans;
      for (std::size_t i = 0; i < 4; ++i) chans.emplace_back(i == slot ? to_channel(exact) : to_channel(gen.channel(n, m)));
      return listed_family(std::move(chans));
    };
    OpenGame gf = make_inference_game(to_channel(f), constant_backward(listed(f_inv, nb, na, gen.dim(0, 3)), as),
                                      Divergence::kl());
    OpenGame gg = make_inference_game(to_channel(g), constant_backward(listed(g_inv, nc, nb, gen.dim(0, 3)), bs),
                                      Divergence::kl());
    const auto ef = gf.equilibria(Context{to_dist(prior), identity_channel(bs)});
    const auto eg = gg.equilibria(Context{to_dist(push(prior, f)), identity_channel(cs)});
    const auto composite = compose_seq(gf, gg);
    const auto eq = composite.equilibria(Context{to_dist(prior), identity_channel(cs)});
    if (eq.size() != 1 || ef.size() != 1 || eg.size() != 1) {
      ++mismatched;
      continue;
    }
    // Composite of the factor equilibria, and the direct inverse of g o f.
    const Table factors = matmul(to_table(gg.play(eg[0]).backward(State(to_dist(push(prior, f))))),
                                 to_table(gf.play(ef[0]).backward(State(to_dist(prior)))));
    const Table direct = invert(matmul(f, g), prior);
    const Table played = to_table(composite.play(eq[0]).backward(State(to_dist(prior))));
    for (std::size_t c = 0; c < nc; ++c) {
      if (direct[c].empty()) continue;
      worst = std::max({worst, tv(played[c], factors[c]), tv(played[c], direct[c])});
    }
  }
  return {mismatched == 0 && worst <= 1e-9, std::to_string(instances) + " chains, worst tv " + fmt(worst) +
                                                " (tol 1e-9), " + std::to_string(mismatched) + " non-unique"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 optical bayes", optical_bayes},
      {"2 lens laws", lens_laws},
      {"3 exact inverse minimizes kl inference", exact_inverse_optimal},
      {"4 vae equals kl inference", vae_inference},
      {"5 conjugate gaussian realisation", conjugate_gaussian},
      {"6 thermostat active inference", thermostat},
      {"7 gradient correctness", gradients},
      {"8 cli determinism", determinism},
      {"9 hierarchical composition", hierarchical}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << std::endl;
  return failed == 0 ? 0 : 1;
}
