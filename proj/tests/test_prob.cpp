#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cyber/prob.hpp"
#include "cyber/random.hpp"
#include "cyber/serialize.hpp"

using namespace cyber;

namespace {

FiniteSpace two() { return FiniteSpace::of({"a", "b"}); }

FiniteChanneld noisy() {
  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  return FiniteChanneld(two(), two(), m);
}

FiniteDistd half() { return FiniteDistd::uniform(two()); }

// Plain-loop posterior by enumerating the joint table.
std::vector<double> enumerate_posterior(const std::vector<std::vector<double>>& rows, const std::vector<double>& prior,
                                        std::size_t y) {
  std::vector<double> joint(prior.size());
  double z = 0;
  for (std::size_t x = 0; x < prior.size(); ++x) {
    joint[x] = rows[x][y] * prior[x];
    z += joint[x];
  }
  for (auto& v : joint) v /= z;
  return joint;
}

}  // namespace

TEST(Pushforward, FiniteHandValue) {
  auto out = pushforward(noisy(), half());
  EXPECT_NEAR(out[0], 0.55, 1e-15);
  EXPECT_NEAR(out[1], 0.45, 1e-15);
}

TEST(Pushforward, IdentityLeavesStateAlone) {
  Rng rng(3);
  auto pi = random_prior(FiniteSpace::range(4), rng);
  auto out = pushforward(FiniteChanneld::identity(pi.space()), pi);
  EXPECT_EQ(out.probs(), pi.probs());
}

TEST(Pushforward, GaussianAffine) {
  GaussianStated pi(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  GaussianChanneld c(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 1.0),
                     Eigen::MatrixXd::Constant(1, 1, 0.5));
  auto out = pushforward(c, pi);
  EXPECT_DOUBLE_EQ(out.mean()(0), 1.0);
  EXPECT_DOUBLE_EQ(out.cov()(0, 0), 4.5);
}

TEST(Pushforward, MismatchThrows) {
  EXPECT_THROW(pushforward(noisy(), FiniteDistd::uniform(FiniteSpace::range(3))), DimensionMismatch);
  State g = GaussianStated(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_THROW(pushforward(Channel(noisy()), g), BackendMismatch);
}

TEST(Compose, MatrixProductAndUnit) {
  Eigen::MatrixXd m(2, 2);
  m << 0.3, 0.7, 0.6, 0.4;
  FiniteChanneld d(two(), two(), m);
  auto dc = compose(d, noisy());
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) {
      double want = 0;
      for (int y = 0; y < 2; ++y) want += noisy().rows()(x, y) * m(y, z);
      EXPECT_NEAR(dc.rows()(x, z), want, 1e-15);
    }
  EXPECT_NEAR(dc.rows().row(0).sum(), 1.0, 1e-12);
  EXPECT_EQ(compose(d, FiniteChanneld::identity(two())).rows(), d.rows());
}

TEST(Compose, Associative) {
  Rng rng(11);
  auto s = FiniteSpace::range(3);
  for (int t = 0; t < 20; ++t) {
    auto c = random_channel(s, s, rng), d = random_channel(s, s, rng), e = random_channel(s, s, rng);
    auto lhs = compose(compose(e, d), c), rhs = compose(e, compose(d, c));
    EXPECT_LE((lhs.rows() - rhs.rows()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Compose, GaussianNoisePropagates) {
  GaussianChanneld c(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 1.0),
                     Eigen::MatrixXd::Constant(1, 1, 0.5));
  GaussianChanneld d(Eigen::MatrixXd::Constant(1, 1, 3.0), Eigen::VectorXd::Constant(1, -1.0),
                     Eigen::MatrixXd::Constant(1, 1, 0.25));
  auto dc = compose(d, c);
  EXPECT_DOUBLE_EQ(dc.weight()(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(dc.bias()(0), 2.0);
  EXPECT_DOUBLE_EQ(dc.noise()(0, 0), 9 * 0.5 + 0.25);
}

TEST(Tensor, KroneckerOrdering) {
  Eigen::MatrixXd m(2, 2);
  m << 0.3, 0.7, 0.6, 0.4;
  FiniteChanneld d(two(), two(), m);
  auto t = tensor(noisy(), d);
  ASSERT_EQ(t.rows().rows(), 4);
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int y1 = 0; y1 < 2; ++y1)
        for (int y2 = 0; y2 < 2; ++y2)
          EXPECT_DOUBLE_EQ(t.rows()(x1 * 2 + x2, y1 * 2 + y2), noisy().rows()(x1, y1) * m(x2, y2));
  EXPECT_EQ(t.codomain().label(1), "a,b");
}

TEST(Tensor, UnitorAndFunctoriality) {
  auto unit = tensor(noisy(), FiniteChanneld::identity(FiniteSpace::unit()));
  EXPECT_EQ(unit.rows(), noisy().rows());

  Rng rng(5);
  auto s2 = FiniteSpace::range(2), s3 = FiniteSpace::range(3);
  auto c1 = random_channel(s2, s3, rng), c2 = random_channel(s3, s2, rng);
  auto p1 = random_prior(s2, rng), p2 = random_prior(s3, rng);
  auto lhs = pushforward(tensor(c1, c2), tensor(p1, p2));
  auto rhs = tensor(pushforward(c1, p1), pushforward(c2, p2));
  EXPECT_LE((lhs.probs() - rhs.probs()).cwiseAbs().maxCoeff(), 1e-15);

  GaussianChanneld g(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_THROW(tensor(Channel(noisy()), Channel(g)), BackendMismatch);
}

TEST(Tensor, GaussianBlockDiagonal) {
  GaussianChanneld a(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 1.0),
                     Eigen::MatrixXd::Constant(1, 1, 0.5));
  auto t = tensor(a, a);
  EXPECT_EQ(t.weight()(0, 1), 0.0);
  EXPECT_EQ(t.noise()(1, 1), 0.5);
  EXPECT_EQ(t.domain().num_factors(), 2u);
}

TEST(BayesInverse, HandValueAndEnumeration) {
  auto post = posterior(noisy(), half(), 0);
  EXPECT_NEAR(post[0], 9.0 / 11.0, 1e-15);
  EXPECT_NEAR(post[1], 2.0 / 11.0, 1e-15);

  Rng rng(7);
  auto x = FiniteSpace::range(4), y = FiniteSpace::range(3);
  for (int t = 0; t < 30; ++t) {
    auto c = random_channel(x, y, rng, 0.25);
    auto pi = random_prior(x, rng);
    auto inv = bayes_inverse(c, pi);
    auto pred = pushforward(c, pi);
    std::vector<std::vector<double>> rows(4, std::vector<double>(3));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) rows[i][j] = c.rows()(i, j);
    std::vector<double> prior(pi.probs().data(), pi.probs().data() + 4);
    for (std::size_t yy = 0; yy < 3; ++yy) {
      if (!(pred[yy] > kTol.supp)) continue;
      auto want = enumerate_posterior(rows, prior, yy);
      EXPECT_NEAR(inv.rows().row(static_cast<Eigen::Index>(yy)).sum(), 1.0, 1e-12);
      for (std::size_t xx = 0; xx < 4; ++xx) {
        EXPECT_NEAR(inv(xx, yy), want[xx], 1e-12);
        EXPECT_NEAR(c(yy, xx) * pi[xx], inv(xx, yy) * pred[yy], 1e-12);
      }
    }
  }
}

TEST(BayesInverse, IdentityGivesPointMass) {
  auto inv = bayes_inverse(FiniteChanneld::identity(two()), half());
  EXPECT_EQ(inv.rows(), Eigen::MatrixXd::Identity(2, 2));
}

TEST(BayesInverse, ZeroMassOutcomeThrows) {
  auto c = FiniteChanneld::deterministic(two(), two(), {0, 0});
  EXPECT_THROW(posterior(c, half(), 1), UnsupportedOutcome);
}

TEST(BayesInverse, GaussianConjugate) {
  GaussianStated pi(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  GaussianChanneld c(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  auto post = posterior(c, pi, Eigen::VectorXd(Eigen::VectorXd::Constant(1, 2.0)));
  EXPECT_NEAR(post.mean()(0), 1.0, 1e-15);
  EXPECT_NEAR(post.cov()(0, 0), 0.5, 1e-15);

  GaussianChanneld flat(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1));
  GaussianStated point(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1));
  EXPECT_THROW(bayes_inverse(flat, point), UnsupportedOutcome);
}

TEST(BayesInverse, GaussianAgreesWithDiscretizedOracle) {
  // y = 1.5 x + 0.3 + noise(0.4), prior N(0.5, 0.8), observe y = 1.2.
  const double mu = 0.5, var = 0.8, a = 1.5, b = 0.3, nv = 0.4, y = 1.2;
  GaussianStated pi(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, var));
  GaussianChanneld c(Eigen::MatrixXd::Constant(1, 1, a), Eigen::VectorXd::Constant(1, b),
                     Eigen::MatrixXd::Constant(1, 1, nv));
  auto post = posterior(c, pi, Eigen::VectorXd(Eigen::VectorXd::Constant(1, y)));

  const int n = 4001;
  const double lo = -8, hi = 8, h = (hi - lo) / (n - 1);
  double z = 0, m = 0;
  for (int i = 0; i < n; ++i) {
    double x = lo + i * h;
    double w = std::exp(-0.5 * (x - mu) * (x - mu) / var - 0.5 * (y - a * x - b) * (y - a * x - b) / nv);
    z += w;
    m += w * x;
  }
  EXPECT_NEAR(post.mean()(0), m / z, 2e-2);
}

TEST(LogDensity, Cases) {
  EXPECT_DOUBLE_EQ(log_density(noisy(), 1, 0), std::log(0.1));
  auto det = FiniteChanneld::deterministic(two(), two(), {1, 0});
  EXPECT_EQ(log_density(det, 1, 0), 0.0);
  EXPECT_EQ(log_density(det, 0, 0), kLogZero);
  EXPECT_EQ(1.0 + log_density(det, 0, 0), kLogZero);

  GaussianChanneld g = GaussianChanneld::identity(EuclideanSpace(1));
  GaussianChanneld std_normal(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.7);
  EXPECT_NEAR(log_density(std_normal, v, v), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  (void)g;
}

TEST(Kl, HandValues) {
  EXPECT_EQ(kl(half(), half()), 0.0);
  EXPECT_NEAR(kl(FiniteDistd::point(two(), 0), half()), std::log(2.0), 1e-15);
  EXPECT_THROW(kl(half(), FiniteDistd::point(two(), 0)), SupportViolation);

  GaussianStated p(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  GaussianStated q(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_NEAR(kl(p, q), 0.5, 1e-15);
}

TEST(Kl, NonnegativeOnRandomInputs) {
  Rng rng(13);
  auto s = FiniteSpace::range(5);
  for (int t = 0; t < 200; ++t) {
    auto p = random_prior(s, rng), q = random_prior(s, rng);
    EXPECT_GE(kl(p, q), -kTol.div);
    EXPECT_NEAR(kl(p, p), 0.0, kTol.div);
  }
}

TEST(Expectation, FiniteAndMonteCarlo) {
  auto pi = FiniteDistd(two(), Eigen::Vector2d(0.25, 0.75));
  EXPECT_DOUBLE_EQ(expectation<double>(pi, [](std::size_t i) { return i == 0 ? 0.0 : 4.0; }), 3.0);
  EXPECT_DOUBLE_EQ(expectation<double>(pi, [](std::size_t) { return 2.5; }), 2.5);

  GaussianStated g(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1));
  auto est = expectation<double>(
      g, [](const Eigen::VectorXd& x) { return x(0) * x(0); }, 42, 100000);
  EXPECT_EQ(est.samples, 100000u);
  EXPECT_NEAR(est.value, 1.0, 0.05);
}

TEST(Marginal, HandAndProduct) {
  auto s = FiniteSpace::from_factors({{"a", "b"}, {"c", "d"}});
  FiniteDistd joint(s, Eigen::Vector4d(0.1, 0.2, 0.3, 0.4));
  auto m = marginal(joint, 0, 1);
  EXPECT_NEAR(m[0], 0.3, 1e-15);
  EXPECT_NEAR(m[1], 0.7, 1e-15);
  EXPECT_THROW(marginal(joint, 2, 1), UnknownFactor);

  Rng rng(2);
  auto p1 = random_prior(FiniteSpace::range(3), rng), p2 = random_prior(two(), rng);
  auto back = marginal(tensor(p1, p2), 1, 1);
  EXPECT_LE((back.probs() - p2.probs()).cwiseAbs().maxCoeff(), 1e-15);

  // marginal of a tensor equals pushing through the projection
  auto prod = tensor(p1, p2);
  auto via = pushforward(projection<double>(prod.space(), 0, 1), prod);
  EXPECT_EQ(via.probs(), marginal(prod, 0, 1).probs());

  GaussianStated g1(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 2.0));
  GaussianStated g2(Eigen::Vector2d(3.0, 4.0), Eigen::Matrix2d::Identity());
  auto gm = marginal(tensor(g1, g2), 1, 1);
  EXPECT_EQ(gm.mean(), g2.mean());
  EXPECT_EQ(gm.cov(), g2.cov());
}

TEST(AlmostEqual, SupportRestricted) {
  auto f = noisy();
  EXPECT_TRUE(almost_equal(f, f, half()));

  Eigen::MatrixXd m = f.rows();
  m.row(1) << 0.5, 0.5;
  FiniteChanneld g(two(), two(), m);
  EXPECT_TRUE(almost_equal(f, g, FiniteDistd::point(two(), 0)));

  Eigen::MatrixXd close = f.rows();
  const double tol = 1e-3;
  close.row(0) << 0.9 - 2 * tol, 0.1 + 2 * tol;
  EXPECT_FALSE(almost_equal(f, FiniteChanneld(two(), two(), close), half(), tol));
}

TEST(Validation, InvariantsEnforced) {
  EXPECT_THROW(FiniteDistd(two(), Eigen::Vector2d(0.5, 0.6)), InvalidDistribution);
  EXPECT_THROW(FiniteDistd(two(), Eigen::Vector2d(1.5, -0.5)), InvalidDistribution);
  EXPECT_THROW(FiniteSpace::of({"a", "a"}), InvalidDistribution);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(GaussianStated(Eigen::Vector2d::Zero(), asym), InvalidDistribution);
  Eigen::Matrix2d neg;
  neg << 1, 0, 0, -1;
  EXPECT_THROW(GaussianStated(Eigen::Vector2d::Zero(), neg), InvalidDistribution);
}

TEST(Json, RoundTripIsBitExact) {
  Rng rng(19);
  auto s = FiniteSpace::from_factors({{"a", "b"}, {"x", "y", "z"}});
  auto pi = random_prior(s, rng);
  auto c = random_channel(s, FiniteSpace::range(4), rng, 0.3);
  auto pi2 = finite_dist_from_json(json::parse(to_json(pi).dump()));
  auto c2 = finite_channel_from_json(json::parse(to_json(c).dump()));
  EXPECT_EQ(pi2.probs(), pi.probs());
  EXPECT_EQ(pi2.space(), pi.space());
  EXPECT_EQ(c2.rows(), c.rows());

  Eigen::Matrix2d cov;
  cov << 2.0 / 3.0, 0.1, 0.1, 1.0 / 7.0;
  GaussianStated g(Eigen::Vector2d(std::sqrt(2.0), -1e-17), cov);
  auto g2 = std::get<GaussianStated>(state_from_json(json::parse(to_json(State(g)).dump())));
  EXPECT_EQ(g2.mean(), g.mean());
  EXPECT_EQ(g2.cov(), g.cov());

  GaussianChanneld gc(Eigen::MatrixXd::Constant(1, 2, 0.3), Eigen::VectorXd::Constant(1, 1.0 / 3.0),
                      Eigen::MatrixXd::Constant(1, 1, 0.2));
  auto gc2 = std::get<GaussianChanneld>(channel_from_json(json::parse(to_json(Channel(gc)).dump())));
  EXPECT_EQ(gc2.weight(), gc.weight());
  EXPECT_EQ(gc2.bias(), gc.bias());

  auto json_text = to_json(FiniteDistd(two(), Eigen::Vector2d(0.25, 0.75))).dump();
  EXPECT_EQ(json_text, R"({"probs":[0.25,0.75],"support":["a","b"]})");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
