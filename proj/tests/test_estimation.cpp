#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "raschsel/estimation.hpp"
#include "raschsel/simulate.hpp"

using namespace raschsel;

TEST(Irf, FixedValues) {
  EXPECT_DOUBLE_EQ(irf(0, 0), 0.5);
  EXPECT_NEAR(irf(std::log(3.0), 0), 0.75, 1e-15);
  EXPECT_NEAR(irf(40, 0), 1.0, 1e-15);
  EXPECT_GT(irf(-800, 0), -1e-300);
}

TEST(Irf, SwappedArgumentsSumToOne) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng), b = u(rng);
    EXPECT_NEAR(irf(a, b) + irf(b, a), 1.0, 1e-15);
  }
}

TEST(Irf, RejectsNonFinite) {
  EXPECT_THROW(irf(NAN, 0), DomainError);
  EXPECT_THROW(irf(0, INFINITY), DomainError);
}

TEST(GaussHermite, OnePointRule) {
  const auto r = gauss_hermite_rule(1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r.nodes[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
}

TEST(GaussHermite, WeightsSumToOneAndNodesAscend) {
  for (int n : {2, 3, 7, 30, 61, 200}) {
    const auto r = gauss_hermite_rule(n);
    ASSERT_EQ(r.size(), static_cast<std::size_t>(n));
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-13);
    for (int k = 1; k < n; ++k) EXPECT_LT(r.nodes[k - 1], r.nodes[k]);
  }
}

TEST(GaussHermite, NormalMoments) {
  auto moment = [](const QuadratureRule& r, int p) {
    double s = 0;
    for (std::size_t k = 0; k < r.size(); ++k) s += r.weights[k] * std::pow(r.nodes[k], p);
    return s;
  };
  EXPECT_NEAR(moment(gauss_hermite_rule(2), 2), 1.0, 1e-14);
  const auto r = gauss_hermite_rule(10);
  EXPECT_NEAR(moment(r, 1), 0.0, 1e-13);
  EXPECT_NEAR(moment(r, 4), 3.0, 1e-12);
  EXPECT_NEAR(moment(r, 6), 15.0, 1e-11);
  EXPECT_NEAR(moment(r, 18), 34459425.0, 1e-4);  // 17!! exact up to degree 19
}

TEST(GaussHermite, SizeLimits) {
  EXPECT_THROW(gauss_hermite_rule(0), ConfigError);
  EXPECT_THROW(gauss_hermite_rule(201), ConfigError);
}

TEST(LogMarginalLikelihood, DegenerateMixing) {
  const std::vector<std::uint8_t> cells{1};
  const std::vector<double> delta{0.0};
  for (int n : {1, 5, 30})
    EXPECT_NEAR(log_marginal_likelihood(cells, 1, delta, 1e-3, gauss_hermite_rule(n)),
                std::log(0.5), 1e-6);
}

// 100 nodes reach 1e-6 over the whole sigma range; the 30-node fitting
// default is checked separately with a looser bound.
TEST(LogMarginalLikelihood, MatchesTrapezoidIntegration) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> persons(1, 20), items(1, 4);
  std::uniform_real_distribution<double> delta(-2, 2), sigma(0.2, 3.0);
  const auto rule = gauss_hermite_rule(100);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t P = persons(rng), I = items(rng);
    std::vector<std::uint8_t> cells(P * I);
    for (auto& c : cells) c = std::bernoulli_distribution(0.5)(rng);
    std::vector<double> d(I);
    for (auto& v : d) v = delta(rng);
    const double s = sigma(rng);
    const double got = log_marginal_likelihood(cells, I, d, s, rule);
    const double want = oracle::trapezoid_lml(cells, P, I, d, s);
    EXPECT_LE(std::abs(got - want), 1e-6 * std::abs(want)) << "P=" << P << " I=" << I << " s=" << s;
  }
}

TEST(LogMarginalLikelihood, DefaultRuleIsCloseToTrapezoid) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> delta(-2, 2), sigma(0.2, 3.0);
  const auto rule = gauss_hermite_rule(30);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t P = 10, I = 4;
    std::vector<std::uint8_t> cells(P * I);
    for (auto& c : cells) c = std::bernoulli_distribution(0.5)(rng);
    std::vector<double> d(I);
    for (auto& v : d) v = delta(rng);
    const double s = sigma(rng);
    const double want = oracle::trapezoid_lml(cells, P, I, d, s);
    EXPECT_LE(std::abs(log_marginal_likelihood(cells, I, d, s, rule) - want), 1e-3 * std::abs(want));
  }
}

TEST(LogMarginalLikelihood, PersonOrderFree) {
  const auto data = oracle::random_matrix(30, 5, 3);
  std::vector<std::size_t> rows(30);
  std::iota(rows.begin(), rows.end(), 0);
  std::reverse(rows.begin(), rows.end());
  const std::vector<double> d{0.1, -0.5, 0.7, 1.0, -1.2};
  const auto rule = gauss_hermite_rule(30);
  EXPECT_NEAR(log_marginal_likelihood(data, d, 1.3, rule),
              log_marginal_likelihood(data.select_persons(rows), d, 1.3, rule), 1e-10);
}

TEST(LogMarginalLikelihood, RejectsBadArguments) {
  const std::vector<std::uint8_t> cells{1, 0, 0, 1};
  const std::vector<double> d{0.0, 0.0};
  const auto rule = gauss_hermite_rule(5);
  EXPECT_THROW(log_marginal_likelihood(cells, 2, d, 0.0, rule), DomainError);
  EXPECT_THROW(log_marginal_likelihood(cells, 2, std::vector<double>{0.0}, 1.0, rule), DomainError);
  EXPECT_THROW(log_marginal_likelihood(cells, 3, std::vector<double>{0, 0, 0}, 1.0, rule),
               DomainError);
}

TEST(FitConfig, Validation) {
  FitConfig c;
  EXPECT_NO_THROW(c.validate());
  c.quad_points = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tol = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_iter = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sigma_min = 5;
  c.sigma_max = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FitMml, LogLikelihoodNeverDecreases) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t items = 2 + seed % 7;
    const auto data = seed % 2 ? oracle::random_matrix(40 + seed * 5, items, seed)
                               : gen_rasch(150, std::vector<double>(items, 0.3), 0.5 + 0.1 * seed, seed);
    if (data.first_constant_column()) continue;
    const auto f = fit_mml(data);
    ASSERT_GE(f.log_likelihood_trace.size(), 2u);
    for (std::size_t k = 1; k < f.log_likelihood_trace.size(); ++k)
      EXPECT_GE(f.log_likelihood_trace[k] - f.log_likelihood_trace[k - 1], -1e-10)
          << "seed " << seed << " iteration " << k;
    EXPECT_DOUBLE_EQ(f.log_likelihood_trace.back(), f.log_marginal_likelihood);
  }
}

TEST(FitMml, ReportedLikelihoodMatchesDirectEvaluation) {
  const auto data = gen_rasch(200, base_six_difficulties(), 1.0, 4);
  const auto f = fit_mml(data);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.log_marginal_likelihood,
              log_marginal_likelihood(data, f.difficulties, f.sigma_theta, gauss_hermite_rule(30)),
              1e-8);
}

// At the optimum no single-coordinate move improves the likelihood.
TEST(FitMml, IsALocalMaximum) {
  const auto data = gen_rasch(200, base_six_difficulties(), 1.5, 9);
  FitConfig cfg;
  cfg.tol = 1e-9;
  cfg.max_iter = 5000;
  const auto f = fit_mml(data, cfg);
  const auto rule = gauss_hermite_rule(cfg.quad_points);
  const double best = f.log_marginal_likelihood;
  for (double h : {1e-3, -1e-3}) {
    EXPECT_LE(log_marginal_likelihood(data, f.difficulties, f.sigma_theta + h, rule), best + 1e-9);
    for (std::size_t i = 0; i < f.difficulties.size(); ++i) {
      auto d = f.difficulties;
      d[i] += h;
      EXPECT_LE(log_marginal_likelihood(data, d, f.sigma_theta, rule), best + 1e-9);
    }
  }
}

TEST(FitMml, DifficultiesCenteredNearTruth) {
  const auto data = gen_rasch(5000, base_six_difficulties(), 1.0, 21);
  const auto f = fit_mml(data);
  EXPECT_NEAR(f.sigma_theta, 1.0, 0.1);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f.difficulties[i], base_six_difficulties()[i], 0.15);
}

TEST(FitMml, ColumnRelabelingPermutesDifficulties) {
  // column totals all distinct, so the fit visits items in the same order
  const auto data = gen_rasch(300, std::vector<double>{-1.6, -0.9, -0.2, 0.4, 1.1, 1.9}, 1.2, 8);
  std::vector<std::size_t> totals;
  for (std::size_t i = 0; i < data.items(); ++i) totals.push_back(data.column_sum(i));
  std::sort(totals.begin(), totals.end());
  ASSERT_EQ(std::adjacent_find(totals.begin(), totals.end()), totals.end());

  const ItemSet perm{3, 0, 5, 1, 4, 2};
  const auto a = fit_mml(data);
  const auto b = fit_mml(data.select_items(perm));
  ASSERT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.sigma_theta, b.sigma_theta);
  EXPECT_EQ(a.log_marginal_likelihood, b.log_marginal_likelihood);
  for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(b.difficulties[k], a.difficulties[perm[k]]);
}

TEST(FitMml, PersonOrderDoesNotMatter) {
  const auto data = gen_rasch(200, base_six_difficulties(), 1.0, 2);
  std::vector<std::size_t> rows(200);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), std::mt19937_64(1));
  const auto a = fit_mml(data), b = fit_mml(data.select_persons(rows));
  EXPECT_EQ(a.sigma_theta, b.sigma_theta);
  EXPECT_EQ(a.difficulties, b.difficulties);
  EXPECT_EQ(a.log_likelihood_trace, b.log_likelihood_trace);
}

TEST(FitMml, ConstantColumnIsRejected) {
  std::vector<std::uint8_t> cells{1, 1, 0, 1, 1, 1, 1, 1};
  ResponseMatrix data(4, {"a", "b"}, cells);
  try {
    fit_mml(data);
    FAIL() << "expected DegenerateItem";
  } catch (const DegenerateItem& e) {
    EXPECT_EQ(e.label(), "b");
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(FitMml, SigmaStaysInsideBounds) {
  FitConfig cfg;
  cfg.sigma_max = 2.0;
  // perfectly nested responses push sigma upward
  std::vector<std::uint8_t> cells;
  for (int p = 0; p < 60; ++p)
    for (int i = 0; i < 4; ++i) cells.push_back(p % 5 > i ? 1 : 0);
  const auto f = fit_mml(ResponseMatrix(60, 4, cells), cfg);
  EXPECT_GE(f.sigma_theta, cfg.sigma_min);
  EXPECT_LE(f.sigma_theta, cfg.sigma_max);
}
