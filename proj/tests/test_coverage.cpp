#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "equicov/coverage.hpp"
#include "oracles.hpp"

namespace equicov {
namespace {

// Frozen from 1-D quadrature of the max-power integral (scipy.integrate.quad).
constexpr double kMaxPower_a4_b1 = 0.5600991535115574;
constexpr double kMaxPower_a4_b10 = 0.20004961028054147;
constexpr double kMaxPower_a3_b1 = 0.37434989042936173;
constexpr double kMaxPower_a25_b1 = 0.21962313900693983;

PointPattern line_pattern(std::vector<double> xs) {
  std::vector<Point> pts;
  for (double x : xs) pts.push_back({x, 0.0});
  return PointPattern(std::move(pts), Window::disk(100.0));
}

TEST(ConditionalCoverage, OneInterfererClosedForm) {
  const auto pl = build_pathloss({}, {4.0});
  CoverageConfig cfg;
  Rng rng(1);
  EXPECT_NEAR(conditional_coverage({0, 0}, line_pattern({1.0, 2.0}), pl, cfg, rng), 16.0 / 17.0, 1e-15);
}

TEST(ConditionalCoverage, NoInterferersGivesOne) {
  const auto pl = build_pathloss({}, {4.0});
  Rng rng(1);
  for (auto pol : {AssociationPolicy::MaxPower, AssociationPolicy::MaxSir}) {
    for (bool closed : {true, false}) {
      CoverageConfig cfg;
      cfg.policy = pol;
      cfg.closed_form = closed;
      cfg.n_inner = 50;
      EXPECT_EQ(conditional_coverage({0, 0}, line_pattern({3.0}), pl, cfg, rng), 1.0);
    }
  }
}

TEST(ConditionalCoverage, EmptySceneIsAnError) {
  Rng rng(1);
  EXPECT_THROW(conditional_coverage({0, 0}, PointPattern({}, Window::disk(1.0)), build_pathloss({}, {4.0}),
                                    CoverageConfig{}, rng),
               NoServerError);
}

TEST(ConditionalCoverage, MaxSirBelowUnitThresholdFallsBackToMonteCarlo) {
  CoverageConfig cfg;
  cfg.policy = AssociationPolicy::MaxSir;
  cfg.beta = 0.5;
  EXPECT_EQ(inner_method(cfg), InnerMethod::MonteCarlo);
  cfg.beta = 1.0;
  EXPECT_EQ(inner_method(cfg), InnerMethod::ClosedForm);
  cfg.fading = {FadingFamily::Nakagami, 2.0};
  EXPECT_EQ(inner_method(cfg), InnerMethod::MonteCarlo);
}

TEST(ConditionalCoverage, MaxSirEarlyStopMatchesFullSum) {
  const auto pl = build_pathloss({0.6}, {2.3, 4.0});
  for (std::uint64_t t = 0; t < 200; ++t) {
    Rng rng = make_stream(3, t, Purpose::Scene);
    const auto bs = sample_ppp({2.0}, Window::disk(6.0), rng);
    if (bs.empty()) continue;
    const auto gains = link_gains({0, 0}, bs, pl);
    for (double beta : {1.0, 3.0}) {
      double full = 0.0;
      for (std::size_t b = 0; b < gains.size(); ++b) {
        double p = 1.0;
        for (std::size_t c = 0; c < gains.size(); ++c) {
          if (c != b) p /= 1.0 + beta * gains[c] / gains[b];
        }
        full += p;
      }
      ASSERT_NEAR(detail::closed_form_max_sir(gains, beta), full, 1e-12);
    }
  }
}

// Closed-form inner expectation versus fading Monte Carlo on random scenes.
TEST(ConditionalCoverage, GenericMonteCarloAgreesWithClosedForm) {
  const auto pl = build_pathloss({1.0}, {3.0, 4.0});
  const std::size_t n_inner = 4000;
  for (auto pol : {AssociationPolicy::MaxPower, AssociationPolicy::MaxSir}) {
    for (std::uint64_t t = 0; t < 10; ++t) {
      Rng rng = make_stream(4, t, Purpose::Scene);
      const auto bs = sample_ppp({1.0}, Window::disk(8.0), rng);
      CoverageConfig exact;
      exact.policy = pol;
      exact.beta = 1.5;
      CoverageConfig mc = exact;
      mc.closed_form = false;
      mc.n_inner = n_inner;
      Rng fading = make_stream(4, t, Purpose::Fading);
      const double p = conditional_coverage({0, 0}, bs, pl, exact, fading);
      const double q = conditional_coverage({0, 0}, bs, pl, mc, fading);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / static_cast<double>(n_inner));
      EXPECT_LE(std::abs(p - q), 3.0 * se) << to_string(pol) << " scene " << t;
    }
  }
}

TEST(ConditionalCoverage, NakagamiShapeOneMatchesRayleigh) {
  const auto pl = build_pathloss({}, {4.0});
  const auto bs = line_pattern({1.0, 1.5, -2.0, 3.0});
  CoverageConfig ray;
  ray.closed_form = false;
  ray.n_inner = 20000;
  CoverageConfig nak = ray;
  nak.fading = {FadingFamily::Nakagami, 1.0};
  Rng a(7), b(8);
  const double p = conditional_coverage({0, 0}, bs, pl, ray, a);
  const double q = conditional_coverage({0, 0}, bs, pl, nak, b);
  EXPECT_NEAR(p, q, 4.0 * std::sqrt(2 * 0.25 / 20000.0));
}

TEST(EmpiricalCcdf, HandExample) {
  const std::vector<double> s{0.2, 0.5, 0.5, 0.9};
  const std::vector<double> g{0.0, 0.5, 0.6, 1.0};
  EXPECT_EQ(empirical_ccdf(s, g), (std::vector<double>{1.0, 0.75, 0.25, 0.0}));
}

TEST(CoverageConfig, Validation) {
  CoverageConfig c;
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.epsilon_grid = {0.0, 0.5, 0.4};
  EXPECT_THROW(c.validate(), ParameterError);
  c.epsilon_grid = {0.0, 1.5};
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.n_outer = 0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(PppOracle, MaxPowerQuadrature) {
  const auto mp = AssociationPolicy::MaxPower;
  EXPECT_NEAR(ppp_coverage_oracle(1.0, 4.0, mp), kMaxPower_a4_b1, 1e-10);
  EXPECT_NEAR(ppp_coverage_oracle(1.0, 4.0, mp), 1.0 / (1.0 + std::numbers::pi / 4.0), 1e-10);
  EXPECT_NEAR(ppp_coverage_oracle(10.0, 4.0, mp), kMaxPower_a4_b10, 1e-10);
  EXPECT_NEAR(ppp_coverage_oracle(10.0, 4.0, mp), oracle::ppp_max_power_alpha4(10.0), 1e-10);
  EXPECT_NEAR(ppp_coverage_oracle(1.0, 3.0, mp), kMaxPower_a3_b1, 1e-10);
  EXPECT_NEAR(ppp_coverage_oracle(1.0, 2.5, mp), kMaxPower_a25_b1, 1e-10);
}

TEST(PppOracle, MaxSirClosedForm) {
  const auto ms = AssociationPolicy::MaxSir;
  EXPECT_NEAR(ppp_coverage_oracle(1.0, 4.0, ms), 2.0 / std::numbers::pi, 1e-10);
  for (double a : {2.5, 3.0, 3.5, 5.0}) {
    for (double b : {1.0, 2.0, 10.0}) EXPECT_NEAR(ppp_coverage_oracle(b, a, ms), oracle::ppp_max_sir(b, a), 1e-10);
  }
}

TEST(PppOracle, LimitsAndDomain) {
  EXPECT_LT(ppp_coverage_oracle(1e12, 4.0, AssociationPolicy::MaxPower), 1e-5);
  EXPECT_LT(ppp_coverage_oracle(1e12, 4.0, AssociationPolicy::MaxSir), 1e-5);
  EXPECT_THROW(ppp_coverage_oracle(1.0, 2.0, AssociationPolicy::MaxPower), ParameterError);
  EXPECT_THROW(ppp_coverage_oracle(0.5, 4.0, AssociationPolicy::MaxSir), ParameterError);
}

MetaDistEstimate run_model1(double lambda, AssociationPolicy pol, std::uint64_t seed, std::size_t n = 2000,
                            const PathlossModel& pl = build_pathloss({}, {4.0})) {
  const auto model = NetworkModel::model1(lambda);
  CoverageConfig cfg;
  cfg.policy = pol;
  cfg.n_outer = n;
  const double r = auto_window_radius(model, pl).radius;
  return meta_distribution(model, pl, cfg, Window::disk(r), seed);
}

TEST(MetaDistribution, PppOracleMaxPower) {
  const auto est = run_model1(1.0, AssociationPolicy::MaxPower, 11);
  EXPECT_TRUE(est.mean_ci.contains(kMaxPower_a4_b1)) << est.mean_coverage.mean;
  EXPECT_TRUE(check_consistency(est).ok());
}

TEST(MetaDistribution, PppOracleMaxSir) {
  const auto est = run_model1(1.0, AssociationPolicy::MaxSir, 12);
  EXPECT_TRUE(est.mean_ci.contains(2.0 / std::numbers::pi)) << est.mean_coverage.mean;
  EXPECT_TRUE(check_consistency(est).ok());
}

TEST(MetaDistribution, CcdfShapeAndLayerCake) {
  const auto est = run_model1(1.0, AssociationPolicy::MaxPower, 13, 1000);
  EXPECT_EQ(est.ccdf.front(), 1.0);
  EXPECT_TRUE(std::is_sorted(est.ccdf.rbegin(), est.ccdf.rend()));
  const auto rep = check_consistency(est);
  EXPECT_TRUE(rep.layer_cake_ok) << rep.layer_cake_gap << " > " << rep.layer_cake_tolerance;
  for (std::size_t i = 0; i < est.ccdf.size(); ++i) EXPECT_TRUE(est.ccdf_ci[i].contains(est.ccdf[i]));
}

TEST(MetaDistribution, IndependentOfWorkerCount) {
  const auto model = NetworkModel::model2(1.0, 4.0, 0.3, ClusterKind::Thomas);
  const auto pl = build_pathloss({1.0}, {3.0, 4.0});
  CoverageConfig cfg;
  cfg.n_outer = 300;
  cfg.policy = AssociationPolicy::MaxSir;
  const auto a = meta_distribution(model, pl, cfg, Window::disk(12.0), 5);
  cfg.workers = 3;
  const auto b = meta_distribution(model, pl, cfg, Window::disk(12.0), 5);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(MetaDistribution, DensityInvarianceSingleSlope) {
  std::vector<MeanEstimate> means;
  std::uint64_t seed = 20;
  for (double lambda : {0.25, 1.0, 4.0}) means.push_back(run_model1(lambda, AssociationPolicy::MaxPower, seed++).mean_coverage);
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (std::size_t j = i + 1; j < means.size(); ++j) {
      EXPECT_LE(se_distance(means[i], means[j]), 3.0) << i << ' ' << j;
    }
  }
}

TEST(MetaDistribution, MaxSirDominatesPerScene) {
  const auto pl = build_pathloss({0.5}, {2.5, 4.0});
  const auto a = run_model1(1.0, AssociationPolicy::MaxPower, 30, 500, pl);
  const auto b = run_model1(1.0, AssociationPolicy::MaxSir, 30, 500, pl);
  for (std::size_t i = 0; i < a.samples.size(); ++i) ASSERT_GE(b.samples[i], a.samples[i] - 1e-12);
  EXPECT_GE(b.mean_coverage.mean, a.mean_coverage.mean);
}

TEST(MetaDistribution, DualSlopeCoverageFallsAtHighDensity) {
  const auto pl = build_pathloss({1.0}, {2.5, 4.0});
  std::vector<MeanEstimate> m;
  std::uint64_t seed = 40;
  for (double lambda : {0.1, 1.0, 10.0}) m.push_back(run_model1(lambda, AssociationPolicy::MaxPower, seed++, 1000, pl).mean_coverage);
  const auto peak = *std::max_element(m.begin(), m.end(), [](auto& x, auto& y) { return x.mean < y.mean; });
  EXPECT_GT(peak.mean - m.back().mean, 0.0);
  EXPECT_GT(se_distance(peak, m.back()), 3.0);
}

TEST(MetaDistributionCsv, TwoPointGrid) {
  const auto model = NetworkModel::model1(1.0);
  CoverageConfig cfg;
  cfg.n_outer = 50;
  cfg.epsilon_grid = {0.0, 1.0};
  const auto est = meta_distribution(model, build_pathloss({}, {4.0}), cfg, Window::disk(10.0), 1);
  std::ostringstream os;
  write_meta_distribution_csv(os, est);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.front() != '#') rows.push_back(line);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "epsilon,ccdf,ci_lo,ci_hi");
  EXPECT_EQ(rows[1].substr(0, 6), "0,1,0.");
}

}  // namespace
}  // namespace equicov
