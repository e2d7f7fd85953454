#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "equicov/coverage.hpp"
#include "equicov/netmodels.hpp"

namespace equicov {
namespace {

TEST(NetworkModel, CouplingConstraintsEnforced) {
  auto m2 = NetworkModel::model2(1.0, 5.0, 0.3, ClusterKind::Thomas);
  m2.user_pcp.lambda_p = 2.0;
  EXPECT_THROW(m2.validate(), ParameterError);
  auto m3 = NetworkModel::model3(0.5, 4.0, 0.5, 3.0, 0.2, ClusterKind::Matern);
  m3.bs_pcp.lambda_p = 0.6;
  EXPECT_THROW(m3.validate(), ParameterError);
  EXPECT_THROW(NetworkModel::model1(-1.0), ParameterError);
  EXPECT_NEAR(NetworkModel::model3(0.5, 4.0, 0.5, 3.0, 0.2, ClusterKind::Matern).bs_intensity(), 1.5, 1e-15);
}

TEST(SampleScene, Model1MeanBsCount) {
  const auto model = NetworkModel::model1(1.0);
  const int n = 200;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(1, i, Purpose::Scene);
    sum += static_cast<double>(sample_scene(model, Window::disk(20.0), rng).bs.size());
  }
  const double expected = 400.0 * std::numbers::pi;
  EXPECT_NEAR(sum / n, expected, 4.0 * std::sqrt(expected / n));
}

TEST(SampleScene, Model2MaternCenterWithinSupportAndIsABs) {
  const auto model = NetworkModel::model2(1.0, 5.0, 0.5, ClusterKind::Matern);
  for (int i = 0; i < 500; ++i) {
    Rng rng = make_stream(2, i, Purpose::Scene);
    const auto s = sample_scene(model, Window::disk(10.0), rng);
    ASSERT_TRUE(s.cluster_center.has_value());
    ASSERT_LE(s.cluster_center->norm(), 0.5);
    ASSERT_TRUE(s.own_cluster_bs.has_value());
    ASSERT_EQ(s.bs[*s.own_cluster_bs], *s.cluster_center);
  }
}

TEST(SampleScene, Model2CoUsersClusterAroundTheirBs) {
  const auto model = NetworkModel::model2(1.0, 8.0, 0.5, ClusterKind::Matern);
  SceneOptions opts;
  opts.with_co_users = true;
  std::size_t total = 0;
  for (int i = 0; i < 200; ++i) {
    Rng rng = make_stream(3, i, Purpose::Scene);
    const auto s = sample_scene(model, Window::disk(10.0), rng, opts);
    for (const auto& u : s.co_users) ASSERT_LE(distance(u, *s.cluster_center), 0.5);
    total += s.co_users.size();
  }
  EXPECT_NEAR(static_cast<double>(total) / 200.0, 8.0, 4.0 * std::sqrt(8.0 / 200.0));
}

TEST(SampleScene, Model2VanishingClusterGivesFullCoverage) {
  const auto model = NetworkModel::model2(1.0, 5.0, 1e-4, ClusterKind::Thomas);
  const auto pl = build_pathloss({}, {4.0});
  CoverageConfig cfg;
  cfg.n_outer = 200;
  const auto est = meta_distribution(model, pl, cfg, Window::disk(15.0), 4);
  EXPECT_GT(est.mean_coverage.mean, 0.999);
}

TEST(SampleScene, Model3TypicalClusterBsAroundCenter) {
  const auto model = NetworkModel::model3(0.2, 4.0, 0.5, 3.0, 0.4, ClusterKind::Matern);
  double own = 0.0;
  for (int i = 0; i < 400; ++i) {
    Rng rng = make_stream(5, i, Purpose::Scene);
    const auto s = sample_scene(model, Window::disk(15.0), rng);
    ASSERT_LE(s.cluster_center->norm(), 0.5);
    for (std::size_t j : s.cluster_bs) ASSERT_LE(distance(s.bs[j], *s.cluster_center), 0.4);
    own += static_cast<double>(s.cluster_bs.size());
  }
  // Scenes are redrawn only when empty, which is rare here.
  EXPECT_NEAR(own / 400.0, 3.0, 4.0 * std::sqrt(3.0 / 400.0));
}

TEST(SampleScene, DeterministicGivenStream) {
  const auto model = NetworkModel::model3(0.2, 4.0, 0.5, 3.0, 0.4, ClusterKind::Thomas);
  Rng a = make_stream(6, 9, Purpose::Scene);
  Rng b = make_stream(6, 9, Purpose::Scene);
  EXPECT_EQ(sample_scene(model, Window::disk(8.0), a).bs, sample_scene(model, Window::disk(8.0), b).bs);
}

TEST(SampleScene, ErrorPaths) {
  Rng rng(1);
  const auto model = NetworkModel::model1(1e-9);
  SceneOptions opts;
  opts.max_retries = 5;
  EXPECT_THROW(sample_scene(model, Window::disk(1.0), rng, opts), SamplingError);
  EXPECT_THROW(sample_scene(NetworkModel::model1(1.0), Window::rect(1, 1, 2, 2), rng), ParameterError);
}

TEST(Ergodic, DegenerateWindowRejected) {
  const auto model = NetworkModel::model2(1.0, 5.0, 2.0, ClusterKind::Thomas);
  EXPECT_THROW(sample_ergodic_realization(model, Window::disk(1.0), 1, 0), ParameterError);
  EXPECT_THROW(sample_ergodic_realization(NetworkModel::model1(1.0), Window::rect(-5, -5, 5, 5), 1, 0),
               ParameterError);
}

TEST(Ergodic, Model2EveryUserClusterCenterIsABs) {
  const auto model = NetworkModel::model2(0.5, 4.0, 0.3, ClusterKind::Thomas);
  const Window w = Window::disk(10.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng = make_stream(7, i, Purpose::Ergodic);
    const auto s = sample_pcp(model.user_pcp, w, rng);
    // The ergodic sampler uses the parent pattern itself as the BS pattern.
    const auto real = sample_ergodic_realization(model, w, 7, i);
    ASSERT_EQ(real.bs, s.parents);
    for (const auto& u : real.users.points()) ASSERT_LE(u.norm(), 5.0);
  }
}

TEST(Ergodic, Model3BsDrawsIndependentOfUserDraws) {
  auto a = NetworkModel::model3(0.3, 4.0, 0.5, 3.0, 0.5, ClusterKind::Thomas);
  auto b = a;
  b.user_pcp.m_bar = 9.0;
  b.user_pcp.rho = 0.2;
  const Window w = Window::disk(12.0);
  for (std::uint64_t i = 0; i < 10; ++i) {
    EXPECT_EQ(sample_ergodic_realization(a, w, 8, i).bs, sample_ergodic_realization(b, w, 8, i).bs);
  }
}

// Mean coverage of Palm scenes versus uniformly picked users of full joint
// realizations on a window twice the Palm radius.
void expect_palm_matches_ergodic(const NetworkModel& model, std::uint64_t seed) {
  const auto pl = build_pathloss({}, {4.0});
  CoverageConfig cfg;
  cfg.n_outer = 1500;
  const double r = auto_window_radius(model, pl).radius;
  const auto palm = meta_distribution(model, pl, cfg, Window::disk(r), seed);

  const Window big = Window::disk(2.0 * r);
  std::vector<double> pc(cfg.n_outer);
  ErgodicOptions eopts;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto scene = sample_scene_ergodic(model, big, seed + 1, i, eopts);
    Rng unused(0);
    pc[i] = conditional_coverage(scene, pl, cfg, unused);
  }
  const auto erg = mean_estimate(pc);
  EXPECT_LE(se_distance(palm.mean_coverage, erg), 2.0)
      << "palm " << palm.mean_coverage.mean << " ergodic " << erg.mean;
}

TEST(PalmVsErgodic, Model1) { expect_palm_matches_ergodic(NetworkModel::model1(1.0, 0.05), 100); }

TEST(PalmVsErgodic, Model2Thomas) {
  expect_palm_matches_ergodic(NetworkModel::model2(0.5, 3.0, 0.4, ClusterKind::Thomas), 200);
}

TEST(PalmVsErgodic, Model3Matern) {
  expect_palm_matches_ergodic(NetworkModel::model3(0.2, 2.0, 0.8, 3.0, 0.6, ClusterKind::Matern), 300);
}

TEST(AutoWindow, SingleSlopeUnitDensity) {
  const auto w = auto_window_radius(NetworkModel::model1(1.0), build_pathloss({}, {4.0}));
  EXPECT_FALSE(w.capped);
  EXPECT_LE(w.tail_fraction, 1e-3 * (1 + 1e-9));
  // Tail over annulus for alpha = 4: (1/2R^2) / (1/2 r0^2 - 1/2R^2) = 1e-3.
  const double r0 = 1.0 / std::sqrt(std::numbers::pi);
  EXPECT_NEAR(w.radius, r0 * std::sqrt(1001.0), 1e-9);
}

TEST(AutoWindow, ScalesWithCoScaledConfiguration) {
  const auto model = NetworkModel::model2(1.0, 5.0, 0.3, ClusterKind::Thomas);
  const auto pl = build_pathloss({0.8}, {2.5, 4.0});
  const auto base = auto_window_radius(model, pl);
  for (double k : {0.5, 2.0, 7.0}) {
    const auto scaled = NetworkModel::model2(1.0 / (k * k), 5.0, 0.3 * k, ClusterKind::Thomas);
    EXPECT_NEAR(auto_window_radius(scaled, pl.scaled(k)).radius, k * base.radius, 1e-9 * k * base.radius);
  }
}

TEST(AutoWindow, NonIntegrableTailIsCapped) {
  const auto w = auto_window_radius(NetworkModel::model1(1.0), build_pathloss({}, {2.0}));
  EXPECT_TRUE(w.capped);
  EXPECT_TRUE(std::isinf(w.tail_fraction));
}

}  // namespace
}  // namespace equicov
