#pragma once

// Joint user/BS realizations for the three PPP/PCP network models, seen from
// a typical user at the origin.
//
//   Model 1: users PPP(lambda_u), BSs PPP(lambda_b), independent.
//   Model 2: users PCP whose parent PPP is the BS process (lambda_p = lambda_b).
//   Model 3: users and BSs are PCPs sharing one parent PPP(lambda_p).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "equicov/errors.hpp"
#include "equicov/geometry.hpp"
#include "equicov/propagation.hpp"
#include "equicov/rng.hpp"

namespace equicov {

enum class ModelKind { Model1, Model2, Model3 };

inline const char* to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Model1: return "model1";
    case ModelKind::Model2: return "model2";
    case ModelKind::Model3: return "model3";
  }
  return "?";
}

struct NetworkModel {
  ModelKind kind = ModelKind::Model1;
  PppParams bs_ppp{1.0};      // Models 1-2
  PppParams user_ppp{1.0};    // Model 1
  PcpParams user_pcp{};       // Models 2-3
  PcpParams bs_pcp{};         // Model 3

  static NetworkModel model1(double lambda_b, double lambda_u = 1.0) {
    NetworkModel m;
    m.kind = ModelKind::Model1;
    m.bs_ppp = {lambda_b};
    m.user_ppp = {lambda_u};
    m.validate();
    return m;
  }

  static NetworkModel model2(double lambda_b, double m_bar, double rho, ClusterKind cluster) {
    NetworkModel m;
    m.kind = ModelKind::Model2;
    m.bs_ppp = {lambda_b};
    m.user_pcp = {lambda_b, m_bar, rho, cluster};
    m.validate();
    return m;
  }

  static NetworkModel model3(double lambda_p, double m_bar_u, double rho_u, double m_bar_b, double rho_b,
                             ClusterKind cluster) {
    NetworkModel m;
    m.kind = ModelKind::Model3;
    m.user_pcp = {lambda_p, m_bar_u, rho_u, cluster};
    m.bs_pcp = {lambda_p, m_bar_b, rho_b, cluster};
    m.validate();
    return m;
  }

  void validate() const {
    switch (kind) {
      case ModelKind::Model1:
        bs_ppp.validate();
        user_ppp.validate();
        break;
      case ModelKind::Model2:
        bs_ppp.validate();
        user_pcp.validate();
        if (user_pcp.lambda_p != bs_ppp.lambda) {
          throw ParameterError("model2: user parent intensity must equal the BS intensity");
        }
        break;
      case ModelKind::Model3:
        user_pcp.validate();
        bs_pcp.validate();
        if (user_pcp.lambda_p != bs_pcp.lambda_p) {
          throw ParameterError("model3: user and BS processes must share the parent intensity");
        }
        break;
    }
  }

  [[nodiscard]] double bs_intensity() const noexcept {
    return kind == ModelKind::Model3 ? bs_pcp.intensity() : bs_ppp.lambda;
  }

  // Largest cluster displacement scale involved (0 for Model 1).
  [[nodiscard]] double cluster_scale() const noexcept {
    switch (kind) {
      case ModelKind::Model1: return 0.0;
      case ModelKind::Model2: return user_pcp.rho;
      case ModelKind::Model3: return std::max(user_pcp.rho, bs_pcp.rho);
    }
    return 0.0;
  }

  friend bool operator==(const NetworkModel&, const NetworkModel&) = default;
};

// Downlink scene seen from the typical user.
struct TypicalUserScene {
  Point user{};
  PointPattern bs;
  std::optional<Point> cluster_center;            // Models 2-3
  std::optional<std::size_t> own_cluster_bs;      // Model 2: index of the BS at the cluster center
  std::vector<std::size_t> cluster_bs;            // Model 3: BSs of the typical cluster
  std::vector<Point> co_users;                    // only filled when requested
};

struct SceneOptions {
  double exclusion_radius = 1e-6;  // BSs closer than this to the user force a resample
  int max_retries = 100;
  bool with_co_users = false;
};

namespace detail {

inline bool scene_acceptable(const TypicalUserScene& s, double exclusion_radius) {
  if (s.bs.empty()) return false;
  return std::none_of(s.bs.points().begin(), s.bs.points().end(),
                      [&](Point b) { return distance(b, s.user) < exclusion_radius; });
}

inline TypicalUserScene draw_palm_scene(const NetworkModel& model, const Window& window, Rng& rng,
                                        const SceneOptions& opts) {
  TypicalUserScene scene;
  switch (model.kind) {
    case ModelKind::Model1:
      scene.bs = sample_ppp(model.bs_ppp, window, rng);
      if (opts.with_co_users) {
        const auto others = sample_ppp(model.user_ppp, window, rng);
        scene.co_users.assign(others.points().begin(), others.points().end());
      }
      break;
    case ModelKind::Model2: {
      const auto& up = model.user_pcp;
      const Point center = Point{} - sample_offspring_offset(up.kind, up.rho, rng);
      scene.cluster_center = center;
      std::vector<Point> pts;
      if (window.contains(center)) {
        pts.push_back(center);
        scene.own_cluster_bs = 0;
      }
      const auto rest = sample_ppp(model.bs_ppp, window, rng);
      pts.insert(pts.end(), rest.points().begin(), rest.points().end());
      scene.bs = PointPattern(std::move(pts), window);
      if (opts.with_co_users) {
        const std::size_t m = sample_poisson(up.m_bar, rng);
        for (std::size_t i = 0; i < m; ++i) {
          const Point u = sample_offspring(center, up.kind, up.rho, rng);
          if (window.contains(u)) scene.co_users.push_back(u);
        }
      }
      break;
    }
    case ModelKind::Model3: {
      const auto& up = model.user_pcp;
      const auto& bp = model.bs_pcp;
      const Point center = Point{} - sample_offspring_offset(up.kind, up.rho, rng);
      scene.cluster_center = center;
      std::vector<Point> pts;
      const std::size_t own = sample_poisson(bp.m_bar, rng);
      for (std::size_t i = 0; i < own; ++i) {
        const Point b = sample_offspring(center, bp.kind, bp.rho, rng);
        if (window.contains(b)) {
          scene.cluster_bs.push_back(pts.size());
          pts.push_back(b);
        }
      }
      const auto rest = sample_pcp(bp, window, rng).offspring;
      pts.insert(pts.end(), rest.points().begin(), rest.points().end());
      scene.bs = PointPattern(std::move(pts), window);
      if (opts.with_co_users) {
        const std::size_t m = sample_poisson(up.m_bar, rng);
        for (std::size_t i = 0; i < m; ++i) {
          const Point u = sample_offspring(center, up.kind, up.rho, rng);
          if (window.contains(u)) scene.co_users.push_back(u);
        }
      }
      break;
    }
  }
  return scene;
}

}  // namespace detail

// Palm (typical-user) scene with the user at the origin. Empty scenes and
// scenes with a BS inside the exclusion radius are redrawn from the same
// stream, at most opts.max_retries times.
inline TypicalUserScene sample_scene(const NetworkModel& model, const Window& window, Rng& rng,
                                     const SceneOptions& opts = {}) {
  model.validate();
  window.validate();
  if (!window.contains(Point{})) throw ParameterError("scene window must contain the typical user at the origin");
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    auto scene = detail::draw_palm_scene(model, window, rng, opts);
    if (detail::scene_acceptable(scene, opts.exclusion_radius)) return scene;
  }
  throw SamplingError("no acceptable scene after " + std::to_string(opts.max_retries) + " attempts");
}

// ---------------------------------------------------------------------------
// Ergodic path: sample the whole joint process and look at users near the
// window center.

struct ErgodicRealization {
  PointPattern users;  // users within the central half-radius (after thinning)
  PointPattern bs;
};

struct ErgodicOptions {
  double keep_probability = 1.0;  // independent thinning of central users
  double exclusion_radius = 1e-6;
  int max_retries = 100;
};

namespace detail {

inline PointPattern offspring_of(const PointPattern& parents, const PcpParams& p, const Window& window, Rng& rng) {
  std::vector<Point> pts;
  std::vector<std::size_t> owner;
  for (std::size_t j = 0; j < parents.size(); ++j) {
    const std::size_t m = sample_poisson(p.m_bar, rng);
    for (std::size_t c = 0; c < m; ++c) {
      const Point x = sample_offspring(parents[j], p.kind, p.rho, rng);
      if (window.contains(x)) {
        pts.push_back(x);
        owner.push_back(j);
      }
    }
  }
  return PointPattern(std::move(pts), window, std::move(owner));
}

}  // namespace detail

// Full joint realization on a disk window centred at the origin. Users are
// kept when they lie within half the window radius and survive independent
// thinning; realizations with no kept users are redrawn.
inline ErgodicRealization sample_ergodic_realization(const NetworkModel& model, const Window& window,
                                                     std::uint64_t seed, std::uint64_t index,
                                                     const ErgodicOptions& opts = {}) {
  model.validate();
  window.validate();
  if (!window.is_disk() || window.as_disk().center != Point{}) {
    throw ParameterError("ergodic sampling needs a disk window centred at the origin");
  }
  const double radius = window.as_disk().radius;
  if (radius < 4.0 * model.cluster_scale()) {
    throw ParameterError("ergodic window is too small relative to the cluster scale");
  }
  const Window central = Window::disk(0.5 * radius);

  Rng rng = make_stream(seed, index, Purpose::Ergodic);
  Rng thin = make_stream(seed, index, Purpose::ErgodicThinning);
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    PointPattern users, bs;
    switch (model.kind) {
      case ModelKind::Model1:
        users = sample_ppp(model.user_ppp, window, rng);
        bs = sample_ppp(model.bs_ppp, window, rng);
        break;
      case ModelKind::Model2: {
        auto sample = sample_pcp(model.user_pcp, window, rng);
        users = std::move(sample.offspring);
        bs = std::move(sample.parents);
        break;
      }
      case ModelKind::Model3: {
        const double margin = std::max(model.user_pcp.guard_margin(), model.bs_pcp.guard_margin());
        const auto parents = sample_ppp(PppParams{model.user_pcp.lambda_p}, window.dilated(margin), rng);
        users = detail::offspring_of(parents, model.user_pcp, window, rng);
        Rng bs_rng = make_stream(seed, index, Purpose::ErgodicBs);
        bs = detail::offspring_of(parents, model.bs_pcp, window, bs_rng);
        break;
      }
    }
    std::vector<Point> kept;
    for (const auto& u : users.points()) {
      if (!central.contains(u)) continue;
      if (opts.keep_probability < 1.0 && thin.uniform() >= opts.keep_probability) continue;
      kept.push_back(u);
    }
    if (!kept.empty() && !bs.empty()) return {PointPattern(std::move(kept), central), std::move(bs)};
  }
  throw SamplingError("ergodic sampler found no users in the central region");
}

// One typical user drawn uniformly among the central users of a full joint
// realization that have no BS inside the exclusion radius. Picks are redrawn
// until an acceptable user is found, which leaves the choice uniform over the
// acceptable ones.
inline TypicalUserScene sample_scene_ergodic(const NetworkModel& model, const Window& window, std::uint64_t seed,
                                             std::uint64_t index, const ErgodicOptions& opts = {}) {
  auto real = sample_ergodic_realization(model, window, seed, index, opts);
  Rng pick = make_stream(seed, index, Purpose::ErgodicPick);
  const std::size_t n = real.users.size();
  auto acceptable = [&](Point u) {
    return std::none_of(real.bs.points().begin(), real.bs.points().end(),
                        [&](Point b) { return distance(b, u) < opts.exclusion_radius; });
  };
  for (std::size_t attempt = 0; attempt < 4 * n + 16; ++attempt) {
    const auto i = std::min(static_cast<std::size_t>(pick.uniform() * static_cast<double>(n)), n - 1);
    if (!acceptable(real.users[i])) continue;
    TypicalUserScene scene;
    scene.user = real.users[i];
    scene.bs = std::move(real.bs);
    return scene;
  }
  throw SamplingError("ergodic sampler found no user clear of the exclusion radius");
}

// ---------------------------------------------------------------------------
// Simulation window

struct WindowChoice {
  double radius = 0.0;
  double tail_fraction = 0.0;  // mean interference beyond / within the window (PPP bound)
  bool capped = false;         // the point-count cap bound before the tail target was met
};

struct AutoWindowOptions {
  double tail_target = 1e-3;
  double max_expected_points = 2.0e5;
  double min_cluster_multiple = 10.0;  // radius >= this * cluster scale
};

// Radius R such that, for a PPP of the model's BS intensity, the mean
// interference from beyond R is below `tail_target` times the mean
// interference from the annulus [r0, R], where r0 = 1/sqrt(pi * intensity).
// Every length involved scales with k under the co-scaling law, so the
// chosen radius is scale-equivariant.
inline WindowChoice auto_window_radius(const NetworkModel& model, const PathlossModel& pathloss,
                                       const AutoWindowOptions& opts = {}) {
  const double intensity = model.bs_intensity();
  const double r0 = 1.0 / std::sqrt(std::numbers::pi * intensity);
  const double r_cap = std::sqrt(opts.max_expected_points / (std::numbers::pi * intensity));
  auto tail = [&](double r) {
    const double far = pathloss.radial_integral(r, INFINITY);
    const double near = pathloss.radial_integral(r0, r);
    return far / near;
  };

  WindowChoice out;
  if (pathloss.truncation_uncontrolled()) {
    std::clog << "equicov: warning: far-field exponent <= 2; window truncation bias is uncontrolled\n";
    out.radius = r_cap;
    out.tail_fraction = INFINITY;
    out.capped = true;
  } else {
    double hi = 2.0 * r0;
    while (tail(hi) > opts.tail_target && hi < r_cap) hi *= 2.0;
    if (hi >= r_cap && tail(r_cap) > opts.tail_target) {
      std::clog << "equicov: warning: window capped at " << r_cap << " m; interference tail fraction "
                << tail(r_cap) << '\n';
      out.radius = r_cap;
      out.capped = true;
    } else {
      double lo = hi / 2.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > opts.tail_target ? lo : hi) = mid;
      }
      out.radius = hi;
    }
    out.tail_fraction = tail(out.radius);
  }
  out.radius = std::max(out.radius, opts.min_cluster_multiple * model.cluster_scale());
  if (!out.capped) out.tail_fraction = tail(out.radius);
  return out;
}

}  // namespace equicov
