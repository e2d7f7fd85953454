#pragma once

// Conditional coverage, the meta distribution of the SIR and the spatially
// averaged coverage, estimated by nested Monte Carlo over scenes (outer) and
// fading (inner). Rayleigh fading admits an exact inner expectation.

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "equicov/errors.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/netmodels.hpp"
#include "equicov/parallel.hpp"
#include "equicov/propagation.hpp"
#include "equicov/rng.hpp"
#include "equicov/stats.hpp"

namespace equicov {

// `points` uniformly spaced reliabilities on [0, 1].
inline std::vector<double> uniform_epsilon_grid(std::size_t points = 101) {
  if (points < 2) throw ParameterError("epsilon grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

struct CoverageConfig {
  double beta = 1.0;
  std::vector<double> epsilon_grid = uniform_epsilon_grid();
  std::size_t n_outer = 2000;
  std::size_t n_inner = 500;
  AssociationPolicy policy = AssociationPolicy::MaxPower;
  FadingSpec fading{};
  bool closed_form = true;    // use the exact Rayleigh inner expectation when available
  double confidence = 0.95;
  unsigned workers = 1;
  SceneOptions scene{};

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("SIR threshold must be positive");
    if (epsilon_grid.empty()) throw ParameterError("epsilon grid is empty");
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
      const double e = epsilon_grid[i];
      if (!(e >= 0.0 && e <= 1.0)) throw ParameterError("epsilon grid values must lie in [0,1]");
      if (i > 0 && !(e > epsilon_grid[i - 1])) throw ParameterError("epsilon grid must be strictly increasing");
    }
    if (n_outer < 1) throw ParameterError("n_outer must be positive");
    if (n_inner < 1) throw ParameterError("n_inner must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ParameterError("confidence must lie in (0,1)");
    fading.validate();
  }
};

enum class InnerMethod { ClosedForm, MonteCarlo };

// Which inner estimator conditional_coverage will use for this config.
inline InnerMethod inner_method(const CoverageConfig& cfg) {
  if (!cfg.closed_form || !cfg.fading.is_rayleigh()) return InnerMethod::MonteCarlo;
  if (cfg.policy == AssociationPolicy::MaxSir && cfg.beta < 1.0) return InnerMethod::MonteCarlo;
  return InnerMethod::ClosedForm;
}

namespace detail {

inline void notice_maxsir_fallback() {
  static std::atomic<bool> said{false};
  if (!said.exchange(true)) {
    std::clog << "equicov: notice: max-SIR closed form needs beta >= 1; using Monte Carlo over fading\n";
  }
}

// Rayleigh, max-power: prod_{b != s} 1 / (1 + beta l_b / l_s).
inline double closed_form_max_power(std::span<const double> gains, double beta) {
  const std::size_t s = associate_gains(gains, {}, AssociationPolicy::MaxPower);
  double log_p = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (i != s) log_p -= std::log1p(beta * gains[i] / gains[s]);
  }
  return std::exp(log_p);
}

// Rayleigh, max-SIR, beta >= 1: at most one BS can reach SIR >= beta, so
//   P = sum_b prod_{b' != b} 1 / (1 + beta l_{b'} / l_b).
// Terms are visited strongest first. With U_i the partial product over the
// i stronger BSs, every later term is at most U_i (1+beta)^-(i'-i), which
// bounds the remaining sum by U_i (1+beta)/beta.
inline double closed_form_max_sir(std::span<const double> gains, double beta) {
  std::vector<double> sorted(gains.begin(), gains.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double geometric = (1.0 + beta) / beta;
  double total = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double li = sorted[i];
    double log_stronger = 0.0;
    for (std::size_t j = 0; j < i; ++j) log_stronger -= std::log1p(beta * sorted[j] / li);
    if (std::exp(log_stronger) * geometric < 1e-17 * std::max(total, 1e-300)) break;
    double log_weaker = 0.0;
    for (std::size_t j = i + 1; j < sorted.size(); ++j) log_weaker -= std::log1p(beta * sorted[j] / li);
    total += std::exp(log_stronger + log_weaker);
  }
  return std::min(total, 1.0);
}

}  // namespace detail

// P(SIR >= beta | BS positions) for a user at `user`.
inline double conditional_coverage(Point user, const PointPattern& bs, const PathlossModel& pathloss,
                                   const CoverageConfig& cfg, Rng& fading_rng) {
  if (bs.empty()) throw NoServerError("scene has no base station");
  const auto gains = link_gains(user, bs, pathloss);
  if (inner_method(cfg) == InnerMethod::ClosedForm) {
    return cfg.policy == AssociationPolicy::MaxPower ? detail::closed_form_max_power(gains, cfg.beta)
                                                     : detail::closed_form_max_sir(gains, cfg.beta);
  }
  if (cfg.closed_form && cfg.fading.is_rayleigh()) detail::notice_maxsir_fallback();

  std::vector<double> h(gains.size());
  std::size_t covered = 0;
  for (std::size_t t = 0; t < cfg.n_inner; ++t) {
    cfg.fading.fill(h, fading_rng);
    const std::size_t s = associate_gains(gains, h, cfg.policy);
    if (sir_from_gains(gains, h, s) >= cfg.beta) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(cfg.n_inner);
}

inline double conditional_coverage(const TypicalUserScene& scene, const PathlossModel& pathloss,
                                   const CoverageConfig& cfg, Rng& fading_rng) {
  return conditional_coverage(scene.user, scene.bs, pathloss, cfg, fading_rng);
}

// ---------------------------------------------------------------------------
// Meta distribution

struct MetaDistEstimate {
  std::vector<double> epsilon;
  std::vector<double> ccdf;           // fraction of scenes with P_c >= epsilon
  std::vector<Interval> ccdf_ci;      // Wilson
  MeanEstimate mean_coverage;
  Interval mean_ci{};
  double confidence = 0.95;
  std::size_t n_outer = 0;
  std::vector<double> samples;        // per-scene P_c, in trial order
};

// Empirical CCDF of `samples` on `grid`: fraction of samples >= each epsilon.
inline std::vector<double> empirical_ccdf(std::span<const double> samples, std::span<const double> grid) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(grid.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), grid[g]);
    out[g] = static_cast<double>(sorted.end() - it) / n;
  }
  return out;
}

inline MetaDistEstimate summarize_meta_distribution(std::vector<double> samples, std::span<const double> grid,
                                                    double confidence) {
  MetaDistEstimate est;
  est.epsilon.assign(grid.begin(), grid.end());
  est.confidence = confidence;
  est.n_outer = samples.size();
  est.ccdf = empirical_ccdf(samples, grid);
  for (double f : est.ccdf) {
    const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(samples.size())));
    est.ccdf_ci.push_back(wilson_interval(k, samples.size(), confidence));
  }
  est.mean_coverage = mean_estimate(samples);
  est.mean_ci = est.mean_coverage.ci(confidence);
  est.samples = std::move(samples);
  return est;
}

// Outer loop over n_outer Palm scenes. Trial i draws its scene from stream
// (seed, i, Scene) and its fading from (seed, i, Fading), so the result is
// independent of the worker count.
inline MetaDistEstimate meta_distribution(const NetworkModel& model, const PathlossModel& pathloss,
                                          const CoverageConfig& cfg, const Window& window, std::uint64_t seed) {
  cfg.validate();
  model.validate();
  std::vector<double> pc(cfg.n_outer);
  parallel_for(cfg.n_outer, cfg.workers, [&](std::size_t i) {
    Rng scene_rng = make_stream(seed, i, Purpose::Scene);
    const auto scene = sample_scene(model, window, scene_rng, cfg.scene);
    Rng fading_rng = make_stream(seed, i, Purpose::Fading);
    pc[i] = conditional_coverage(scene, pathloss, cfg, fading_rng);
  });
  return summarize_meta_distribution(std::move(pc), cfg.epsilon_grid, cfg.confidence);
}

// Trapezoid integral of the CCDF over the grid (which must span [0,1]).
inline double ccdf_integral(const MetaDistEstimate& est) {
  double total = 0.0;
  for (std::size_t i = 1; i < est.epsilon.size(); ++i) {
    total += 0.5 * (est.ccdf[i] + est.ccdf[i - 1]) * (est.epsilon[i] - est.epsilon[i - 1]);
  }
  return total;
}

struct ConsistencyReport {
  bool monotone = false;
  bool starts_at_one = false;      // F(0) = 1 when the grid contains 0
  bool in_unit_interval = false;
  double layer_cake_gap = 0.0;     // |integral of F - mean coverage|
  double layer_cake_tolerance = 0.0;
  bool layer_cake_ok = false;

  [[nodiscard]] bool ok() const { return monotone && starts_at_one && in_unit_interval && layer_cake_ok; }
};

// Internal consistency of an estimate. The trapezoid rule on a monotone
// step function is off by at most half the largest grid step; MC noise adds
// `se_multiplier` standard errors.
inline ConsistencyReport check_consistency(const MetaDistEstimate& est, double se_multiplier = 3.0) {
  ConsistencyReport r;
  r.monotone = std::is_sorted(est.ccdf.rbegin(), est.ccdf.rend());
  r.starts_at_one = est.epsilon.empty() || est.epsilon.front() != 0.0 || est.ccdf.front() == 1.0;
  r.in_unit_interval = std::all_of(est.ccdf.begin(), est.ccdf.end(), [](double f) { return f >= 0.0 && f <= 1.0; }) &&
                       est.mean_coverage.mean >= 0.0 && est.mean_coverage.mean <= 1.0;
  const bool spans = !est.epsilon.empty() && est.epsilon.front() == 0.0 && est.epsilon.back() == 1.0;
  if (!spans) {
    r.layer_cake_ok = true;
    return r;
  }
  double step = 0.0;
  for (std::size_t i = 1; i < est.epsilon.size(); ++i) step = std::max(step, est.epsilon[i] - est.epsilon[i - 1]);
  r.layer_cake_gap = std::abs(ccdf_integral(est) - est.mean_coverage.mean);
  r.layer_cake_tolerance = 0.5 * step + se_multiplier * est.mean_coverage.std_error;
  r.layer_cake_ok = r.layer_cake_gap <= r.layer_cake_tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// PPP reference values (single slope, Rayleigh, interference limited)

// Max-power (nearest BS): 1 / (1 + beta^(2/a) * int_{beta^(-2/a)}^inf du / (1 + u^(a/2))).
// Max-SIR, beta >= 1:      1 / (2 beta^(2/a) * int_0^inf t / (1 + t^a) dt).
inline double ppp_coverage_oracle(double beta, double alpha, AssociationPolicy policy) {
  if (!(alpha > 2.0) || !std::isfinite(alpha)) throw ParameterError("PPP coverage oracle needs alpha > 2");
  if (!(beta > 0.0)) throw ParameterError("PPP coverage oracle needs beta > 0");
  if (std::isinf(beta)) return 0.0;
  boost::math::quadrature::exp_sinh<double> integrator;
  const double b2a = std::pow(beta, 2.0 / alpha);
  if (policy == AssociationPolicy::MaxPower) {
    const double lower = 1.0 / b2a;
    const double tail = integrator.integrate([&](double u) { return 1.0 / (1.0 + std::pow(u, alpha / 2.0)); },
                                             lower, INFINITY);
    return 1.0 / (1.0 + b2a * tail);
  }
  if (beta < 1.0) throw ParameterError("max-SIR PPP coverage oracle is only valid for beta >= 1");
  const double c = integrator.integrate([&](double t) { return t / (1.0 + std::pow(t, alpha)); }, 0.0, INFINITY);
  return 1.0 / (2.0 * b2a * c);
}

// ---------------------------------------------------------------------------
// CSV: `epsilon,ccdf,ci_lo,ci_hi` preceded by '#' metadata lines.

inline void write_meta_distribution_csv(std::ostream& os, const MetaDistEstimate& est,
                                        std::span<const std::pair<std::string, std::string>> meta = {}) {
  os << "# mean_coverage=" << format_double(est.mean_coverage.mean) << '\n';
  os << "# mean_coverage_se=" << format_double(est.mean_coverage.std_error) << '\n';
  os << "# mean_coverage_ci_lo=" << format_double(est.mean_ci.lo) << '\n';
  os << "# mean_coverage_ci_hi=" << format_double(est.mean_ci.hi) << '\n';
  os << "# confidence=" << format_double(est.confidence) << '\n';
  os << "# n_outer=" << est.n_outer << '\n';
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
  os << "epsilon,ccdf,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < est.epsilon.size(); ++i) {
    os << format_double(est.epsilon[i]) << ',' << format_double(est.ccdf[i]) << ','
       << format_double(est.ccdf_ci[i].lo) << ',' << format_double(est.ccdf_ci[i].hi) << '\n';
  }
}

}  // namespace equicov
