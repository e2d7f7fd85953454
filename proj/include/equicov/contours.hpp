#pragma once

// Equi-coverage families: the co-scaling law for the three network models,
// simulation-based verification along a family, and level-set extraction
// from a coverage field sampled on a parameter grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "equicov/coverage.hpp"
#include "equicov/errors.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/netmodels.hpp"
#include "equicov/parallel.hpp"
#include "equicov/propagation.hpp"
#include "equicov/rng.hpp"
#include "equicov/stats.hpp"

namespace equicov {

struct NetworkConfig {
  NetworkModel model;
  PathlossModel pathloss;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class ScaleMode {
  Full,        // point processes and pathloss boundaries (the equi-coverage law)
  PointsOnly,  // point processes only; a negative control under multi-slope pathloss
};

// Image of a configuration under scaling by k:
//   Model 1: lambda_b / k^2 (the independent user PPP is left alone)
//   Model 2: lambda_b / k^2 for BSs and user parents, user rho * k
//   Model 3: lambda_p / k^2, both rho * k; mean cluster sizes unchanged
// and finite pathloss boundaries * k (ScaleMode::Full).
inline NetworkConfig scale_config(const NetworkModel& model, const PathlossModel& pathloss, double k,
                                  ScaleMode mode = ScaleMode::Full) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factor must be positive");
  NetworkModel m = model;
  const double k2 = k * k;
  switch (m.kind) {
    case ModelKind::Model1:
      m.bs_ppp.lambda /= k2;
      break;
    case ModelKind::Model2:
      m.bs_ppp.lambda /= k2;
      m.user_pcp.lambda_p = m.bs_ppp.lambda;
      m.user_pcp.rho *= k;
      break;
    case ModelKind::Model3:
      m.user_pcp.lambda_p /= k2;
      m.bs_pcp.lambda_p = m.user_pcp.lambda_p;
      m.user_pcp.rho *= k;
      m.bs_pcp.rho *= k;
      break;
  }
  return {m, mode == ScaleMode::Full ? pathloss.scaled(k) : pathloss};
}

inline NetworkConfig scale_config(const NetworkConfig& c, double k, ScaleMode mode = ScaleMode::Full) {
  return scale_config(c.model, c.pathloss, k, mode);
}

struct ContourSpec {
  NetworkConfig base;
  std::vector<double> k_values;
};

// ---------------------------------------------------------------------------
// Meta-distribution distance

// sup over the grid of |F_a(eps) - F_b(eps)|.
inline double sup_gap(std::span<const double> a, std::span<const double> b, std::span<const double> grid) {
  const auto fa = empirical_ccdf(a, grid);
  const auto fb = empirical_ccdf(b, grid);
  double gap = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) gap = std::max(gap, std::abs(fa[i] - fb[i]));
  return gap;
}

// Upper `confidence` quantile of the sup-gap under the hypothesis that both
// samples come from one distribution, estimated by resampling the pooled
// sample into groups of the original sizes.
inline double bootstrap_gap_band(std::span<const double> a, std::span<const double> b, std::span<const double> grid,
                                 std::size_t replicates, double confidence, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw ParameterError("bootstrap needs two nonempty samples");
  if (replicates < 1) throw ParameterError("bootstrap needs at least one replicate");
  // Bin each pooled value by the number of grid points <= value; F(eps_g) is
  // then the share of values with bin > g.
  std::vector<std::size_t> bins;
  bins.reserve(a.size() + b.size());
  for (auto span : {a, b}) {
    for (double v : span) {
      bins.push_back(static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), v) - grid.begin()));
    }
  }
  const std::size_t pooled = bins.size();
  const std::size_t g = grid.size();
  std::vector<double> gaps(replicates);
  std::vector<std::size_t> ha(g + 1), hb(g + 1);
  for (std::size_t r = 0; r < replicates; ++r) {
    Rng rng = make_stream(seed, r, Purpose::Bootstrap);
    std::fill(ha.begin(), ha.end(), 0);
    std::fill(hb.begin(), hb.end(), 0);
    auto draw = [&] { return bins[static_cast<std::size_t>(rng.uniform() * static_cast<double>(pooled))]; };
    for (std::size_t i = 0; i < a.size(); ++i) ++ha[draw()];
    for (std::size_t i = 0; i < b.size(); ++i) ++hb[draw()];
    // Walk eps from the top: count of values with bin > gi.
    double gap = 0.0;
    std::size_t above_a = 0, above_b = 0;
    for (std::size_t gi = g; gi-- > 0;) {
      above_a += ha[gi + 1];
      above_b += hb[gi + 1];
      const double fa = static_cast<double>(above_a) / static_cast<double>(a.size());
      const double fb = static_cast<double>(above_b) / static_cast<double>(b.size());
      gap = std::max(gap, std::abs(fa - fb));
    }
    gaps[r] = gap;
  }
  std::sort(gaps.begin(), gaps.end());
  const auto idx = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(replicates))) - 1;
  return gaps[std::min(idx, replicates - 1)];
}

// ---------------------------------------------------------------------------
// Contour verification

enum class VerifyMode { Independent, Paired, Both };

struct VerifyOptions {
  double tolerance_se = 3.0;
  double band_confidence = 0.9973;   // matches a 3-sigma two-sided band
  std::size_t bootstrap_replicates = 1000;
  VerifyMode mode = VerifyMode::Independent;
  ScaleMode scale_mode = ScaleMode::Full;
  double paired_tolerance = 1e-9;
};

struct ContourPoint {
  double k = 1.0;
  NetworkConfig config;
  Window window;
  MetaDistEstimate estimate;        // empty in paired-only mode
  double se_distance = 0.0;
  double sup_gap = 0.0;
  double gap_band = 0.0;
  bool mean_ok = true;
  bool gap_ok = true;
  double paired_max_rel_error = 0.0;  // paired mode only
  bool paired_ok = true;

  [[nodiscard]] bool pass() const { return mean_ok && gap_ok && paired_ok; }
};

struct ContourVerdict {
  MetaDistEstimate base;
  Window base_window;
  std::vector<ContourPoint> points;
  VerifyOptions options;

  [[nodiscard]] bool pass() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.pass(); });
  }
};

// Largest relative difference of per-scene conditional coverage between the
// base realizations and the same realizations scaled by k, with identical
// fading streams on both sides.
inline double paired_identity_error(const NetworkConfig& base, const NetworkConfig& scaled, double k,
                                    const CoverageConfig& cfg, const Window& window, std::uint64_t seed) {
  std::vector<double> err(cfg.n_outer);
  parallel_for(cfg.n_outer, cfg.workers, [&](std::size_t i) {
    Rng scene_rng = make_stream(seed, i, Purpose::Scene);
    const auto scene = sample_scene(base.model, window, scene_rng, cfg.scene);
    const PointPattern scaled_bs = scale_pattern(scene.bs, k);
    Rng f1 = make_stream(seed, i, Purpose::Fading);
    Rng f2 = make_stream(seed, i, Purpose::Fading);
    const double a = conditional_coverage(scene.user, scene.bs, base.pathloss, cfg, f1);
    const double b = conditional_coverage(k * scene.user, scaled_bs, scaled.pathloss, cfg, f2);
    const double denom = std::max(std::abs(a), 1e-300);
    err[i] = (a == b) ? 0.0 : std::abs(a - b) / denom;
  });
  return err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
}

// Runs the base configuration and every scaled configuration (window scaled
// by k as well). Independent mode uses fresh randomness per k; a point passes
// when its mean coverage is within tolerance_se combined SEs of the base and
// the sup-eps CCDF gap is inside the bootstrap band. Paired mode reuses the
// base scenes and fading and checks per-scene equality.
inline ContourVerdict verify_contour(const ContourSpec& spec, const CoverageConfig& cfg, const Window& base_window,
                                     std::uint64_t seed, const VerifyOptions& opts = {}) {
  if (spec.k_values.empty()) throw ParameterError("contour verification needs at least one k");
  for (double k : spec.k_values) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factors must be positive");
  }
  cfg.validate();
  const bool independent = opts.mode != VerifyMode::Paired;
  const bool paired = opts.mode != VerifyMode::Independent;

  ContourVerdict verdict;
  verdict.options = opts;
  verdict.base_window = base_window;
  const std::uint64_t base_seed = child_seed(seed, 0, Purpose::Contour);
  if (independent) verdict.base = meta_distribution(spec.base.model, spec.base.pathloss, cfg, base_window, base_seed);

  for (std::size_t i = 0; i < spec.k_values.size(); ++i) {
    const double k = spec.k_values[i];
    ContourPoint pt;
    pt.k = k;
    pt.config = scale_config(spec.base, k, opts.scale_mode);
    pt.window = base_window.scaled(k);
    if (independent) {
      pt.estimate = meta_distribution(pt.config.model, pt.config.pathloss, cfg, pt.window,
                                      child_seed(seed, i + 1, Purpose::Contour));
      pt.se_distance = se_distance(verdict.base.mean_coverage, pt.estimate.mean_coverage);
      pt.mean_ok = pt.se_distance <= opts.tolerance_se;
      pt.sup_gap = sup_gap(verdict.base.samples, pt.estimate.samples, cfg.epsilon_grid);
      pt.gap_band = bootstrap_gap_band(verdict.base.samples, pt.estimate.samples, cfg.epsilon_grid,
                                       opts.bootstrap_replicates, opts.band_confidence,
                                       child_seed(seed, i + 1, Purpose::Bootstrap));
      pt.gap_ok = pt.sup_gap <= pt.gap_band;
    }
    if (paired) {
      pt.paired_max_rel_error = paired_identity_error(spec.base, pt.config, k, cfg, base_window, base_seed);
      pt.paired_ok = pt.paired_max_rel_error < opts.paired_tolerance;
    }
    verdict.points.push_back(std::move(pt));
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Level sets

enum class SweepParam { LambdaB, Rho, Rc1 };

inline const char* to_string(SweepParam p) noexcept {
  switch (p) {
    case SweepParam::LambdaB: return "lambda_b_per_m2";
    case SweepParam::Rho: return "rho_m";
    case SweepParam::Rc1: return "rc1_m";
  }
  return "?";
}

// Sets one swept parameter on a configuration. LambdaB is the BS intensity
// (parent intensity for Model 3); Rho the cluster scale of every cluster
// process; Rc1 the first pathloss boundary.
inline NetworkConfig with_param(NetworkConfig c, SweepParam p, double v) {
  switch (p) {
    case SweepParam::LambdaB:
      if (c.model.kind == ModelKind::Model3) {
        c.model.user_pcp.lambda_p = v;
        c.model.bs_pcp.lambda_p = v;
      } else {
        c.model.bs_ppp.lambda = v;
        c.model.user_pcp.lambda_p = v;
      }
      break;
    case SweepParam::Rho:
      if (c.model.kind == ModelKind::Model1) throw ParameterError("model1 has no cluster scale to sweep");
      c.model.user_pcp.rho = v;
      c.model.bs_pcp.rho = v;
      break;
    case SweepParam::Rc1: {
      auto b = std::vector<double>(c.pathloss.boundaries().begin(), c.pathloss.boundaries().end());
      if (b.empty()) throw ParameterError("single-slope pathloss has no boundary to sweep");
      b[0] = v;
      c.pathloss = PathlossModel(std::move(b), std::vector<double>(c.pathloss.alphas().begin(), c.pathloss.alphas().end()));
      break;
    }
  }
  c.model.validate();
  return c;
}

struct SweepAxis {
  SweepParam param = SweepParam::LambdaB;
  std::vector<double> values;  // strictly increasing
  bool log_scale = true;

  [[nodiscard]] double coord(double v) const { return log_scale ? std::log10(v) : v; }
  [[nodiscard]] double value(double c) const { return log_scale ? std::pow(10.0, c) : c; }
};

struct SweepSpec {
  NetworkConfig base;
  SweepAxis x;
  SweepAxis y;
};

struct CoverageField {
  SweepAxis x;
  SweepAxis y;
  std::vector<double> mean;       // row-major: mean[ix * ny + iy]
  std::vector<double> std_error;

  [[nodiscard]] double at(std::size_t ix, std::size_t iy) const { return mean[ix * y.values.size() + iy]; }
};

struct Polyline {
  double level = 0.0;
  std::vector<Point> vertices;  // parameter units (x value, y value)
};

// Mean coverage at every grid node. Each node uses the auto window for its
// configuration and its own seed stream.
inline CoverageField sample_coverage_field(const SweepSpec& spec, const CoverageConfig& cfg, std::uint64_t seed) {
  const std::size_t nx = spec.x.values.size(), ny = spec.y.values.size();
  if (nx < 3 || ny < 3) throw ParameterError("level-set sweep needs at least a 3x3 grid");
  for (const auto* axis : {&spec.x, &spec.y}) {
    for (std::size_t i = 1; i < axis->values.size(); ++i) {
      if (!(axis->values[i] > axis->values[i - 1])) throw ParameterError("sweep axis values must increase");
    }
    for (double v : axis->values) {
      if (!(v > 0.0)) throw ParameterError("sweep axis values must be positive");
    }
  }
  CoverageField field{spec.x, spec.y, std::vector<double>(nx * ny), std::vector<double>(nx * ny)};
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const auto cell = with_param(with_param(spec.base, spec.x.param, spec.x.values[ix]), spec.y.param,
                                   spec.y.values[iy]);
      const Window w = Window::disk(auto_window_radius(cell.model, cell.pathloss).radius);
      const auto est = meta_distribution(cell.model, cell.pathloss, cfg, w,
                                         child_seed(seed, ix * ny + iy, Purpose::Sweep));
      field.mean[ix * ny + iy] = est.mean_coverage.mean;
      field.std_error[ix * ny + iy] = est.mean_coverage.std_error;
    }
  }
  return field;
}

// Bilinear marching squares on the (possibly log-scaled) grid. Crossing
// points are interpolated linearly along cell edges; saddle cells are
// resolved with the cell-centre average. Segments sharing an edge crossing
// are chained into polylines.
inline std::vector<Polyline> extract_level_sets(const CoverageField& field, std::span<const double> levels) {
  const std::size_t nx = field.x.values.size(), ny = field.y.values.size();
  std::vector<Polyline> out;
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw ParameterError("coverage levels must lie in (0,1)");
    const auto [lo, hi] = std::minmax_element(field.mean.begin(), field.mean.end());
    if (level < *lo || level > *hi) {
      std::clog << "equicov: notice: level " << level << " is outside the observed coverage range\n";
      continue;
    }

    // Edge ids: horizontal edge (ix,iy)-(ix+1,iy) -> 2*(ix*ny+iy); vertical (ix,iy)-(ix,iy+1) -> +1.
    auto h_edge = [&](std::size_t ix, std::size_t iy) { return 2 * (ix * ny + iy); };
    auto v_edge = [&](std::size_t ix, std::size_t iy) { return 2 * (ix * ny + iy) + 1; };
    auto crossing = [&](std::size_t edge) {
      const std::size_t node = edge / 2;
      const std::size_t ix = node / ny, iy = node % ny;
      const std::size_t jx = (edge % 2 == 0) ? ix + 1 : ix;
      const std::size_t jy = (edge % 2 == 0) ? iy : iy + 1;
      const double fa = field.at(ix, iy), fb = field.at(jx, jy);
      const double t = (fa == fb) ? 0.5 : (level - fa) / (fb - fa);
      const double cx = field.x.coord(field.x.values[ix]) * (1 - t) + field.x.coord(field.x.values[jx]) * t;
      const double cy = field.y.coord(field.y.values[iy]) * (1 - t) + field.y.coord(field.y.values[jy]) * t;
      return Point{cx, cy};
    };

    std::vector<std::pair<std::size_t, std::size_t>> segments;
    for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
      for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
        const double f00 = field.at(ix, iy), f10 = field.at(ix + 1, iy);
        const double f11 = field.at(ix + 1, iy + 1), f01 = field.at(ix, iy + 1);
        const bool a00 = f00 >= level, a10 = f10 >= level, a11 = f11 >= level, a01 = f01 >= level;
        // Edges in counter-clockwise order: bottom, right, top, left.
        const std::size_t e[4] = {h_edge(ix, iy), v_edge(ix + 1, iy), h_edge(ix, iy + 1), v_edge(ix, iy)};
        const bool cut[4] = {a00 != a10, a10 != a11, a01 != a11, a00 != a01};
        std::vector<std::size_t> hits;
        for (int s = 0; s < 4; ++s) {
          if (cut[s]) hits.push_back(e[s]);
        }
        if (hits.size() == 2) {
          segments.emplace_back(hits[0], hits[1]);
        } else if (hits.size() == 4) {
          const bool centre_above = 0.25 * (f00 + f10 + f11 + f01) >= level;
          // a00 == a11 here. Centre on the same side as the (00,11) diagonal
          // joins it, leaving the other two corners isolated.
          if (centre_above == a00) {
            segments.emplace_back(e[0], e[1]);
            segments.emplace_back(e[2], e[3]);
          } else {
            segments.emplace_back(e[0], e[3]);
            segments.emplace_back(e[1], e[2]);
          }
        }
      }
    }

    std::multimap<std::size_t, std::size_t> by_edge;  // edge -> segment index
    for (std::size_t s = 0; s < segments.size(); ++s) {
      by_edge.emplace(segments[s].first, s);
      by_edge.emplace(segments[s].second, s);
    }
    std::vector<bool> used(segments.size(), false);
    auto other_segment = [&](std::size_t edge, std::size_t self) -> std::ptrdiff_t {
      const auto [b, e] = by_edge.equal_range(edge);
      for (auto it = b; it != e; ++it) {
        if (it->second != self && !used[it->second]) return static_cast<std::ptrdiff_t>(it->second);
      }
      return -1;
    };
    auto degree = [&](std::size_t edge) { return by_edge.count(edge); };

    // Open chains start at boundary edges (degree 1); what remains are loops.
    std::vector<std::size_t> order(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) order[s] = s;
    std::stable_partition(order.begin(), order.end(), [&](std::size_t s) {
      return degree(segments[s].first) == 1 || degree(segments[s].second) == 1;
    });
    for (std::size_t start : order) {
      if (used[start]) continue;
      used[start] = true;
      auto [first, last] = segments[start];
      if (degree(first) != 1 && degree(last) == 1) std::swap(first, last);
      std::vector<std::size_t> chain{first, last};
      std::size_t current = start;
      std::size_t tip = last;
      for (;;) {
        const auto next = other_segment(tip, current);
        if (next < 0) break;
        current = static_cast<std::size_t>(next);
        used[current] = true;
        tip = segments[current].first == tip ? segments[current].second : segments[current].first;
        chain.push_back(tip);
      }
      Polyline line{level, {}};
      for (std::size_t edge : chain) {
        const Point c = crossing(edge);
        line.vertices.push_back({field.x.value(c.x), field.y.value(c.y)});
      }
      out.push_back(std::move(line));
    }
  }
  return out;
}

// CSV `level,segment_id,x,y`; segment_id numbers polylines from 0.
inline void write_level_sets_csv(std::ostream& os, const std::vector<Polyline>& lines, const SweepAxis& x,
                                 const SweepAxis& y,
                                 std::span<const std::pair<std::string, std::string>> meta = {}) {
  os << "# x_param=" << to_string(x.param) << "\n# y_param=" << to_string(y.param) << '\n';
  os << "# x_scale=" << (x.log_scale ? "log" : "linear") << "\n# y_scale=" << (y.log_scale ? "log" : "linear")
     << '\n';
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
  os << "level,segment_id,x,y\n";
  for (std::size_t s = 0; s < lines.size(); ++s) {
    for (const auto& p : lines[s].vertices) {
      os << format_double(lines[s].level) << ',' << s << ',' << format_double(p.x) << ',' << format_double(p.y)
         << '\n';
    }
  }
}

// Coverage grid as CSV `x,y,mean_coverage,se`.
inline void write_field_csv(std::ostream& os, const CoverageField& f) {
  os << "# x_param=" << to_string(f.x.param) << "\n# y_param=" << to_string(f.y.param) << '\n';
  os << "x,y,mean_coverage,se\n";
  const std::size_t ny = f.y.values.size();
  for (std::size_t ix = 0; ix < f.x.values.size(); ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      os << format_double(f.x.values[ix]) << ',' << format_double(f.y.values[iy]) << ','
         << format_double(f.mean[ix * ny + iy]) << ',' << format_double(f.std_error[ix * ny + iy]) << '\n';
    }
  }
}

}  // namespace equicov
