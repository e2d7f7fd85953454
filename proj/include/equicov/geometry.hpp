#pragma once

// Planar point patterns and the PPP / Matern / Thomas samplers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "equicov/errors.hpp"
#include "equicov/format.hpp"
#include "equicov/parallel.hpp"
#include "equicov/rng.hpp"
#include "equicov/stats.hpp"

namespace equicov {

struct Point {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const noexcept { return std::hypot(x, y); }

  friend Point operator+(Point a, Point b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double k, Point p) noexcept { return {k * p.x, k * p.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) noexcept { return (a - b).norm(); }

struct Disk {
  Point center{};
  double radius = 0.0;
  friend bool operator==(const Disk&, const Disk&) = default;
};

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Observation window or test region: a closed disk or axis-aligned rectangle.
class Window {
 public:
  Window() = default;
  Window(Disk d) : shape_(d) {}  // NOLINT(google-explicit-constructor)
  Window(Rect r) : shape_(r) {}  // NOLINT(google-explicit-constructor)

  static Window disk(double radius, Point center = {}) { return Window(Disk{center, radius}); }
  static Window rect(double x_min, double y_min, double x_max, double y_max) {
    return Window(Rect{x_min, y_min, x_max, y_max});
  }
  static Window unit_square() { return rect(0.0, 0.0, 1.0, 1.0); }

  [[nodiscard]] bool is_disk() const noexcept { return std::holds_alternative<Disk>(shape_); }
  [[nodiscard]] const Disk& as_disk() const { return std::get<Disk>(shape_); }
  [[nodiscard]] const Rect& as_rect() const { return std::get<Rect>(shape_); }

  [[nodiscard]] double area() const noexcept {
    if (const auto* d = std::get_if<Disk>(&shape_)) return std::numbers::pi * d->radius * d->radius;
    const auto& r = std::get<Rect>(shape_);
    return std::max(0.0, r.x_max - r.x_min) * std::max(0.0, r.y_max - r.y_min);
  }

  // Throws ParameterError unless the window has positive, finite area.
  void validate() const {
    const double a = area();
    if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("window must have positive finite area");
  }

  // Closed-set membership; `slack` is a relative tolerance for rounding after scaling.
  [[nodiscard]] bool contains(Point p, double slack = 0.0) const noexcept {
    if (const auto* d = std::get_if<Disk>(&shape_)) {
      return distance(p, d->center) <= d->radius * (1.0 + slack);
    }
    const auto& r = std::get<Rect>(shape_);
    const double sx = slack * std::max(std::abs(r.x_min), std::abs(r.x_max));
    const double sy = slack * std::max(std::abs(r.y_min), std::abs(r.y_max));
    return p.x >= r.x_min - sx && p.x <= r.x_max + sx && p.y >= r.y_min - sy && p.y <= r.y_max + sy;
  }

  // True when `inner` is a subset of this window.
  [[nodiscard]] bool contains(const Window& inner) const noexcept {
    if (inner.is_disk()) {
      const auto& d = inner.as_disk();
      if (is_disk()) {
        const auto& o = as_disk();
        return distance(d.center, o.center) + d.radius <= o.radius;
      }
      const auto& r = as_rect();
      return d.center.x - d.radius >= r.x_min && d.center.x + d.radius <= r.x_max &&
             d.center.y - d.radius >= r.y_min && d.center.y + d.radius <= r.y_max;
    }
    const auto& r = inner.as_rect();
    const Point corners[] = {{r.x_min, r.y_min}, {r.x_min, r.y_max}, {r.x_max, r.y_min}, {r.x_max, r.y_max}};
    return std::all_of(std::begin(corners), std::end(corners), [&](Point c) { return contains(c); });
  }

  // Minkowski dilation by `margin` (a rectangle grows on every side).
  [[nodiscard]] Window dilated(double margin) const {
    if (const auto* d = std::get_if<Disk>(&shape_)) return Disk{d->center, d->radius + margin};
    const auto& r = std::get<Rect>(shape_);
    return Rect{r.x_min - margin, r.y_min - margin, r.x_max + margin, r.y_max + margin};
  }

  // Image under x -> kx (scaling about the origin).
  [[nodiscard]] Window scaled(double k) const {
    if (const auto* d = std::get_if<Disk>(&shape_)) return Disk{k * d->center, k * d->radius};
    const auto& r = std::get<Rect>(shape_);
    return Rect{k * r.x_min, k * r.y_min, k * r.x_max, k * r.y_max};
  }

  // Largest distance from the origin to a point of the window.
  [[nodiscard]] double extent_from_origin() const noexcept {
    if (const auto* d = std::get_if<Disk>(&shape_)) return d->center.norm() + d->radius;
    const auto& r = std::get<Rect>(shape_);
    return std::hypot(std::max(std::abs(r.x_min), std::abs(r.x_max)),
                      std::max(std::abs(r.y_min), std::abs(r.y_max)));
  }

  // Uniform point in the window.
  Point sample_uniform(Rng& rng) const {
    if (const auto* d = std::get_if<Disk>(&shape_)) {
      const double r = d->radius * std::sqrt(rng.uniform());
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      return {d->center.x + r * std::cos(theta), d->center.y + r * std::sin(theta)};
    }
    const auto& r = std::get<Rect>(shape_);
    const double x = r.x_min + (r.x_max - r.x_min) * rng.uniform();
    const double y = r.y_min + (r.y_max - r.y_min) * rng.uniform();
    return {x, y};
  }

  friend bool operator==(const Window&, const Window&) = default;

 private:
  std::variant<Disk, Rect> shape_{Disk{}};
};

// A compact test set for void-probability estimation.
using Region = Window;

// Relative slack accepted when checking window membership of scaled points.
inline constexpr double kMembershipSlack = 1e-12;

// A finite realization of a planar point process.
class PointPattern {
 public:
  PointPattern() = default;

  PointPattern(std::vector<Point> points, Window window,
               std::optional<std::vector<std::size_t>> parent_index = std::nullopt)
      : points_(std::move(points)), window_(window), parent_index_(std::move(parent_index)) {
    for (const auto& p : points_) {
      if (!window_.contains(p, kMembershipSlack)) throw ParameterError("point outside pattern window");
    }
    if (parent_index_ && parent_index_->size() != points_.size()) {
      throw ParameterError("parent_index length differs from point count");
    }
  }

  [[nodiscard]] std::span<const Point> points() const noexcept { return points_; }
  [[nodiscard]] const Window& window() const noexcept { return window_; }
  [[nodiscard]] const std::optional<std::vector<std::size_t>>& parent_index() const noexcept {
    return parent_index_;
  }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
  [[nodiscard]] const Point& operator[](std::size_t i) const { return points_[i]; }

  [[nodiscard]] std::size_t count_in(const Region& region) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(points_.begin(), points_.end(), [&](Point p) { return region.contains(p); }));
  }

  // Throws unless every parent index refers to an entry of `parents`.
  void validate_parents(const PointPattern& parents) const {
    if (!parent_index_) return;
    for (std::size_t idx : *parent_index_) {
      if (idx >= parents.size()) throw ParameterError("parent index out of range");
    }
  }

  friend bool operator==(const PointPattern&, const PointPattern&) = default;

 private:
  std::vector<Point> points_;
  Window window_;
  std::optional<std::vector<std::size_t>> parent_index_;
};

struct PppParams {
  double lambda = 0.0;  // points per m^2

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("PPP intensity must be positive and finite");
  }
  friend bool operator==(const PppParams&, const PppParams&) = default;
};

enum class ClusterKind { Matern, Thomas };

inline const char* to_string(ClusterKind k) noexcept { return k == ClusterKind::Matern ? "mcp" : "tcp"; }

// Neyman-Scott cluster process: parent PPP(lambda_p), Poisson(m_bar) offspring
// per parent, displaced uniformly on a disk of radius rho (Matern) or by an
// isotropic Gaussian with per-axis standard deviation rho (Thomas).
struct PcpParams {
  double lambda_p = 0.0;
  double m_bar = 0.0;
  double rho = 0.0;
  ClusterKind kind = ClusterKind::Thomas;

  void validate() const {
    if (!(lambda_p > 0.0) || !std::isfinite(lambda_p)) throw ParameterError("PCP parent intensity must be positive");
    if (!(m_bar > 0.0) || !std::isfinite(m_bar)) throw ParameterError("PCP mean offspring count must be positive");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("PCP cluster scale must be positive");
  }
  [[nodiscard]] double intensity() const noexcept { return lambda_p * m_bar; }

  // Parents are drawn this far outside the window so edge clusters still
  // contribute offspring.
  [[nodiscard]] double guard_margin() const noexcept { return kind == ClusterKind::Thomas ? 5.0 * rho : rho; }

  friend bool operator==(const PcpParams&, const PcpParams&) = default;
};

using ProcessParams = std::variant<PppParams, PcpParams>;

inline std::size_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return static_cast<std::size_t>(dist(rng));
}

// One offspring displacement from the cluster PDF.
inline Point sample_offspring_offset(ClusterKind kind, double rho, Rng& rng) {
  if (kind == ClusterKind::Matern) {
    const double r = rho * std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    return {r * std::cos(theta), r * std::sin(theta)};
  }
  // Box-Muller; both coordinates from one pair.
  const double r = rho * std::sqrt(-2.0 * std::log(rng.uniform_open0()));
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Offspring position around `parent`. Matern draws are redrawn in the
// measure-zero event that rounding puts them past the support radius.
inline Point sample_offspring(Point parent, ClusterKind kind, double rho, Rng& rng) {
  for (;;) {
    const Point p = parent + sample_offspring_offset(kind, rho, rng);
    if (kind == ClusterKind::Thomas || distance(p, parent) <= rho) return p;
  }
}

inline PointPattern sample_ppp(const PppParams& params, const Window& window, Rng& rng) {
  params.validate();
  window.validate();
  const std::size_t n = sample_poisson(params.lambda * window.area(), rng);
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(window.sample_uniform(rng));
  return PointPattern(std::move(pts), window);
}

struct ClusterSample {
  PointPattern offspring;  // clipped to the requested window, parent_index set
  PointPattern parents;    // on the dilated window
};

inline ClusterSample sample_pcp(const PcpParams& params, const Window& window, Rng& rng) {
  params.validate();
  window.validate();
  const Window parent_window = window.dilated(params.guard_margin());
  PointPattern parents = sample_ppp(PppParams{params.lambda_p}, parent_window, rng);

  std::vector<Point> pts;
  std::vector<std::size_t> owner;
  for (std::size_t j = 0; j < parents.size(); ++j) {
    const std::size_t m = sample_poisson(params.m_bar, rng);
    for (std::size_t c = 0; c < m; ++c) {
      const Point p = sample_offspring(parents[j], params.kind, params.rho, rng);
      if (window.contains(p)) {
        pts.push_back(p);
        owner.push_back(j);
      }
    }
  }
  PointPattern offspring(std::move(pts), window, std::move(owner));
  return {std::move(offspring), std::move(parents)};
}

// Sample of either process kind; cluster parents are dropped.
inline PointPattern sample_process(const ProcessParams& params, const Window& window, Rng& rng) {
  if (const auto* ppp = std::get_if<PppParams>(&params)) return sample_ppp(*ppp, window, rng);
  return sample_pcp(std::get<PcpParams>(params), window, rng).offspring;
}

inline PointPattern scale_pattern(const PointPattern& pattern, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factor must be positive");
  std::vector<Point> pts;
  pts.reserve(pattern.size());
  for (const auto& p : pattern.points()) pts.push_back(k * p);
  return PointPattern(std::move(pts), pattern.window().scaled(k), pattern.parent_index());
}

// Parameters of the process k*Phi: PPP(lambda/k^2), PCP(lambda_p/k^2, m_bar, k*rho).
inline ProcessParams scaled_params(const ProcessParams& params, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factor must be positive");
  if (const auto* ppp = std::get_if<PppParams>(&params)) return PppParams{ppp->lambda / (k * k)};
  auto pcp = std::get<PcpParams>(params);
  pcp.lambda_p /= k * k;
  pcp.rho *= k;
  return pcp;
}

inline double ppp_void_probability(double lambda, double area) { return std::exp(-lambda * area); }

// ---------------------------------------------------------------------------
// Void probabilities

struct VoidEstimate {
  double estimate = 0.0;
  Interval ci{};
  std::size_t empty_count = 0;
  std::size_t trials = 0;
};

struct VoidOptions {
  double confidence = 0.99;
  unsigned workers = 1;
  Purpose purpose = Purpose::VoidScaled;
};

// Fraction of sampled patterns with no points in each region. `sampler` is
// called as sampler(Rng&) -> PointPattern; trial i uses stream (seed, i).
template <typename Sampler>
std::vector<VoidEstimate> estimate_void_probabilities(Sampler&& sampler, std::span<const Region> regions,
                                                      std::size_t n_trials, std::uint64_t seed,
                                                      const VoidOptions& opts = {}) {
  if (n_trials < 1) throw ParameterError("void estimation needs at least one trial");
  if (regions.empty()) throw ParameterError("void estimation needs at least one region");
  for (const auto& r : regions) r.validate();

  std::vector<std::atomic<std::size_t>> empties(regions.size());
  std::atomic<bool> escaped{false};
  parallel_for(n_trials, opts.workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, i, opts.purpose);
    const PointPattern pattern = sampler(rng);
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (!pattern.window().contains(regions[r])) {
        escaped.store(true);
        return;
      }
      if (pattern.count_in(regions[r]) == 0) empties[r].fetch_add(1, std::memory_order_relaxed);
    }
  });
  if (escaped.load()) throw ParameterError("void-test region is not contained in the sampling window");

  std::vector<VoidEstimate> out(regions.size());
  for (std::size_t r = 0; r < regions.size(); ++r) {
    auto& e = out[r];
    e.empty_count = empties[r].load();
    e.trials = n_trials;
    e.estimate = static_cast<double>(e.empty_count) / static_cast<double>(n_trials);
    e.ci = wilson_interval(e.empty_count, n_trials, opts.confidence);
  }
  return out;
}

template <typename Sampler>
VoidEstimate estimate_void_probability(Sampler&& sampler, const Region& region, std::size_t n_trials,
                                       std::uint64_t seed, const VoidOptions& opts = {}) {
  const Region regions[] = {region};
  return estimate_void_probabilities(std::forward<Sampler>(sampler), regions, n_trials, seed, opts).front();
}

// How the reference process is re-parameterized in a scaling-equivalence test.
enum class Reparameterization {
  Scaled,         // lambda/k^2 (and rho*k): the correct law
  DensityOverK,   // lambda/k (and rho*k): deliberately wrong, for negative controls
};

struct RegionVerdict {
  Region region;
  VoidEstimate scaled;     // k * Phi(params)
  VoidEstimate reference;  // Phi(re-parameterized)
  double z_score = 0.0;    // two-proportion statistic
  bool pass = false;
};

struct ScalingTestReport {
  ProcessParams params;
  ProcessParams reference_params;
  double k = 1.0;
  double confidence = 0.99;
  std::vector<RegionVerdict> regions;

  [[nodiscard]] bool pass() const {
    return std::all_of(regions.begin(), regions.end(), [](const auto& r) { return r.pass; });
  }
};

inline ProcessParams reparameterize(const ProcessParams& params, double k, Reparameterization how) {
  if (how == Reparameterization::Scaled) return scaled_params(params, k);
  if (const auto* ppp = std::get_if<PppParams>(&params)) return PppParams{ppp->lambda / k};
  auto pcp = std::get<PcpParams>(params);
  pcp.lambda_p /= k;
  pcp.rho *= k;
  return pcp;
}

inline double process_intensity(const ProcessParams& params) {
  if (const auto* ppp = std::get_if<PppParams>(&params)) return ppp->lambda;
  return std::get<PcpParams>(params).intensity();
}

// Disks of radii {0.5, 1, 2} * L at the origin, with L the mean nearest-point
// scale 1/sqrt(pi * intensity) of the scaled process.
inline std::vector<Region> default_void_regions(const ProcessParams& params, double k) {
  const double intensity = process_intensity(scaled_params(params, k));
  const double len = 1.0 / std::sqrt(std::numbers::pi * intensity);
  return {Window::disk(0.5 * len), Window::disk(1.0 * len), Window::disk(2.0 * len)};
}

struct ScalingTestOptions {
  double confidence = 0.99;
  unsigned workers = 1;
  Reparameterization reparameterization = Reparameterization::Scaled;
};

// Compares void probabilities of k*Phi(params) with those of the
// re-parameterized process on each region. A region passes when the
// difference of the two empirical proportions lies inside the two-sided
// normal band at the configured confidence.
inline ScalingTestReport test_scaling_equivalence(const ProcessParams& params, double k,
                                                  std::span<const Region> regions, std::size_t n_trials,
                                                  std::uint64_t seed, const ScalingTestOptions& opts = {}) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factor must be positive");
  if (regions.empty()) throw ParameterError("scaling test needs at least one region");
  std::visit([](const auto& p) { p.validate(); }, params);

  double reach = 0.0;
  for (const auto& r : regions) reach = std::max(reach, r.extent_from_origin());
  // A little padding keeps regions strictly inside after the k*(R/k) round trip.
  const Window sample_window = Window::disk(reach * (1.0 + 1e-9));
  const Window base_window = sample_window.scaled(1.0 / k);

  ScalingTestReport report;
  report.params = params;
  report.reference_params = reparameterize(params, k, opts.reparameterization);
  report.k = k;
  report.confidence = opts.confidence;

  VoidOptions vopts{opts.confidence, opts.workers, Purpose::VoidScaled};
  auto scaled_sampler = [&](Rng& rng) { return scale_pattern(sample_process(params, base_window, rng), k); };
  const auto scaled = estimate_void_probabilities(scaled_sampler, regions, n_trials, seed, vopts);

  vopts.purpose = Purpose::VoidReference;
  auto reference_sampler = [&](Rng& rng) { return sample_process(report.reference_params, sample_window, rng); };
  const auto reference = estimate_void_probabilities(reference_sampler, regions, n_trials, seed, vopts);

  const double z = normal_critical(opts.confidence);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    RegionVerdict v{regions[r], scaled[r], reference[r]};
    const double n = static_cast<double>(n_trials);
    const double p1 = v.scaled.estimate;
    const double p2 = v.reference.estimate;
    const double se = std::sqrt(p1 * (1.0 - p1) / n + p2 * (1.0 - p2) / n);
    const double diff = std::abs(p1 - p2);
    v.z_score = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
    v.pass = v.z_score <= z;
    report.regions.push_back(v);
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV: '#'-prefixed key=value metadata, then `x,y[,parent]`.

inline void write_window_metadata(std::ostream& os, const Window& w) {
  if (w.is_disk()) {
    const auto& d = w.as_disk();
    os << "# window=disk\n# center_x_m=" << format_double(d.center.x) << "\n# center_y_m="
       << format_double(d.center.y) << "\n# radius_m=" << format_double(d.radius) << '\n';
  } else {
    const auto& r = w.as_rect();
    os << "# window=rect\n# x_min_m=" << format_double(r.x_min) << "\n# y_min_m=" << format_double(r.y_min)
       << "\n# x_max_m=" << format_double(r.x_max) << "\n# y_max_m=" << format_double(r.y_max) << '\n';
  }
}

inline void write_pattern_csv(std::ostream& os, const PointPattern& pattern,
                              std::span<const std::pair<std::string, std::string>> extra_meta = {}) {
  write_window_metadata(os, pattern.window());
  for (const auto& [k, v] : extra_meta) os << "# " << k << '=' << v << '\n';
  const bool with_parent = pattern.parent_index().has_value();
  os << (with_parent ? "x,y,parent\n" : "x,y\n");
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    os << format_double(pattern[i].x) << ',' << format_double(pattern[i].y);
    if (with_parent) os << ',' << (*pattern.parent_index())[i];
    os << '\n';
  }
}

inline PointPattern read_pattern_csv(std::istream& is) {
  std::string line;
  std::string shape;
  double cx = 0, cy = 0, radius = 0, x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool header_seen = false;
  bool with_parent = false;
  std::vector<Point> pts;
  std::vector<std::size_t> parents;
  while (std::getline(is, line)) {
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      const auto body = trim(sv.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto val = trim(body.substr(eq + 1));
      if (key == "window") shape = std::string(val);
      else if (key == "center_x_m") cx = parse_double(val);
      else if (key == "center_y_m") cy = parse_double(val);
      else if (key == "radius_m") radius = parse_double(val);
      else if (key == "x_min_m") x0 = parse_double(val);
      else if (key == "y_min_m") y0 = parse_double(val);
      else if (key == "x_max_m") x1 = parse_double(val);
      else if (key == "y_max_m") y1 = parse_double(val);
      continue;
    }
    if (!header_seen) {
      if (sv == "x,y,parent") with_parent = true;
      else if (sv != "x,y") throw ParameterError("unexpected pattern CSV header: " + std::string(sv));
      header_seen = true;
      continue;
    }
    const auto fields = std::string(sv);
    std::stringstream ss(fields);
    std::string fx, fy, fp;
    std::getline(ss, fx, ',');
    std::getline(ss, fy, ',');
    pts.push_back({parse_double(fx), parse_double(fy)});
    if (with_parent) {
      std::getline(ss, fp, ',');
      parents.push_back(static_cast<std::size_t>(parse_u64(fp)));
    }
  }
  Window w;
  if (shape == "disk") w = Window::disk(radius, {cx, cy});
  else if (shape == "rect") w = Window::rect(x0, y0, x1, y1);
  else throw ParameterError("pattern CSV lacks window metadata");
  if (with_parent) return PointPattern(std::move(pts), w, std::move(parents));
  return PointPattern(std::move(pts), w);
}

}  // namespace equicov
