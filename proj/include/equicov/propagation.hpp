#pragma once

// Multi-slope pathloss, fading, cell association and per-realization SIR.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "equicov/errors.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/rng.hpp"

namespace equicov {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

// Continuous piecewise power law
//   l(z) = eta_i * z^(-alpha_i)   for R_{i-1} < z <= R_i,
// with R_0 = 0, R_n = inf, eta_1 = 1 and eta_j = eta_{j-1} * R_{j-1}^(alpha_j - alpha_{j-1}).
class PathlossModel {
 public:
  PathlossModel() : PathlossModel({}, {4.0}) {}

  // `boundaries` holds the finite breakpoints R_1 < ... < R_{n-1};
  // `alphas` the n exponents.
  PathlossModel(std::vector<double> boundaries, std::vector<double> alphas)
      : boundaries_(std::move(boundaries)), alphas_(std::move(alphas)) {
    if (alphas_.empty()) throw ParameterError("pathloss needs at least one exponent");
    if (alphas_.size() != boundaries_.size() + 1) {
      throw ParameterError("pathloss needs exactly one more exponent than finite boundaries");
    }
    for (double a : alphas_) {
      if (!std::isfinite(a)) throw ParameterError("pathloss exponents must be finite");
    }
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      const double b = boundaries_[i];
      if (!(b > 0.0) || !std::isfinite(b)) throw ParameterError("pathloss boundaries must be positive and finite");
      if (i > 0 && !(b > boundaries_[i - 1])) throw ParameterError("pathloss boundaries must be strictly increasing");
    }
    etas_.assign(alphas_.size(), 1.0);
    for (std::size_t j = 1; j < alphas_.size(); ++j) {
      etas_[j] = etas_[j - 1] * std::pow(boundaries_[j - 1], alphas_[j] - alphas_[j - 1]);
    }
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      const double b = boundaries_[i];
      const double left = etas_[i] * std::pow(b, -alphas_[i]);
      const double right = etas_[i + 1] * std::pow(b, -alphas_[i + 1]);
      if (!(std::abs(left - right) <= 1e-12 * std::abs(left))) {
        throw ParameterError("pathloss is discontinuous at boundary " + format_double(b) +
                             " (coefficients over/underflow)");
      }
    }
  }

  [[nodiscard]] std::span<const double> boundaries() const noexcept { return boundaries_; }
  [[nodiscard]] std::span<const double> alphas() const noexcept { return alphas_; }
  [[nodiscard]] std::span<const double> etas() const noexcept { return etas_; }
  [[nodiscard]] std::size_t slopes() const noexcept { return alphas_.size(); }
  [[nodiscard]] double last_alpha() const noexcept { return alphas_.back(); }

  // Piece index i (0-based) with R_{i} < z <= R_{i+1}.
  [[nodiscard]] std::size_t piece(double z) const noexcept {
    return static_cast<std::size_t>(std::lower_bound(boundaries_.begin(), boundaries_.end(), z) -
                                    boundaries_.begin());
  }

  [[nodiscard]] double operator()(double z) const {
    if (!(z > 0.0)) throw DomainError("pathloss is undefined for z <= 0");
    const std::size_t i = piece(z);
    return etas_[i] * std::pow(z, -alphas_[i]);
  }

  // Value of piece i evaluated at z, ignoring the interval constraint.
  [[nodiscard]] double piece_value(std::size_t i, double z) const { return etas_[i] * std::pow(z, -alphas_[i]); }

  // Same exponents with every finite boundary multiplied by k.
  [[nodiscard]] PathlossModel scaled(double k) const {
    if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("scale factor must be positive");
    std::vector<double> b(boundaries_);
    for (double& x : b) x *= k;
    return PathlossModel(std::move(b), alphas_);
  }

  // Far-field exponent <= 2: mean PPP interference from the plane diverges,
  // so window truncation bias is not controlled.
  [[nodiscard]] bool truncation_uncontrolled() const noexcept { return alphas_.back() <= 2.0; }

  // Integral of l(r) * r over [a, b], 0 < a <= b <= inf.
  [[nodiscard]] double radial_integral(double a, double b) const {
    if (!(a > 0.0) || b < a) throw DomainError("radial integral needs 0 < a <= b");
    double total = 0.0;
    double lo = a;
    for (std::size_t i = piece(a); i < alphas_.size() && lo < b; ++i) {
      const double hi = i < boundaries_.size() ? std::min(b, boundaries_[i]) : b;
      if (hi <= lo) continue;
      const double e = 2.0 - alphas_[i];
      double part = 0.0;
      if (std::abs(e) < 1e-12) {
        part = std::log(hi / lo);
      } else if (std::isinf(hi)) {
        if (e >= 0.0) return INFINITY;
        part = -std::pow(lo, e) / e;
      } else {
        part = (std::pow(hi, e) - std::pow(lo, e)) / e;
      }
      total += etas_[i] * part;
      lo = hi;
    }
    return total;
  }

  friend bool operator==(const PathlossModel& a, const PathlossModel& b) {
    return a.boundaries_ == b.boundaries_ && a.alphas_ == b.alphas_;
  }

 private:
  std::vector<double> boundaries_;
  std::vector<double> alphas_;
  std::vector<double> etas_;
};

inline PathlossModel build_pathloss(std::vector<double> boundaries, std::vector<double> alphas) {
  return PathlossModel(std::move(boundaries), std::move(alphas));
}

inline double pathloss(const PathlossModel& model, double z) { return model(z); }

// Key=value text: `alphas=3,4`, `boundaries=1`, plus a read-only `etas=` line.
inline std::string to_kv(const PathlossModel& m) {
  std::ostringstream os;
  os << "alphas=" << format_list(m.alphas()) << '\n';
  os << "boundaries=" << format_list(m.boundaries()) << '\n';
  os << "etas=" << format_list(m.etas()) << '\n';
  return os.str();
}

inline PathlossModel pathloss_from_kv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<double> alphas, boundaries;
  bool have_alphas = false;
  while (std::getline(is, line)) {
    const auto sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) throw ParameterError("expected key=value: " + std::string(sv));
    const auto key = trim(sv.substr(0, eq));
    const auto val = sv.substr(eq + 1);
    if (key == "alphas") {
      alphas = parse_list(val);
      have_alphas = true;
    } else if (key == "boundaries") {
      boundaries = parse_list(val);
    } else if (key != "etas") {
      throw ParameterError("unknown pathloss key: " + std::string(key));
    }
  }
  if (!have_alphas) throw ParameterError("pathloss text lacks alphas");
  return PathlossModel(std::move(boundaries), std::move(alphas));
}

// Two-ray breakpoint distance 4 h_t h_r f_c / c.
inline double two_ray_breakpoint(double h_t, double h_r, double f_c) {
  if (!(h_t > 0.0) || !(h_r > 0.0) || !(f_c > 0.0)) {
    throw ParameterError("two-ray breakpoint needs positive heights and frequency");
  }
  return 4.0 * h_t * h_r * f_c / kSpeedOfLight;
}

// ---------------------------------------------------------------------------
// Fading

enum class FadingFamily { Rayleigh, Nakagami, None };

// I.i.d. unit-mean power gains. Rayleigh: Exp(1). Nakagami-m: Gamma(m, 1/m).
// None: deterministic 1.
struct FadingSpec {
  FadingFamily family = FadingFamily::Rayleigh;
  double nakagami_m = 1.0;

  void validate() const {
    if (family == FadingFamily::Nakagami && !(nakagami_m >= 0.5 && std::isfinite(nakagami_m))) {
      throw ParameterError("Nakagami shape m must be >= 0.5");
    }
  }

  [[nodiscard]] bool is_rayleigh() const noexcept {
    return family == FadingFamily::Rayleigh || (family == FadingFamily::Nakagami && nakagami_m == 1.0);
  }

  double sample(Rng& rng) const {
    switch (family) {
      case FadingFamily::Rayleigh:
        return -std::log(rng.uniform_open0());
      case FadingFamily::Nakagami: {
        std::gamma_distribution<double> g(nakagami_m, 1.0 / nakagami_m);
        return g(rng);
      }
      case FadingFamily::None:
        return 1.0;
    }
    return 1.0;
  }

  void fill(std::span<double> out, Rng& rng) const {
    if (family == FadingFamily::Nakagami) {
      std::gamma_distribution<double> g(nakagami_m, 1.0 / nakagami_m);
      for (double& h : out) h = g(rng);
      return;
    }
    for (double& h : out) h = sample(rng);
  }
};

inline const char* to_string(FadingFamily f) noexcept {
  switch (f) {
    case FadingFamily::Rayleigh: return "rayleigh";
    case FadingFamily::Nakagami: return "nakagami";
    case FadingFamily::None: return "none";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Association and SIR

enum class AssociationPolicy { MaxPower, MaxSir };

inline const char* to_string(AssociationPolicy p) noexcept {
  return p == AssociationPolicy::MaxPower ? "max_power" : "max_sir";
}

struct LinkBudget {
  double tx_power_w = 1.0;
  double sir_threshold = 1.0;

  void validate() const {
    if (!(tx_power_w > 0.0)) throw ParameterError("transmit power must be positive");
    if (!(sir_threshold > 0.0)) throw ParameterError("SIR threshold must be positive");
  }
};

// l(|b - u|) for every BS.
inline std::vector<double> link_gains(Point user, const PointPattern& bs, const PathlossModel& model) {
  std::vector<double> gains;
  gains.reserve(bs.size());
  for (const auto& b : bs.points()) gains.push_back(model(distance(b, user)));
  return gains;
}

// Serving index from precomputed pathloss gains and fading.
inline std::size_t associate_gains(std::span<const double> gains, std::span<const double> fading,
                                   AssociationPolicy policy) {
  if (gains.empty()) throw NoServerError("no base station to associate with");
  std::size_t best = 0;
  if (policy == AssociationPolicy::MaxPower) {
    for (std::size_t i = 1; i < gains.size(); ++i) {
      if (gains[i] > gains[best]) best = i;
    }
    return best;
  }
  if (fading.size() != gains.size()) throw ParameterError("fading vector length differs from BS count");
  double best_power = fading[0] * gains[0];
  for (std::size_t i = 1; i < gains.size(); ++i) {
    const double p = fading[i] * gains[i];
    if (p > best_power) {
      best_power = p;
      best = i;
    }
  }
  return best;
}

inline std::size_t associate(Point user, const PointPattern& bs, std::span<const double> fading,
                             AssociationPolicy policy, const PathlossModel& model) {
  if (bs.empty()) throw NoServerError("no base station to associate with");
  if (policy == AssociationPolicy::MaxSir && fading.size() != bs.size()) {
    throw ParameterError("fading vector length differs from BS count");
  }
  const auto gains = link_gains(user, bs, model);
  return associate_gains(gains, fading, policy);
}

// H_s l_s / sum_{b != s} H_b l_b; +inf when there is no interference.
inline double sir_from_gains(std::span<const double> gains, std::span<const double> fading, std::size_t serving) {
  if (serving >= gains.size()) throw ParameterError("serving index out of range");
  if (fading.size() != gains.size()) throw ParameterError("fading vector length differs from BS count");
  double interference = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (i != serving) interference += fading[i] * gains[i];
  }
  const double signal = fading[serving] * gains[serving];
  if (interference == 0.0) return std::numeric_limits<double>::infinity();
  return signal / interference;
}

inline double compute_sir(Point user, const PointPattern& bs, std::size_t serving, std::span<const double> fading,
                          const PathlossModel& model) {
  const auto gains = link_gains(user, bs, model);
  return sir_from_gains(gains, fading, serving);
}

struct ScalingIdentityResult {
  double sir = 0.0;
  double sir_scaled = 0.0;
  double relative_error = 0.0;
  std::size_t serving = 0;
  std::size_t serving_scaled = 0;
};

// SIR on (phi, l(., R)) versus (k phi, l(., kR)) at user position k*u, with
// the same fading realization on both sides.
inline ScalingIdentityResult sir_scaling_identity_check(Point user, const PointPattern& bs,
                                                        std::span<const double> fading, const PathlossModel& model,
                                                        double k, AssociationPolicy policy) {
  const PathlossModel scaled_model = model.scaled(k);
  const PointPattern scaled_bs = scale_pattern(bs, k);
  const Point scaled_user = k * user;

  ScalingIdentityResult r;
  r.serving = associate(user, bs, fading, policy, model);
  r.serving_scaled = associate(scaled_user, scaled_bs, fading, policy, scaled_model);
  r.sir = compute_sir(user, bs, r.serving, fading, model);
  r.sir_scaled = compute_sir(scaled_user, scaled_bs, r.serving_scaled, fading, scaled_model);
  if (std::isinf(r.sir) && std::isinf(r.sir_scaled)) {
    r.relative_error = 0.0;
  } else {
    r.relative_error = std::abs(r.sir - r.sir_scaled) / std::abs(r.sir);
  }
  return r;
}

}  // namespace equicov
