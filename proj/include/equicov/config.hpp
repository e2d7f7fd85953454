#pragma once

// Experiment configuration: flat, sectioned key=value text.
//
//   # comment
//   [model]
//   kind = model2
//   lambda_b_per_m2 = 1.0
//
// Every key is checked against the known set for its section, and every
// validation failure is reported with the line of the offending key.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "equicov/contours.hpp"
#include "equicov/coverage.hpp"
#include "equicov/errors.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/netmodels.hpp"
#include "equicov/propagation.hpp"

namespace equicov {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "config:" + std::to_string(line) + ": " + what : "config: " + what),
        line_(line) {}
  [[nodiscard]] int line() const noexcept { return line_; }

 private:
  int line_;
};

struct ContourSection {
  std::vector<double> k_values;
  int k_values_line = 0;
  VerifyOptions verify{};
};

struct SweepSection {
  SweepAxis x;
  SweepAxis y;
  std::vector<double> levels;
};

struct VoidTestSection {
  std::vector<ProcessParams> processes;
  std::vector<double> k_values;
  std::size_t n_trials = 100000;
  double confidence = 0.99;
  Reparameterization reparameterization = Reparameterization::Scaled;
};

struct ExperimentConfig {
  NetworkModel model;
  PathlossModel pathloss;
  CoverageConfig coverage;
  std::uint64_t seed = 1;
  unsigned workers = 0;                // 0: EQUICOV_WORKERS or hardware concurrency
  std::optional<double> window_radius; // nullopt: auto
  std::string output_directory = "out";
  std::vector<std::string> formats{"csv"};
  ContourSection contour;
  std::optional<SweepSection> sweep;
  std::optional<VoidTestSection> voidtest;

  [[nodiscard]] Window window() const {
    if (window_radius) return Window::disk(*window_radius);
    return Window::disk(auto_window_radius(model, pathloss).radius);
  }
};

namespace detail {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

class RawConfig {
 public:
  explicit RawConfig(std::istream& is) {
    std::string line;
    std::string section;
    int n = 0;
    while (std::getline(is, line)) {
      ++n;
      auto sv = trim(line);
      if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = trim(sv.substr(0, hash));
      if (sv.empty()) continue;
      if (sv.front() == '[') {
        if (sv.back() != ']') throw ConfigError(n, "malformed section header");
        section = std::string(trim(sv.substr(1, sv.size() - 2)));
        if (!known_section(section)) throw ConfigError(n, "unknown section [" + section + "]");
        sections_.emplace(section, n);
        continue;
      }
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos) throw ConfigError(n, "expected key = value");
      if (section.empty()) throw ConfigError(n, "key outside of any section");
      const std::string key = section + "." + std::string(trim(sv.substr(0, eq)));
      if (entries_.count(key)) throw ConfigError(n, "duplicate key '" + key + "'");
      entries_[key] = Entry{std::string(trim(sv.substr(eq + 1))), n, false};
    }
  }

  [[nodiscard]] bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  [[nodiscard]] int section_line(const std::string& s) const {
    const auto it = sections_.find(s);
    return it == sections_.end() ? 0 : it->second;
  }

  Entry* find(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  Entry& require(const std::string& key, int fallback_line = 0) {
    if (auto* e = find(key)) return *e;
    const auto dot = key.find('.');
    throw ConfigError(fallback_line ? fallback_line : section_line(key.substr(0, dot)), "missing key '" + key + "'");
  }

  template <typename T, typename Parse>
  T get(const std::string& key, T fallback, Parse&& parse) {
    auto* e = find(key);
    if (!e) return fallback;
    return wrap(*e, [&] { return parse(e->value); });
  }

  double number(const std::string& key, double fallback) {
    return get<double>(key, fallback, [](const std::string& v) { return parse_double(v); });
  }
  double required_number(const std::string& key) {
    auto& e = require(key);
    return wrap(e, [&] { return parse_double(e.value); });
  }

  template <typename Fn>
  static auto wrap(const Entry& e, Fn&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError(e.line, ex.what());
    }
  }

  void reject_unused() const {
    for (const auto& [key, e] : entries_) {
      if (!e.used) throw ConfigError(e.line, "unknown or inapplicable key '" + key + "'");
    }
  }

 private:
  static bool known_section(const std::string& s) {
    return s == "model" || s == "pathloss" || s == "coverage" || s == "run" || s == "output" || s == "contour" ||
           s == "sweep" || s == "voidtest";
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, int> sections_;
};

inline ClusterKind parse_cluster(const std::string& v) {
  if (v == "tcp" || v == "thomas") return ClusterKind::Thomas;
  if (v == "mcp" || v == "matern") return ClusterKind::Matern;
  throw ParameterError("cluster must be tcp or mcp, got '" + v + "'");
}

inline SweepParam parse_sweep_param(const std::string& v) {
  if (v == "lambda_b_per_m2") return SweepParam::LambdaB;
  if (v == "rho_m") return SweepParam::Rho;
  if (v == "rc1_m") return SweepParam::Rc1;
  throw ParameterError("sweep parameter must be lambda_b_per_m2, rho_m or rc1_m");
}

inline bool parse_scale(const std::string& v) {
  if (v == "log") return true;
  if (v == "linear") return false;
  throw ParameterError("axis scale must be log or linear");
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ParameterError("expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto w = trim(s.substr(0, comma));
    if (!w.empty()) out.emplace_back(w);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& is) {
  detail::RawConfig raw(is);
  ExperimentConfig cfg;
  using detail::RawConfig;

  // [model]
  {
    auto& kind_entry = raw.require("model.kind", raw.section_line("model"));
    const std::string kind = kind_entry.value;
    const int kl = kind_entry.line;
    auto cluster = [&] {
      return raw.get<ClusterKind>("model.cluster", ClusterKind::Thomas, detail::parse_cluster);
    };
    try {
      if (kind == "model1") {
        cfg.model = NetworkModel::model1(raw.required_number("model.lambda_b_per_m2"),
                                         raw.number("model.lambda_u_per_m2", 1.0));
      } else if (kind == "model2") {
        const double lb = raw.required_number("model.lambda_b_per_m2");
        const double m = raw.required_number("model.m_bar_u");
        const double rho = raw.required_number("model.rho_u_m");
        cfg.model = NetworkModel::model2(lb, m, rho, cluster());
      } else if (kind == "model3") {
        const double lp = raw.required_number("model.lambda_p_per_m2");
        const double mu = raw.required_number("model.m_bar_u");
        const double ru = raw.required_number("model.rho_u_m");
        const double mb = raw.required_number("model.m_bar_b");
        const double rb = raw.number("model.rho_b_m", ru);
        cfg.model = NetworkModel::model3(lp, mu, ru, mb, rb, cluster());
      } else {
        throw ConfigError(kl, "model kind must be model1, model2 or model3");
      }
    } catch (const ParameterError& e) {
      throw ConfigError(kl, e.what());
    }
  }

  // [pathloss]
  {
    auto& alphas = raw.require("pathloss.alphas", raw.section_line("pathloss"));
    auto* bounds = raw.find("pathloss.boundaries_m");
    const int line = bounds ? bounds->line : alphas.line;
    try {
      cfg.pathloss = PathlossModel(bounds ? parse_list(bounds->value) : std::vector<double>{},
                                   RawConfig::wrap(alphas, [&] { return parse_list(alphas.value); }));
    } catch (const ParameterError& e) {
      throw ConfigError(line, e.what());
    }
  }

  // [coverage]
  {
    auto& c = cfg.coverage;
    c.beta = raw.number("coverage.beta", 1.0);
    if (auto* g = raw.find("coverage.epsilon_grid")) {
      c.epsilon_grid = RawConfig::wrap(*g, [&] { return parse_list(g->value); });
    } else if (auto* p = raw.find("coverage.epsilon_points")) {
      c.epsilon_grid = RawConfig::wrap(*p, [&] { return uniform_epsilon_grid(parse_u64(p->value)); });
    }
    c.n_outer = raw.get<std::size_t>("coverage.n_outer", c.n_outer, [](const std::string& v) { return parse_u64(v); });
    c.n_inner = raw.get<std::size_t>("coverage.n_inner", c.n_inner, [](const std::string& v) { return parse_u64(v); });
    c.policy = raw.get<AssociationPolicy>("coverage.policy", AssociationPolicy::MaxPower, [](const std::string& v) {
      if (v == "max_power") return AssociationPolicy::MaxPower;
      if (v == "max_sir") return AssociationPolicy::MaxSir;
      throw ParameterError("policy must be max_power or max_sir");
    });
    c.fading.family = raw.get<FadingFamily>("coverage.fading", FadingFamily::Rayleigh, [](const std::string& v) {
      if (v == "rayleigh") return FadingFamily::Rayleigh;
      if (v == "nakagami") return FadingFamily::Nakagami;
      if (v == "none") return FadingFamily::None;
      throw ParameterError("fading must be rayleigh, nakagami or none");
    });
    c.fading.nakagami_m = raw.number("coverage.nakagami_m", 1.0);
    c.closed_form = raw.get<bool>("coverage.closed_form", true, detail::parse_bool);
    c.confidence = raw.number("coverage.confidence", 0.95);
    try {
      c.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(raw.section_line("coverage"), e.what());
    }
  }

  // [run]
  cfg.seed = raw.get<std::uint64_t>("run.seed", 1, [](const std::string& v) { return parse_u64(v); });
  cfg.workers = raw.get<unsigned>("run.workers", 0, [](const std::string& v) {
    return static_cast<unsigned>(parse_u64(v));
  });
  cfg.window_radius = raw.get<std::optional<double>>("run.window_radius_m", std::nullopt,
                                                     [](const std::string& v) -> std::optional<double> {
                                                       if (v == "auto") return std::nullopt;
                                                       const double r = parse_double(v);
                                                       if (!(r > 0.0)) throw ParameterError("window radius must be positive");
                                                       return r;
                                                     });

  // [output]
  cfg.output_directory = raw.get<std::string>("output.directory", cfg.output_directory,
                                              [](const std::string& v) { return v; });
  cfg.formats = raw.get<std::vector<std::string>>("output.formats", cfg.formats, [](const std::string& v) {
    auto f = detail::split_words(v);
    for (const auto& w : f) {
      if (w != "csv") throw ParameterError("only the csv output format is supported");
    }
    return f;
  });

  // [contour]
  if (raw.has_section("contour")) {
    auto& ct = cfg.contour;
    if (auto* k = raw.find("contour.k_values")) {
      ct.k_values = RawConfig::wrap(*k, [&] { return parse_list(k->value); });
      ct.k_values_line = k->line;
      for (double v : ct.k_values) {
        if (!(v > 0.0)) throw ConfigError(k->line, "scale factors must be positive");
      }
    } else {
      ct.k_values_line = raw.section_line("contour");
    }
    auto& v = ct.verify;
    v.tolerance_se = raw.number("contour.tolerance_se", v.tolerance_se);
    v.band_confidence = raw.number("contour.band_confidence", v.band_confidence);
    v.bootstrap_replicates = raw.get<std::size_t>("contour.bootstrap_replicates", v.bootstrap_replicates,
                                                  [](const std::string& s) { return parse_u64(s); });
    v.mode = raw.get<VerifyMode>("contour.mode", v.mode, [](const std::string& s) {
      if (s == "independent") return VerifyMode::Independent;
      if (s == "paired") return VerifyMode::Paired;
      if (s == "both") return VerifyMode::Both;
      throw ParameterError("contour mode must be independent, paired or both");
    });
    v.scale_mode = raw.get<ScaleMode>("contour.scale", v.scale_mode, [](const std::string& s) {
      if (s == "full") return ScaleMode::Full;
      if (s == "points_only") return ScaleMode::PointsOnly;
      throw ParameterError("contour scale must be full or points_only");
    });
  }

  // [sweep]
  if (raw.has_section("sweep")) {
    SweepSection sw;
    auto axis = [&](const std::string& p) {
      SweepAxis a;
      auto& param = raw.require("sweep." + p + "_param", raw.section_line("sweep"));
      a.param = RawConfig::wrap(param, [&] { return detail::parse_sweep_param(param.value); });
      auto& values = raw.require("sweep." + p + "_values", raw.section_line("sweep"));
      a.values = RawConfig::wrap(values, [&] { return parse_list(values.value); });
      a.log_scale = raw.get<bool>("sweep." + p + "_scale", true, detail::parse_scale);
      if (a.values.size() < 3) throw ConfigError(values.line, "sweep axes need at least 3 values");
      return a;
    };
    sw.x = axis("x");
    sw.y = axis("y");
    auto& levels = raw.require("sweep.levels", raw.section_line("sweep"));
    sw.levels = RawConfig::wrap(levels, [&] { return parse_list(levels.value); });
    for (double l : sw.levels) {
      if (!(l > 0.0 && l < 1.0)) throw ConfigError(levels.line, "coverage levels must lie in (0,1)");
    }
    cfg.sweep = std::move(sw);
  }

  // [voidtest]
  if (raw.has_section("voidtest")) {
    VoidTestSection vt;
    const double lambda = raw.number("voidtest.ppp_lambda_per_m2", 1.0);
    const double lambda_p = raw.number("voidtest.pcp_lambda_p_per_m2", 0.5);
    const double m_bar = raw.number("voidtest.pcp_m_bar", 3.0);
    const double sigma = raw.number("voidtest.tcp_sigma_m", 1.0);
    const double rd = raw.number("voidtest.mcp_rd_m", 1.0);
    auto& procs = raw.require("voidtest.processes", raw.section_line("voidtest"));
    for (const auto& w : detail::split_words(procs.value)) {
      ProcessParams p;
      if (w == "ppp") p = PppParams{lambda};
      else if (w == "tcp") p = PcpParams{lambda_p, m_bar, sigma, ClusterKind::Thomas};
      else if (w == "mcp") p = PcpParams{lambda_p, m_bar, rd, ClusterKind::Matern};
      else throw ConfigError(procs.line, "unknown process '" + w + "' (ppp, tcp, mcp)");
      try {
        std::visit([](const auto& x) { x.validate(); }, p);
      } catch (const ParameterError& e) {
        throw ConfigError(procs.line, e.what());
      }
      vt.processes.push_back(p);
    }
    auto& ks = raw.require("voidtest.k_values", raw.section_line("voidtest"));
    vt.k_values = RawConfig::wrap(ks, [&] { return parse_list(ks.value); });
    if (vt.k_values.empty()) throw ConfigError(ks.line, "k_values must not be empty");
    for (double k : vt.k_values) {
      if (!(k > 0.0)) throw ConfigError(ks.line, "scale factors must be positive");
    }
    vt.n_trials = raw.get<std::size_t>("voidtest.n_trials", vt.n_trials, [](const std::string& v) {
      const auto n = parse_u64(v);
      if (n < 1) throw ParameterError("n_trials must be positive");
      return n;
    });
    vt.confidence = raw.number("voidtest.confidence", vt.confidence);
    vt.reparameterization = raw.get<Reparameterization>(
        "voidtest.reparameterization", vt.reparameterization, [](const std::string& v) {
          if (v == "scaled") return Reparameterization::Scaled;
          if (v == "density_over_k") return Reparameterization::DensityOverK;
          throw ParameterError("reparameterization must be scaled or density_over_k");
        });
    cfg.voidtest = std::move(vt);
  }

  raw.reject_unused();
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

// [model] and [pathloss] sections that parse back to the same model.
inline void write_model_sections(std::ostream& os, const NetworkModel& m, const PathlossModel& pl) {
  os << "[model]\nkind = " << to_string(m.kind) << '\n';
  switch (m.kind) {
    case ModelKind::Model1:
      os << "lambda_b_per_m2 = " << format_double(m.bs_ppp.lambda) << '\n';
      os << "lambda_u_per_m2 = " << format_double(m.user_ppp.lambda) << '\n';
      break;
    case ModelKind::Model2:
      os << "lambda_b_per_m2 = " << format_double(m.bs_ppp.lambda) << '\n';
      os << "cluster = " << to_string(m.user_pcp.kind) << '\n';
      os << "m_bar_u = " << format_double(m.user_pcp.m_bar) << '\n';
      os << "rho_u_m = " << format_double(m.user_pcp.rho) << '\n';
      break;
    case ModelKind::Model3:
      os << "lambda_p_per_m2 = " << format_double(m.user_pcp.lambda_p) << '\n';
      os << "cluster = " << to_string(m.user_pcp.kind) << '\n';
      os << "m_bar_u = " << format_double(m.user_pcp.m_bar) << '\n';
      os << "rho_u_m = " << format_double(m.user_pcp.rho) << '\n';
      os << "m_bar_b = " << format_double(m.bs_pcp.m_bar) << '\n';
      os << "rho_b_m = " << format_double(m.bs_pcp.rho) << '\n';
      break;
  }
  os << "\n[pathloss]\nalphas = " << format_list(pl.alphas()) << '\n';
  if (!pl.boundaries().empty()) os << "boundaries_m = " << format_list(pl.boundaries()) << '\n';
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open " + path);
  return parse_config(in);
}

}  // namespace equicov
