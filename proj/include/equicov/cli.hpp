#pragma once

// Command implementations behind the `equicov` executable. Each command
// writes its datasets under the output directory and returns a process exit
// code: 0 pass, 1 usage/validation, 2 verification failure, 3 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "equicov/config.hpp"
#include "equicov/contours.hpp"
#include "equicov/coverage.hpp"
#include "equicov/format.hpp"
#include "equicov/geometry.hpp"
#include "equicov/netmodels.hpp"

namespace equicov::cli {

enum ExitCode : int { kPass = 0, kUsage = 1, kVerificationFailed = 2, kRuntime = 3 };

using Meta = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

inline Meta run_meta(const ExperimentConfig& cfg, const Window& window) {
  return {{"model", to_string(cfg.model.kind)},
          {"alphas", format_list(cfg.pathloss.alphas())},
          {"boundaries_m", format_list(cfg.pathloss.boundaries())},
          {"beta", format_double(cfg.coverage.beta)},
          {"policy", to_string(cfg.coverage.policy)},
          {"fading", to_string(cfg.coverage.fading.family)},
          {"n_inner", std::to_string(cfg.coverage.n_inner)},
          {"inner_method", inner_method(cfg.coverage) == InnerMethod::ClosedForm ? "closed_form" : "monte_carlo"},
          {"seed", std::to_string(cfg.seed)},
          {"window_radius_m", format_double(window.as_disk().radius)}};
}

inline CoverageConfig coverage_with_workers(const ExperimentConfig& cfg) {
  CoverageConfig c = cfg.coverage;
  c.workers = cfg.workers;
  return c;
}

}  // namespace detail

// One Palm scene: users.csv (typical user first, then co-users) and bs.csv.
inline int cmd_sample(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  const Window window = cfg.window();
  Rng rng = make_stream(cfg.seed, 0, Purpose::Scene);
  SceneOptions opts = cfg.coverage.scene;
  opts.with_co_users = true;
  const auto scene = sample_scene(cfg.model, window, rng, opts);

  std::vector<Point> users{scene.user};
  users.insert(users.end(), scene.co_users.begin(), scene.co_users.end());
  const PointPattern user_pattern(std::move(users), window);

  Meta user_meta{{"model", to_string(cfg.model.kind)}, {"seed", std::to_string(cfg.seed)}, {"typical_user_row", "0"}};
  Meta bs_meta{{"model", to_string(cfg.model.kind)}, {"seed", std::to_string(cfg.seed)}};
  if (scene.cluster_center) {
    bs_meta.emplace_back("cluster_center_x_m", format_double(scene.cluster_center->x));
    bs_meta.emplace_back("cluster_center_y_m", format_double(scene.cluster_center->y));
  }
  if (scene.own_cluster_bs) bs_meta.emplace_back("cluster_center_bs_row", std::to_string(*scene.own_cluster_bs));
  if (!scene.cluster_bs.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < scene.cluster_bs.size(); ++i) rows += (i ? "," : "") + std::to_string(scene.cluster_bs[i]);
    bs_meta.emplace_back("typical_cluster_bs_rows", rows);
  }

  auto u = detail::open_output(out, "users.csv");
  write_pattern_csv(u, user_pattern, user_meta);
  auto b = detail::open_output(out, "bs.csv");
  write_pattern_csv(b, scene.bs, bs_meta);
  log << "sample: " << user_pattern.size() << " users, " << scene.bs.size() << " BSs -> " << out.string() << '\n';
  return kPass;
}

inline int cmd_metadist(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  const Window window = cfg.window();
  const auto coverage = detail::coverage_with_workers(cfg);
  const auto est = meta_distribution(cfg.model, cfg.pathloss, coverage, window, cfg.seed);
  auto os = detail::open_output(out, "metadist.csv");
  const auto meta = detail::run_meta(cfg, window);
  write_meta_distribution_csv(os, est, meta);
  const auto check = check_consistency(est);
  log << "metadist: mean coverage " << est.mean_coverage.mean << " (" << est.confidence * 100 << "% CI ["
      << est.mean_ci.lo << ", " << est.mean_ci.hi << "]), consistency " << (check.ok() ? "ok" : "VIOLATED") << '\n';
  return check.ok() ? kPass : kRuntime;
}

inline int cmd_contour(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  if (cfg.contour.k_values.empty() && !cfg.sweep) {
    throw ConfigError(cfg.contour.k_values_line, "contour needs a nonempty [contour] k_values list or a [sweep]");
  }
  const auto coverage = detail::coverage_with_workers(cfg);
  bool pass = true;

  if (!cfg.contour.k_values.empty()) {
    const Window window = cfg.window();
    const ContourSpec spec{{cfg.model, cfg.pathloss}, cfg.contour.k_values};
    const auto verdict = verify_contour(spec, coverage, window, cfg.seed, cfg.contour.verify);
    pass = verdict.pass();

    auto os = detail::open_output(out, "contour_verdict.csv");
    auto meta = detail::run_meta(cfg, window);
    meta.emplace_back("tolerance_se", format_double(cfg.contour.verify.tolerance_se));
    meta.emplace_back("band_confidence", format_double(cfg.contour.verify.band_confidence));
    meta.emplace_back("scale", cfg.contour.verify.scale_mode == ScaleMode::Full ? "full" : "points_only");
    if (cfg.contour.verify.mode != VerifyMode::Paired) {
      meta.emplace_back("base_mean_coverage", format_double(verdict.base.mean_coverage.mean));
      meta.emplace_back("base_mean_coverage_se", format_double(verdict.base.mean_coverage.std_error));
    }
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
    os << "k,mean_coverage,se,se_distance,sup_gap,gap_band,paired_max_rel_error,pass\n";
    for (const auto& p : verdict.points) {
      os << format_double(p.k) << ',' << format_double(p.estimate.mean_coverage.mean) << ','
         << format_double(p.estimate.mean_coverage.std_error) << ',' << format_double(p.se_distance) << ','
         << format_double(p.sup_gap) << ',' << format_double(p.gap_band) << ','
         << format_double(p.paired_max_rel_error) << ',' << (p.pass() ? 1 : 0) << '\n';
    }
    if (cfg.contour.verify.mode != VerifyMode::Paired) {
      auto base = detail::open_output(out, "metadist_base.csv");
      write_meta_distribution_csv(base, verdict.base, meta);
    }
    log << "contour: base mean coverage " << verdict.base.mean_coverage.mean << '\n';
    for (const auto& p : verdict.points) {
      log << "  k=" << p.k << " mean=" << p.estimate.mean_coverage.mean << " dist=" << p.se_distance
          << "SE gap=" << p.sup_gap << " band=" << p.gap_band << " paired_err=" << p.paired_max_rel_error << "  "
          << (p.pass() ? "PASS" : "FAIL") << '\n';
    }
  }

  if (cfg.sweep) {
    const SweepSpec spec{{cfg.model, cfg.pathloss}, cfg.sweep->x, cfg.sweep->y};
    const auto field = sample_coverage_field(spec, coverage, cfg.seed);
    const auto lines = extract_level_sets(field, cfg.sweep->levels);
    auto fos = detail::open_output(out, "coverage_field.csv");
    write_field_csv(fos, field);
    auto los = detail::open_output(out, "level_sets.csv");
    write_level_sets_csv(los, lines, field.x, field.y, {{{"seed", std::to_string(cfg.seed)}}});
    log << "sweep: " << lines.size() << " level-set polylines\n";
  }

  log << "contour verdict: " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kPass : kVerificationFailed;
}

inline int cmd_voidtest(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  if (!cfg.voidtest) throw ConfigError(0, "voidtest needs a [voidtest] section");
  const auto& vt = *cfg.voidtest;
  auto os = detail::open_output(out, "voidtest.csv");
  os << "# seed=" << cfg.seed << "\n# n_trials=" << vt.n_trials << "\n# confidence=" << format_double(vt.confidence)
     << "\n# reparameterization=" << (vt.reparameterization == Reparameterization::Scaled ? "scaled" : "density_over_k")
     << '\n';
  os << "process,k,region_radius_m,void_scaled,void_reference,z,pass\n";

  bool all_pass = true;
  log << std::left << std::setw(8) << "process" << std::setw(8) << "k" << std::setw(14) << "radius" << std::setw(12)
      << "scaled" << std::setw(12) << "reference" << std::setw(10) << "z" << "verdict\n";
  std::uint64_t case_index = 0;
  for (const auto& p : vt.processes) {
    const std::string name = std::holds_alternative<PppParams>(p)
                                 ? "ppp"
                                 : to_string(std::get<PcpParams>(p).kind);
    for (double k : vt.k_values) {
      const auto regions = default_void_regions(p, k);
      ScalingTestOptions opts{vt.confidence, cfg.workers, vt.reparameterization};
      const auto report = test_scaling_equivalence(p, k, regions, vt.n_trials,
                                                   child_seed(cfg.seed, case_index++, Purpose::VoidScaled), opts);
      all_pass = all_pass && report.pass();
      for (const auto& r : report.regions) {
        os << name << ',' << format_double(k) << ',' << format_double(r.region.as_disk().radius) << ','
           << format_double(r.scaled.estimate) << ',' << format_double(r.reference.estimate) << ','
           << format_double(r.z_score) << ',' << (r.pass ? 1 : 0) << '\n';
        log << std::setw(8) << name << std::setw(8) << k << std::setw(14) << r.region.as_disk().radius
            << std::setw(12) << r.scaled.estimate << std::setw(12) << r.reference.estimate << std::setw(10)
            << r.z_score << (r.pass ? "pass" : "FAIL") << '\n';
      }
    }
  }
  log << "voidtest verdict: " << (all_pass ? "PASS" : "FAIL") << '\n';
  return all_pass ? kPass : kVerificationFailed;
}

}  // namespace equicov::cli
