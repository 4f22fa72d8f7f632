#pragma once

// End-to-end batch run: simulate -> reframe -> separate -> center ->
// evaluate -> render, writing every artifact plus a JSON report. All outputs
// are deterministic for a fixed config and seed; wall-clock timings go to a
// separate timings.txt so the data products stay byte-stable.

#include <json.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "enasep/center.hpp"
#include "enasep/config.hpp"
#include "enasep/map_io.hpp"
#include "enasep/metrics.hpp"
#include "enasep/render.hpp"
#include "enasep/reframe.hpp"
#include "enasep/separate.hpp"
#include "enasep/sim.hpp"

namespace enasep {

inline nlohmann::json scenario_to_json(const SimScenario& sc) {
  nlohmann::json j;
  j["id"] = to_string(sc.id);
  j["ribbon_center_lon"] = sc.ribbon_center.lon;
  j["ribbon_center_lat"] = sc.ribbon_center.lat;
  j["ribbon_radius"] = sc.ribbon_radius;
  j["band_half_width"] = sc.band_half_width;
  j["base_amplitude"] = sc.base_amplitude;
  j["amp_mod_depth"] = sc.amp_mod_depth;
  j["amp_mod_phase"] = sc.amp_mod_phase;
  j["s1_sigma_in"] = sc.s1_sigma_in;
  j["s1_sigma_out"] = sc.s1_sigma_out;
  j["s2_core_sigma"] = sc.s2_core_sigma;
  j["s2_shoulder_height"] = sc.s2_shoulder_height;
  j["s2_shoulder_offset"] = sc.s2_shoulder_offset;
  j["s2_shoulder_sigma"] = sc.s2_shoulder_sigma;
  j["gdf_floor"] = sc.gdf_floor;
  j["gdf_nose_amp"] = sc.gdf_nose_amp;
  j["gdf_nose_lon"] = sc.gdf_nose.lon;
  j["gdf_nose_lat"] = sc.gdf_nose.lat;
  j["var_a"] = sc.var_a;
  j["var_b"] = sc.var_b;
  j["seed"] = sc.seed;
  j["disc_enabled"] = sc.disc_enabled;
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : sc.dimming) dims.push_back({{"az_lo", d.az_lo}, {"az_hi", d.az_hi}, {"factor", d.factor}});
  j["dimming"] = dims;
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& k : sc.knots)
    knots.push_back({{"azimuth", k.azimuth}, {"gain", k.gain}, {"width", k.width}});
  j["knots"] = knots;
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for write: " + path);
  f << j.dump(2) << '\n';
  if (!f) throw IoFailure("write failed: " + path);
}

inline void write_peaks_csv(const RibbonPeaks& peaks, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for write: " + path);
  f << "azimuth,peak_polar,peak_height,quality\n";
  for (std::size_t j = 0; j < peaks.size(); ++j)
    f << format_double(peaks.sector_azimuth[j]) << ',' << format_double(peaks.peak_polar[j])
      << ',' << format_double(peaks.peak_height[j]) << ',' << to_string(peaks.quality[j])
      << '\n';
}

inline void write_mask_csv(const RibbonMask& mask, const RibbonPeaks& peaks,
                           const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for write: " + path);
  f << "azimuth,lower_polar,upper_polar\n";
  for (std::size_t j = 0; j < mask.n_sectors(); ++j)
    f << format_double(peaks.sector_azimuth[j]) << ',' << format_double(mask.lower_polar[j])
      << ',' << format_double(mask.upper_polar[j]) << '\n';
}

inline nlohmann::json center_to_json(const CenterEstimate& est) {
  nlohmann::json j;
  j["mean_lon"] = est.mean_lon;
  j["mean_lat"] = est.mean_lat;
  j["covariance"] = {{est.covariance(0, 0), est.covariance(0, 1)},
                     {est.covariance(1, 0), est.covariance(1, 1)}};
  j["n_map_draws"] = est.n_map_draws;
  j["n_failed"] = est.n_failed;
  j["n_iterations"] = est.n_iterations;
  j["converged"] = est.converged;
  {
    // 95% confidence ellipse of the mean-center draws
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(est.covariance);
    const double chi2 = 5.991464547107979;  // 95% quantile, 2 dof
    nlohmann::json ell;
    ell["semi_axis_1"] = std::sqrt(std::max(0.0, es.eigenvalues()[1] * chi2));
    ell["semi_axis_2"] = std::sqrt(std::max(0.0, es.eigenvalues()[0] * chi2));
    ell["angle_deg"] =
        std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1)) * kRadToDeg;
    j["confidence_ellipse_95"] = ell;
  }
  nlohmann::json draws = nlohmann::json::array();
  for (const auto& d : est.draws) draws.push_back({{"lon", d.lon}, {"lat", d.lat}});
  j["draws"] = draws;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : est.iteration_trace) trace.push_back({{"lon", t.lon}, {"lat", t.lat}});
  j["iteration_trace"] = trace;
  return j;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["mean_abs_pct_error"] = rep.mean_abs_pct_error;
  j["spearman"] = rep.spearman;
  j["mean_wis"] = rep.mean_wis;
  j["coverage_95"] = rep.coverage_95;
  j["coverage_regression"] = rep.coverage_regression;
  j["n_band_pixels"] = rep.n_band_pixels;
  auto clean = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) {
      if (std::isfinite(x))
        a.push_back(x);
      else
        a.push_back(nullptr);
    }
    return a;
  };
  j["sector_skewness"] = clean(rep.sector_skewness);
  j["sector_fwhm"] = clean(rep.sector_fwhm);
  return j;
}

/// Write the separated maps with the variance columns appended, plus the
/// sidecar mask/peaks CSVs.
inline void write_separation(const SeparationResult& sep, const std::string& prefix) {
  const std::vector<std::string> names{"var_g", "var_r", "cov_gr"};
  const std::vector<const std::vector<double>*> cols{&sep.var_g, &sep.var_r, &sep.cov_gr};
  write_map_csv(sep.gdf, prefix + "_gdf.csv", names, cols);
  write_map_csv(sep.ribbon, prefix + "_ribbon.csv", names, cols);
  write_mask_csv(sep.mask, sep.peaks, prefix + "_mask.csv");
  write_peaks_csv(sep.peaks, prefix + "_peaks.csv");
}

struct PipelineResult {
  nlohmann::json report;
  double spearman = 0.0;
  double center_error_deg = 0.0;
};

inline PipelineResult run_pipeline(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::string out = cfg.out_dir + "/";

  using Clock = std::chrono::steady_clock;
  std::vector<std::pair<std::string, double>> timings;
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    timings.emplace_back(name, std::chrono::duration<double>(Clock::now() - t0).count());
  };

  nlohmann::json report;
  report["config"] = cfg.to_json();
  report["format_version"] = 1;

  // simulate
  SimScenario sc = SimScenario::preset(cfg.scenario_id());
  sc.seed = cfg.seed;
  const GridSpec grid = GridSpec::from_pixel_deg(cfg.grid_deg);
  TruthPair tp;
  timed("simulate", [&] {
    tp = gen_truth_pair(sc, grid, cfg.noise_mode());
    write_map_csv(tp.gdf_truth, out + "gdf_truth.csv");
    write_map_csv(tp.ribbon_truth, out + "ribbon_truth.csv");
    write_map_csv(tp.observed, out + "observed.csv");
    write_json(scenario_to_json(sc), out + "scenario.json");
  });

  // reframe to the working frame
  const LonLat working{cfg.center_lon, cfg.center_lat};
  const FrameSpec wf = working_frame(working);
  SkyMap observed_w, gdf_truth_w, ribbon_truth_w;
  timed("reframe", [&] {
    const ReframeOperator op(grid, tp.observed.frame, wf, cfg.micro);
    observed_w = op.apply(tp.observed);
    gdf_truth_w = op.apply(tp.gdf_truth);
    ribbon_truth_w = op.apply(tp.ribbon_truth);
    write_map_csv(observed_w, out + "observed_working.csv");
  });

  // separate
  SeparateOptions sopt;
  sopt.peaks.band_lo = cfg.band_lo;
  sopt.peaks.band_hi = cfg.band_hi;
  sopt.peak_smoothing.median_window = cfg.peak_median_window;
  sopt.peak_smoothing.n_robust_sd = cfg.peak_outlier_sd;
  sopt.gdf.smooth.degree = cfg.sh_degree;
  sopt.gdf.ppr_terms = cfg.ppr_terms;
  sopt.pad_pixels = cfg.pad_pixels;
  sopt.sigma2y_ratio = cfg.sigma2y_ratio;
  SeparationResult sep;
  timed("separate", [&] {
    sep = separate(observed_w, cfg.mask_candidates(), sopt);
    write_separation(sep, out + "sep");
    nlohmann::json sj;
    sj["selected_u"] = sep.params.u;
    sj["selected_v"] = sep.params.v;
    sj["score"] = sep.score;
    report["separation"] = sj;
  });

  // center estimation on the observed (ecliptic) map
  CenterOptions copt;
  copt.peaks.band_lo = cfg.band_lo;
  copt.peaks.band_hi = cfg.band_hi;
  copt.peak_smoothing.median_window = cfg.peak_median_window;
  copt.peak_smoothing.n_robust_sd = cfg.peak_outlier_sd;
  copt.kron.smooth_degree = cfg.sh_degree;
  copt.micro = cfg.micro;
  copt.max_iter = cfg.iters;
  copt.tol_deg = cfg.tol_deg;
  CenterEstimate cest;
  timed("center", [&] {
    cest = iterate_center(tp.observed, working, cfg.draws, cfg.seed, copt);
    write_json(center_to_json(cest), out + "center.json");
  });
  const double center_error =
      angular_distance_deg({cest.mean_lon, cest.mean_lat}, sc.ribbon_center);
  report["center"] = {{"mean_lon", cest.mean_lon},
                      {"mean_lat", cest.mean_lat},
                      {"error_deg", center_error},
                      {"n_iterations", cest.n_iterations},
                      {"converged", cest.converged}};

  // evaluate against the reframed truth
  EvalReport rep;
  timed("evaluate", [&] {
    WISConfig wcfg;
    wcfg.band_lo = cfg.band_lo;
    wcfg.band_hi = cfg.band_hi;
    rep = eval_gdf_report(sep.gdf, sep.var_g, gdf_truth_w, sep.ribbon, wcfg);
    nlohmann::json ej = eval_report_to_json(rep);
    write_json(ej, out + "evaluation.json");
    report["evaluation"] = ej;
  });

  // render
  timed("render", [&] {
    render_heatmap(observed_w, cfg.render_lo, cfg.render_hi, out + "observed_working.pgm");
    render_heatmap(sep.gdf, cfg.render_lo, cfg.render_hi, out + "sep_gdf.pgm");
    render_heatmap(sep.ribbon, cfg.render_lo, cfg.render_hi, out + "sep_ribbon.pgm");
  });

  report["spearman"] = rep.spearman;
  report["center_error_deg"] = center_error;
  write_json(report, out + "report.json");

  std::ofstream tf(out + "timings.txt");
  for (const auto& [name, secs] : timings) tf << name << ' ' << secs << "s\n";

  PipelineResult res;
  res.report = report;
  res.spearman = rep.spearman;
  res.center_error_deg = center_error;
  return res;
}

}  // namespace enasep
