// enasep command-line tool: simulate synthetic sky maps, reframe them,
// separate ribbon and background flux, estimate the ribbon center, evaluate
// against truth, render maps, or run the whole pipeline from a config file.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "enasep/center.hpp"
#include "enasep/config.hpp"
#include "enasep/map_io.hpp"
#include "enasep/metrics.hpp"
#include "enasep/pipeline.hpp"
#include "enasep/render.hpp"
#include "enasep/reframe.hpp"
#include "enasep/separate.hpp"
#include "enasep/sim.hpp"

namespace {

using namespace enasep;

bool parse_lonlat(const std::string& s, LonLat& out) {
  const std::size_t comma = s.find(',');
  if (comma == std::string::npos) return false;
  try {
    out.lon = std::stod(s.substr(0, comma));
    out.lat = std::stod(s.substr(comma + 1));
  } catch (const std::exception&) {
    return false;
  }
  return out.lat >= -90.0 && out.lat <= 90.0;
}

int cmd_simulate(const std::string& scenario, double grid_deg, const std::string& noise,
                 uint64_t seed, const std::string& out_prefix) {
  RunConfig probe;  // reuse the config validators for the enum strings
  probe.scenario = scenario;
  probe.noise = noise;
  SimScenario sc = SimScenario::preset(probe.scenario_id());
  sc.seed = seed;
  const GridSpec grid = GridSpec::from_pixel_deg(grid_deg);
  const TruthPair tp = gen_truth_pair(sc, grid, probe.noise_mode());
  write_map_csv(tp.gdf_truth, out_prefix + "_gdf.csv");
  write_map_csv(tp.ribbon_truth, out_prefix + "_ribbon.csv");
  write_map_csv(tp.observed, out_prefix + "_observed.csv");
  write_json(scenario_to_json(sc), out_prefix + "_scenario.json");
  std::cout << "wrote " << out_prefix << "_{gdf,ribbon,observed}.csv and scenario sidecar\n";
  return 0;
}

int cmd_reframe(const std::string& input, const std::string& center_str, double roll, int micro,
                const std::string& out) {
  LonLat center;
  if (!parse_lonlat(center_str, center))
    throw CLI::ValidationError("--center", "expected LON,LAT");
  const SkyMap map = read_map_csv(input);
  const SkyMap res = reframe_map(map, make_rotation(center.lon, center.lat, roll), micro);
  write_map_csv(res, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_separate(const std::string& input, const std::string& center_str,
                 const std::string& mask_grid, const std::string& out_prefix, int sh_degree,
                 double band_lo, double band_hi, double sigma2y_ratio, int micro) {
  LonLat center;
  if (!parse_lonlat(center_str, center))
    throw CLI::ValidationError("--center", "expected LON,LAT");
  RunConfig cfg;
  cfg.mask_grid = mask_grid;

  const SkyMap map = read_map_csv(input);
  const FrameSpec wf = working_frame(center);
  const SkyMap working = reframe_map(map, wf, micro);

  SeparateOptions opt;
  opt.peaks.band_lo = band_lo;
  opt.peaks.band_hi = band_hi;
  opt.gdf.smooth.degree = sh_degree;
  opt.sigma2y_ratio = sigma2y_ratio;
  const SeparationResult sep = separate(working, cfg.mask_candidates(), opt);
  write_separation(sep, out_prefix);

  nlohmann::json rj;
  rj["input"] = input;
  rj["center"] = {{"lon", center.lon}, {"lat", center.lat}};
  rj["selected_u"] = sep.params.u;
  rj["selected_v"] = sep.params.v;
  rj["score"] = sep.score;
  rj["frame"] = {{"lon", wf.center_lon}, {"lat", wf.center_lat}, {"roll", wf.roll}};
  write_json(rj, out_prefix + "_report.json");
  std::cout << "wrote " << out_prefix << "_{gdf,ribbon,mask,peaks}.csv; selected (u,v) = ("
            << sep.params.u << ", " << sep.params.v << ")\n";
  return 0;
}

int cmd_center(const std::string& input, const std::string& working_str, int draws, int iters,
               double tol, uint64_t seed, const std::string& out) {
  LonLat working;
  if (!parse_lonlat(working_str, working))
    throw CLI::ValidationError("--working-center", "expected LON,LAT");
  const SkyMap map = read_map_csv(input);
  CenterOptions opt;
  opt.max_iter = iters;
  opt.tol_deg = tol;
  const CenterEstimate est = iterate_center(map, working, draws, seed, opt);
  write_json(center_to_json(est), out);
  std::cout << "center estimate: (" << est.mean_lon << ", " << est.mean_lat << ") after "
            << est.n_iterations << " iterations\n";
  return 0;
}

int cmd_evaluate(const std::string& est_prefix, const std::string& truth_prefix,
                 const std::string& band, const std::string& out) {
  WISConfig cfg;
  {
    const std::size_t comma = band.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("--band", "expected LO,HI");
    cfg.band_lo = std::stod(band.substr(0, comma));
    cfg.band_hi = std::stod(band.substr(comma + 1));
  }
  const MapCsv est_gdf = read_map_csv_full(est_prefix + "_gdf.csv");
  const SkyMap est_ribbon = read_map_csv(est_prefix + "_ribbon.csv");
  SkyMap truth_gdf = read_map_csv(truth_prefix + "_gdf.csv");
  if (!(truth_gdf.frame == est_gdf.map.frame))
    truth_gdf = reframe_map(truth_gdf, est_gdf.map.frame);
  const std::vector<double>& var_g =
      est_gdf.extra.empty() ? est_gdf.map.var : est_gdf.extra[0];
  const EvalReport rep = eval_gdf_report(est_gdf.map, var_g, truth_gdf, est_ribbon, cfg);
  write_json(eval_report_to_json(rep), out);
  std::cout << "pct_error=" << rep.mean_abs_pct_error << "% spearman=" << rep.spearman
            << " mean_wis=" << rep.mean_wis << " coverage95=" << rep.coverage_95 << '\n';
  if (rep.coverage_regression) std::cout << "warning: coverage below 0.5 (regression)\n";
  return 0;
}

int cmd_render(const std::string& input, double lo, double hi, const std::string& out) {
  render_heatmap(read_map_csv(input), lo, hi, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_pipeline(const std::string& config_path, const std::string& out_dir_override) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
  const PipelineResult res = run_pipeline(cfg);
  std::cout << "pipeline done: spearman=" << res.spearman
            << " center_error_deg=" << res.center_error_deg << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ENA sky-map ribbon separation and center estimation"};
  app.require_subcommand(1);

  // simulate
  std::string scenario = "s1", noise = "ideal", out_prefix = "sim";
  double grid_deg = 2.0;
  uint64_t seed = 20230301;
  auto* sim = app.add_subcommand("simulate", "generate synthetic truth and observed maps");
  sim->add_option("--scenario", scenario, "s1|s2|s3")->required();
  sim->add_option("--grid-deg", grid_deg, "pixel size in degrees");
  sim->add_option("--noise", noise, "ideal|noisy|noisy3x");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out-prefix", out_prefix, "output path prefix")->required();

  // reframe
  std::string rf_input, rf_center, rf_out;
  double rf_roll = 0.0;
  int rf_micro = 15;
  auto* rf = app.add_subcommand("reframe", "resample a map into a new rotational frame");
  rf->add_option("--input", rf_input)->required();
  rf->add_option("--center", rf_center, "frame center LON,LAT")->required();
  rf->add_option("--roll", rf_roll, "frame roll in degrees");
  rf->add_option("--micro", rf_micro, "micropixels per side");
  rf->add_option("--out", rf_out)->required();

  // separate
  std::string sp_input, sp_center, sp_out;
  std::string sp_grid = "90,10;95,10;97.5,10;90,15;95,15;97.5,15;90,20;95,20;97.5,20";
  int sp_degree = 12, sp_micro = 15;
  double sp_band_lo = 80.0, sp_band_hi = 130.0, sp_ratio = 2.0;
  auto* sp = app.add_subcommand("separate", "split a map into ribbon and background flux");
  sp->add_option("--input", sp_input)->required();
  sp->add_option("--center", sp_center, "ribbon center LON,LAT")->required();
  sp->add_option("--mask-grid", sp_grid, "candidates 'u1,v1;u2,v2;...'");
  sp->add_option("--out-prefix", sp_out)->required();
  sp->add_option("--sh-degree", sp_degree, "spherical-harmonic degree");
  sp->add_option("--band-lo", sp_band_lo, "peak search band, polar degrees");
  sp->add_option("--band-hi", sp_band_hi);
  sp->add_option("--sigma2y-ratio", sp_ratio, "observation/map variance ratio");
  sp->add_option("--micro", sp_micro, "micropixels per side for reframing");

  // center
  std::string ct_input, ct_working, ct_out = "center.json";
  int ct_draws = 100, ct_iters = 10;
  double ct_tol = 0.1;
  uint64_t ct_seed = 20230301;
  auto* ct = app.add_subcommand("center", "estimate the ribbon center with uncertainty");
  ct->add_option("--input", ct_input)->required();
  ct->add_option("--working-center", ct_working, "initial center LON,LAT")->required();
  ct->add_option("--draws", ct_draws, "map draws per iteration");
  ct->add_option("--iters", ct_iters, "max working-frame iterations");
  ct->add_option("--tol", ct_tol, "convergence tolerance in degrees");
  ct->add_option("--seed", ct_seed, "RNG seed");
  ct->add_option("--out", ct_out, "output JSON path");

  // evaluate
  std::string ev_est, ev_truth, ev_band = "80,130", ev_out = "report.json";
  auto* ev = app.add_subcommand("evaluate", "score separated maps against truth");
  ev->add_option("--est-prefix", ev_est)->required();
  ev->add_option("--truth-prefix", ev_truth)->required();
  ev->add_option("--band", ev_band, "polar band LO,HI");
  ev->add_option("--out", ev_out);

  // render
  std::string rd_input, rd_out;
  double rd_lo = 0.0, rd_hi = 0.3;
  auto* rd = app.add_subcommand("render", "render a map to grayscale PGM");
  rd->add_option("--input", rd_input)->required();
  rd->add_option("--lo", rd_lo, "rate mapped to black");
  rd->add_option("--hi", rd_hi, "rate mapped to white");
  rd->add_option("--out", rd_out)->required();

  // pipeline
  std::string pl_config, pl_out_dir;
  auto* pl = app.add_subcommand("pipeline", "run simulate/separate/center/evaluate end to end");
  pl->add_option("--config", pl_config, "flat JSON config (defaults when omitted)");
  pl->add_option("--out-dir", pl_out_dir, "override the config out_dir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(scenario, grid_deg, noise, seed, out_prefix);
    if (rf->parsed()) return cmd_reframe(rf_input, rf_center, rf_roll, rf_micro, rf_out);
    if (sp->parsed())
      return cmd_separate(sp_input, sp_center, sp_grid, sp_out, sp_degree, sp_band_lo,
                          sp_band_hi, sp_ratio, sp_micro);
    if (ct->parsed()) return cmd_center(ct_input, ct_working, ct_draws, ct_iters, ct_tol,
                                        ct_seed, ct_out);
    if (ev->parsed()) return cmd_evaluate(ev_est, ev_truth, ev_band, ev_out);
    if (rd->parsed()) return cmd_render(rd_input, rd_lo, rd_hi, rd_out);
    if (pl->parsed()) return cmd_pipeline(pl_config, pl_out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
