#pragma once

// Flat key/value run configuration. Unknown keys are rejected; values are
// validated against the module preconditions at load time. CLI flags
// override file values.

#include <json.hpp>
#include <fstream>
#include <string>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/mask.hpp"
#include "enasep/sim.hpp"

namespace enasep {

struct RunConfig {
  std::string scenario = "s1";
  double grid_deg = 2.0;
  std::string noise = "ideal";
  uint64_t seed = 20230301;
  std::string out_dir = "runs/out";

  // working-frame center; defaults to the scenario truth center
  double center_lon = 221.5;
  double center_lat = 39.0;

  std::string mask_grid = "90,10;95,10;97.5,10;90,15;95,15;97.5,15;90,20;95,20;97.5,20";
  int pad_pixels = 2;
  double band_lo = 80.0;
  double band_hi = 130.0;

  int sh_degree = 12;
  int ppr_terms = 4;
  double sigma2y_ratio = 2.0;

  int draws = 100;
  int iters = 10;
  double tol_deg = 0.1;
  int micro = 15;

  double render_lo = 0.0;
  double render_hi = 0.3;

  double peak_outlier_sd = 3.0;
  int peak_median_window = 15;

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") c.scenario = value.get<std::string>();
      else if (key == "grid_deg") c.grid_deg = value.get<double>();
      else if (key == "noise") c.noise = value.get<std::string>();
      else if (key == "seed") c.seed = value.get<uint64_t>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else if (key == "center_lon") c.center_lon = value.get<double>();
      else if (key == "center_lat") c.center_lat = value.get<double>();
      else if (key == "mask_grid") c.mask_grid = value.get<std::string>();
      else if (key == "pad_pixels") c.pad_pixels = value.get<int>();
      else if (key == "band_lo") c.band_lo = value.get<double>();
      else if (key == "band_hi") c.band_hi = value.get<double>();
      else if (key == "sh_degree") c.sh_degree = value.get<int>();
      else if (key == "ppr_terms") c.ppr_terms = value.get<int>();
      else if (key == "sigma2y_ratio") c.sigma2y_ratio = value.get<double>();
      else if (key == "draws") c.draws = value.get<int>();
      else if (key == "iters") c.iters = value.get<int>();
      else if (key == "tol_deg") c.tol_deg = value.get<double>();
      else if (key == "micro") c.micro = value.get<int>();
      else if (key == "render_lo") c.render_lo = value.get<double>();
      else if (key == "render_hi") c.render_hi = value.get<double>();
      else if (key == "peak_outlier_sd") c.peak_outlier_sd = value.get<double>();
      else if (key == "peak_median_window") c.peak_median_window = value.get<int>();
      else throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
    }
    c.validate();
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("RunConfig: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario;
    j["grid_deg"] = grid_deg;
    j["noise"] = noise;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["center_lon"] = center_lon;
    j["center_lat"] = center_lat;
    j["mask_grid"] = mask_grid;
    j["pad_pixels"] = pad_pixels;
    j["band_lo"] = band_lo;
    j["band_hi"] = band_hi;
    j["sh_degree"] = sh_degree;
    j["ppr_terms"] = ppr_terms;
    j["sigma2y_ratio"] = sigma2y_ratio;
    j["draws"] = draws;
    j["iters"] = iters;
    j["tol_deg"] = tol_deg;
    j["micro"] = micro;
    j["render_lo"] = render_lo;
    j["render_hi"] = render_hi;
    j["peak_outlier_sd"] = peak_outlier_sd;
    j["peak_median_window"] = peak_median_window;
    return j;
  }

  ScenarioId scenario_id() const {
    if (scenario == "s1") return ScenarioId::S1;
    if (scenario == "s2") return ScenarioId::S2;
    if (scenario == "s3") return ScenarioId::S3;
    throw std::invalid_argument("RunConfig: scenario must be s1, s2, or s3");
  }

  NoiseMode noise_mode() const {
    if (noise == "ideal") return NoiseMode::Ideal;
    if (noise == "noisy") return NoiseMode::Noisy;
    if (noise == "noisy3x") return NoiseMode::Noisy3x;
    throw std::invalid_argument("RunConfig: noise must be ideal, noisy, or noisy3x");
  }

  std::vector<MaskParams> mask_candidates() const {
    std::vector<MaskParams> out;
    std::size_t start = 0;
    while (start <= mask_grid.size()) {
      std::size_t end = mask_grid.find(';', start);
      if (end == std::string::npos) end = mask_grid.size();
      const std::string pair = mask_grid.substr(start, end - start);
      if (!pair.empty()) {
        const std::size_t comma = pair.find(',');
        if (comma == std::string::npos)
          throw std::invalid_argument("RunConfig: mask_grid entries must be 'u,v'");
        MaskParams p;
        p.u = std::stod(pair.substr(0, comma));
        p.v = std::stod(pair.substr(comma + 1));
        p.pad_pixels = pad_pixels;
        p.validate();
        out.push_back(p);
      }
      start = end + 1;
    }
    if (out.empty()) throw std::invalid_argument("RunConfig: mask_grid is empty");
    return out;
  }

  void validate() const {
    scenario_id();
    noise_mode();
    GridSpec::from_pixel_deg(grid_deg);
    mask_candidates();
    if (!(band_lo >= 0.0 && band_hi <= 180.0 && band_hi > band_lo))
      throw std::invalid_argument("RunConfig: band must be within [0, 180]");
    if (sh_degree < 1 || sh_degree > 40)
      throw std::invalid_argument("RunConfig: sh_degree out of range");
    if (ppr_terms < 1) throw std::invalid_argument("RunConfig: ppr_terms must be >= 1");
    if (!(sigma2y_ratio > 1.0))
      throw std::invalid_argument("RunConfig: sigma2y_ratio must be > 1");
    if (draws < 1) throw std::invalid_argument("RunConfig: draws must be >= 1");
    if (iters < 1) throw std::invalid_argument("RunConfig: iters must be >= 1");
    if (!(tol_deg > 0.0)) throw std::invalid_argument("RunConfig: tol_deg must be > 0");
    if (micro < 1) throw std::invalid_argument("RunConfig: micro must be >= 1");
    if (!(render_lo < render_hi))
      throw std::invalid_argument("RunConfig: render_lo must be < render_hi");
    if (!(center_lat >= -90.0 && center_lat <= 90.0))
      throw std::invalid_argument("RunConfig: center_lat out of range");
  }
};

}  // namespace enasep
