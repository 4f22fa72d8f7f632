#pragma once

// Globally-distributed flux estimation: a very smooth spherical surface fit
// refined by two passes of projection pursuit regression on the residuals.
// The second pass up-weights observations with larger first-pass residuals.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "enasep/geom.hpp"
#include "enasep/mask.hpp"
#include "enasep/ppr.hpp"
#include "enasep/smooth_fit.hpp"

namespace enasep {

struct GdfOptions {
  SmoothFitOptions smooth;
  PprOptions ppr;
  int ppr_terms = 4;
  double residual_weight_cap = 5.0;
};

struct GdfEstimate {
  SmoothFit smooth;
  PPRFit ppr_pass1;
  PPRFit ppr_pass2;
  std::vector<double> fitted;  // smooth + both residual passes, >= 0
};

/// Fit the GDF surface to per-pixel values (in map pixel order). Pixels with
/// include flag 0 are excluded from every stage but still predicted.
inline GdfEstimate estimate_gdf_surface(const GridSpec& grid, const std::vector<double>& values,
                                        const std::vector<uint8_t>* exclude,
                                        const GdfOptions& opt = {}) {
  SkyMap tmp = SkyMap::zeros(grid, FrameSpec::base());
  // negative values can appear in subtraction inputs; the fit handles them
  tmp.rate = values;

  GdfEstimate est;
  est.smooth = fit_smooth_surface(tmp, exclude, {}, opt.smooth);

  const auto positions = pixel_directions(grid);
  std::vector<double> resid(grid.size());
  std::vector<double> w1(grid.size(), 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    resid[i] = values[i] - est.smooth.fitted[i];
    if (exclude && (*exclude)[i]) w1[i] = 0.0;
  }
  est.ppr_pass1 = fit_ppr_residuals(resid, positions, w1, opt.ppr_terms, opt.ppr);

  // Pass 2 models what pass 1 left behind, up-weighting large residuals.
  std::vector<double> resid2(grid.size());
  double mean_abs = 0.0;
  std::size_t n_inc = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    resid2[i] = resid[i] - est.ppr_pass1.fitted[i];
    if (w1[i] > 0.0) {
      mean_abs += std::fabs(resid2[i]);
      ++n_inc;
    }
  }
  mean_abs = n_inc > 0 ? mean_abs / n_inc : 0.0;
  std::vector<double> w2(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (w1[i] <= 0.0) continue;
    w2[i] = mean_abs > 0.0
                ? std::min(std::fabs(resid2[i]) / mean_abs, opt.residual_weight_cap)
                : 1.0;
    if (w2[i] <= 0.0) w2[i] = 1e-6;  // keep every included pixel in the fit
  }
  est.ppr_pass2 = fit_ppr_residuals(resid2, positions, w2, opt.ppr_terms, opt.ppr);

  est.fitted.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    est.fitted[i] = std::max(
        0.0, est.smooth.fitted[i] + est.ppr_pass1.fitted[i] + est.ppr_pass2.fitted[i]);
  return est;
}

/// Initial GDF map: surface estimated from pixels outside the ribbon mask;
/// inside the mask the prediction is used, outside the map is kept exactly.
inline SkyMap initial_gdf(const SkyMap& map, const RibbonMask& mask, const GdfOptions& opt = {}) {
  const auto flags = mask.pixel_flags(map.grid);
  SkyMap out = map;
  if (std::count(flags.begin(), flags.end(), uint8_t{1}) == 0) return out;

  const GdfEstimate est = estimate_gdf_surface(map.grid, map.rate, &flags, opt);
  for (std::size_t i = 0; i < map.grid.size(); ++i)
    if (flags[i]) out.rate[i] = est.fitted[i];
  return out;
}

}  // namespace enasep
