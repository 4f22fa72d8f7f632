#pragma once

// Full ribbon/GDF separation of a map in the working frame:
//   peaks -> mask candidate selection -> initial GDF (masked fit) ->
//   initial ribbon -> scaled profile fit -> fitted ribbon -> GDF re-fit
//   without masking -> final split with conditional variances.
// Candidate (u, v) mask parameters are scored by the fraction of negative
// pre-truncation ribbon pixels inside the mask plus the inside/outside
// roughness ratio of the re-fit GDF; smaller is better, ties break toward
// smaller v then smaller u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "enasep/gdf.hpp"
#include "enasep/geom.hpp"
#include "enasep/mask.hpp"
#include "enasep/parallel.hpp"
#include "enasep/peaks.hpp"
#include "enasep/ribbon_model.hpp"
#include "enasep/variance.hpp"

namespace enasep {

struct SeparateOptions {
  PeakOptions peaks;
  SmoothPeaksOptions peak_smoothing;
  GdfOptions gdf;
  RibbonProfileOptions profile;
  int pad_pixels = 2;
  double sigma2y_ratio = 2.0;  // sigma2_y = ratio * map variance when no noise model given
  std::optional<NoiseModel> noise;  // per-pixel observation variance, if known

  static std::vector<MaskParams> default_candidates() {
    std::vector<MaskParams> c;
    for (double v : {10.0, 15.0, 20.0})
      for (double u : {90.0, 95.0, 97.5}) c.push_back({u, v, 2});
    return c;
  }
};

struct SeparationResult {
  SkyMap gdf;
  SkyMap ribbon;
  std::vector<double> var_g;
  std::vector<double> var_r;
  std::vector<double> cov_gr;
  std::vector<double> inflation;
  RibbonMask mask;
  RibbonPeaks peaks;
  MaskParams params;
  RibbonProfileModel profile;
  double score = 0.0;
};

namespace detail {

/// Mean squared 4-neighbor Laplacian over flagged pixels (azimuth wraps).
inline double roughness(const GridSpec& g, const std::vector<double>& v,
                        const std::vector<uint8_t>& flags, bool inside) {
  double acc = 0.0;
  std::size_t count = 0;
  for (int j = 0; j < g.n_lon; ++j) {
    for (int k = 0; k < g.n_lat; ++k) {
      const std::size_t i = g.index(j, k);
      if ((flags[i] != 0) != inside) continue;
      const int jl = (j + g.n_lon - 1) % g.n_lon, jr = (j + 1) % g.n_lon;
      const int kd = std::max(k - 1, 0), ku = std::min(k + 1, g.n_lat - 1);
      const double lap = v[g.index(jl, k)] + v[g.index(jr, k)] + v[g.index(j, kd)] +
                         v[g.index(j, ku)] - 4.0 * v[i];
      acc += lap * lap;
      ++count;
    }
  }
  return count > 0 ? acc / count : 0.0;
}

struct CandidateRun {
  RibbonMask mask;
  SkyMap gdf_refit;              // final smooth GDF over all pixels
  RibbonProfileModel profile;
  RibbonPeaks scaled_peaks;      // peaks with heights taken from the initial ribbon
  double frac_negative = 0.0;
  double rough_ratio = 0.0;
  double score = 0.0;
};

inline CandidateRun run_candidate(const SkyMap& input, const RibbonPeaks& peaks,
                                  const MaskParams& params, const SeparateOptions& opt) {
  CandidateRun run;
  MaskParams p = params;
  p.pad_pixels = opt.pad_pixels;
  run.mask = build_mask(input, peaks, p);
  const auto flags = run.mask.pixel_flags(input.grid);

  const SkyMap g0 = initial_gdf(input, run.mask, opt.gdf);

  // initial ribbon: input - initial GDF inside the mask, clipped at zero
  SkyMap r0 = SkyMap::zeros(input.grid, input.frame);
  for (std::size_t i = 0; i < input.grid.size(); ++i)
    if (flags[i]) r0.rate[i] = std::max(0.0, input.rate[i] - g0.rate[i]);

  // peak heights for scaling come from the initial ribbon itself
  run.scaled_peaks = peaks;
  for (std::size_t j = 0; j < peaks.size(); ++j) {
    std::vector<double> polar, rate;
    sector_profile(r0, static_cast<int>(j), run.mask.lower_polar[j], run.mask.upper_polar[j],
                   polar, rate);
    double h = 0.0;
    for (double v : rate) h = std::max(h, v);
    run.scaled_peaks.peak_height[j] = h;
  }

  const ScaledRibbon scaled = scale_ribbon(r0, run.scaled_peaks, run.mask);
  run.profile = fit_ribbon_profile(scaled, run.scaled_peaks, run.mask, opt.profile);
  const SkyMap ribbon_fit = unscale_ribbon(run.profile, run.scaled_peaks, input);

  // GDF re-fit on the ribbon-subtracted data, no mask
  std::vector<double> sub(input.grid.size());
  for (std::size_t i = 0; i < input.grid.size(); ++i)
    sub[i] = input.rate[i] - ribbon_fit.rate[i];
  const GdfEstimate refit = estimate_gdf_surface(input.grid, sub, nullptr, opt.gdf);

  run.gdf_refit = SkyMap::zeros(input.grid, input.frame);
  run.gdf_refit.rate = refit.fitted;
  run.gdf_refit.var = input.var;

  std::size_t n_in = 0, n_neg = 0;
  for (std::size_t i = 0; i < input.grid.size(); ++i) {
    if (!flags[i]) continue;
    ++n_in;
    if (input.rate[i] - refit.fitted[i] < 0.0) ++n_neg;
  }
  run.frac_negative = n_in > 0 ? static_cast<double>(n_neg) / n_in : 0.0;
  const double rough_in = roughness(input.grid, refit.fitted, flags, true);
  const double rough_out = roughness(input.grid, refit.fitted, flags, false);
  run.rough_ratio = rough_in / std::max(rough_out, 1e-300);
  run.score = run.frac_negative + run.rough_ratio;
  return run;
}

}  // namespace detail

/// Choose mask parameters by running the full separation per candidate and
/// taking the smallest selection score.
inline MaskParams select_mask_params(const SkyMap& map, const RibbonPeaks& peaks,
                                     const std::vector<MaskParams>& candidates,
                                     const SeparateOptions& opt = {}) {
  if (candidates.empty())
    throw std::invalid_argument("select_mask_params: need at least one candidate");
  if (candidates.size() == 1) return candidates.front();
  std::vector<double> scores(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    scores[c] = detail::run_candidate(map, peaks, candidates[c], opt).score;
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const bool better =
        scores[c] < scores[best] ||
        (scores[c] == scores[best] &&
         (candidates[c].v < candidates[best].v ||
          (candidates[c].v == candidates[best].v && candidates[c].u < candidates[best].u)));
    if (better) best = c;
  }
  return candidates[best];
}

/// Full separation. The input map must already be in the working
/// (ribbon-centric) frame.
inline SeparationResult separate(const SkyMap& input, const std::vector<MaskParams>& candidates,
                                 const SeparateOptions& opt = {}) {
  if (candidates.empty()) throw std::invalid_argument("separate: need mask candidates");

  const RibbonPeaks raw = estimate_peaks_cubic(input, opt.peaks);
  const RibbonPeaks peaks = smooth_peaks(raw, opt.peak_smoothing);

  std::vector<detail::CandidateRun> runs(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    runs[c] = detail::run_candidate(input, peaks, candidates[c], opt);
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const bool better =
        runs[c].score < runs[best].score ||
        (runs[c].score == runs[best].score &&
         (candidates[c].v < candidates[best].v ||
          (candidates[c].v == candidates[best].v && candidates[c].u < candidates[best].u)));
    if (better) best = c;
  }
  detail::CandidateRun& run = runs[best];

  SeparationResult res;
  res.params = candidates[best];
  res.params.pad_pixels = opt.pad_pixels;
  res.mask = run.mask;
  res.peaks = peaks;
  res.profile = run.profile;
  res.score = run.score;
  res.gdf = run.gdf_refit;
  res.ribbon = SkyMap::zeros(input.grid, input.frame);

  const auto flags = res.mask.pixel_flags(input.grid);
  for (std::size_t i = 0; i < input.grid.size(); ++i)
    if (flags[i]) res.ribbon.rate[i] = std::max(0.0, input.rate[i] - res.gdf.rate[i]);

  // Conditional variance split. sigma2_y comes from the supplied noise model
  // or the configured multiple of the input-map variance.
  NoiseModel noise;
  if (opt.noise) {
    noise = *opt.noise;
    if (noise.sigma2_y.size() != input.grid.size())
      throw std::invalid_argument("separate: noise model length mismatch");
  } else {
    noise.provenance = NoiseProvenance::ConfiguredModel;
    noise.sigma2_y.resize(input.grid.size());
    for (std::size_t i = 0; i < input.grid.size(); ++i)
      noise.sigma2_y[i] = opt.sigma2y_ratio * input.var[i];
  }
  std::vector<double> frac(input.grid.size(), 0.0);
  for (std::size_t i = 0; i < input.grid.size(); ++i) {
    const double tot = res.ribbon.rate[i] + res.gdf.rate[i];
    frac[i] = tot > 0.0 ? res.ribbon.rate[i] / tot : 0.0;
  }
  const VarianceSplit split = split_variances(input.var, noise, frac);
  res.var_g = split.var_g_given_y;
  res.var_r = split.var_r_given_y;
  res.cov_gr = split.cov_gr_given_y;
  res.inflation = split.inflation;
  res.gdf.var = res.var_g;
  res.ribbon.var = res.var_r;
  return res;
}

}  // namespace enasep
