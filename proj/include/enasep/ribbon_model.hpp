#pragma once

// Scaled ribbon profile modeling. The initial ribbon map is divided by the
// per-sector peak height, a smooth surface in (azimuth, polar offset) is fit
// with an azimuthal resolution no finer than 30 degrees, and each sector is
// projected onto profiles non-increasing in |offset| (pooled adjacent
// violators on each side of the peak), then clipped at zero.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "enasep/bspline.hpp"
#include "enasep/geom.hpp"
#include "enasep/mask.hpp"
#include "enasep/peaks.hpp"

namespace enasep {

/// Weighted isotonic regression (non-decreasing) by pooled adjacent
/// violators. Exact L2 projection; idempotent.
inline std::vector<double> pava_non_decreasing(const std::vector<double>& y,
                                               const std::vector<double>& w = {}) {
  const std::size_t n = y.size();
  std::vector<double> level(n), weight(n);
  std::vector<std::size_t> count(n);
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    level[blocks] = y[i];
    weight[blocks] = w.empty() ? 1.0 : w[i];
    count[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double tw = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / tw;
      weight[blocks - 2] = tw;
      count[blocks - 2] += count[blocks - 1];
      --blocks;
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t b = 0; b < blocks; ++b)
    out.insert(out.end(), count[b], level[b]);
  return out;
}

inline std::vector<double> pava_non_increasing(const std::vector<double>& y,
                                               const std::vector<double>& w = {}) {
  std::vector<double> rev(y.rbegin(), y.rend());
  std::vector<double> wrev;
  if (!w.empty()) wrev.assign(w.rbegin(), w.rend());
  auto fit = pava_non_decreasing(rev, wrev);
  return {fit.rbegin(), fit.rend()};
}

/// Project a sector profile (indexed by pixel offset, offset 0 = peak) onto
/// the unimodal shape: non-decreasing up to the peak, non-increasing after.
/// The peak cell keeps the larger of the two one-sided projections.
inline void project_unimodal(std::vector<double>& prof, std::size_t peak_idx) {
  if (prof.empty()) return;
  peak_idx = std::min(peak_idx, prof.size() - 1);
  std::vector<double> left(prof.begin(), prof.begin() + peak_idx + 1);
  std::vector<double> right(prof.begin() + peak_idx, prof.end());
  left = pava_non_decreasing(left);
  right = pava_non_increasing(right);
  const double peak = std::max(left.back(), right.front());
  for (std::size_t i = 0; i < peak_idx; ++i) prof[i] = left[i];
  for (std::size_t i = 1; i < right.size(); ++i) prof[peak_idx + i] = right[i];
  prof[peak_idx] = peak;
}

/// Scaled ribbon intensity surface on a (sector, pixel offset) lattice.
struct RibbonProfileModel {
  std::vector<int> offsets;          // pixel offsets from the peak row
  std::vector<double> values;        // n_sectors x offsets.size(), sector-major
  std::vector<double> peak_heights;  // per sector, used for unscaling
  std::vector<uint8_t> sector_ok;    // zero-height sectors are flagged off
  double azimuth_scale_deg = 30.0;

  std::size_t n_sectors() const { return peak_heights.size(); }
  double at(std::size_t sector, std::size_t oi) const {
    return values[sector * offsets.size() + oi];
  }
};

/// Scaled surface on the same lattice, before smoothing.
struct ScaledRibbon {
  std::vector<int> offsets;
  std::vector<double> values;     // sector-major
  std::vector<uint8_t> in_mask;   // cell inside the per-sector mask window
  std::vector<double> heights;
  std::vector<uint8_t> sector_ok;
  std::size_t n_offsets() const { return offsets.size(); }
};

/// Divide each sector of the initial ribbon map by that sector's peak
/// height. Sectors with nonpositive height yield all-zero rows and are
/// flagged. The lattice covers the mask's shared offset window plus padding.
inline ScaledRibbon scale_ribbon(const SkyMap& init_ribbon, const RibbonPeaks& peaks,
                                 const RibbonMask& mask) {
  const GridSpec& g = init_ribbon.grid;
  if (peaks.size() != static_cast<std::size_t>(g.n_lon) ||
      mask.n_sectors() != static_cast<std::size_t>(g.n_lon))
    throw std::invalid_argument("scale_ribbon: sector count mismatch");

  ScaledRibbon out;
  const int lo = mask.offset_lo_px - mask.pad_pixels;
  const int hi = mask.offset_hi_px + mask.pad_pixels;
  for (int o = lo; o <= hi; ++o) out.offsets.push_back(o);
  const std::size_t W = out.offsets.size();
  out.values.assign(g.n_lon * W, 0.0);
  out.in_mask.assign(g.n_lon * W, 0);
  out.heights.resize(g.n_lon);
  out.sector_ok.resize(g.n_lon);

  for (int j = 0; j < g.n_lon; ++j) {
    const double h = peaks.peak_height[j];
    out.heights[j] = h;
    out.sector_ok[j] = h > 0.0 && peaks.quality[j] != PeakQuality::Flat;
    const int r_peak =
        std::clamp(static_cast<int>(std::floor(peaks.peak_polar[j] / g.pixel_deg)), 0, g.n_lat - 1);
    for (std::size_t oi = 0; oi < W; ++oi) {
      const int r = r_peak + out.offsets[oi];
      if (r < 0 || r >= g.n_lat) continue;
      const int k = g.n_lat - 1 - r;
      const double polar = 90.0 - g.lat_center(k);
      out.in_mask[j * W + oi] = mask.contains(j, polar) ? 1 : 0;
      if (out.sector_ok[j])
        out.values[j * W + oi] = init_ribbon.rate[g.index(j, k)] / h;
    }
  }
  return out;
}

struct RibbonProfileOptions {
  double azimuth_scale_deg = 30.0;  // finest allowed azimuthal feature scale
  int offset_intervals = 0;         // 0 = one interval per pixel offset
  std::vector<double> lambda_grid;  // empty = default
};

/// Smooth the scaled surface over (azimuth, offset) with a cyclic harmonic
/// basis in azimuth (capped at the configured scale) and a cubic B-spline in
/// offset, then enforce the shape constraints per sector.
inline RibbonProfileModel fit_ribbon_profile(const ScaledRibbon& scaled,
                                             const RibbonPeaks& peaks, const RibbonMask& mask,
                                             const RibbonProfileOptions& opt = {}) {
  const std::size_t J = peaks.size();
  const std::size_t W = scaled.n_offsets();
  if (W == 0) throw std::invalid_argument("fit_ribbon_profile: empty offset window");
  std::size_t n_in_mask = 0;
  for (uint8_t f : scaled.in_mask) n_in_mask += f;
  if (n_in_mask == 0) throw std::invalid_argument("fit_ribbon_profile: empty mask");

  // Azimuthal harmonics: features no finer than azimuth_scale_deg means
  // wavelengths of at least twice the scale.
  const int H = std::max(1, static_cast<int>(std::floor(360.0 / (2.0 * opt.azimuth_scale_deg))));
  const int n_az = 1 + 2 * H;
  const double off_lo = scaled.offsets.front() - 0.5;
  const double off_hi = scaled.offsets.back() + 0.5;
  const int n_int = opt.offset_intervals > 0 ? opt.offset_intervals
                                             : std::max<int>(1, static_cast<int>(W) - 1);
  BSplineBasis off_basis(off_lo, off_hi, n_int);
  const int n_off = off_basis.size();
  const int B = n_az * n_off;

  // Tensor design over in-mask cells of valid sectors; B is small, so the
  // normal equations are kept dense.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(B, B);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(B);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(B);
  double yy = 0.0;
  double n_obs = 0.0;
  std::vector<double> az_basis(n_az);
  for (std::size_t j = 0; j < J; ++j) {
    if (!scaled.sector_ok[j]) continue;
    const double az = peaks.sector_azimuth[j] * kDegToRad;
    az_basis[0] = 1.0;
    for (int h = 1; h <= H; ++h) {
      az_basis[2 * h - 1] = std::cos(h * az);
      az_basis[2 * h] = std::sin(h * az);
    }
    for (std::size_t oi = 0; oi < W; ++oi) {
      if (!scaled.in_mask[j * W + oi]) continue;
      double bo[4];
      int first;
      off_basis.eval(static_cast<double>(scaled.offsets[oi]), bo, first);
      row.setZero();
      for (int a = 0; a < n_az; ++a)
        for (int c = 0; c < 4; ++c) row[a * n_off + first + c] = az_basis[a] * bo[c];
      const double y = scaled.values[j * W + oi];
      A.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
      b.noalias() += y * row;
      yy += y * y;
      n_obs += 1.0;
    }
  }
  A.triangularView<Eigen::Upper>() = A.transpose();

  // Penalties: squared second differences along offset coefficients plus a
  // harmonic ridge (h^4) in azimuth; one lambda chosen by GCV.
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(B, B);
  for (int a = 0; a < n_az; ++a)
    for (int i = 0; i + 2 < n_off; ++i) {
      const double d[3] = {1.0, -2.0, 1.0};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) P(a * n_off + i + p, a * n_off + i + q) += d[p] * d[q];
    }
  for (int h = 1; h <= H; ++h) {
    const double hh = std::pow(static_cast<double>(h), 4) / std::pow(static_cast<double>(H), 4);
    for (int c = 0; c < n_off; ++c) {
      P((2 * h - 1) * n_off + c, (2 * h - 1) * n_off + c) += hh;
      P((2 * h) * n_off + c, (2 * h) * n_off + c) += hh;
    }
  }

  std::vector<double> grid = opt.lambda_grid;
  if (grid.empty())
    for (double l = 1e-6; l <= 1e4 + 1.0; l *= 10.0) grid.push_back(l);
  const double scale = A.trace() / B;
  Eigen::VectorXd best_c;
  double best_gcv = std::numeric_limits<double>::infinity();
  for (double lam : grid) {
    Eigen::MatrixXd Areg = A + (lam * scale) * P;
    Areg.diagonal().array() += 1e-10 * scale;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Areg);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd c = ldlt.solve(b);
    const double rss = std::max(0.0, yy - 2.0 * c.dot(b) + c.dot(A * c));
    const double edf = ldlt.solve(A).trace();
    const double denom = std::max(n_obs - edf, 1e-6);
    const double gcv = n_obs * rss / (denom * denom);
    if (gcv < best_gcv) {
      best_gcv = gcv;
      best_c = c;
    }
  }
  if (!std::isfinite(best_gcv))
    throw IllConditioned("fit_ribbon_profile: no usable smoothing parameter");

  RibbonProfileModel model;
  model.offsets = scaled.offsets;
  model.peak_heights = scaled.heights;
  model.sector_ok = scaled.sector_ok;
  model.azimuth_scale_deg = opt.azimuth_scale_deg;
  model.values.assign(J * W, 0.0);

  // peak cell index within the offset lattice
  std::size_t peak_idx = 0;
  for (std::size_t oi = 0; oi < W; ++oi)
    if (scaled.offsets[oi] == 0) peak_idx = oi;

  std::vector<double> prof(W);
  for (std::size_t j = 0; j < J; ++j) {
    if (!scaled.sector_ok[j]) continue;  // zero row stays zero
    const double az = peaks.sector_azimuth[j] * kDegToRad;
    az_basis[0] = 1.0;
    for (int h = 1; h <= H; ++h) {
      az_basis[2 * h - 1] = std::cos(h * az);
      az_basis[2 * h] = std::sin(h * az);
    }
    for (std::size_t oi = 0; oi < W; ++oi) {
      double bo[4];
      int first;
      off_basis.eval(static_cast<double>(scaled.offsets[oi]), bo, first);
      double v = 0.0;
      for (int a = 0; a < n_az; ++a)
        for (int c = 0; c < 4; ++c)
          v += best_c[a * n_off + first + c] * az_basis[a] * bo[c];
      prof[oi] = v;
    }
    project_unimodal(prof, peak_idx);
    for (std::size_t oi = 0; oi < W; ++oi)
      model.values[j * W + oi] = std::max(prof[oi], 0.0);
  }
  return model;
}

/// Multiply the fitted scaled profile back by the per-sector peak heights,
/// producing the fitted ribbon map (zero outside the mask window and in
/// flagged sectors).
inline SkyMap unscale_ribbon(const RibbonProfileModel& model, const RibbonPeaks& peaks,
                             const SkyMap& like) {
  const GridSpec& g = like.grid;
  SkyMap out = SkyMap::zeros(g, like.frame);
  const std::size_t W = model.offsets.size();
  for (int j = 0; j < g.n_lon; ++j) {
    if (!model.sector_ok[j]) continue;
    const int r_peak =
        std::clamp(static_cast<int>(std::floor(peaks.peak_polar[j] / g.pixel_deg)), 0, g.n_lat - 1);
    for (std::size_t oi = 0; oi < W; ++oi) {
      const int r = r_peak + model.offsets[oi];
      if (r < 0 || r >= g.n_lat) continue;
      const int k = g.n_lat - 1 - r;
      out.rate[g.index(j, k)] = model.at(j, oi) * model.peak_heights[j];
    }
  }
  return out;
}

}  // namespace enasep
