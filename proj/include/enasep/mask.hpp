#pragma once

// Ribbon mask estimation. The map is reorganized with azimuth on x and
// peak-relative polar offset (rounded to pixels) on y, Sobel gradient
// magnitudes are computed, and the mask window is the narrowest offset
// interval capturing all of the top u-th percentile of gradients within v
// degrees of the peak, padded by two pixels on each side. The same offset
// window is shared by all sectors and recentered on each sector's peak.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"
#include "enasep/peaks.hpp"

namespace enasep {

struct Image2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Image2D() = default;
  Image2D(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

/// 3x3 Sobel gradient magnitude sqrt(Gx^2 + Gy^2). Row boundaries replicate;
/// columns wrap periodically when wrap_cols is set (azimuth), else replicate.
inline Image2D sobel(const Image2D& img, bool wrap_cols) {
  if (img.rows < 3 || img.cols < 3)
    throw std::invalid_argument("sobel: image must be at least 3x3");
  Image2D out(img.rows, img.cols);
  auto sample = [&](int r, int c) {
    r = std::clamp(r, 0, img.rows - 1);
    if (wrap_cols)
      c = (c % img.cols + img.cols) % img.cols;
    else
      c = std::clamp(c, 0, img.cols - 1);
    return img.at(r, c);
  };
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double tl = sample(r - 1, c - 1), tm = sample(r - 1, c), tr = sample(r - 1, c + 1);
      const double ml = sample(r, c - 1), mr = sample(r, c + 1);
      const double bl = sample(r + 1, c - 1), bm = sample(r + 1, c), br = sample(r + 1, c + 1);
      const double gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double gy = (bl + 2.0 * bm + br) - (tl + 2.0 * tm + tr);
      out.at(r, c) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

struct MaskParams {
  double u = 95.0;      // gradient percentile, (50, 100)
  double v = 15.0;      // polar half-window around the peak, degrees
  int pad_pixels = 2;

  void validate() const {
    if (!(u > 50.0 && u < 100.0))
      throw std::invalid_argument("MaskParams: u must be in (50, 100)");
    if (!(v > 0.0 && v <= 45.0))
      throw std::invalid_argument("MaskParams: v must be in (0, 45]");
    if (pad_pixels < 0) throw std::invalid_argument("MaskParams: pad_pixels must be >= 0");
  }
};

/// Per-sector polar window around the ribbon peaks. The underlying offset
/// window (in pixels relative to the peak row) is shared across sectors.
struct RibbonMask {
  std::vector<double> lower_polar;  // per sector, degrees
  std::vector<double> upper_polar;
  int offset_lo_px = 0;  // shared window before padding
  int offset_hi_px = 0;
  int pad_pixels = 0;

  std::size_t n_sectors() const { return lower_polar.size(); }

  bool contains(int sector, double polar_deg) const {
    return polar_deg >= lower_polar[sector] && polar_deg <= upper_polar[sector];
  }

  /// Per-pixel inclusion flags for a map on the matching grid.
  std::vector<uint8_t> pixel_flags(const GridSpec& g) const {
    if (lower_polar.size() != static_cast<std::size_t>(g.n_lon))
      throw std::invalid_argument("RibbonMask: sector count mismatch");
    std::vector<uint8_t> flags(g.size(), 0);
    for (int j = 0; j < g.n_lon; ++j)
      for (int k = 0; k < g.n_lat; ++k)
        if (contains(j, 90.0 - g.lat_center(k))) flags[g.index(j, k)] = 1;
    return flags;
  }

  std::size_t count(const GridSpec& g) const {
    const auto f = pixel_flags(g);
    return static_cast<std::size_t>(std::count(f.begin(), f.end(), uint8_t{1}));
  }
};

namespace detail {

/// Linear-interpolated percentile (R type 7) of unsorted values.
inline double percentile(std::vector<double> vals, double pct) {
  if (vals.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(vals.begin(), vals.end());
  const double h = (pct / 100.0) * (static_cast<double>(vals.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, vals.size() - 1);
  return vals[lo] + (h - lo) * (vals[hi] - vals[lo]);
}

}  // namespace detail

/// Build the ribbon mask for a map in the working frame given smoothed
/// peaks. Throws EmptyGradientSet when no gradient cells lie within v
/// degrees of the peaks.
inline RibbonMask build_mask(const SkyMap& map, const RibbonPeaks& peaks,
                             const MaskParams& params) {
  params.validate();
  const GridSpec& g = map.grid;
  if (peaks.size() != static_cast<std::size_t>(g.n_lon))
    throw std::invalid_argument("build_mask: peaks do not match grid");

  const double dpx = g.pixel_deg;
  const int half = g.n_lat;  // cover the full polar range in offset space

  // Offset image: row o+half holds the rate at (peak row + o) per sector,
  // replicating rows that fall off the polar range.
  Image2D img(2 * half + 1, g.n_lon);
  std::vector<uint8_t> row_valid(static_cast<std::size_t>(2 * half + 1) * g.n_lon, 0);
  for (int j = 0; j < g.n_lon; ++j) {
    // polar row index r counts from the pole: polar center = (r + 0.5) * dpx
    const int r_peak = std::clamp(
        static_cast<int>(std::floor(peaks.peak_polar[j] / dpx)), 0, g.n_lat - 1);
    for (int o = -half; o <= half; ++o) {
      const int r = std::clamp(r_peak + o, 0, g.n_lat - 1);
      const int k = g.n_lat - 1 - r;  // polar row -> latitude bin
      img.at(o + half, j) = map.rate[g.index(j, k)];
      if (r_peak + o >= 0 && r_peak + o < g.n_lat)
        row_valid[static_cast<std::size_t>(o + half) * g.n_lon + j] = 1;
    }
  }

  const Image2D grad = sobel(img, /*wrap_cols=*/true);

  // The percentile threshold is taken over every valid cell of the offset
  // image, so it calibrates ribbon-flank gradients against the background;
  // only cells within v degrees of the peak can then claim the window.
  std::vector<double> population;
  population.reserve(row_valid.size());
  for (std::size_t c = 0; c < row_valid.size(); ++c)
    if (row_valid[c]) population.push_back(grad.v[c]);
  const int v_px = static_cast<int>(std::floor(params.v / dpx));
  bool strip_nonempty = false;
  for (int o = -v_px; o <= v_px && !strip_nonempty; ++o)
    for (int j = 0; j < g.n_lon; ++j)
      if (row_valid[static_cast<std::size_t>(o + half) * g.n_lon + j]) {
        strip_nonempty = true;
        break;
      }
  if (!strip_nonempty) throw EmptyGradientSet("build_mask: no gradients within v degrees");

  const double q = detail::percentile(population, params.u);
  int lo_px = 0, hi_px = 0;
  bool any = false;
  for (int o = -v_px; o <= v_px; ++o) {
    for (int j = 0; j < g.n_lon; ++j) {
      if (!row_valid[static_cast<std::size_t>(o + half) * g.n_lon + j]) continue;
      const double gr = grad.at(o + half, j);
      if (gr >= q && gr > 0.0) {
        if (!any) {
          lo_px = hi_px = o;
          any = true;
        } else {
          lo_px = std::min(lo_px, o);
          hi_px = std::max(hi_px, o);
        }
      }
    }
  }
  // The window always includes the peak row; with no gradient signal at all
  // it collapses to the peak row alone.
  lo_px = std::min(lo_px, 0);
  hi_px = std::max(hi_px, 0);

  RibbonMask mask;
  mask.offset_lo_px = lo_px;
  mask.offset_hi_px = hi_px;
  mask.pad_pixels = params.pad_pixels;
  mask.lower_polar.resize(g.n_lon);
  mask.upper_polar.resize(g.n_lon);
  for (int j = 0; j < g.n_lon; ++j) {
    mask.lower_polar[j] =
        std::max(0.0, peaks.peak_polar[j] + (lo_px - params.pad_pixels) * dpx);
    mask.upper_polar[j] =
        std::min(180.0, peaks.peak_polar[j] + (hi_px + params.pad_pixels) * dpx);
  }
  return mask;
}

}  // namespace enasep
