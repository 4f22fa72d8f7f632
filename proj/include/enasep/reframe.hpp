#pragma once

// Micropixel reframing: resample a pixelated sky map into a new rotational
// frame by averaging nearest-pixel lookups at micro x micro midpoints of
// each target pixel. The map is treated as piecewise constant.

#include <cstdint>
#include <vector>

#include "enasep/geom.hpp"
#include "enasep/parallel.hpp"

namespace enasep {

/// Precomputed sparse resampling operator from one frame to another over a
/// fixed grid. Row i of the CSR structure lists the source pixels hit by
/// target pixel i's micropixel midpoints, with multiplicities.
class ReframeOperator {
 public:
  ReframeOperator(const GridSpec& grid, const FrameSpec& source, const FrameSpec& target,
                  int micro = 15)
      : grid_(grid), source_(source), target_(target), micro_(micro) {
    if (micro < 1) throw std::invalid_argument("ReframeOperator: micro must be >= 1");
    grid.validate();
    build();
  }

  const GridSpec& grid() const { return grid_; }
  const FrameSpec& source() const { return source_; }
  const FrameSpec& target() const { return target_; }
  int micro() const { return micro_; }

  /// Average the source values over each target pixel's midpoints.
  /// The sum is centered on the first source value so a constant map is
  /// reproduced exactly.
  std::vector<double> apply(const std::vector<double>& src) const {
    if (src.size() != grid_.size())
      throw std::invalid_argument("ReframeOperator::apply: size mismatch");
    const double inv = 1.0 / (static_cast<double>(micro_) * micro_);
    std::vector<double> out(grid_.size());
    parallel_for(grid_.size(), [&](std::size_t i) {
      const std::size_t b = row_ptr_[i], e = row_ptr_[i + 1];
      const double v0 = src[cols_[b]];
      double acc = 0.0;
      for (std::size_t s = b; s < e; ++s) acc += counts_[s] * (src[cols_[s]] - v0);
      out[i] = v0 + acc * inv;
    });
    return out;
  }

  SkyMap apply(const SkyMap& map) const {
    if (!(map.grid == grid_) || !(map.frame == source_))
      throw std::invalid_argument("ReframeOperator::apply: map grid/frame mismatch");
    SkyMap out;
    out.grid = grid_;
    out.frame = target_;
    out.rate = apply(map.rate);
    out.var = apply(map.var);
    for (double& r : out.rate)
      if (r < 0.0) r = 0.0;
    for (double& v : out.var)
      if (v < 0.0) v = 0.0;
    return out;
  }

 private:
  void build() {
    // target-frame direction -> ecliptic -> source-frame direction
    const Mat3 M = rotation_matrix(source_).mul(rotation_matrix(target_).transpose());
    const int J = grid_.n_lon, K = grid_.n_lat, m = micro_;
    const double step = grid_.pixel_deg / m;

    // Trig tables for the micro-lattice of midpoint lon/lat values.
    std::vector<double> clon(J * m), slon(J * m), clat(K * m), slat(K * m);
    for (int a = 0; a < J * m; ++a) {
      const double lon = (a + 0.5) * step * kDegToRad;
      clon[a] = std::cos(lon);
      slon[a] = std::sin(lon);
    }
    for (int b = 0; b < K * m; ++b) {
      const double lat = (-90.0 + (b + 0.5) * step) * kDegToRad;
      clat[b] = std::cos(lat);
      slat[b] = std::sin(lat);
    }

    row_ptr_.assign(grid_.size() + 1, 0);
    std::vector<std::vector<std::pair<uint32_t, uint16_t>>> rows(grid_.size());
    parallel_for(grid_.size(), [&](std::size_t i) {
      const int j = static_cast<int>(i) / K;
      const int k = static_cast<int>(i) % K;
      // first midpoint defines the centering pixel; keep insertion order
      auto& row = rows[i];
      row.reserve(8);
      for (int mj = 0; mj < m; ++mj) {
        const int a = j * m + mj;
        for (int mk = 0; mk < m; ++mk) {
          const int b = k * m + mk;
          const UnitVec v{clat[b] * clon[a], clat[b] * slon[a], slat[b]};
          const UnitVec s = M.apply(v);
          const LonLat ll = vec_to_latlon(s);
          const uint32_t src = static_cast<uint32_t>(grid_.pixel_of(ll.lon, ll.lat));
          bool found = false;
          for (auto& [c, n] : row)
            if (c == src) {
              ++n;
              found = true;
              break;
            }
          if (!found) row.emplace_back(src, 1);
        }
      }
    });
    std::size_t nnz = 0;
    for (auto& r : rows) nnz += r.size();
    cols_.reserve(nnz);
    counts_.reserve(nnz);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      for (auto& [c, n] : rows[i]) {
        cols_.push_back(c);
        counts_.push_back(n);
      }
      row_ptr_[i + 1] = cols_.size();
    }
  }

  GridSpec grid_;
  FrameSpec source_;
  FrameSpec target_;
  int micro_;
  std::vector<std::size_t> row_ptr_;
  std::vector<uint32_t> cols_;
  std::vector<uint16_t> counts_;
};

/// One-shot reframing. Identical source and target frames return the input
/// unchanged (bit for bit).
inline SkyMap reframe_map(const SkyMap& map, const FrameSpec& target, int micro = 15) {
  if (map.frame == target) return map;
  return ReframeOperator(map.grid, map.frame, target, micro).apply(map);
}

}  // namespace enasep
