#pragma once

// Fixed-scale grayscale rendering of sky maps to binary PGM (P5). Rates are
// clamped to [lo, hi] and mapped linearly to 0..255 with round-half-away
// rounding (std::lround), one image pixel per map pixel, azimuth on x and
// the highest latitude on the top row.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"

namespace enasep {

inline std::vector<uint8_t> heatmap_bytes(const SkyMap& map, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("render_heatmap: need lo < hi");
  const GridSpec& g = map.grid;
  std::vector<uint8_t> px(g.size());
  std::size_t n = 0;
  for (int k = g.n_lat - 1; k >= 0; --k) {
    for (int j = 0; j < g.n_lon; ++j) {
      const double v = std::clamp((map.rate[g.index(j, k)] - lo) / (hi - lo), 0.0, 1.0);
      px[n++] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  }
  return px;
}

inline void render_heatmap(const SkyMap& map, double lo, double hi, const std::string& path) {
  const auto px = heatmap_bytes(map, lo, hi);
  std::ostringstream header;
  header << "P5\n" << map.grid.n_lon << ' ' << map.grid.n_lat << "\n255\n";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("render_heatmap: cannot open " + path);
  f << header.str();
  f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!f) throw IoFailure("render_heatmap: write failed for " + path);
}

}  // namespace enasep
