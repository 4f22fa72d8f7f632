#pragma once

// Map CSV format. Line 1 is the header carrying grid and frame:
//   lon_bins,lat_bins,pixel_deg,frame_lon,frame_lat,frame_roll
// followed by one row per pixel in longitude-major order:
//   lon_center,lat_center,rate,var
// Numbers are written as shortest round-trip decimals, so save/load is
// lossless and byte-stable. Extra per-row columns are allowed on read and
// preserved for callers that ask for them.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"

namespace enasep {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc())
    throw IoFailure("map csv: cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Write a map, optionally with named extra per-pixel columns appended to
/// every row (used by the separation outputs for var_g,var_r,cov_gr).
inline void write_map_csv(const SkyMap& map, const std::string& path,
                          const std::vector<std::string>& extra_names = {},
                          const std::vector<const std::vector<double>*>& extra_cols = {}) {
  if (extra_names.size() != extra_cols.size())
    throw std::invalid_argument("write_map_csv: extra column mismatch");
  for (const auto* c : extra_cols)
    if (c->size() != map.grid.size())
      throw std::invalid_argument("write_map_csv: extra column length mismatch");
  std::ostringstream os;
  os << map.grid.n_lon << ',' << map.grid.n_lat << ',' << format_double(map.grid.pixel_deg)
     << ',' << format_double(map.frame.center_lon) << ',' << format_double(map.frame.center_lat)
     << ',' << format_double(map.frame.roll) << '\n';
  for (int j = 0; j < map.grid.n_lon; ++j) {
    for (int k = 0; k < map.grid.n_lat; ++k) {
      const std::size_t i = map.grid.index(j, k);
      os << format_double(map.grid.lon_center(j)) << ',' << format_double(map.grid.lat_center(k))
         << ',' << format_double(map.rate[i]) << ',' << format_double(map.var[i]);
      for (const auto* c : extra_cols) os << ',' << format_double((*c)[i]);
      os << '\n';
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for write: " + path);
  f << os.str();
  if (!f) throw IoFailure("write failed: " + path);
}

struct MapCsv {
  SkyMap map;
  std::vector<std::vector<double>> extra;  // columns beyond var, in file order
};

inline MapCsv read_map_csv_full(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for read: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoFailure("empty map file: " + path);
  auto head = split_csv(line);
  if (head.size() != 6) throw IoFailure("map csv: header must have 6 fields: " + path);

  MapCsv out;
  SkyMap& map = out.map;
  map.grid.n_lon = static_cast<int>(parse_double(head[0]));
  map.grid.n_lat = static_cast<int>(parse_double(head[1]));
  map.grid.pixel_deg = parse_double(head[2]);
  map.grid.validate();
  map.frame = FrameSpec{parse_double(head[3]), parse_double(head[4]), parse_double(head[5])};

  const std::size_t n = map.grid.size();
  map.rate.resize(n);
  map.var.resize(n);
  std::size_t row = 0;
  std::size_t n_extra = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (row >= n) throw IoFailure("map csv: more rows than pixels: " + path);
    auto fields = split_csv(line);
    if (fields.size() < 4) throw IoFailure("map csv: row needs at least 4 fields: " + path);
    if (row == 0) {
      n_extra = fields.size() - 4;
      out.extra.assign(n_extra, std::vector<double>(n));
    } else if (fields.size() - 4 != n_extra) {
      throw IoFailure("map csv: inconsistent column count: " + path);
    }
    // rows are in longitude-major order; lon/lat columns are descriptive
    map.rate[row] = parse_double(fields[2]);
    map.var[row] = parse_double(fields[3]);
    for (std::size_t c = 0; c < n_extra; ++c) out.extra[c][row] = parse_double(fields[4 + c]);
    ++row;
  }
  if (row != n) throw IoFailure("map csv: missing pixel rows: " + path);
  map.validate();
  return out;
}

inline SkyMap read_map_csv(const std::string& path) { return read_map_csv_full(path).map; }

}  // namespace enasep
