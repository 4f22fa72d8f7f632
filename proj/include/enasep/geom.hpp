#pragma once

// Core spherical grid types: lat/lon pixel grids, rotational frames, unit
// vectors, and the conversions between them. Everything here is a plain
// value type; all functions are pure.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace enasep {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Wrap a longitude in degrees into [0, 360).
inline double wrap_lon(double lon_deg) {
  double w = std::fmod(lon_deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w = 0.0;  // fmod can return 360 - eps rounded up
  return w;
}

struct LonLat {
  double lon = 0.0;  // degrees, [0, 360)
  double lat = 0.0;  // degrees, [-90, 90]
};

/// Cartesian direction on the unit sphere.
struct UnitVec {
  double x = 0.0, y = 0.0, z = 1.0;

  double dot(const UnitVec& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  UnitVec normalized() const {
    const double n = norm();
    if (n <= 0.0) throw std::invalid_argument("UnitVec: zero vector");
    return {x / n, y / n, z / n};
  }
  UnitVec cross(const UnitVec& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  UnitVec operator-() const { return {-x, -y, -z}; }
};

/// lon/lat in degrees -> unit vector. lat is clamped to [-90, 90]; the
/// poles map exactly to (0, 0, +/-1).
inline UnitVec latlon_to_vec(double lon_deg, double lat_deg) {
  const double lat = std::clamp(lat_deg, -90.0, 90.0);
  if (lat == 90.0) return {0.0, 0.0, 1.0};
  if (lat == -90.0) return {0.0, 0.0, -1.0};
  const double lon = wrap_lon(lon_deg) * kDegToRad;
  const double cl = std::cos(lat * kDegToRad);
  return {cl * std::cos(lon), cl * std::sin(lon), std::sin(lat * kDegToRad)};
}

/// Unit vector -> lon/lat in degrees. At the poles longitude is 0.
inline LonLat vec_to_latlon(const UnitVec& v) {
  const double z = std::clamp(v.z, -1.0, 1.0);
  const double lat = std::asin(z) * kRadToDeg;
  if (v.x == 0.0 && v.y == 0.0) return {0.0, lat};
  return {wrap_lon(std::atan2(v.y, v.x) * kRadToDeg), lat};
}

/// Great-circle separation of two lon/lat points, in degrees. atan2 of the
/// cross and dot products is stable at both ends of the range.
inline double angular_distance_deg(const LonLat& a, const LonLat& b) {
  const UnitVec va = latlon_to_vec(a.lon, a.lat);
  const UnitVec vb = latlon_to_vec(b.lon, b.lat);
  const UnitVec cr = va.cross(vb);
  return std::atan2(cr.norm(), va.dot(vb)) * kRadToDeg;
}

/// Point diametrically opposite (lon, lat).
inline LonLat antipode(const LonLat& p) {
  return {wrap_lon(p.lon + 180.0), -p.lat};
}

/// 3x3 rotation matrix, row-major.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }

  UnitVec apply(const UnitVec& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transpose() const {
    return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }
  Mat3 mul(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }
};

// Frame (passive) rotations about z and y.
inline Mat3 rot_z_frame(double deg) {
  const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
  return {{c, s, 0, -s, c, 0, 0, 0, 1}};
}
inline Mat3 rot_y_frame(double deg) {
  const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
  return {{c, 0, -s, 0, 1, 0, s, 0, c}};
}

/// A rotational frame on the sphere. The frame's rotation maps base-frame
/// (ecliptic) directions to frame directions and carries the frame center
/// to the north pole (0, 0, 1). Convention: z by center_lon, then y by
/// (90 - center_lat), then z by roll.
struct FrameSpec {
  double center_lon = 0.0;  // degrees, [0, 360)
  double center_lat = 90.0; // degrees, [-90, 90]
  double roll = 0.0;        // degrees, [0, 360); azimuthal origin

  static FrameSpec base() { return {0.0, 90.0, 0.0}; }

  bool operator==(const FrameSpec& o) const {
    return center_lon == o.center_lon && center_lat == o.center_lat && roll == o.roll;
  }
};

inline FrameSpec make_rotation(double center_lon, double center_lat, double roll = 0.0) {
  if (!(center_lat >= -90.0 && center_lat <= 90.0))
    throw std::invalid_argument("make_rotation: latitude out of range");
  return {wrap_lon(center_lon), center_lat, wrap_lon(roll)};
}

inline Mat3 rotation_matrix(const FrameSpec& f) {
  return rot_z_frame(f.roll).mul(rot_y_frame(90.0 - f.center_lat)).mul(rot_z_frame(f.center_lon));
}

/// Regular lat/lon pixelization: n_lon bins of pixel_deg degrees covering
/// [0, 360) and n_lat bins covering [-90, 90]. Pixel vectors are stored
/// longitude-major: index = lon_bin * n_lat + lat_bin.
struct GridSpec {
  int n_lon = 0;
  int n_lat = 0;
  double pixel_deg = 0.0;

  static GridSpec from_pixel_deg(double deg) {
    GridSpec g;
    g.pixel_deg = deg;
    g.n_lon = static_cast<int>(std::lround(360.0 / deg));
    g.n_lat = static_cast<int>(std::lround(180.0 / deg));
    g.validate();
    return g;
  }

  void validate() const {
    if (n_lon < 4 || n_lat < 4)
      throw std::invalid_argument("GridSpec: need at least 4 bins per dimension");
    if (std::abs(n_lon * pixel_deg - 360.0) > 1e-9 || std::abs(n_lat * pixel_deg - 180.0) > 1e-9)
      throw std::invalid_argument("GridSpec: pixel_deg inconsistent with bin counts");
  }

  std::size_t size() const { return static_cast<std::size_t>(n_lon) * n_lat; }
  double lon_center(int j) const { return (j + 0.5) * pixel_deg; }
  double lat_center(int k) const { return -90.0 + (k + 0.5) * pixel_deg; }
  std::size_t index(int j, int k) const { return static_cast<std::size_t>(j) * n_lat + k; }

  int lon_bin(double lon_deg) const {
    int j = static_cast<int>(std::floor(wrap_lon(lon_deg) / pixel_deg));
    return std::clamp(j, 0, n_lon - 1);
  }
  int lat_bin(double lat_deg) const {
    int k = static_cast<int>(std::floor((std::clamp(lat_deg, -90.0, 90.0) + 90.0) / pixel_deg));
    return std::clamp(k, 0, n_lat - 1);
  }
  std::size_t pixel_of(double lon_deg, double lat_deg) const {
    return index(lon_bin(lon_deg), lat_bin(lat_deg));
  }

  bool operator==(const GridSpec& o) const {
    return n_lon == o.n_lon && n_lat == o.n_lat && pixel_deg == o.pixel_deg;
  }
};

/// Gridded sky map: per-pixel ENA rates (1/s) and rate variances (1/s^2),
/// both nonnegative, in longitude-major pixel order.
struct SkyMap {
  GridSpec grid;
  FrameSpec frame;
  std::vector<double> rate;
  std::vector<double> var;

  void validate() const {
    grid.validate();
    if (rate.size() != grid.size() || var.size() != grid.size())
      throw std::invalid_argument("SkyMap: vector lengths do not match grid");
    for (double r : rate)
      if (!(r >= 0.0)) throw std::invalid_argument("SkyMap: negative or NaN rate");
    for (double v : var)
      if (!(v >= 0.0)) throw std::invalid_argument("SkyMap: negative or NaN variance");
  }

  static SkyMap zeros(const GridSpec& g, const FrameSpec& f) {
    SkyMap m;
    m.grid = g;
    m.frame = f;
    m.rate.assign(g.size(), 0.0);
    m.var.assign(g.size(), 0.0);
    return m;
  }
};

/// Unit vectors of all pixel centers of a grid, longitude-major.
inline std::vector<UnitVec> pixel_directions(const GridSpec& g) {
  std::vector<UnitVec> out(g.size());
  for (int j = 0; j < g.n_lon; ++j)
    for (int k = 0; k < g.n_lat; ++k)
      out[g.index(j, k)] = latlon_to_vec(g.lon_center(j), g.lat_center(k));
  return out;
}

}  // namespace enasep
