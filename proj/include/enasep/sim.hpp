#pragma once

// Synthetic truth generation for the three validation scenarios:
//   S1  weak scattering      - skewed ribbon cross-section (heavier tail
//                              toward the ribbon center)
//   S2  spatial retention    - Gaussian core with a one-sided shoulder
//   S3  smoothly varying     - cross-section morphs between the two shapes
//                              around the ribbon, with bright knots and a
//                              high-flux disc added to the background flux
// The cross-section shapes are parametric stand-ins chosen to match the
// described morphology (skewness sign, shoulder, knots); all parameters are
// configurable.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "enasep/geom.hpp"
#include "enasep/rng.hpp"

namespace enasep {

enum class ScenarioId { S1, S2, S3 };

inline std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::S1: return "s1";
    case ScenarioId::S2: return "s2";
    default: return "s3";
  }
}

enum class NoiseMode { Ideal, Noisy, Noisy3x };

inline std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::Ideal: return "ideal";
    case NoiseMode::Noisy: return "noisy";
    default: return "noisy3x";
  }
}

/// Multiplicative dimming over an azimuth arc [az_lo, az_hi] in the ribbon
/// center frame; factor in [0, 1].
struct DimArc {
  double az_lo = 0.0;
  double az_hi = 0.0;
  double factor = 1.0;
};

/// Concentrated brightness knot on the ribbon at a given azimuth.
struct RibbonKnot {
  double azimuth = 0.0;   // degrees
  double gain = 0.0;      // extra amplitude fraction at the knot
  double width = 8.0;     // Gaussian width in azimuth degrees
};

struct SimScenario {
  ScenarioId id = ScenarioId::S1;

  // Ribbon geometry: exactly circular, radius measured from the center. The
  // default radius lands on a pixel-row center of both the 2 and 6 degree
  // grids, so the pixelized peak sits at the radius for any azimuth.
  LonLat ribbon_center{221.5, 39.0};
  double ribbon_radius = 75.0;     // polar degrees from center, in (0, 90)
  double band_half_width = 20.0;   // truth is exactly 0 beyond this offset

  // Per-azimuth peak amplitude: base * (1 + mod_depth cos(az - mod_phase))
  // * dimming * knot gain.
  double base_amplitude = 0.18;    // ENAs/s
  double amp_mod_depth = 0.25;
  double amp_mod_phase = 30.0;     // degrees
  std::vector<DimArc> dimming{{140.0, 170.0, 0.65}, {300.0, 330.0, 0.8}};
  std::vector<RibbonKnot> knots;   // populated for S3

  // Cross-section parameters. S1: two-sided Gaussian with sigma_in (toward
  // the center, offset < 0) wider than sigma_out. S2: Gaussian core plus an
  // inward shoulder bump.
  double s1_sigma_in = 5.5;
  double s1_sigma_out = 3.5;
  double s2_core_sigma = 4.0;
  double s2_shoulder_height = 0.45;
  double s2_shoulder_offset = -7.0;
  double s2_shoulder_sigma = 3.0;

  // Background (globally distributed) flux stand-in: floor + nose bump +
  // low-latitude band, plus an optional high-flux disc (S3).
  double gdf_floor = 0.05;
  double gdf_nose_amp = 0.15;
  LonLat gdf_nose{255.0, 5.0};
  double gdf_nose_kappa = 4.0;
  double gdf_band_amp = 0.05;
  double gdf_band_sigma = 30.0;    // degrees of latitude
  bool disc_enabled = false;
  LonLat disc_center{100.0, -20.0};
  double disc_radius = 10.0;       // degrees
  double disc_enhancement = 0.2;   // ENAs/s added inside the disc
  double disc_edge_soft = 1.0;     // degrees

  // Baseline variance model for the observed map: var = a + b * rate.
  double var_a = 1e-6;
  double var_b = 5e-4;

  uint64_t seed = 20230301;

  void validate() const {
    if (!(ribbon_radius > 0.0 && ribbon_radius < 90.0))
      throw std::invalid_argument("SimScenario: ribbon_radius must be in (0, 90)");
    if (!(base_amplitude >= 0.0))
      throw std::invalid_argument("SimScenario: amplitude must be >= 0");
    if (!(band_half_width > 0.0))
      throw std::invalid_argument("SimScenario: band_half_width must be > 0");
    for (const auto& d : dimming)
      if (!(d.factor >= 0.0 && d.factor <= 1.0))
        throw std::invalid_argument("SimScenario: dim factor must be in [0, 1]");
  }

  static SimScenario preset(ScenarioId id) {
    SimScenario s;
    s.id = id;
    if (id == ScenarioId::S3) {
      s.knots = {{60.0, 0.8, 8.0}, {200.0, 0.6, 6.0}, {310.0, 1.0, 10.0}};
      s.disc_enabled = true;
    }
    return s;
  }

  /// Peak amplitude at an azimuth of the ribbon-center frame.
  double amplitude_at(double azimuth_deg) const {
    const double az = wrap_lon(azimuth_deg);
    double a = base_amplitude * (1.0 + amp_mod_depth * std::cos((az - amp_mod_phase) * kDegToRad));
    for (const auto& d : dimming)
      if (az >= d.az_lo && az <= d.az_hi) a *= d.factor;
    if (id == ScenarioId::S3) {
      for (const auto& kn : knots) {
        double dd = std::fabs(az - kn.azimuth);
        dd = std::min(dd, 360.0 - dd);
        a *= 1.0 + kn.gain * std::exp(-dd * dd / (2.0 * kn.width * kn.width));
      }
    }
    return std::max(a, 0.0);
  }

  /// Scaled cross-section value at polar offset from the peak (degrees,
  /// negative = toward the ribbon center). Maximum 1 at offset 0; exactly 0
  /// beyond band_half_width.
  double profile_at(double offset_deg, double azimuth_deg) const {
    if (std::fabs(offset_deg) > band_half_width) return 0.0;
    switch (id) {
      case ScenarioId::S1: return s1_shape(offset_deg);
      case ScenarioId::S2: return s2_shape(offset_deg);
      default: {
        const double w = 0.5 * (1.0 + std::cos(azimuth_deg * kDegToRad));
        return (1.0 - w) * s1_shape(offset_deg) + w * s2_shape(offset_deg);
      }
    }
  }

  double s1_shape(double d) const {
    const double s = d < 0.0 ? s1_sigma_in : s1_sigma_out;
    return std::exp(-d * d / (2.0 * s * s));
  }
  double s2_shape(double d) const {
    const double core = std::exp(-d * d / (2.0 * s2_core_sigma * s2_core_sigma));
    const double off = d - s2_shoulder_offset;
    const double sh = s2_shoulder_height *
                      std::exp(-off * off / (2.0 * s2_shoulder_sigma * s2_shoulder_sigma));
    return core + sh;
  }
};

struct TruthPair {
  SkyMap gdf_truth;
  SkyMap ribbon_truth;
  SkyMap observed;
  SimScenario scenario;
};

/// Background flux truth, evaluated pointwise at pixel centers.
inline SkyMap gen_gdf(const SimScenario& sc, const GridSpec& grid) {
  sc.validate();
  SkyMap m = SkyMap::zeros(grid, FrameSpec::base());
  const UnitVec nose = latlon_to_vec(sc.gdf_nose.lon, sc.gdf_nose.lat);
  const UnitVec disc = latlon_to_vec(sc.disc_center.lon, sc.disc_center.lat);
  for (int j = 0; j < grid.n_lon; ++j) {
    for (int k = 0; k < grid.n_lat; ++k) {
      const double lat = grid.lat_center(k);
      const UnitVec v = latlon_to_vec(grid.lon_center(j), lat);
      double r = sc.gdf_floor;
      r += sc.gdf_nose_amp * std::exp(sc.gdf_nose_kappa * (v.dot(nose) - 1.0));
      r += sc.gdf_band_amp * std::exp(-lat * lat / (2.0 * sc.gdf_band_sigma * sc.gdf_band_sigma));
      if (sc.disc_enabled) {
        const double gamma = std::acos(std::clamp(v.dot(disc), -1.0, 1.0)) * kRadToDeg;
        r += sc.disc_enhancement /
             (1.0 + std::exp((gamma - sc.disc_radius) / sc.disc_edge_soft));
      }
      m.rate[grid.index(j, k)] = r;
    }
  }
  return m;
}

/// Ribbon truth, evaluated pointwise at pixel centers: in the frame centered
/// on the ribbon center, the per-sector profile peaks at polar angle equal
/// to ribbon_radius and is zero outside the configured polar band.
inline SkyMap gen_ribbon(const SimScenario& sc, const GridSpec& grid) {
  sc.validate();
  SkyMap m = SkyMap::zeros(grid, FrameSpec::base());
  const Mat3 R = rotation_matrix(make_rotation(sc.ribbon_center.lon, sc.ribbon_center.lat));
  for (int j = 0; j < grid.n_lon; ++j) {
    for (int k = 0; k < grid.n_lat; ++k) {
      const UnitVec v = R.apply(latlon_to_vec(grid.lon_center(j), grid.lat_center(k)));
      const LonLat f = vec_to_latlon(v);
      const double polar = 90.0 - f.lat;
      const double offset = polar - sc.ribbon_radius;
      const double p = sc.profile_at(offset, f.lon);
      if (p > 0.0) m.rate[grid.index(j, k)] = sc.amplitude_at(f.lon) * p;
    }
  }
  return m;
}

/// Truth pair: observed = gdf + ribbon (+ noise per mode). Ideal keeps the
/// sum exactly; noisy adds zero-mean normal noise with the baseline model
/// variance, truncated at 0; noisy_3x divides the variance by 3.
inline TruthPair gen_truth_pair(const SimScenario& sc, const GridSpec& grid,
                                NoiseMode mode = NoiseMode::Ideal) {
  TruthPair tp;
  tp.scenario = sc;
  tp.gdf_truth = gen_gdf(sc, grid);
  tp.ribbon_truth = gen_ribbon(sc, grid);
  tp.observed = SkyMap::zeros(grid, FrameSpec::base());
  Rng rng(sc.seed);
  const double var_scale = mode == NoiseMode::Noisy3x ? 1.0 / 3.0 : 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double truth = tp.gdf_truth.rate[i] + tp.ribbon_truth.rate[i];
    const double v = (sc.var_a + sc.var_b * truth) * var_scale;
    double rate = truth;
    if (mode != NoiseMode::Ideal) rate = std::max(0.0, truth + std::sqrt(v) * rng.normal());
    tp.observed.rate[i] = rate;
    tp.observed.var[i] = v;
    tp.gdf_truth.var[i] = 0.0;
    tp.ribbon_truth.var[i] = 0.0;
  }
  return tp;
}

}  // namespace enasep
