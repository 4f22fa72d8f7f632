#pragma once

// Ribbon center estimation. Maps are drawn from the Kronecker-structured
// normal model, rotated into the working frame, and each draw contributes
// one pseudo-posterior center sample:
//   peaks -> best-fit plane (SVD) -> in-plane projection -> ellipse fit ->
//   jackknife covariance -> one bivariate-normal center draw -> line-sphere
//   intersection perpendicular to the plane, picking the intersection nearer
//   the ribbon -> ecliptic (lon, lat).
// The working frame places the point opposite the working center estimate at
// its north pole, so the ribbon sits near polar angle 180 - radius (about
// 105 degrees for the observed ribbon), inside the default 80-130 search
// band. Iterating re-centers the working frame on each new estimate.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"
#include "enasep/geomfit.hpp"
#include "enasep/kron.hpp"
#include "enasep/parallel.hpp"
#include "enasep/peaks.hpp"
#include "enasep/reframe.hpp"
#include "enasep/rng.hpp"

namespace enasep {

struct CenterOptions {
  PeakOptions peaks;
  SmoothPeaksOptions peak_smoothing;
  KronOptions kron;
  int micro = 15;
  double max_fail_fraction = 0.2;
  int max_iter = 10;
  double tol_deg = 0.1;
};

struct CenterEstimate {
  std::vector<LonLat> draws;   // accepted pseudo-posterior draws, ecliptic
  double mean_lon = 0.0;       // circular mean, degrees
  double mean_lat = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (lon, lat) degrees^2
  int n_map_draws = 0;
  int n_failed = 0;
  int n_iterations = 1;
  bool converged = true;
  std::vector<LonLat> iteration_trace;  // per-iteration center estimates
};

/// Working frame for a ribbon-center estimate: the antipode of the center
/// goes to the north pole, placing the ribbon band near polar 105 degrees.
inline FrameSpec working_frame(const LonLat& center) {
  const LonLat a = antipode(center);
  return make_rotation(a.lon, a.lat, 0.0);
}

namespace detail {

inline LonLat circular_mean(const std::vector<LonLat>& pts) {
  double cx = 0.0, sx = 0.0, lat = 0.0;
  for (const auto& p : pts) {
    cx += std::cos(p.lon * kDegToRad);
    sx += std::sin(p.lon * kDegToRad);
    lat += p.lat;
  }
  return {wrap_lon(std::atan2(sx, cx) * kRadToDeg), lat / static_cast<double>(pts.size())};
}

/// Signed difference a - b wrapped into (-180, 180].
inline double lon_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

/// One center draw from a map already rotated into the working frame.
inline LonLat center_from_working_map(const SkyMap& wmap, const Mat3& to_ecliptic, Rng& rng,
                                      const CenterOptions& opt) {
  const RibbonPeaks peaks = smooth_peaks(estimate_peaks_cubic(wmap, opt.peaks),
                                         opt.peak_smoothing);
  std::vector<UnitVec> pts;
  pts.reserve(peaks.size());
  for (std::size_t j = 0; j < peaks.size(); ++j)
    pts.push_back(latlon_to_vec(peaks.sector_azimuth[j], 90.0 - peaks.peak_polar[j]));

  const PlaneFit plane = fit_plane_svd(pts);
  const auto planar = project_to_plane(pts, plane);
  const EllipseFit ellipse = fit_ellipse(planar);
  const Eigen::Matrix2d cov = jackknife_center_cov(planar);

  // one draw of the in-plane center from N(center, cov)
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Vector2d z(rng.normal(), rng.normal());
  const Eigen::Vector2d drawn =
      Eigen::Vector2d(ellipse.cx, ellipse.cy) +
      es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * z;

  const UnitVec q = plane_point(plane, drawn[0], drawn[1]);
  UnitVec p1, p2;
  if (!line_sphere_intersections(q, plane.normal, p1, p2))
    throw DegenerateGeometry("center draw: normal line misses the unit sphere");

  // keep the intersection nearer the ribbon (smaller mean angle to peaks)
  auto mean_angle = [&](const UnitVec& c) {
    double acc = 0.0;
    for (const auto& p : pts) acc += std::acos(std::clamp(c.dot(p), -1.0, 1.0));
    return acc / static_cast<double>(pts.size());
  };
  const UnitVec chosen = mean_angle(p1) <= mean_angle(p2) ? p1 : p2;
  return vec_to_latlon(to_ecliptic.apply(chosen));
}

}  // namespace detail

/// One round of center estimation with a fixed working center and
/// precomputed correlation model.
inline CenterEstimate estimate_center(const SkyMap& map, const LonLat& working_center,
                                      const KroneckerCorr& corr, int n_draws, uint64_t seed,
                                      const CenterOptions& opt = {}) {
  if (n_draws < 1) throw std::invalid_argument("estimate_center: need n_draws >= 1");
  const FrameSpec wf = working_frame(working_center);
  const ReframeOperator op(map.grid, map.frame, wf, opt.micro);
  const Mat3 to_ecliptic = rotation_matrix(wf).transpose();  // working frame -> base

  const auto draws = draw_maps(map, corr, n_draws, seed);

  std::vector<LonLat> ok(n_draws);
  std::vector<uint8_t> good(n_draws, 0);
  parallel_for(static_cast<std::size_t>(n_draws), [&](std::size_t d) {
    try {
      const SkyMap wmap = op.apply(draws[d]);
      Rng rng(substream_seed(seed ^ 0x5eedULL, d));
      ok[d] = detail::center_from_working_map(wmap, to_ecliptic, rng, opt);
      good[d] = 1;
    } catch (const std::exception&) {
      good[d] = 0;
    }
  });

  CenterEstimate est;
  est.n_map_draws = n_draws;
  for (int d = 0; d < n_draws; ++d) {
    if (good[d])
      est.draws.push_back(ok[d]);
    else
      ++est.n_failed;
  }
  if (est.n_failed > opt.max_fail_fraction * n_draws)
    throw CenterEstimationFailure("estimate_center: too many failed draws (" +
                                  std::to_string(est.n_failed) + "/" + std::to_string(n_draws) +
                                  ")");

  const LonLat mean = detail::circular_mean(est.draws);
  est.mean_lon = mean.lon;
  est.mean_lat = mean.lat;
  if (est.draws.size() > 1) {
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : est.draws) {
      const Eigen::Vector2d d(detail::lon_diff(p.lon, mean.lon), p.lat - mean.lat);
      cov.noalias() += d * d.transpose();
    }
    est.covariance = cov / (static_cast<double>(est.draws.size()) - 1.0);
  }
  est.iteration_trace.push_back(mean);
  return est;
}

inline CenterEstimate estimate_center(const SkyMap& map, const LonLat& working_center,
                                      int n_draws, uint64_t seed,
                                      const CenterOptions& opt = {}) {
  const KroneckerCorr corr = estimate_kron_corr(map, opt.kron);
  return estimate_center(map, working_center, corr, n_draws, seed, opt);
}

/// Iterate center estimation, re-centering the working frame on each new
/// estimate, until the center moves less than tol_deg or max_iter rounds.
inline CenterEstimate iterate_center(const SkyMap& map, const LonLat& initial_center,
                                     int n_draws, uint64_t seed, const CenterOptions& opt = {}) {
  if (opt.max_iter < 1) throw std::invalid_argument("iterate_center: max_iter must be >= 1");
  const KroneckerCorr corr = estimate_kron_corr(map, opt.kron);

  LonLat working = initial_center;
  CenterEstimate est;
  std::vector<LonLat> trace;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    est = estimate_center(map, working, corr, n_draws, seed + static_cast<uint64_t>(it), opt);
    const LonLat next{est.mean_lon, est.mean_lat};
    trace.push_back(next);
    const double moved = angular_distance_deg(next, working);
    working = next;
    if (moved < opt.tol_deg) {
      converged = true;
      ++it;
      break;
    }
  }
  est.n_iterations = it;
  est.converged = converged;
  est.iteration_trace = trace;
  return est;
}

}  // namespace enasep
