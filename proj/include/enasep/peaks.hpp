#pragma once

// Per-sector ribbon peak estimation in the working (ribbon-centric) frame.
// The peak polar angle x_p of a sector is the arg-max of a natural cubic
// interpolant through the sector's (polar angle, rate) samples, scanned on a
// dense 0.01-degree lattice. A Gaussian-profile fit A + B exp(-(x-x_p)^2 /
// (2 sigma^2)) is provided as a baseline. smooth_peaks screens outliers
// against a periodic running median and replaces them with a periodic
// trigonometric fit through the remaining sectors.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"
#include "enasep/spline.hpp"

namespace enasep {

enum class PeakQuality { Ok, Interpolated, Flat };

inline std::string to_string(PeakQuality q) {
  switch (q) {
    case PeakQuality::Ok: return "ok";
    case PeakQuality::Interpolated: return "interpolated";
    default: return "flat";
  }
}

struct RibbonPeaks {
  std::vector<double> sector_azimuth;  // degrees, one per longitude bin
  std::vector<double> peak_polar;      // x_p degrees in [0, 180]
  std::vector<double> peak_height;     // ENAs/s
  std::vector<PeakQuality> quality;

  std::size_t size() const { return sector_azimuth.size(); }
};

struct PeakOptions {
  double band_lo = 80.0;   // polar degrees
  double band_hi = 130.0;
  double dense_step = 0.01;
};

/// Sector samples of a map: polar angles (ascending) and rates for one
/// longitude column restricted to [band_lo, band_hi].
inline void sector_profile(const SkyMap& map, int j, double band_lo, double band_hi,
                           std::vector<double>& polar, std::vector<double>& rate) {
  polar.clear();
  rate.clear();
  const GridSpec& g = map.grid;
  // polar = 90 - lat increases as the lat bin index decreases
  for (int k = g.n_lat - 1; k >= 0; --k) {
    const double p = 90.0 - g.lat_center(k);
    if (p < band_lo || p > band_hi) continue;
    polar.push_back(p);
    rate.push_back(map.rate[g.index(j, k)]);
  }
}

/// Peak estimation for every sector. Sectors whose rates are constant to
/// 1e-12, or whose interpolant attains its maximum at the scan boundary
/// (no interior peak), are flagged Flat with x_p at the band midpoint.
inline RibbonPeaks estimate_peaks_cubic(const SkyMap& map, const PeakOptions& opt = {}) {
  const GridSpec& g = map.grid;
  if (!(opt.band_lo >= 0.0 && opt.band_hi <= 180.0 && opt.band_hi > opt.band_lo))
    throw std::invalid_argument("estimate_peaks_cubic: band must be within [0, 180]");
  if (opt.band_hi - opt.band_lo < 4.0 * g.pixel_deg)
    throw std::invalid_argument("estimate_peaks_cubic: band must span >= 4 pixels");

  RibbonPeaks out;
  out.sector_azimuth.resize(g.n_lon);
  out.peak_polar.resize(g.n_lon);
  out.peak_height.resize(g.n_lon);
  out.quality.resize(g.n_lon);

  std::vector<double> polar, rate;
  for (int j = 0; j < g.n_lon; ++j) {
    out.sector_azimuth[j] = g.lon_center(j);
    sector_profile(map, j, opt.band_lo, opt.band_hi, polar, rate);
    if (polar.size() < 4)
      throw std::invalid_argument("estimate_peaks_cubic: fewer than 4 samples in band");

    const auto [mn, mx] = std::minmax_element(rate.begin(), rate.end());
    if (*mx - *mn <= 1e-12) {
      out.peak_polar[j] = 0.5 * (opt.band_lo + opt.band_hi);
      out.peak_height[j] = *mx;
      out.quality[j] = PeakQuality::Flat;
      continue;
    }
    CubicSpline sp(polar, rate);
    const double lo = std::max(opt.band_lo, sp.x_min());
    const double hi = std::min(opt.band_hi, sp.x_max());
    const auto [xp, h] = sp.dense_argmax(lo, hi, opt.dense_step);
    if (xp <= lo + 0.5 * opt.dense_step || xp >= hi - 0.5 * opt.dense_step) {
      // boundary maximum: the sector has no interior peak to report
      out.peak_polar[j] = 0.5 * (opt.band_lo + opt.band_hi);
      out.peak_height[j] = h;
      out.quality[j] = PeakQuality::Flat;
      continue;
    }
    out.peak_polar[j] = xp;
    out.peak_height[j] = h;
    out.quality[j] = PeakQuality::Ok;
  }
  return out;
}

struct GaussianProfileFit {
  double baseline = 0.0;   // A
  double amplitude = 0.0;  // B
  double center = 0.0;     // x_p
  double sigma = 1.0;
  double rss = 0.0;
  bool converged = false;
  int n_iter = 0;
};

/// Nonlinear least squares for A + B exp(-(x - x_p)^2 / (2 sigma^2)) by
/// Levenberg-Marquardt. Returns the best iterate with converged = false
/// when the iteration cap is hit.
inline GaussianProfileFit fit_gaussian_profile(const std::vector<double>& x,
                                               const std::vector<double>& y,
                                               int max_iter = 200) {
  const std::size_t n = x.size();
  if (n < 5 || y.size() != n)
    throw std::invalid_argument("fit_gaussian_profile: need >= 5 samples");
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  if (*mx - *mn <= 0.0)
    throw std::invalid_argument("fit_gaussian_profile: samples are all equal");

  Eigen::Vector4d p;  // A, B, x_p, sigma
  p[0] = *mn;
  p[1] = *mx - *mn;
  p[2] = x[static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin())];
  p[3] = std::max((x.back() - x.front()) / 6.0, 1e-3);

  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - q[2];
      r[static_cast<Eigen::Index>(i)] = y[i] - (q[0] + q[1] * std::exp(-d * d / (2.0 * q[3] * q[3])));
    }
  };

  Eigen::VectorXd r(n), r_try(n);
  residuals(p, r);
  double rss = r.squaredNorm();
  double lambda = 1e-3;
  GaussianProfileFit fit;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Eigen::MatrixXd J(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - p[2];
      const double s2 = p[3] * p[3];
      const double e = std::exp(-d * d / (2.0 * s2));
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      J(ii, 0) = -1.0;
      J(ii, 1) = -e;
      J(ii, 2) = -p[1] * e * d / s2;
      J(ii, 3) = -p[1] * e * d * d / (s2 * p[3]);
    }
    const Eigen::Matrix4d JtJ = J.transpose() * J;
    const Eigen::Vector4d g = J.transpose() * r;
    Eigen::Matrix4d A = JtJ;
    A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
    const Eigen::Vector4d step = A.ldlt().solve(-g);
    Eigen::Vector4d p_try = p + step;
    p_try[3] = std::max(std::fabs(p_try[3]), 1e-6);
    residuals(p_try, r_try);
    const double rss_try = r_try.squaredNorm();
    if (rss_try < rss) {
      const double rel = (rss - rss_try) / std::max(rss, 1e-300);
      p = p_try;
      r = r_try;
      rss = rss_try;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < 1e-14 || step.norm() < 1e-13 * (1.0 + p.norm())) {
        fit.converged = true;
        ++iter;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;  // stalled
    }
  }
  fit.baseline = p[0];
  fit.amplitude = p[1];
  fit.center = p[2];
  fit.sigma = p[3];
  fit.rss = rss;
  fit.n_iter = iter;
  return fit;
}

struct SmoothPeaksOptions {
  int median_window = 15;      // sectors, periodic
  double n_robust_sd = 3.0;
  double min_threshold_deg = 0.25;  // floor; smooth curvature makes the MAD collapse
  int max_harmonic = 0;        // 0 = choose from sector count
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw TooFewValid("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

/// Least-squares periodic fit with harmonics up to H, evaluated everywhere.
inline std::vector<double> periodic_fit(const std::vector<double>& azimuth,
                                        const std::vector<double>& value,
                                        const std::vector<char>& use, int H) {
  const int n_basis = 1 + 2 * H;
  const std::size_t J = azimuth.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_basis, n_basis);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_basis);
  Eigen::VectorXd phi(n_basis);
  for (std::size_t j = 0; j < J; ++j) {
    if (!use[j]) continue;
    const double a = azimuth[j] * kDegToRad;
    phi[0] = 1.0;
    for (int h = 1; h <= H; ++h) {
      phi[2 * h - 1] = std::cos(h * a);
      phi[2 * h] = std::sin(h * a);
    }
    A.noalias() += phi * phi.transpose();
    b.noalias() += value[j] * phi;
  }
  A.diagonal().array() += 1e-12;
  const Eigen::VectorXd c = A.ldlt().solve(b);
  std::vector<double> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double a = azimuth[j] * kDegToRad;
    double v = c[0];
    for (int h = 1; h <= H; ++h)
      v += c[2 * h - 1] * std::cos(h * a) + c[2 * h] * std::sin(h * a);
    out[j] = v;
  }
  return out;
}

}  // namespace detail

/// Outlier screening across azimuthal sectors: sectors deviating from the
/// periodic running median by more than n_robust_sd robust standard
/// deviations, and sectors flagged Flat, are replaced by a periodic smooth
/// fit through the remaining sectors (peak heights are refit the same way).
/// Throws TooFewValid when more than half of the sectors are flagged.
inline RibbonPeaks smooth_peaks(const RibbonPeaks& peaks, const SmoothPeaksOptions& opt = {}) {
  const std::size_t J = peaks.size();
  if (J < 8) throw std::invalid_argument("smooth_peaks: need >= 8 sectors");

  std::vector<char> valid(J);
  for (std::size_t j = 0; j < J; ++j) valid[j] = peaks.quality[j] != PeakQuality::Flat;

  // periodic running median over the window, valid sectors only
  const int half = opt.median_window / 2;
  std::vector<double> runmed(J, 0.0);
  std::vector<char> has_med(J, 0);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> w;
    for (int d = -half; d <= half; ++d) {
      const std::size_t q = (j + J + static_cast<std::size_t>(d + static_cast<int>(J))) % J;
      if (valid[q]) w.push_back(peaks.peak_polar[q]);
    }
    if (!w.empty()) {
      runmed[j] = detail::median_of(std::move(w));
      has_med[j] = 1;
    }
  }

  std::vector<double> abs_dev;
  for (std::size_t j = 0; j < J; ++j)
    if (valid[j] && has_med[j]) abs_dev.push_back(std::fabs(peaks.peak_polar[j] - runmed[j]));
  if (abs_dev.empty()) throw TooFewValid("smooth_peaks: no valid sectors");
  const double rsd = 1.4826 * detail::median_of(abs_dev);
  const double threshold = std::max(opt.n_robust_sd * rsd, opt.min_threshold_deg);

  std::vector<char> keep(J);
  std::size_t n_flagged = 0;
  for (std::size_t j = 0; j < J; ++j) {
    const bool outlier =
        valid[j] && has_med[j] &&
        std::fabs(peaks.peak_polar[j] - runmed[j]) > threshold;
    keep[j] = valid[j] && !outlier;
    if (!keep[j]) ++n_flagged;
  }
  if (n_flagged * 2 > J)
    throw TooFewValid("smooth_peaks: more than half of the sectors flagged");

  RibbonPeaks out = peaks;
  if (n_flagged == 0) return out;

  const int H = opt.max_harmonic > 0
                    ? opt.max_harmonic
                    : std::clamp(static_cast<int>(J) / 24, 1, 8);
  const auto fit_polar = detail::periodic_fit(peaks.sector_azimuth, peaks.peak_polar, keep, H);
  const auto fit_height = detail::periodic_fit(peaks.sector_azimuth, peaks.peak_height, keep, H);
  for (std::size_t j = 0; j < J; ++j) {
    if (keep[j]) continue;
    out.peak_polar[j] = fit_polar[j];
    out.peak_height[j] = std::max(fit_height[j], 0.0);
    out.quality[j] = PeakQuality::Interpolated;
  }
  return out;
}

}  // namespace enasep
