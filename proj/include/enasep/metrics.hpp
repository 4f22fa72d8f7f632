#pragma once

// Evaluation metrics. The weighted interval score for a pixel is
//   WIS = (1 / (M + 0.5)) [ |est - truth|
//                           + sum_m (alpha_m / 2) |u_m - l_m|
//                           + sum_m penalty_m ]
// with the additive violation penalty
//   penalty_m = (l_m - truth) 1{truth < l_m} + (truth - u_m) 1{truth > u_m}.
// Interval estimates are symmetric normal intervals est +/- z(1 - alpha/2)
// times the reported standard error.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"
#include "enasep/peaks.hpp"
#include "enasep/spline.hpp"

namespace enasep {

struct WISConfig {
  std::vector<double> alphas{0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double band_lo = 80.0;   // polar degrees
  double band_hi = 130.0;

  void validate() const {
    for (std::size_t m = 0; m < alphas.size(); ++m) {
      if (!(alphas[m] > 0.0 && alphas[m] < 1.0))
        throw std::invalid_argument("WISConfig: alphas must be in (0, 1)");
      if (m > 0 && !(alphas[m] > alphas[m - 1]))
        throw std::invalid_argument("WISConfig: alphas must be strictly increasing");
    }
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Weighted interval score for a single value. M = intervals.size() may be 0,
/// in which case the score degenerates to 2 |est - truth|.
inline double wis(double est, double truth, const std::vector<Interval>& intervals,
                  const std::vector<double>& alphas) {
  if (intervals.size() != alphas.size())
    throw std::invalid_argument("wis: intervals and alphas must align");
  double acc = std::fabs(est - truth);
  for (std::size_t m = 0; m < intervals.size(); ++m) {
    const auto& iv = intervals[m];
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument("wis: interval with lo > hi");
    acc += 0.5 * alphas[m] * (iv.hi - iv.lo);
    if (truth < iv.lo) acc += iv.lo - truth;
    if (truth > iv.hi) acc += truth - iv.hi;
  }
  return acc / (static_cast<double>(intervals.size()) + 0.5);
}

/// Inverse standard normal CDF (Acklam's rational approximation, refined by
/// one Halley step; good to ~1e-15 over (0, 1)).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // one Halley refinement against erfc
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (b.size() != n || n < 2) throw std::invalid_argument("spearman: need two samples of size >= 2");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    sa += (ra[i] - ma) * (ra[i] - ma);
    sb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (sa <= 0.0 || sb <= 0.0) return 0.0;
  return sab / std::sqrt(sa * sb);
}

struct EvalReport {
  double mean_abs_pct_error = 0.0;  // over band pixels with positive truth
  double spearman = 0.0;
  double mean_wis = 0.0;
  double coverage_95 = 0.0;
  bool coverage_regression = false;  // coverage below 0.5
  std::vector<double> sector_skewness;  // est ribbon, per azimuthal sector
  std::vector<double> sector_fwhm;      // degrees; NaN where undefined
  std::size_t n_band_pixels = 0;
};

/// Full width at half maximum of a profile via a cubic interpolant on a
/// 0.01-degree lattice: the extreme angles with prediction at least half the
/// maximum.
inline double profile_fwhm(const std::vector<double>& rates, const std::vector<double>& angles,
                           double step = 0.01) {
  if (rates.size() != angles.size() || rates.size() < 2)
    throw std::invalid_argument("profile_fwhm: bad profile");
  CubicSpline sp(angles, rates);
  double vmax = 0.0;
  const double lo = angles.front(), hi = angles.back();
  const std::size_t n_steps = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t s = 0; s <= n_steps; ++s) vmax = std::max(vmax, sp(lo + s * step));
  if (vmax <= 0.0) throw ZeroProfile("profile_fwhm: profile has no positive values");
  const double half = 0.5 * vmax;
  double first = lo, last = lo;
  bool seen = false;
  for (std::size_t s = 0; s <= n_steps; ++s) {
    const double t = lo + s * step;
    if (sp(t) >= half) {
      if (!seen) {
        first = t;
        seen = true;
      }
      last = t;
    }
  }
  return last - first;
}

/// Intensity-weighted third standardized moment of the polar offset,
/// treating the normalized profile as a density. Zero variance gives 0.
inline double profile_skewness(const std::vector<double>& rates,
                               const std::vector<double>& offsets) {
  if (rates.size() != offsets.size() || rates.empty())
    throw std::invalid_argument("profile_skewness: bad profile");
  double mass = 0.0;
  for (double r : rates) {
    if (r < 0.0) throw std::invalid_argument("profile_skewness: negative rate");
    mass += r;
  }
  if (mass <= 0.0) throw ZeroProfile("profile_skewness: zero profile");
  double mu = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) mu += rates[i] * offsets[i];
  mu /= mass;
  double m2 = 0.0, m3 = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double d = offsets[i] - mu;
    m2 += rates[i] * d * d;
    m3 += rates[i] * d * d * d;
  }
  m2 /= mass;
  m3 /= mass;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

/// Compare an estimated GDF map (with per-pixel variances) to the truth over
/// the polar band, and characterize the estimated ribbon morphology. All
/// maps must share the grid and frame.
inline EvalReport eval_gdf_report(const SkyMap& est_gdf, const std::vector<double>& var_g,
                                  const SkyMap& truth_gdf, const SkyMap& est_ribbon,
                                  const WISConfig& cfg = {}) {
  cfg.validate();
  const GridSpec& g = est_gdf.grid;
  if (!(truth_gdf.grid == g) || !(est_ribbon.grid == g))
    throw std::invalid_argument("eval_gdf_report: grids do not match");
  if (var_g.size() != g.size())
    throw std::invalid_argument("eval_gdf_report: var_g length mismatch");

  std::vector<double> zs(cfg.alphas.size());
  for (std::size_t m = 0; m < cfg.alphas.size(); ++m)
    zs[m] = normal_quantile(1.0 - cfg.alphas[m] / 2.0);

  EvalReport rep;
  std::vector<double> est_band, truth_band;
  double pct_acc = 0.0, wis_acc = 0.0;
  std::size_t pct_n = 0, cover_n = 0, cover_hit = 0;
  std::vector<Interval> ivs(cfg.alphas.size());
  for (int j = 0; j < g.n_lon; ++j) {
    for (int k = 0; k < g.n_lat; ++k) {
      const double polar = 90.0 - g.lat_center(k);
      if (polar < cfg.band_lo || polar > cfg.band_hi) continue;
      const std::size_t i = g.index(j, k);
      const double e = est_gdf.rate[i], t = truth_gdf.rate[i];
      est_band.push_back(e);
      truth_band.push_back(t);
      if (t > 0.0) {
        pct_acc += std::fabs(e - t) / t;
        ++pct_n;
      }
      const double sd = std::sqrt(std::max(var_g[i], 0.0));
      for (std::size_t m = 0; m < cfg.alphas.size(); ++m)
        ivs[m] = {e - zs[m] * sd, e + zs[m] * sd};
      wis_acc += wis(e, t, ivs, cfg.alphas);
      const double z95 = 1.959963984540054;
      ++cover_n;
      if (std::fabs(t - e) <= z95 * sd) ++cover_hit;
    }
  }
  if (est_band.empty()) throw EmptyBand("eval_gdf_report: no pixels in band");
  rep.n_band_pixels = est_band.size();
  rep.mean_abs_pct_error = pct_n > 0 ? 100.0 * pct_acc / pct_n : 0.0;
  rep.spearman = spearman(est_band, truth_band);
  rep.mean_wis = wis_acc / static_cast<double>(est_band.size());
  rep.coverage_95 = cover_n > 0 ? static_cast<double>(cover_hit) / cover_n : 0.0;
  rep.coverage_regression = rep.coverage_95 < 0.5;

  // ribbon morphology per sector
  rep.sector_skewness.assign(g.n_lon, std::numeric_limits<double>::quiet_NaN());
  rep.sector_fwhm.assign(g.n_lon, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> polar, rate;
  for (int j = 0; j < g.n_lon; ++j) {
    sector_profile(est_ribbon, j, cfg.band_lo, cfg.band_hi, polar, rate);
    double mass = 0.0, peak = 0.0;
    std::size_t arg = 0;
    for (std::size_t s = 0; s < rate.size(); ++s) {
      mass += rate[s];
      if (rate[s] > peak) {
        peak = rate[s];
        arg = s;
      }
    }
    if (mass <= 0.0 || peak <= 0.0) continue;
    std::vector<double> offs(polar.size());
    for (std::size_t s = 0; s < polar.size(); ++s) offs[s] = polar[s] - polar[arg];
    rep.sector_skewness[j] = profile_skewness(rate, offs);
    rep.sector_fwhm[j] = profile_fwhm(rate, polar);
  }
  return rep;
}

}  // namespace enasep
