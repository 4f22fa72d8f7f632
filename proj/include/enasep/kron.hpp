#pragma once

// Kronecker-structured correlation for map resampling: the full pixel
// correlation is the Kronecker product of a longitude factor and a latitude
// factor, each an exponential-decay correlation fit to empirical lag
// correlations of smooth-fit residuals and regularized to be positive
// definite with unit diagonal.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "enasep/geom.hpp"
#include "enasep/rng.hpp"
#include "enasep/smooth_fit.hpp"

namespace enasep {

struct KroneckerCorr {
  Eigen::MatrixXd lat_corr;  // K x K
  Eigen::MatrixXd lon_corr;  // J x J (circular distance)
  double lat_decay = 1.0;    // e-folding length in pixels
  double lon_decay = 1.0;
};

struct KronOptions {
  int smooth_degree = 12;   // degree of the residual-producing smooth fit
  int max_lag = 10;
  double max_decay = 1e3;   // cap on the fitted e-folding length, pixels
  double eig_floor = 1e-6;  // relative eigenvalue floor for regularization
};

namespace detail {

/// Least-squares fit of rho(d) ~ exp(-d / ell) over lags 1..n.
inline double fit_decay_length(const std::vector<double>& rho, double max_decay) {
  double best_ell = 1.0, best_obj = std::numeric_limits<double>::infinity();
  for (double le = std::log(0.05); le <= std::log(max_decay) + 1e-12; le += 0.02) {
    const double ell = std::exp(le);
    double obj = 0.0;
    for (std::size_t d = 0; d < rho.size(); ++d) {
      const double r = std::exp(-(static_cast<double>(d) + 1.0) / ell);
      obj += (rho[d] - r) * (rho[d] - r);
    }
    if (obj < best_obj) {
      best_obj = obj;
      best_ell = ell;
    }
  }
  return best_ell;
}

/// Make the matrix positive definite with unit diagonal: floor the
/// eigenvalues, reassemble, renormalize.
inline void regularize_corr(Eigen::MatrixXd& C, double floor_rel) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = floor_rel * std::max(ev.maxCoeff(), 1e-12);
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
  C = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd d = C.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) C(i, j) /= d[i] * d[j];
  C = 0.5 * (C + C.transpose().eval());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    sa += (a[i] - ma) * (a[i] - ma);
    sb += (b[i] - mb) * (b[i] - mb);
  }
  if (sa <= 0.0 || sb <= 0.0) return 0.0;
  return sab / std::sqrt(sa * sb);
}

}  // namespace detail

/// Estimate the per-dimension correlation factors from the residuals of a
/// smooth fit to the map intensities.
inline KroneckerCorr estimate_kron_corr(const SkyMap& map, const KronOptions& opt = {}) {
  const GridSpec& g = map.grid;
  if (g.n_lon < 8 || g.n_lat < 8)
    throw std::invalid_argument("estimate_kron_corr: need at least 8 bins per dimension");

  SmoothFitOptions sopt;
  sopt.degree = opt.smooth_degree;
  const SmoothFit fit = fit_smooth_surface(map, nullptr, {}, sopt);
  std::vector<double> resid(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) resid[i] = map.rate[i] - fit.fitted[i];

  // empirical lag correlations along each dimension
  std::vector<double> rho_lat, rho_lon;
  std::vector<double> a, b;
  for (int d = 1; d <= std::min(opt.max_lag, g.n_lat - 2); ++d) {
    a.clear();
    b.clear();
    for (int j = 0; j < g.n_lon; ++j)
      for (int k = 0; k + d < g.n_lat; ++k) {
        a.push_back(resid[g.index(j, k)]);
        b.push_back(resid[g.index(j, k + d)]);
      }
    rho_lat.push_back(detail::pearson(a, b));
  }
  for (int d = 1; d <= std::min(opt.max_lag, g.n_lon / 2); ++d) {
    a.clear();
    b.clear();
    for (int j = 0; j < g.n_lon; ++j)
      for (int k = 0; k < g.n_lat; ++k) {
        a.push_back(resid[g.index(j, k)]);
        b.push_back(resid[g.index((j + d) % g.n_lon, k)]);
      }
    rho_lon.push_back(detail::pearson(a, b));
  }

  KroneckerCorr out;
  out.lat_decay = detail::fit_decay_length(rho_lat, opt.max_decay);
  out.lon_decay = detail::fit_decay_length(rho_lon, opt.max_decay);

  out.lat_corr.resize(g.n_lat, g.n_lat);
  for (int i = 0; i < g.n_lat; ++i)
    for (int j = 0; j < g.n_lat; ++j)
      out.lat_corr(i, j) = std::exp(-std::fabs(i - j) / out.lat_decay);
  out.lon_corr.resize(g.n_lon, g.n_lon);
  for (int i = 0; i < g.n_lon; ++i)
    for (int j = 0; j < g.n_lon; ++j) {
      const int d = std::min(std::abs(i - j), g.n_lon - std::abs(i - j));
      out.lon_corr(i, j) = std::exp(-d / out.lon_decay);
    }
  detail::regularize_corr(out.lat_corr, opt.eig_floor);
  detail::regularize_corr(out.lon_corr, opt.eig_floor);
  return out;
}

/// Draw maps from N(rate, diag(sd) Corr diag(sd)) with Corr the Kronecker
/// product of the factors, truncated at zero. Deterministic per (seed, k).
inline std::vector<SkyMap> draw_maps(const SkyMap& map, const KroneckerCorr& corr, int n,
                                     uint64_t seed) {
  if (n < 1) throw std::invalid_argument("draw_maps: need n >= 1");
  const GridSpec& g = map.grid;
  const int J = g.n_lon, K = g.n_lat;
  if (corr.lat_corr.rows() != K || corr.lon_corr.rows() != J)
    throw std::invalid_argument("draw_maps: correlation factors do not match grid");

  Eigen::LLT<Eigen::MatrixXd> llt_lat(corr.lat_corr);
  Eigen::LLT<Eigen::MatrixXd> llt_lon(corr.lon_corr);
  if (llt_lat.info() != Eigen::Success || llt_lon.info() != Eigen::Success)
    throw std::invalid_argument("draw_maps: correlation factors not positive definite");
  const Eigen::MatrixXd Llat = llt_lat.matrixL();
  const Eigen::MatrixXd Llon = llt_lon.matrixL();

  std::vector<SkyMap> out;
  out.reserve(n);
  Eigen::MatrixXd Z(K, J), X;
  for (int d = 0; d < n; ++d) {
    Rng rng(substream_seed(seed, static_cast<uint64_t>(d)));
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) Z(k, j) = rng.normal();
    X = Llat * Z * Llon.transpose();  // cov(vec X) = lon_corr (x) lat_corr
    SkyMap m = map;
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) {
        const std::size_t i = g.index(j, k);
        m.rate[i] = std::max(0.0, map.rate[i] + std::sqrt(map.var[i]) * X(k, j));
      }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace enasep
