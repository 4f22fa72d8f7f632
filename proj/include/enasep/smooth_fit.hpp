#pragma once

// Smooth positive surface fit on the sphere: Gaussian least squares with a
// log link over a spherical-harmonic basis, with summed Laplacian-power
// roughness penalties of orders 1-4 and the smoothing parameter chosen by
// generalized cross-validation. Solved by iteratively reweighted least
// squares on the linear predictor.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"
#include "enasep/sphharm.hpp"

namespace enasep {

struct SmoothFitOptions {
  int degree = 12;                       // max spherical-harmonic degree
  std::vector<int> penalty_orders{1, 2, 3, 4};
  double irls_tol = 1e-8;                // relative deviance change
  int max_irls = 100;
  int gcv_rounds = 2;                    // alternations of IRLS and GCV
  double lambda_init = 1.0;
  double lambda_min = 1e-9;
  double lambda_max = 1e9;
  int lambda_grid_size = 25;
  int golden_iters = 12;
};

struct SmoothFit {
  int degree = 0;
  std::vector<int> penalty_orders;
  double lambda = 0.0;
  Eigen::VectorXd coeffs;
  std::vector<double> fitted;  // exp scale, strictly positive, all pixels
  double gcv = 0.0;
  double edf = 0.0;
  int n_iter = 0;
  bool converged = false;
};

namespace detail {

/// Cached spherical-harmonic design matrices for pixel grids.
inline const Eigen::MatrixXd& sh_design_for_grid(const GridSpec& g, int degree) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<Eigen::MatrixXd>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(g.n_lon, g.n_lat, degree);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto m = std::make_unique<Eigen::MatrixXd>(sh_design_matrix(degree, pixel_directions(g)));
    it = cache.emplace(key, std::move(m)).first;
  }
  return *it->second;
}

}  // namespace detail

/// Penalized log-link fit on arbitrary directions. weights may be empty
/// (unit); zero-weight points are excluded from the fit but still predicted.
inline SmoothFit smooth_fit_points(const Eigen::MatrixXd& X, const std::vector<double>& y,
                                   const std::vector<double>& weights,
                                   const SmoothFitOptions& opt = {}) {
  const Eigen::Index N = X.rows();
  const Eigen::Index B = X.cols();
  if (static_cast<Eigen::Index>(y.size()) != N)
    throw std::invalid_argument("smooth_fit_points: y length mismatch");
  if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != N)
    throw std::invalid_argument("smooth_fit_points: weight length mismatch");

  auto wt = [&](Eigen::Index i) { return weights.empty() ? 1.0 : weights[i]; };
  double n_inc = 0.0;
  for (Eigen::Index i = 0; i < N; ++i)
    if (wt(i) > 0.0) n_inc += 1.0;
  if (n_inc < 10.0 * static_cast<double>(B))
    throw std::invalid_argument("smooth_fit_points: need >= 10x more points than basis functions");

  const int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(B)))) - 1;
  const Eigen::VectorXd pen = sh_penalty_diagonal(degree, opt.penalty_orders);

  // Start from a penalized linear fit of log(max(y, floor)).
  double ymax = 0.0;
  for (Eigen::Index i = 0; i < N; ++i)
    if (wt(i) > 0.0) ymax = std::max(ymax, y[i]);
  const double floor = std::max(ymax * 1e-6, 1e-300);

  Eigen::MatrixXd Xs(N, B);      // sqrt-weight scaled design, reused
  Eigen::VectorXd eta(N), coeffs;
  {
    Eigen::VectorXd zw(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const double wi = wt(i);
      const double sw = std::sqrt(wi);
      Xs.row(i) = sw * X.row(i);
      zw[i] = sw * std::log(std::max(y[i], floor));
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(B, B);
    A.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
    A.triangularView<Eigen::Upper>() = A.transpose();
    A.diagonal() += 1e-3 * pen.cwiseMax(1e-8);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw IllConditioned("smooth fit: initial solve failed");
    coeffs = ldlt.solve(Xs.transpose() * zw);
    eta = X * coeffs;
  }

  double lambda = opt.lambda_init;
  SmoothFit fit;
  fit.degree = degree;
  fit.penalty_orders = opt.penalty_orders;

  struct WorkingLs {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double zOz = 0.0;
  } wls;

  // IRLS at fixed lambda; leaves the final working least-squares pieces in
  // wls for GCV scoring.
  auto run_irls = [&](double lam) {
    double dev_prev = std::numeric_limits<double>::infinity();
    bool converged = false;
    int it = 0;
    Eigen::VectorXd zw(N);
    for (; it < opt.max_irls; ++it) {
      double dev = 0.0;
      wls.zOz = 0.0;
      for (Eigen::Index i = 0; i < N; ++i) {
        const double wi = wt(i);
        const double e = std::clamp(eta[i], -300.0, 300.0);
        const double mu = std::exp(e);
        const double r = y[i] - mu;
        dev += wi * r * r;
        const double sw = std::sqrt(wi) * mu;  // sqrt of working weight
        const double z = e + r / mu;
        Xs.row(i) = sw * X.row(i);
        zw[i] = sw * z;
        wls.zOz += zw[i] * zw[i];
      }
      wls.A = Eigen::MatrixXd::Zero(B, B);
      wls.A.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
      wls.A.triangularView<Eigen::Upper>() = wls.A.transpose();
      wls.b = Xs.transpose() * zw;
      Eigen::MatrixXd Areg = wls.A;
      Areg.diagonal() += lam * pen;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Areg);
      if (ldlt.info() != Eigen::Success)
        throw IllConditioned("smooth fit: penalized normal equations singular");
      coeffs = ldlt.solve(wls.b);
      eta = X * coeffs;
      if (std::fabs(dev_prev - dev) <= opt.irls_tol * (dev + 1e-30)) {
        converged = true;
        ++it;
        break;
      }
      dev_prev = dev;
    }
    fit.n_iter += it;
    return converged;
  };

  auto gcv_of = [&](double lam, double* edf_out) {
    Eigen::MatrixXd Areg = wls.A;
    Areg.diagonal() += lam * pen;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Areg);
    if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd c = ldlt.solve(wls.b);
    const double rss = std::max(0.0, wls.zOz - 2.0 * c.dot(wls.b) + c.dot(wls.A * c));
    const double edf = ldlt.solve(wls.A).trace();
    if (edf_out) *edf_out = edf;
    const double denom = std::max(n_inc - edf, 1e-6);
    return n_inc * rss / (denom * denom);
  };

  bool converged = false;
  for (int round = 0; round < opt.gcv_rounds; ++round) {
    converged = run_irls(lambda);
    double best_lam = lambda, best_gcv = std::numeric_limits<double>::infinity();
    const double lmin = std::log(opt.lambda_min), lmax = std::log(opt.lambda_max);
    for (int s = 0; s < opt.lambda_grid_size; ++s) {
      const double lam = std::exp(lmin + (lmax - lmin) * s / (opt.lambda_grid_size - 1.0));
      const double g = gcv_of(lam, nullptr);
      if (g < best_gcv) {
        best_gcv = g;
        best_lam = lam;
      }
    }
    // golden-section refinement around the best grid point
    double lo = std::log(best_lam) - (lmax - lmin) / (opt.lambda_grid_size - 1.0);
    double hi = std::log(best_lam) + (lmax - lmin) / (opt.lambda_grid_size - 1.0);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = gcv_of(std::exp(x1), nullptr), f2 = gcv_of(std::exp(x2), nullptr);
    for (int s = 0; s < opt.golden_iters; ++s) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = gcv_of(std::exp(x1), nullptr);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = gcv_of(std::exp(x2), nullptr);
      }
    }
    lambda = std::exp(0.5 * (lo + hi));
  }
  converged = run_irls(lambda);
  fit.gcv = gcv_of(lambda, &fit.edf);
  fit.converged = converged;
  fit.lambda = lambda;
  fit.coeffs = coeffs;
  fit.fitted.resize(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    fit.fitted[static_cast<std::size_t>(i)] = std::exp(std::clamp(eta[i], -300.0, 300.0));
  return fit;
}

/// Fit over a map's pixels; pixels of the exclusion mask get weight 0 but
/// are still predicted. Weights empty = unit weights.
inline SmoothFit fit_smooth_surface(const SkyMap& map, const std::vector<uint8_t>* exclude,
                                    const std::vector<double>& weights = {},
                                    const SmoothFitOptions& opt = {}) {
  const Eigen::MatrixXd& X = detail::sh_design_for_grid(map.grid, opt.degree);
  std::vector<double> w;
  if (!weights.empty()) {
    if (weights.size() != map.grid.size())
      throw std::invalid_argument("fit_smooth_surface: weight length mismatch");
    w = weights;
  }
  if (exclude) {
    if (exclude->size() != map.grid.size())
      throw std::invalid_argument("fit_smooth_surface: mask length mismatch");
    if (w.empty()) w.assign(map.grid.size(), 1.0);
    for (std::size_t i = 0; i < w.size(); ++i)
      if ((*exclude)[i]) w[i] = 0.0;
  }
  return smooth_fit_points(X, map.rate, w, opt);
}

}  // namespace enasep
