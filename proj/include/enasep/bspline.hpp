#pragma once

// Cubic B-spline basis with a clamped (open) knot vector, and a penalized
// least-squares smoother on scattered 1-D data (second-difference penalty on
// the coefficients, lambda chosen by GCV).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace enasep {

class BSplineBasis {
 public:
  BSplineBasis() = default;

  /// n_intervals uniform intervals on [lo, hi]; basis size = n_intervals + 3.
  BSplineBasis(double lo, double hi, int n_intervals) : lo_(lo), hi_(hi), n_int_(n_intervals) {
    if (!(hi > lo) || n_intervals < 1)
      throw std::invalid_argument("BSplineBasis: bad domain");
    const double h = (hi - lo) / n_intervals;
    // clamped knot vector: 4 copies at each end
    knots_.resize(n_intervals + 7);
    for (int i = 0; i < static_cast<int>(knots_.size()); ++i)
      knots_[i] = lo + h * std::clamp(i - 3, 0, n_intervals);
  }

  int size() const { return n_int_ + 3; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  /// The four nonzero basis values at t (clamped to [lo, hi]); first gives
  /// the index of the first nonzero function.
  void eval(double t, double out[4], int& first) const {
    t = std::clamp(t, lo_, hi_);
    const double h = (hi_ - lo_) / n_int_;
    int span = std::min(static_cast<int>((t - lo_) / h), n_int_ - 1);
    first = span;
    // Cox-de Boor on the clamped knot vector, degree 3
    double left[4], right[4];
    out[0] = 1.0;
    const int k = span + 3;  // knot index of the span start
    for (int d = 1; d <= 3; ++d) {
      left[d] = t - knots_[k + 1 - d];
      right[d] = knots_[k + d] - t;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        const double den = right[r + 1] + left[d - r];
        const double tmp = den != 0.0 ? out[r] / den : 0.0;
        out[r] = saved + right[r + 1] * tmp;
        saved = left[d - r] * tmp;
      }
      out[d] = saved;
    }
  }

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  int n_int_ = 1;
  std::vector<double> knots_;
};

struct Spline1D {
  BSplineBasis basis;
  Eigen::VectorXd coeffs;
  double lambda = 0.0;

  double operator()(double t) const {
    double b[4];
    int first = 0;
    basis.eval(t, b, first);
    double v = 0.0;
    for (int i = 0; i < 4; ++i) v += b[i] * coeffs[first + i];
    return v;
  }
};

struct PsplineResult {
  Spline1D spline;
  double rss = 0.0;   // weighted residual sum of squares
  double gcv = 0.0;
  double edf = 0.0;
};

/// Penalized cubic B-spline smoother. Weights may be empty (all ones).
/// lambda_grid empty selects a default geometric grid.
inline PsplineResult pspline_fit(const std::vector<double>& t, const std::vector<double>& y,
                                 const std::vector<double>& w, int n_intervals = 32,
                                 std::vector<double> lambda_grid = {}) {
  const std::size_t n = t.size();
  if (n < 4 || y.size() != n)
    throw std::invalid_argument("pspline_fit: need >= 4 points");
  if (!w.empty() && w.size() != n)
    throw std::invalid_argument("pspline_fit: weight length mismatch");

  auto [mn_it, mx_it] = std::minmax_element(t.begin(), t.end());
  double lo = *mn_it, hi = *mx_it;
  if (!(hi > lo)) {
    hi = lo + 1.0;  // degenerate abscissae: constant fit
  }
  const int n_int = std::max(1, std::min<int>(n_intervals, static_cast<int>(n) - 3));
  BSplineBasis basis(lo, hi, n_int);
  const int B = basis.size();

  Eigen::MatrixXd BtWB = Eigen::MatrixXd::Zero(B, B);
  Eigen::VectorXd BtWy = Eigen::VectorXd::Zero(B);
  double yWy = 0.0, wsum = 0.0;
  double bv[4];
  int first;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    if (wi <= 0.0) continue;
    basis.eval(t[i], bv, first);
    for (int a = 0; a < 4; ++a) {
      BtWy[first + a] += wi * bv[a] * y[i];
      for (int b = 0; b < 4; ++b) BtWB(first + a, first + b) += wi * bv[a] * bv[b];
    }
    yWy += wi * y[i] * y[i];
    wsum += wi;
  }
  if (wsum <= 0.0) throw std::invalid_argument("pspline_fit: all weights zero");

  // second-difference penalty
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(B, B);
  for (int i = 0; i + 2 < B; ++i) {
    const double d[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) P(i + a, i + b) += d[a] * d[b];
  }

  if (lambda_grid.empty())
    for (double l = 1e-6; l <= 1e6 + 1.0; l *= 10.0) lambda_grid.push_back(l);

  const double scale = BtWB.trace() / B;  // make lambda roughly unitless
  PsplineResult best;
  best.gcv = std::numeric_limits<double>::infinity();
  for (double lam : lambda_grid) {
    const Eigen::MatrixXd A = BtWB + (lam * scale) * P;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd c = ldlt.solve(BtWy);
    const double rss = std::max(0.0, yWy - 2.0 * c.dot(BtWy) + c.dot(BtWB * c));
    const double edf = (ldlt.solve(BtWB)).trace();
    const double denom = std::max(wsum - edf, 1e-8);
    const double gcv = wsum * rss / (denom * denom);
    if (gcv < best.gcv) {
      best.gcv = gcv;
      best.rss = rss;
      best.edf = edf;
      best.spline.basis = basis;
      best.spline.coeffs = c;
      best.spline.lambda = lam * scale;
    }
  }
  if (!std::isfinite(best.gcv)) throw std::runtime_error("pspline_fit: no usable lambda");
  return best;
}

}  // namespace enasep
