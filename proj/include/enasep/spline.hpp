#pragma once

// Natural cubic spline interpolation and dense arg-max scanning.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace enasep {

class CubicSpline {
 public:
  CubicSpline() = default;

  /// Interpolating natural cubic spline through (x, y); x strictly increasing.
  CubicSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw std::invalid_argument("CubicSpline: need >= 2 points with equal lengths");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("CubicSpline: x not increasing");
    m_.assign(n, 0.0);
    if (n == 2) return;

    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    std::vector<double> diag(n - 2), rhs(n - 2), upper(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < n - 2; ++i) {
      const double lower = x_[i + 1] - x_[i];
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i-- > 0;) {
      double v = rhs[i];
      if (i + 1 < n - 2) v -= upper[i] * m_[i + 2];
      m_[i + 1] = v / diag[i];
    }
  }

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

  /// Evaluate at t, clamped to [x_min, x_max].
  double operator()(double t) const {
    if (t < x_.front()) t = x_.front();
    if (t > x_.back()) t = x_.back();
    return eval_in(interval(t), t);
  }

  /// Arg-max over a regular lattice lo, lo+step, ..., <= hi (hi included when
  /// it lands on the lattice). Ties resolve to the smallest angle. Returns
  /// (argmax, value).
  std::pair<double, double> dense_argmax(double lo, double hi, double step = 0.01) const {
    lo = std::max(lo, x_.front());
    hi = std::min(hi, x_.back());
    if (!(hi > lo) || !(step > 0.0))
      throw std::invalid_argument("dense_argmax: bad lattice");
    const std::size_t n_steps = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    double best_x = lo, best_v = (*this)(lo);
    std::size_t seg = interval(lo);
    for (std::size_t s = 1; s <= n_steps; ++s) {
      const double t = lo + s * step;
      while (seg + 2 < x_.size() && t > x_[seg + 1]) ++seg;
      const double v = eval_in(seg, t);
      if (v > best_v) {
        best_v = v;
        best_x = t;
      }
    }
    return {best_x, best_v};
  }

 private:
  std::size_t interval(double t) const {
    if (t <= x_.front()) return 0;
    if (t >= x_.back()) return x_.size() - 2;
    std::size_t lo = 0, hi = x_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (x_[mid] <= t ? lo : hi) = mid;
    }
    return lo;
  }

  double eval_in(std::size_t i, double t) const {
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * (h * h) / 6.0;
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace enasep
