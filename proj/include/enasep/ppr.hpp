#pragma once

// Projection pursuit regression on 3-D pixel directions: greedy forward
// fitting of ridge terms g_k(a_k . p), each a cubic spline smoother of the
// residuals against the projection. Directions are found by scoring a
// Fibonacci lattice of candidates and refining the best with Nelder-Mead.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "enasep/bspline.hpp"
#include "enasep/geom.hpp"

namespace enasep {

struct PprOptions {
  int n_terms = 4;
  int n_dirs = 96;            // Fibonacci lattice candidates
  int refine_iters = 48;      // Nelder-Mead steps on (lon, lat) of the axis
  int spline_intervals = 28;
  std::size_t score_subsample = 4000;  // cap on points used to score directions
  double min_gain = 1e-7;     // relative RSS improvement to accept a term
};

struct RidgeTerm {
  UnitVec direction;
  Spline1D ridge;
  std::vector<double> ridge_samples;  // g on 101 equispaced projections
  double t_lo = 0.0, t_hi = 0.0;
};

struct PPRFit {
  std::vector<RidgeTerm> terms;
  std::vector<double> fitted;  // over all points, aligned with positions

  double predict(const UnitVec& p) const {
    double v = 0.0;
    for (const auto& t : terms) v += t.ridge(std::clamp(p.dot(t.direction), t.t_lo, t.t_hi));
    return v;
  }
};

namespace detail {

inline std::vector<UnitVec> fibonacci_sphere(int n) {
  std::vector<UnitVec> dirs(n);
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs[i] = {r * std::cos(ga * i), r * std::sin(ga * i), z};
  }
  return dirs;
}

}  // namespace detail

/// Fit ridge terms to residuals at unit-vector positions. weights empty =
/// unit; zero-weight points are predicted but do not drive the fit. Returns
/// a zero fit when no direction improves on the constant model.
inline PPRFit fit_ppr_residuals(const std::vector<double>& residuals,
                                const std::vector<UnitVec>& positions,
                                const std::vector<double>& weights, int n_terms,
                                const PprOptions& opt_in = {}) {
  PprOptions opt = opt_in;
  opt.n_terms = n_terms;
  const std::size_t n = positions.size();
  if (residuals.size() != n)
    throw std::invalid_argument("fit_ppr_residuals: size mismatch");
  if (!weights.empty() && weights.size() != n)
    throw std::invalid_argument("fit_ppr_residuals: weight length mismatch");
  if (n_terms < 1) throw std::invalid_argument("fit_ppr_residuals: n_terms must be >= 1");

  std::vector<std::size_t> included;
  included.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (weights.empty() || weights[i] > 0.0) included.push_back(i);
  if (included.size() < 50)
    throw std::invalid_argument("fit_ppr_residuals: need >= 50 included points");

  // subsample for direction scoring only
  std::vector<std::size_t> score_set = included;
  if (score_set.size() > opt.score_subsample) {
    const std::size_t stride = score_set.size() / opt.score_subsample + 1;
    std::vector<std::size_t> sub;
    for (std::size_t i = 0; i < score_set.size(); i += stride) sub.push_back(score_set[i]);
    score_set = std::move(sub);
  }

  PPRFit fit;
  fit.fitted.assign(n, 0.0);
  std::vector<double> r(residuals);

  auto rss_for_dir = [&](const UnitVec& a, const std::vector<std::size_t>& pts) {
    std::vector<double> t(pts.size()), y(pts.size()), w(pts.size());
    for (std::size_t s = 0; s < pts.size(); ++s) {
      const std::size_t i = pts[s];
      t[s] = positions[i].dot(a);
      y[s] = r[i];
      w[s] = weights.empty() ? 1.0 : weights[i];
    }
    return pspline_fit(t, y, w, opt.spline_intervals);
  };

  for (int term = 0; term < opt.n_terms; ++term) {
    double rss0 = 0.0;
    for (std::size_t i : included) {
      const double wi = weights.empty() ? 1.0 : weights[i];
      rss0 += wi * r[i] * r[i];
    }
    if (rss0 <= 0.0) break;

    const auto cands = detail::fibonacci_sphere(opt.n_dirs);
    UnitVec best_dir = cands[0];
    double best_rss = std::numeric_limits<double>::infinity();
    for (const auto& a : cands) {
      const double rss = rss_for_dir(a, score_set).rss;
      if (rss < best_rss) {
        best_rss = rss;
        best_dir = a;
      }
    }

    // Nelder-Mead on (lon, lat) of the axis around the best candidate.
    {
      const LonLat c = vec_to_latlon(best_dir);
      const double step = 360.0 / std::sqrt(static_cast<double>(opt.n_dirs)) * 0.5;
      std::array<std::array<double, 2>, 3> simplex{{{c.lon, c.lat},
                                                    {c.lon + step, c.lat},
                                                    {c.lon, std::min(c.lat + step, 89.0)}}};
      std::array<double, 3> fv;
      auto eval = [&](const std::array<double, 2>& q) {
        return rss_for_dir(latlon_to_vec(q[0], std::clamp(q[1], -89.9, 89.9)), score_set).rss;
      };
      for (int i = 0; i < 3; ++i) fv[i] = eval(simplex[i]);
      for (int it = 0; it < opt.refine_iters; ++it) {
        std::array<int, 3> ord{0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const auto& bestp = simplex[ord[0]];
        const auto& worstp = simplex[ord[2]];
        std::array<double, 2> centroid{0.5 * (bestp[0] + simplex[ord[1]][0]),
                                       0.5 * (bestp[1] + simplex[ord[1]][1])};
        std::array<double, 2> refl{2.0 * centroid[0] - worstp[0], 2.0 * centroid[1] - worstp[1]};
        double fr = eval(refl);
        if (fr < fv[ord[0]]) {
          std::array<double, 2> exp_{3.0 * centroid[0] - 2.0 * worstp[0],
                                     3.0 * centroid[1] - 2.0 * worstp[1]};
          const double fe = eval(exp_);
          if (fe < fr) {
            simplex[ord[2]] = exp_;
            fv[ord[2]] = fe;
          } else {
            simplex[ord[2]] = refl;
            fv[ord[2]] = fr;
          }
        } else if (fr < fv[ord[1]]) {
          simplex[ord[2]] = refl;
          fv[ord[2]] = fr;
        } else {
          std::array<double, 2> con{0.5 * (centroid[0] + worstp[0]),
                                    0.5 * (centroid[1] + worstp[1])};
          const double fc = eval(con);
          if (fc < fv[ord[2]]) {
            simplex[ord[2]] = con;
            fv[ord[2]] = fc;
          } else {
            for (int i : {ord[1], ord[2]}) {
              simplex[i] = {0.5 * (simplex[i][0] + bestp[0]), 0.5 * (simplex[i][1] + bestp[1])};
              fv[i] = eval(simplex[i]);
            }
          }
        }
      }
      int bi = 0;
      for (int i = 1; i < 3; ++i)
        if (fv[i] < fv[bi]) bi = i;
      if (fv[bi] < best_rss) {
        best_rss = fv[bi];
        best_dir = latlon_to_vec(simplex[bi][0], std::clamp(simplex[bi][1], -89.9, 89.9));
      }
    }

    // Final ridge fit on all included points.
    const auto ridge = rss_for_dir(best_dir, included);
    if (ridge.rss >= rss0 * (1.0 - opt.min_gain)) break;  // no structure found

    RidgeTerm rt;
    rt.direction = best_dir;
    rt.ridge = ridge.spline;
    rt.t_lo = ridge.spline.basis.lo();
    rt.t_hi = ridge.spline.basis.hi();
    rt.ridge_samples.resize(101);
    for (int s = 0; s <= 100; ++s)
      rt.ridge_samples[s] = rt.ridge(rt.t_lo + (rt.t_hi - rt.t_lo) * s / 100.0);
    fit.terms.push_back(rt);

    for (std::size_t i = 0; i < n; ++i) {
      const double g = rt.ridge(std::clamp(positions[i].dot(best_dir), rt.t_lo, rt.t_hi));
      fit.fitted[i] += g;
      r[i] -= g;
    }
  }
  return fit;
}

}  // namespace enasep
