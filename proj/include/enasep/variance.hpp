#pragma once

// Variance algebra for the separated maps. With independent normal
// components G ~ N(mu_G, s2_g), R ~ N(mu_R, s2_r) and observation noise
// y | G + R ~ N(G + R, s2_y), the covariance of (G, R) conditional on y is
//
//   1 / (s2_g + s2_r + s2_y) * [ s2_g (s2_r + s2_y)   -s2_g s2_r          ]
//                              [ -s2_g s2_r           s2_r (s2_g + s2_y)  ]
//
// and the separation inflates total variance by 2 s2_g s2_r / (s2_g + s2_r
// + s2_y) relative to the conditional variance of the sum.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "enasep/errors.hpp"

namespace enasep {

enum class NoiseProvenance { InputColumn, ConfiguredModel };

/// Per-pixel variance of the observed rate given the true map.
struct NoiseModel {
  std::vector<double> sigma2_y;
  NoiseProvenance provenance = NoiseProvenance::ConfiguredModel;

  void validate() const {
    for (double v : sigma2_y)
      if (!(v >= 0.0)) throw std::invalid_argument("NoiseModel: sigma2_y must be >= 0");
  }
};

/// Marginal component variances recovered from the input-map variance
/// sigma2_m = Var(G + R | y) and the observation variance sigma2_y:
/// the total signal variance S solves sigma2_m = S sigma2_y / (S + sigma2_y),
/// and is split between ribbon and GDF by the ribbon fraction f.
inline std::pair<double, double> recover_components(double sigma2_m, double sigma2_y, double f) {
  if (!(f >= 0.0 && f <= 1.0))
    throw std::invalid_argument("recover_components: ribbon fraction must be in [0, 1]");
  if (sigma2_m == 0.0) return {0.0, 0.0};
  if (!(sigma2_m < sigma2_y))
    throw VarianceInversionPole("recover_components: sigma2_m must be < sigma2_y");
  const double S = sigma2_m * sigma2_y / (sigma2_y - sigma2_m);
  return {(1.0 - f) * S, f * S};  // (sigma2_g, sigma2_r)
}

struct Cond2x2 {
  double var_g = 0.0;
  double var_r = 0.0;
  double cov_gr = 0.0;
};

inline Cond2x2 conditional_variance(double sigma2_g, double sigma2_r, double sigma2_y) {
  if (!(sigma2_g >= 0.0 && sigma2_r >= 0.0 && sigma2_y >= 0.0))
    throw std::invalid_argument("conditional_variance: variances must be >= 0");
  const double total = sigma2_g + sigma2_r + sigma2_y;
  if (total == 0.0) throw AllZeroVariances("conditional_variance: all variances zero");
  Cond2x2 c;
  c.var_g = sigma2_g * (sigma2_r + sigma2_y) / total;
  c.var_r = sigma2_r * (sigma2_g + sigma2_y) / total;
  c.cov_gr = -sigma2_g * sigma2_r / total;
  return c;
}

/// Extra uncertainty attributable to the separation itself:
/// Var(G|y) + Var(R|y) - Var(G+R|y).
inline double inflation(double sigma2_g, double sigma2_r, double sigma2_y) {
  if (!(sigma2_g >= 0.0 && sigma2_r >= 0.0 && sigma2_y >= 0.0))
    throw std::invalid_argument("inflation: variances must be >= 0");
  const double total = sigma2_g + sigma2_r + sigma2_y;
  if (total == 0.0) throw AllZeroVariances("inflation: all variances zero");
  return 2.0 * sigma2_g * sigma2_r / total;
}

/// Conditional variance of the sum, Var(G + R | y).
inline double conditional_sum_variance(double sigma2_g, double sigma2_r, double sigma2_y) {
  const double total = sigma2_g + sigma2_r + sigma2_y;
  if (total == 0.0) throw AllZeroVariances("conditional_sum_variance: all variances zero");
  return (sigma2_g + sigma2_r) * sigma2_y / total;
}

struct VarianceSplit {
  std::vector<double> sigma2_g;
  std::vector<double> sigma2_r;
  std::vector<double> var_g_given_y;
  std::vector<double> var_r_given_y;
  std::vector<double> cov_gr_given_y;
  std::vector<double> inflation;
};

/// Per-pixel variance split for separated maps. ribbon_fraction is the share
/// of the signal variance assigned to the ribbon, typically
/// R / (R + G) of the estimated rates (0 where both vanish).
inline VarianceSplit split_variances(const std::vector<double>& sigma2_m,
                                     const NoiseModel& noise,
                                     const std::vector<double>& ribbon_fraction) {
  const std::size_t n = sigma2_m.size();
  if (noise.sigma2_y.size() != n || ribbon_fraction.size() != n)
    throw std::invalid_argument("split_variances: length mismatch");
  VarianceSplit out;
  out.sigma2_g.resize(n);
  out.sigma2_r.resize(n);
  out.var_g_given_y.resize(n);
  out.var_r_given_y.resize(n);
  out.cov_gr_given_y.resize(n);
  out.inflation.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [s2g, s2r] = recover_components(sigma2_m[i], noise.sigma2_y[i], ribbon_fraction[i]);
    out.sigma2_g[i] = s2g;
    out.sigma2_r[i] = s2r;
    if (s2g + s2r + noise.sigma2_y[i] == 0.0) {
      out.var_g_given_y[i] = out.var_r_given_y[i] = out.cov_gr_given_y[i] = 0.0;
      out.inflation[i] = 0.0;
      continue;
    }
    const Cond2x2 c = conditional_variance(s2g, s2r, noise.sigma2_y[i]);
    out.var_g_given_y[i] = c.var_g;
    out.var_r_given_y[i] = c.var_r;
    out.cov_gr_given_y[i] = c.cov_gr;
    out.inflation[i] = inflation(s2g, s2r, noise.sigma2_y[i]);
  }
  return out;
}

}  // namespace enasep
