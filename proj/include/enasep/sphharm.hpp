#pragma once

// Real, fully normalized spherical harmonics. The basis is orthonormal on
// the sphere, so Laplacian-power roughness penalties are diagonal with
// entries (l(l+1))^q per degree l.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "enasep/geom.hpp"

namespace enasep {

inline int sh_basis_size(int degree) { return (degree + 1) * (degree + 1); }

/// Column index of (l, m); m in [-l, l]. Layout: l blocks of 2l+1 entries.
inline int sh_index(int l, int m) { return l * l + l + m; }

/// Evaluate the real spherical harmonic basis at a direction.
/// out must have sh_basis_size(degree) entries.
inline void sh_eval(int degree, const UnitVec& v, double* out) {
  const double ct = std::clamp(v.z, -1.0, 1.0);
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  const double phi = std::atan2(v.y, v.x);

  // Normalized associated Legendre P̄_l^m via the standard stable
  // recurrences (no Condon-Shortley phase), P̄ orthonormal over [-1, 1]
  // jointly with the azimuthal factors below.
  const int L = degree;
  std::vector<double> P((L + 1) * (L + 2) / 2, 0.0);
  auto idx = [](int l, int m) { return l * (l + 1) / 2 + m; };
  P[idx(0, 0)] = std::sqrt(1.0 / (4.0 * kPi));
  if (L >= 1) {
    P[idx(1, 0)] = std::sqrt(3.0 / (4.0 * kPi)) * ct;
    P[idx(1, 1)] = std::sqrt(3.0 / (8.0 * kPi)) * st;
  }
  for (int l = 2; l <= L; ++l) {
    for (int m = 0; m <= l - 2; ++m) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
      const double b = std::sqrt(((2.0 * l + 1.0) * ((l - 1.0) * (l - 1.0) - m * m)) /
                                 ((2.0 * l - 3.0) * (static_cast<double>(l) * l - m * m)));
      P[idx(l, m)] = a * ct * P[idx(l - 1, m)] - b * P[idx(l - 2, m)];
    }
    // diagonal and sub-diagonal seeds
    P[idx(l, l)] = st * std::sqrt((2.0 * l + 1.0) / (2.0 * l)) * P[idx(l - 1, l - 1)];
    P[idx(l, l - 1)] = ct * std::sqrt(2.0 * l + 1.0) * P[idx(l - 1, l - 1)];
  }

  std::vector<double> cm(L + 1), sm(L + 1);
  cm[0] = 1.0;
  sm[0] = 0.0;
  if (L >= 1) {
    cm[1] = std::cos(phi);
    sm[1] = std::sin(phi);
    for (int m = 2; m <= L; ++m) {
      cm[m] = cm[m - 1] * cm[1] - sm[m - 1] * sm[1];
      sm[m] = sm[m - 1] * cm[1] + cm[m - 1] * sm[1];
    }
  }

  const double sqrt2 = std::sqrt(2.0);
  for (int l = 0; l <= L; ++l) {
    out[sh_index(l, 0)] = P[idx(l, 0)];
    for (int m = 1; m <= l; ++m) {
      out[sh_index(l, m)] = sqrt2 * P[idx(l, m)] * cm[m];
      out[sh_index(l, -m)] = sqrt2 * P[idx(l, m)] * sm[m];
    }
  }
}

/// Dense design matrix: one row per direction.
inline Eigen::MatrixXd sh_design_matrix(int degree, const std::vector<UnitVec>& dirs) {
  const int B = sh_basis_size(degree);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(dirs.size()), B);
  std::vector<double> row(B);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    sh_eval(degree, dirs[i], row.data());
    for (int b = 0; b < B; ++b) X(static_cast<Eigen::Index>(i), b) = row[b];
  }
  return X;
}

/// Diagonal roughness penalty: sum over derivative orders q of (l(l+1))^q.
inline Eigen::VectorXd sh_penalty_diagonal(int degree, const std::vector<int>& orders) {
  Eigen::VectorXd d(sh_basis_size(degree));
  for (int l = 0; l <= degree; ++l) {
    const double ll = static_cast<double>(l) * (l + 1);
    double p = 0.0;
    for (int q : orders) p += std::pow(ll, q);
    for (int m = -l; m <= l; ++m) d[sh_index(l, m)] = p;
  }
  return d;
}

}  // namespace enasep
