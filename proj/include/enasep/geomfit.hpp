#pragma once

// Geometry for ribbon center estimation: orthogonal-regression plane fit by
// SVD, projection into the plane with a deterministic in-plane axis
// convention, direct least-squares ellipse fitting constrained to the
// ellipse family, and leave-one-out jackknife covariance of the ellipse
// center.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "enasep/errors.hpp"
#include "enasep/geom.hpp"

namespace enasep {

struct PlaneFit {
  UnitVec normal{0, 0, 1};
  double offset = 0.0;  // plane is { p : p . normal = offset }
  double rms = 0.0;
  UnitVec e1{1, 0, 0};  // in-plane axes; e1 = projected ecliptic x (or y)
  UnitVec e2{0, 1, 0};
};

/// Best fitting plane through 3-D points. The normal is the direction of the
/// smallest singular value of the centered point matrix, with its sign
/// chosen toward the hemisphere containing the centroid.
inline PlaneFit fit_plane_svd(const std::vector<UnitVec>& points) {
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateGeometry("fit_plane_svd: need >= 3 points");
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : points) c += Eigen::Vector3d(p.x, p.y, p.z);
  c /= static_cast<double>(n);
  Eigen::MatrixXd M(n, 3);
  for (std::size_t i = 0; i < n; ++i)
    M.row(static_cast<Eigen::Index>(i)) =
        (Eigen::Vector3d(points[i].x, points[i].y, points[i].z) - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[1] <= 1e-12 * std::max(sv[0], 1e-300))
    throw DegenerateGeometry("fit_plane_svd: points are collinear");
  Eigen::Vector3d nrm = svd.matrixV().col(2);
  if (nrm.dot(c) < 0.0) nrm = -nrm;

  PlaneFit fit;
  fit.normal = UnitVec{nrm[0], nrm[1], nrm[2]}.normalized();
  fit.offset = nrm.dot(c);
  double acc = 0.0;
  for (const auto& p : points) {
    const double d = p.x * nrm[0] + p.y * nrm[1] + p.z * nrm[2] - fit.offset;
    acc += d * d;
  }
  fit.rms = std::sqrt(acc / static_cast<double>(n));

  // In-plane axis convention: x-axis is the normalized projection of the
  // base-frame x direction onto the plane, falling back to the y direction
  // when the normal is nearly parallel to x.
  UnitVec ref{1, 0, 0};
  double along = ref.dot(fit.normal);
  UnitVec e1{ref.x - along * fit.normal.x, ref.y - along * fit.normal.y,
             ref.z - along * fit.normal.z};
  if (e1.norm() < 1e-6) {
    ref = UnitVec{0, 1, 0};
    along = ref.dot(fit.normal);
    e1 = UnitVec{ref.x - along * fit.normal.x, ref.y - along * fit.normal.y,
                 ref.z - along * fit.normal.z};
  }
  fit.e1 = e1.normalized();
  fit.e2 = fit.normal.cross(fit.e1);
  return fit;
}

/// Orthogonal projection into the plane followed by the rotation that takes
/// the plane normal to the z axis (Rodrigues); returns in-plane (x, y)
/// relative to the plane's closest point to the origin.
inline std::vector<std::array<double, 2>> project_to_plane(const std::vector<UnitVec>& points,
                                                           const PlaneFit& plane) {
  std::vector<std::array<double, 2>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const UnitVec& p = points[i];
    const double d = p.dot(plane.normal) - plane.offset;
    const UnitVec q{p.x - d * plane.normal.x, p.y - d * plane.normal.y,
                    p.z - d * plane.normal.z};
    out[i] = {q.dot(plane.e1), q.dot(plane.e2)};
  }
  return out;
}

/// Map in-plane coordinates back to 3-D.
inline UnitVec plane_point(const PlaneFit& plane, double x, double y) {
  return {plane.offset * plane.normal.x + x * plane.e1.x + y * plane.e2.x,
          plane.offset * plane.normal.y + x * plane.e1.y + y * plane.e2.y,
          plane.offset * plane.normal.z + x * plane.e1.z + y * plane.e2.z};
}

struct EllipseFit {
  double cx = 0.0, cy = 0.0;
  double semi_major = 0.0;  // a >= b > 0
  double semi_minor = 0.0;
  double angle_deg = 0.0;   // orientation of the major axis
  std::array<double, 6> conic{};  // a x^2 + b xy + c y^2 + d x + e y + f = 0
};

namespace detail {

/// Direct ellipse-specific least squares (Halir-Flusser partitioning of the
/// Fitzgibbon method) from precomputed scatter blocks:
/// S1 = D1'D1, S2 = D1'D2, S3 = D2'D2 with D1 = [x^2 xy y^2], D2 = [x y 1].
inline EllipseFit fit_ellipse_scatter(const Eigen::Matrix3d& S1, const Eigen::Matrix3d& S2,
                                      const Eigen::Matrix3d& S3) {
  Eigen::Matrix3d S3i;
  {
    Eigen::FullPivLU<Eigen::Matrix3d> lu(S3);
    if (!lu.isInvertible()) throw NotAnEllipse("ellipse fit: degenerate point configuration");
    S3i = lu.inverse();
  }
  const Eigen::Matrix3d T = -S3i * S2.transpose();
  const Eigen::Matrix3d M0 = S1 + S2 * T;
  Eigen::Matrix3d M;
  M.row(0) = M0.row(2) / 2.0;
  M.row(1) = -M0.row(1);
  M.row(2) = M0.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> eig(M);
  if (eig.info() != Eigen::Success) throw NotAnEllipse("ellipse fit: eigen solver failed");
  Eigen::Vector3d a1 = Eigen::Vector3d::Zero();
  bool found = false;
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(eig.eigenvalues()[i].imag()) > 1e-8 * (1.0 + std::fabs(eig.eigenvalues()[i].real())))
      continue;
    const Eigen::Vector3d v = eig.eigenvectors().col(i).real();
    const double cond = 4.0 * v[0] * v[2] - v[1] * v[1];
    if (cond > 0.0) {
      a1 = v;
      found = true;
      break;
    }
  }
  if (!found) throw NotAnEllipse("ellipse fit: no ellipse solution");
  const Eigen::Vector3d a2 = T * a1;

  EllipseFit fit;
  fit.conic = {a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]};
  const double A = a1[0], B = a1[1], C = a1[2], D = a2[0], E = a2[1], F = a2[2];
  const double den = 4.0 * A * C - B * B;
  if (den <= 0.0) throw NotAnEllipse("ellipse fit: not an ellipse");
  fit.cx = (B * E - 2.0 * C * D) / den;
  fit.cy = (B * D - 2.0 * A * E) / den;

  const double fc = A * fit.cx * fit.cx + B * fit.cx * fit.cy + C * fit.cy * fit.cy +
                    D * fit.cx + E * fit.cy + F;
  Eigen::Matrix2d A0;
  A0 << A, B / 2.0, B / 2.0, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A0);
  const double l1 = es.eigenvalues()[0], l2 = es.eigenvalues()[1];
  const double q1 = -fc / l1, q2 = -fc / l2;
  if (!(q1 > 0.0 && q2 > 0.0)) throw NotAnEllipse("ellipse fit: degenerate axes");
  const double r1 = std::sqrt(q1), r2 = std::sqrt(q2);
  // the smaller eigenvalue of A0 carries the major axis
  if (r1 >= r2) {
    fit.semi_major = r1;
    fit.semi_minor = r2;
    fit.angle_deg = std::atan2(es.eigenvectors()(1, 0), es.eigenvectors()(0, 0)) * kRadToDeg;
  } else {
    fit.semi_major = r2;
    fit.semi_minor = r1;
    fit.angle_deg = std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1)) * kRadToDeg;
  }
  return fit;
}

inline void ellipse_scatter(const std::vector<std::array<double, 2>>& pts, Eigen::Matrix3d& S1,
                            Eigen::Matrix3d& S2, Eigen::Matrix3d& S3) {
  S1.setZero();
  S2.setZero();
  S3.setZero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d1(p[0] * p[0], p[0] * p[1], p[1] * p[1]);
    const Eigen::Vector3d d2(p[0], p[1], 1.0);
    S1.noalias() += d1 * d1.transpose();
    S2.noalias() += d1 * d2.transpose();
    S3.noalias() += d2 * d2.transpose();
  }
}

}  // namespace detail

/// Direct least-squares conic fit constrained to the ellipse family.
inline EllipseFit fit_ellipse(const std::vector<std::array<double, 2>>& pts) {
  if (pts.size() < 6) throw NotAnEllipse("fit_ellipse: need >= 6 points");
  Eigen::Matrix3d S1, S2, S3;
  detail::ellipse_scatter(pts, S1, S2, S3);
  return detail::fit_ellipse_scatter(S1, S2, S3);
}

/// Leave-one-out jackknife covariance of the fitted ellipse center.
inline Eigen::Matrix2d jackknife_center_cov(const std::vector<std::array<double, 2>>& pts) {
  const std::size_t n = pts.size();
  if (n < 7) throw std::invalid_argument("jackknife_center_cov: need >= 7 points");
  Eigen::Matrix3d S1, S2, S3;
  detail::ellipse_scatter(pts, S1, S2, S3);

  std::vector<std::array<double, 2>> centers(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d d1(pts[i][0] * pts[i][0], pts[i][0] * pts[i][1], pts[i][1] * pts[i][1]);
    const Eigen::Vector3d d2(pts[i][0], pts[i][1], 1.0);
    const Eigen::Matrix3d S1i = S1 - d1 * d1.transpose();
    const Eigen::Matrix3d S2i = S2 - d1 * d2.transpose();
    const Eigen::Matrix3d S3i = S3 - d2 * d2.transpose();
    const EllipseFit fit = detail::fit_ellipse_scatter(S1i, S2i, S3i);
    centers[i] = {fit.cx, fit.cy};
  }
  double mx = 0.0, my = 0.0;
  for (const auto& c : centers) {
    mx += c[0];
    my += c[1];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& c : centers) {
    const Eigen::Vector2d d(c[0] - mx, c[1] - my);
    cov.noalias() += d * d.transpose();
  }
  cov *= (static_cast<double>(n) - 1.0) / static_cast<double>(n);
  return cov;
}

/// Intersections of the line through q along dir with the unit sphere.
/// Returns false when the line misses the sphere.
inline bool line_sphere_intersections(const UnitVec& q, const UnitVec& dir, UnitVec& p1,
                                      UnitVec& p2) {
  const double qd = q.dot(dir);
  const double qq = q.dot(q);
  const double disc = qd * qd - (qq - 1.0);
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  const double t1 = -qd + s, t2 = -qd - s;
  p1 = {q.x + t1 * dir.x, q.y + t1 * dir.y, q.z + t1 * dir.z};
  p2 = {q.x + t2 * dir.x, q.y + t2 * dir.y, q.z + t2 * dir.z};
  return true;
}

}  // namespace enasep
