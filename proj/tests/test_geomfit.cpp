#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "enasep/geomfit.hpp"

using namespace enasep;

namespace {

std::vector<UnitVec> circle_points(int n, double z, double r, double phase = 0.0) {
  std::vector<UnitVec> pts;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * kPi * i / n;
    pts.push_back({r * std::cos(a), r * std::sin(a), z});
  }
  return pts;
}

}  // namespace

TEST_CASE("plane through z = 0.5 is exact") {
  const auto pts = circle_points(24, 0.5, std::sqrt(0.75));
  const PlaneFit fit = fit_plane_svd(pts);
  CHECK(std::fabs(fit.normal.x) < 1e-12);
  CHECK(std::fabs(fit.normal.y) < 1e-12);
  CHECK(fit.normal.z == Catch::Approx(1.0).margin(1e-12));
  CHECK(fit.offset == Catch::Approx(0.5).margin(1e-12));
  CHECK(fit.rms < 1e-12);
}

TEST_CASE("noisy plane normal recovered to a tenth of a degree") {
  const UnitVec truth = latlon_to_vec(200.0, 55.0);
  // orthonormal base in the plane p . truth = 0.3
  UnitVec e1{-truth.y, truth.x, 0.0};
  e1 = e1.normalized();
  const UnitVec e2 = truth.cross(e1);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 1e-3);
  std::vector<UnitVec> pts;
  for (int i = 0; i < 90; ++i) {
    const double a = 2.0 * kPi * i / 90.0;
    const double r = 0.9;
    UnitVec p{0.3 * truth.x + r * (std::cos(a) * e1.x + std::sin(a) * e2.x),
              0.3 * truth.y + r * (std::cos(a) * e1.y + std::sin(a) * e2.y),
              0.3 * truth.z + r * (std::cos(a) * e1.z + std::sin(a) * e2.z)};
    p.x += noise(gen);
    p.y += noise(gen);
    p.z += noise(gen);
    pts.push_back(p);
  }
  const PlaneFit fit = fit_plane_svd(pts);
  const double angle = std::acos(std::clamp(std::fabs(fit.normal.dot(truth)), -1.0, 1.0)) * kRadToDeg;
  CHECK(angle < 0.1);
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(fit_plane_svd({{0, 0, 1}, {1, 0, 0}}), DegenerateGeometry);
  std::vector<UnitVec> collinear;
  for (int i = 0; i < 8; ++i) collinear.push_back({0.1 * i, 0.2 * i, 0.05 * i});
  CHECK_THROWS_AS(fit_plane_svd(collinear), DegenerateGeometry);
}

TEST_CASE("projection leaves in-plane points unchanged and is idempotent") {
  const auto pts = circle_points(12, 0.5, 0.8);
  const PlaneFit fit = fit_plane_svd(pts);
  const auto planar = project_to_plane(pts, fit);
  for (int i = 0; i < 12; ++i) {
    CHECK(planar[i][0] == Catch::Approx(pts[i].x).margin(1e-12));
    CHECK(planar[i][1] == Catch::Approx(pts[i].y).margin(1e-12));
  }
  // idempotent: re-projecting the back-mapped points changes nothing
  std::vector<UnitVec> back;
  for (const auto& p : planar) back.push_back(plane_point(fit, p[0], p[1]));
  const auto planar2 = project_to_plane(back, fit);
  for (int i = 0; i < 12; ++i) {
    CHECK(planar2[i][0] == Catch::Approx(planar[i][0]).margin(1e-12));
    CHECK(planar2[i][1] == Catch::Approx(planar[i][1]).margin(1e-12));
  }
}

TEST_CASE("projection preserves in-plane distances") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const UnitVec normal = latlon_to_vec(33.0, 21.0);
  UnitVec e1{-normal.y, normal.x, 0.0};
  e1 = e1.normalized();
  const UnitVec e2 = normal.cross(e1);
  std::vector<UnitVec> pts;
  for (int i = 0; i < 40; ++i) {
    const double a = u(gen), b = u(gen);
    pts.push_back({0.4 * normal.x + a * e1.x + b * e2.x, 0.4 * normal.y + a * e1.y + b * e2.y,
                   0.4 * normal.z + a * e1.z + b * e2.z});
  }
  const PlaneFit fit = fit_plane_svd(pts);
  const auto planar = project_to_plane(pts, fit);
  for (int i = 1; i < 40; ++i) {
    const double d3 = std::sqrt(
        (pts[i].x - pts[0].x) * (pts[i].x - pts[0].x) +
        (pts[i].y - pts[0].y) * (pts[i].y - pts[0].y) +
        (pts[i].z - pts[0].z) * (pts[i].z - pts[0].z));
    const double d2 = std::hypot(planar[i][0] - planar[0][0], planar[i][1] - planar[0][1]);
    CHECK(d2 == Catch::Approx(d3).margin(1e-12));
  }
}

TEST_CASE("exact circle center recovered to 1e-8") {
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 180; ++i) {
    const double a = 2.0 * kPi * i / 180.0;
    pts.push_back({0.2 + 0.7 * std::cos(a), -0.1 + 0.7 * std::sin(a)});
  }
  const EllipseFit fit = fit_ellipse(pts);
  CHECK(std::fabs(fit.cx - 0.2) < 1e-8);
  CHECK(std::fabs(fit.cy + 0.1) < 1e-8);
  CHECK(fit.semi_major == Catch::Approx(0.7).margin(1e-8));
  CHECK(fit.semi_minor == Catch::Approx(0.7).margin(1e-8));
}

TEST_CASE("rotated ellipse parameters recovered from noiseless samples") {
  const double a = 0.7, b = 0.6, theta = 30.0 * kDegToRad;
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 120; ++i) {
    const double t = 2.0 * kPi * i / 120.0;
    const double x = a * std::cos(t), y = b * std::sin(t);
    pts.push_back({0.05 + x * std::cos(theta) - y * std::sin(theta),
                   -0.02 + x * std::sin(theta) + y * std::cos(theta)});
  }
  const EllipseFit fit = fit_ellipse(pts);
  CHECK(fit.cx == Catch::Approx(0.05).margin(1e-6));
  CHECK(fit.cy == Catch::Approx(-0.02).margin(1e-6));
  CHECK(fit.semi_major == Catch::Approx(0.7).margin(1e-6));
  CHECK(fit.semi_minor == Catch::Approx(0.6).margin(1e-6));
  const double ang = std::fmod(std::fmod(fit.angle_deg, 180.0) + 180.0, 180.0);
  CHECK(ang == Catch::Approx(30.0).margin(1e-4));
  // ellipse discriminant condition
  CHECK(fit.conic[1] * fit.conic[1] - 4.0 * fit.conic[0] * fit.conic[2] < 0.0);
}

TEST_CASE("collinear points are not an ellipse") {
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0.1 * i, 0.2 * i});
  CHECK_THROWS_AS(fit_ellipse(pts), NotAnEllipse);
  CHECK_THROWS_AS(fit_ellipse({{0, 0}, {1, 1}, {2, 2}}), NotAnEllipse);
}

TEST_CASE("jackknife of identical leave-one-out fits is the zero matrix") {
  // points exactly on a circle: every leave-one-out center is identical
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 16; ++i) {
    const double t = 2.0 * kPi * i / 16.0;
    pts.push_back({0.3 * std::cos(t), 0.3 * std::sin(t)});
  }
  const Eigen::Matrix2d cov = jackknife_center_cov(pts);
  CHECK(std::fabs(cov(0, 0)) < 1e-12);
  CHECK(std::fabs(cov(1, 1)) < 1e-12);
  CHECK(std::fabs(cov(0, 1)) < 1e-12);
}

TEST_CASE("jackknife matches the direct formula on a perturbed octagon") {
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 8; ++i) {
    const double t = 2.0 * kPi * i / 8.0;
    pts.push_back({0.5 * std::cos(t), 0.5 * std::sin(t)});
  }
  pts[2][0] += 0.01;
  pts[5][1] -= 0.02;
  const Eigen::Matrix2d fast = jackknife_center_cov(pts);

  // direct oracle: refit each leave-one-out subset from scratch
  std::vector<std::array<double, 2>> centers;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::array<double, 2>> sub;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) sub.push_back(pts[j]);
    const EllipseFit f = fit_ellipse(sub);
    centers.push_back({f.cx, f.cy});
  }
  double mx = 0, my = 0;
  for (const auto& c : centers) {
    mx += c[0];
    my += c[1];
  }
  mx /= centers.size();
  my /= centers.size();
  Eigen::Matrix2d oracle = Eigen::Matrix2d::Zero();
  for (const auto& c : centers) {
    const Eigen::Vector2d d(c[0] - mx, c[1] - my);
    oracle += d * d.transpose();
  }
  oracle *= (static_cast<double>(centers.size()) - 1.0) / static_cast<double>(centers.size());
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(fast(r, c) == Catch::Approx(oracle(r, c)).margin(1e-12));
  // symmetric positive semidefinite
  CHECK(fast(0, 1) == Catch::Approx(fast(1, 0)).margin(1e-15));
  CHECK(fast(0, 0) >= 0.0);
  CHECK(fast.determinant() >= -1e-18);
}

TEST_CASE("jackknife needs at least 7 points") {
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 6; ++i) {
    const double t = 2.0 * kPi * i / 6.0;
    pts.push_back({std::cos(t), std::sin(t)});
  }
  CHECK_THROWS_AS(jackknife_center_cov(pts), std::invalid_argument);
}

TEST_CASE("line-sphere intersections lie on the sphere and the line") {
  const UnitVec q{0.2, -0.1, 0.3};
  const UnitVec dir = latlon_to_vec(77.0, 12.0);
  UnitVec p1, p2;
  REQUIRE(line_sphere_intersections(q, dir, p1, p2));
  for (const auto& p : {p1, p2}) {
    CHECK(p.norm() == Catch::Approx(1.0).margin(1e-12));
    // p - q is parallel to dir
    const UnitVec d{p.x - q.x, p.y - q.y, p.z - q.z};
    const UnitVec cr = d.cross(dir);
    CHECK(cr.norm() < 1e-12);
  }
  // a line far outside misses
  UnitVec a, b;
  CHECK_FALSE(line_sphere_intersections({2.0, 2.0, 0.0}, {0, 0, 1}, a, b));
}
