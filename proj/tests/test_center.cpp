#include <catch_amalgamated.hpp>

#include <cmath>

#include "enasep/center.hpp"
#include "enasep/sim.hpp"

using namespace enasep;

namespace {

CenterOptions desk_options() {
  CenterOptions opt;
  opt.kron.smooth_degree = 6;
  return opt;
}

const SimScenario& desk_scenario() {
  static const SimScenario sc = SimScenario::preset(ScenarioId::S1);
  return sc;
}

const TruthPair& desk_truth() {
  static const TruthPair tp = gen_truth_pair(desk_scenario(), GridSpec::from_pixel_deg(6.0),
                                             NoiseMode::Ideal);
  return tp;
}

}  // namespace

TEST_CASE("working frame places the center antipode at the pole") {
  const FrameSpec wf = working_frame({221.5, 39.0});
  const UnitVec r = rotation_matrix(wf).apply(latlon_to_vec(41.5, -39.0));
  CHECK(r.z == Catch::Approx(1.0).margin(1e-12));
  // and the center itself lands on the south pole
  const UnitVec c = rotation_matrix(wf).apply(latlon_to_vec(221.5, 39.0));
  CHECK(c.z == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("center estimation from the truth frame is accurate on ideal input") {
  const TruthPair& tp = desk_truth();
  const CenterEstimate est =
      estimate_center(tp.observed, desk_scenario().ribbon_center, 24, 101, desk_options());
  const double err = angular_distance_deg({est.mean_lon, est.mean_lat},
                                          desk_scenario().ribbon_center);
  CHECK(err < 0.5);
  CHECK(est.n_failed == 0);
  CHECK(est.draws.size() == 24);
  // covariance is symmetric positive semidefinite
  CHECK(est.covariance(0, 1) == Catch::Approx(est.covariance(1, 0)).margin(1e-12));
  CHECK(est.covariance(0, 0) >= 0.0);
  CHECK(est.covariance.determinant() >= -1e-12);
}

TEST_CASE("estimation is deterministic given the seed") {
  const TruthPair& tp = desk_truth();
  const CenterEstimate a =
      estimate_center(tp.observed, desk_scenario().ribbon_center, 8, 55, desk_options());
  const CenterEstimate b =
      estimate_center(tp.observed, desk_scenario().ribbon_center, 8, 55, desk_options());
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    CHECK(a.draws[i].lon == b.draws[i].lon);
    CHECK(a.draws[i].lat == b.draws[i].lat);
  }
}

TEST_CASE("true-ribbon-only input is at least as accurate as ribbon plus gdf") {
  const TruthPair& tp = desk_truth();
  SkyMap ribbon_only = tp.ribbon_truth;
  ribbon_only.var = tp.observed.var;
  const CenterOptions opt = desk_options();
  const CenterEstimate full =
      estimate_center(tp.observed, desk_scenario().ribbon_center, 24, 77, opt);
  const CenterEstimate ribbon =
      estimate_center(ribbon_only, desk_scenario().ribbon_center, 24, 77, opt);
  const double err_full =
      angular_distance_deg({full.mean_lon, full.mean_lat}, desk_scenario().ribbon_center);
  const double err_ribbon =
      angular_distance_deg({ribbon.mean_lon, ribbon.mean_lat}, desk_scenario().ribbon_center);
  CHECK(err_ribbon <= err_full + 1e-9);
}

TEST_CASE("gdf-only maps cannot produce a center estimate") {
  SimScenario sc = desk_scenario();
  sc.base_amplitude = 0.0;
  const TruthPair tp = gen_truth_pair(sc, GridSpec::from_pixel_deg(6.0), NoiseMode::Ideal);
  CHECK_THROWS_AS(estimate_center(tp.observed, sc.ribbon_center, 10, 5, desk_options()),
                  CenterEstimationFailure);
}

TEST_CASE("tolerance of 360 degrees stops after exactly one iteration") {
  const TruthPair& tp = desk_truth();
  CenterOptions opt = desk_options();
  opt.tol_deg = 360.0;
  opt.max_iter = 10;
  const CenterEstimate est =
      iterate_center(tp.observed, desk_scenario().ribbon_center, 8, 3, opt);
  CHECK(est.n_iterations == 1);
  CHECK(est.converged);
}

TEST_CASE("iteration from the truth converges immediately") {
  const TruthPair& tp = desk_truth();
  CenterOptions opt = desk_options();
  opt.tol_deg = 0.2;
  const CenterEstimate est =
      iterate_center(tp.observed, desk_scenario().ribbon_center, 24, 9, opt);
  CHECK(est.converged);
  CHECK(est.n_iterations <= 2);
  const double err = angular_distance_deg({est.mean_lon, est.mean_lat},
                                          desk_scenario().ribbon_center);
  CHECK(err < 0.5);
}

TEST_CASE("iteration recovers from a ten-degree working-frame offset") {
  const TruthPair& tp = desk_truth();
  LonLat start = desk_scenario().ribbon_center;
  start.lon += 10.0 / std::cos(start.lat * kDegToRad) * 0.7071;
  start.lat += 10.0 * 0.7071;
  CenterOptions opt = desk_options();
  const CenterEstimate est = iterate_center(tp.observed, start, 24, 13, opt);
  const double err = angular_distance_deg({est.mean_lon, est.mean_lat},
                                          desk_scenario().ribbon_center);
  CHECK(err < 1.0);
}
