#include <catch_amalgamated.hpp>

#include <cmath>

#include "enasep/gdf.hpp"
#include "enasep/reframe.hpp"
#include "enasep/center.hpp"
#include "enasep/sim.hpp"

using namespace enasep;

namespace {

GdfOptions desk_options() {
  GdfOptions opt;
  opt.smooth.degree = 8;
  opt.ppr.n_dirs = 48;
  opt.ppr_terms = 3;
  return opt;
}

RibbonMask band_mask(const GridSpec& g, double lo, double hi) {
  RibbonMask mask;
  mask.lower_polar.assign(g.n_lon, lo);
  mask.upper_polar.assign(g.n_lon, hi);
  mask.offset_lo_px = static_cast<int>((lo - 0.5 * (lo + hi)) / g.pixel_deg);
  mask.offset_hi_px = static_cast<int>((hi - 0.5 * (lo + hi)) / g.pixel_deg);
  return mask;
}

}  // namespace

TEST_CASE("empty mask returns the map unchanged") {
  const SimScenario sc = SimScenario::preset(ScenarioId::S1);
  const GridSpec g = GridSpec::from_pixel_deg(6.0);
  const SkyMap m = gen_gdf(sc, g);
  RibbonMask none;
  none.lower_polar.assign(g.n_lon, 1.0);
  none.upper_polar.assign(g.n_lon, 0.0);  // empty window
  const SkyMap out = initial_gdf(m, none, desk_options());
  CHECK(out.rate == m.rate);
}

TEST_CASE("initial gdf equals the map exactly outside the mask") {
  const SimScenario sc = SimScenario::preset(ScenarioId::S1);
  const GridSpec g = GridSpec::from_pixel_deg(6.0);
  const TruthPair tp = gen_truth_pair(sc, g, NoiseMode::Ideal);
  const SkyMap working = reframe_map(tp.observed, working_frame(sc.ribbon_center));
  const RibbonMask mask = band_mask(g, 84.0, 126.0);
  const auto flags = mask.pixel_flags(g);
  const SkyMap out = initial_gdf(working, mask, desk_options());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!flags[i]) CHECK(out.rate[i] == working.rate[i]);
    CHECK(out.rate[i] >= 0.0);
  }
}

TEST_CASE("initial gdf under the ribbon tracks the truth on ideal input") {
  const SimScenario sc = SimScenario::preset(ScenarioId::S1);
  const GridSpec g = GridSpec::from_pixel_deg(6.0);
  const TruthPair tp = gen_truth_pair(sc, g, NoiseMode::Ideal);
  const FrameSpec wf = working_frame(sc.ribbon_center);
  const ReframeOperator op(g, tp.observed.frame, wf);
  const SkyMap working = op.apply(tp.observed);
  const SkyMap gdf_truth_w = op.apply(tp.gdf_truth);

  const RibbonMask mask = band_mask(g, 87.0, 125.0);
  const auto flags = mask.pixel_flags(g);
  const SkyMap out = initial_gdf(working, mask, desk_options());

  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!flags[i] || gdf_truth_w.rate[i] <= 0.0) continue;
    acc += std::fabs(out.rate[i] - gdf_truth_w.rate[i]) / gdf_truth_w.rate[i];
    ++n;
  }
  REQUIRE(n > 0);
  CHECK(acc / static_cast<double>(n) <= 0.10);
}
