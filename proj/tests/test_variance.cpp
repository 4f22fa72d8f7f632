#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "enasep/variance.hpp"

using namespace enasep;

TEST_CASE("component recovery inverts the conditional variance identity") {
  const auto [s2g, s2r] = recover_components(1.0, 2.0, 0.5);
  CHECK(s2g == Catch::Approx(1.0));
  CHECK(s2r == Catch::Approx(1.0));
  // check the defining property: Var(G+R | y) = S s2y / (S + s2y)
  const double S = s2g + s2r;
  CHECK(S * 2.0 / (S + 2.0) == Catch::Approx(1.0));
}

TEST_CASE("zero ribbon fraction sends all signal variance to the gdf") {
  const auto [s2g, s2r] = recover_components(0.5, 2.0, 0.0);
  CHECK(s2r == 0.0);
  CHECK(s2g > 0.0);
}

TEST_CASE("the inversion pole is reported") {
  CHECK_THROWS_AS(recover_components(2.0, 2.0, 0.5), VarianceInversionPole);
  CHECK_THROWS_AS(recover_components(3.0, 2.0, 0.5), VarianceInversionPole);
}

TEST_CASE("conditional variance at (1,1,1)") {
  const Cond2x2 c = conditional_variance(1.0, 1.0, 1.0);
  CHECK(c.var_g == 2.0 / 3.0);
  CHECK(c.var_r == 2.0 / 3.0);
  CHECK(c.cov_gr == -1.0 / 3.0);
}

TEST_CASE("degenerate component cases") {
  const Cond2x2 a = conditional_variance(0.7, 0.0, 0.4);
  CHECK(a.var_r == 0.0);
  CHECK(a.cov_gr == 0.0);
  CHECK(a.var_g == Catch::Approx(0.7 * 0.4 / 1.1));
  // perfectly observed sum
  const Cond2x2 b = conditional_variance(0.5, 0.25, 0.0);
  const double expect = 0.5 * 0.25 / 0.75;
  CHECK(b.var_g == Catch::Approx(expect));
  CHECK(b.var_r == Catch::Approx(expect));
  CHECK(b.cov_gr == Catch::Approx(-expect));
  CHECK_THROWS_AS(conditional_variance(0.0, 0.0, 0.0), AllZeroVariances);
  CHECK_THROWS_AS(inflation(0.0, 0.0, 0.0), AllZeroVariances);
}

TEST_CASE("inflation identity over random nonnegative triples") {
  CHECK(inflation(1.0, 1.0, 1.0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
  CHECK(inflation(0.3, 0.0, 0.9) == 0.0);
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 10000; ++t) {
    double g = u(gen), r = u(gen), y = u(gen);
    if (t % 17 == 0) g = 0.0;
    if (t % 23 == 0) r = 0.0;
    if (g + r + y == 0.0) continue;
    const Cond2x2 c = conditional_variance(g, r, y);
    const double lhs = c.var_g + c.var_r - conditional_sum_variance(g, r, y);
    const double rhs = inflation(g, r, y);
    CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, rhs));
    // matrix structure
    CHECK(c.var_g >= 0.0);
    CHECK(c.var_r >= 0.0);
    CHECK(c.cov_gr <= 0.0);
    CHECK(c.var_g * c.var_r - c.cov_gr * c.cov_gr >= -1e-15);
    // conditioning reduces variance
    CHECK(c.var_g <= g + 1e-15);
    CHECK(c.var_r <= r + 1e-15);
  }
}

TEST_CASE("vectorized split matches the scalar operations") {
  std::vector<double> s2m{0.5, 0.0, 0.2};
  NoiseModel noise;
  noise.sigma2_y = {2.0, 1.0, 0.5};
  std::vector<double> frac{0.5, 0.0, 1.0};
  const VarianceSplit out = split_variances(s2m, noise, frac);
  const auto [g0, r0] = recover_components(0.5, 2.0, 0.5);
  const Cond2x2 c0 = conditional_variance(g0, r0, 2.0);
  CHECK(out.var_g_given_y[0] == Catch::Approx(c0.var_g));
  CHECK(out.var_r_given_y[0] == Catch::Approx(c0.var_r));
  CHECK(out.cov_gr_given_y[0] == Catch::Approx(c0.cov_gr));
  // zero map variance: nothing to split
  CHECK(out.sigma2_g[1] == 0.0);
  CHECK(out.sigma2_r[1] == 0.0);
  // all signal assigned to the ribbon
  CHECK(out.sigma2_g[2] == 0.0);
  CHECK(out.sigma2_r[2] > 0.0);
}
