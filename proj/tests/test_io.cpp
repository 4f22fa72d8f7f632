#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "enasep/map_io.hpp"
#include "enasep/render.hpp"

using namespace enasep;
namespace fs = std::filesystem;

namespace {

fs::path tmpfile(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "enasep_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("map csv round trip is lossless and byte-stable") {
  SkyMap m = SkyMap::zeros(GridSpec::from_pixel_deg(30.0), make_rotation(221.5, 39.0, 0.0));
  for (std::size_t i = 0; i < m.rate.size(); ++i) {
    m.rate[i] = 0.1 + 0.01 * std::sin(static_cast<double>(i) * 0.7);
    m.var[i] = 1e-6 + 1e-7 * static_cast<double>(i % 7);
  }
  const auto p1 = tmpfile("round1.csv");
  const auto p2 = tmpfile("round2.csv");
  write_map_csv(m, p1.string());
  const SkyMap r = read_map_csv(p1.string());
  CHECK(r.grid == m.grid);
  CHECK(r.frame == m.frame);
  for (std::size_t i = 0; i < m.rate.size(); ++i) {
    CHECK(r.rate[i] == m.rate[i]);
    CHECK(r.var[i] == m.var[i]);
  }
  write_map_csv(r, p2.string());
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("map csv extra columns survive") {
  SkyMap m = SkyMap::zeros(GridSpec::from_pixel_deg(45.0), FrameSpec::base());
  std::vector<double> var_g(m.rate.size()), var_r(m.rate.size()), cov(m.rate.size());
  for (std::size_t i = 0; i < m.rate.size(); ++i) {
    var_g[i] = 0.5 * i;
    var_r[i] = 0.25 * i;
    cov[i] = -0.1 * i;
  }
  const auto p = tmpfile("extra.csv");
  write_map_csv(m, p.string(), {"var_g", "var_r", "cov_gr"}, {&var_g, &var_r, &cov});
  const MapCsv full = read_map_csv_full(p.string());
  REQUIRE(full.extra.size() == 3);
  CHECK(full.extra[0] == var_g);
  CHECK(full.extra[1] == var_r);
  CHECK(full.extra[2] == cov);
}

TEST_CASE("map csv errors") {
  CHECK_THROWS_AS(read_map_csv("/nonexistent/path.csv"), IoFailure);
  const auto p = tmpfile("short.csv");
  {
    std::ofstream f(p);
    f << "12,6,30,0,90,0\n1,2,3,4\n";  // missing pixel rows
  }
  CHECK_THROWS_AS(read_map_csv(p.string()), IoFailure);
}

TEST_CASE("pgm rendering maps rates linearly") {
  SkyMap m = SkyMap::zeros(GridSpec::from_pixel_deg(45.0), FrameSpec::base());
  const double lo = 0.0, hi = 0.3;
  for (auto& r : m.rate) r = lo;  // all black
  auto bytes = heatmap_bytes(m, lo, hi);
  for (auto b : bytes) CHECK(b == 0);
  for (auto& r : m.rate) r = hi;  // all white
  bytes = heatmap_bytes(m, lo, hi);
  for (auto b : bytes) CHECK(b == 255);
  // midpoint rounds half away from zero -> 128
  m.rate[0] = 0.5 * (lo + hi);
  bytes = heatmap_bytes(m, lo, hi);
  bool saw_mid = false;
  for (auto b : bytes)
    if (b == 128) saw_mid = true;
  CHECK(saw_mid);

  const auto p = tmpfile("img.pgm");
  render_heatmap(m, lo, hi, p.string());
  std::ifstream f(p, std::ios::binary);
  std::string header;
  std::getline(f, header);
  CHECK(header == "P5");
  CHECK_THROWS_AS(render_heatmap(m, 0.3, 0.3, p.string()), std::invalid_argument);
}
