#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tempdir.hpp"
#include "tiad/error.hpp"
#include "tiad/maskgen.hpp"
#include "tiad/rng.hpp"

using namespace tiad;
using namespace tiad::maskgen;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

double angle_diff(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

UtcSeconds at(int y, unsigned mo, unsigned d, int hh, int mm) {
  return days_from_civil(y, mo, d) * 86400 + hh * 3600 + mm * 60;
}

}  // namespace

TEST_CASE("solar position against an independent SPA implementation") {
  // Apparent azimuth/elevation from the NREL SPA (pvlib), standard atmosphere.
  struct Ref {
    UtcSeconds t;
    double lat, lon, azimuth, elevation;
  };
  const Ref refs[] = {
      {at(2023, 2, 12, 8, 50), 36.161, 36.222, 161.573877, 38.198882},
      {at(2023, 3, 20, 12, 7), 0.0, 0.0, 139.700472, 89.799106},
      {at(2021, 6, 21, 10, 30), 48.85, 2.35, 140.001894, 59.845351},
      {at(2030, 12, 1, 3, 15), -33.87, 151.21, 295.224469, 66.631501},
      {at(2005, 9, 9, 17, 45), 40.0, -105.0, 150.296968, 51.494416},
  };
  for (const auto& r : refs) {
    const auto sun = solar_position(r.t, r.lat, r.lon);
    CAPTURE(format_utc(r.t));
    CHECK(std::abs(sun.elevation_deg - r.elevation) < 0.2);
    // Azimuth is ill-conditioned right at the zenith.
    if (r.elevation < 85.0) CHECK(angle_diff(sun.azimuth_deg, r.azimuth) < 0.2);
    CHECK(sun.azimuth_deg >= 0.0);
    CHECK(sun.azimuth_deg < 360.0);
  }
}

TEST_CASE("solar position sanity") {
  CHECK(std::abs(solar_position(at(2023, 3, 20, 12, 7), 0, 0).elevation_deg - 90.0) < 1.0);
  CHECK(solar_position(at(2023, 3, 20, 0, 7), 0, 0).elevation_deg < 0.0);
}

TEST_CASE("hillshade of flat terrain") {
  const auto dem = flat_dem(5, 7, 120.0);
  for (double elev : {90.0, 30.0, 55.0}) {
    const auto hs = hillshade(dem, {123.0, elev});
    for (double v : hs) CHECK(v == doctest::Approx(std::sin(elev * kDeg)).epsilon(1e-12));
  }
  const auto hs90 = hillshade(dem, {0.0, 90.0});
  for (double v : hs90) CHECK(v == 1.0);
  const auto shadow = topo_shadow(hillshade(dem, {200.0, 30.0}));
  CHECK(count_true(shadow) == 0);
}

TEST_CASE("hillshade of inclined planes matches the surface-normal closed form") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const double ge = rng.uniform(-2, 2), gn = rng.uniform(-2, 2);  // dz/d(east), dz/d(north)
    const double cs = rng.uniform(5, 30);
    const SolarGeometry sun{rng.uniform(0, 360), rng.uniform(1, 89)};
    DemGrid dem{Grid<double>(6, 6), cs};
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) dem.heights(r, c) = 100.0 + ge * c * cs + gn * (-r) * cs;
    const double z = (90.0 - sun.elevation_deg) * kDeg, az = sun.azimuth_deg * kDeg;
    const double norm = std::sqrt(1 + ge * ge + gn * gn);
    const double expected = std::max(
        0.0, (-ge * std::sin(z) * std::sin(az) - gn * std::sin(z) * std::cos(az) + std::cos(z)) / norm);
    const auto hs = hillshade(dem, sun);
    for (int r = 1; r < 5; ++r)
      for (int c = 1; c < 5; ++c) CHECK(std::abs(hs(r, c) - expected) < 1e-9);
  }
}

TEST_CASE("topographic shadow threshold is strict") {
  Grid<double> hs(1, 4);
  hs[0] = 0.5;
  hs[1] = 0.49;
  hs[2] = 0.5000001;
  hs[3] = 0.0;
  const auto s = topo_shadow(hs);
  CHECK(s[0] == 0);
  CHECK(s[1] == 1);
  CHECK(s[2] == 0);
  CHECK(s[3] == 1);
}

TEST_CASE("shadow offsets") {
  const auto off = shadow_offset_pixels(1000.0, {180.0, 45.0}, 10.0);
  CHECK(off.first == -100);
  CHECK(off.second == 0);
  const auto east = shadow_offset_pixels(1000.0, {270.0, 45.0}, 10.0);
  CHECK(east.first == 0);
  CHECK(east.second == 100);
  const auto zero = shadow_offset_pixels(3000.0, {33.0, 90.0}, 10.0);
  CHECK(zero.first == 0);
  CHECK(zero.second == 0);
}

TEST_CASE("cloud shadow projection") {
  SUBCASE("overhead sun is the identity") {
    Rng rng(1);
    BoolGrid cloud(20, 20);
    for (auto& v : cloud) v = rng.uniform() < 0.2;
    CHECK(cloud_shadow_project(cloud, {77.0, 90.0}) == cloud);
  }
  SUBCASE("single cloud, sun due south: shadow due north at 50..300 px") {
    BoolGrid cloud(400, 9, 0);
    cloud(350, 4) = 1;
    const auto shadow = cloud_shadow_project(cloud, {180.0, 45.0});
    std::set<int> expected_rows;
    for (int k = 0; k <= 10; ++k) expected_rows.insert(350 - static_cast<int>(std::lround((500.0 + 250.0 * k) / 10.0)));
    std::set<int> rows;
    for (int r = 0; r < 400; ++r)
      for (int c = 0; c < 9; ++c)
        if (shadow(r, c)) {
          CHECK(c == 4);
          rows.insert(r);
        }
    CHECK(rows == expected_rows);
    CHECK(*rows.begin() == 50);
    CHECK(*rows.rbegin() == 300);
  }
  SUBCASE("brute-force union of shifts for random geometry") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      const int h = 40, w = 50;
      BoolGrid cloud(h, w);
      for (auto& v : cloud) v = rng.uniform() < 0.05;
      const SolarGeometry sun{rng.uniform(0, 360), rng.uniform(60, 89)};
      const double ps = rng.uniform(20, 60);
      BoolGrid expected(h, w, 0);
      for (double height = 500; height <= 3000; height += 250) {
        const double d = height * std::tan((90 - sun.elevation_deg) * kDeg);
        const double away = (sun.azimuth_deg + 180) * kDeg;
        const long dr = std::lround(-d * std::cos(away) / ps), dc = std::lround(d * std::sin(away) / ps);
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c)
            if (cloud(r, c) && r + dr >= 0 && r + dr < h && c + dc >= 0 && c + dc < w) expected(r + dr, c + dc) = 1;
      }
      CHECK(cloud_shadow_project(cloud, sun, ps) == expected);
    }
  }
  SUBCASE("sun below the horizon") {
    BoolGrid cloud(4, 4, 0);
    CHECK_THROWS_AS(cloud_shadow_project(cloud, {100.0, 0.0}), SunBelowHorizon);
    CHECK_THROWS_AS(cloud_shadow_project(cloud, {100.0, -5.0}), SunBelowHorizon);
  }
}

TEST_CASE("SCL exclusion table") {
  const std::set<int> excluded = {3, 6, 8, 9, 10, 11};
  for (int code = 0; code <= 11; ++code) CHECK(scl_excluded(static_cast<std::uint8_t>(code)) == excluded.count(code));
  CHECK(count_true(scl_exclusion(SclGrid(5, 5, 0))) == 0);
  SclGrid clouds(1, 12);
  for (int i = 0; i < 12; ++i) clouds[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const auto cm = scl_cloud_mask(clouds);
  for (int i = 0; i < 12; ++i) CHECK(cm[static_cast<std::size_t>(i)] == (i >= 8 && i <= 10));
}

TEST_CASE("evaluation mask") {
  const SolarGeometry high{150.0, 60.0};
  SUBCASE("all clear") {
    const auto m = build_eval_mask(SclGrid(8, 8, 4), flat_dem(8, 8), high, BoolGrid(8, 8, 0));
    CHECK(m.valid_count() == 64);
  }
  SUBCASE("one pixel failing two rules") {
    SclGrid scl(8, 8, 4);
    scl(2, 3) = 6;
    const auto m = build_eval_mask(scl, flat_dem(8, 8), {150.0, 20.0}, BoolGrid(8, 8, 0));
    CHECK(m.provenance(2, 3) == (EvalMask::kScl | EvalMask::kTopoShadow));
    CHECK_FALSE(m.valid(2, 3));
  }
  SUBCASE("rule-by-rule recomputation on random inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
      const int h = 24, w = 24;
      SclGrid scl(h, w);
      for (auto& v : scl) v = static_cast<std::uint8_t>(rng.uniform() < 0.8 ? 4 : rng.uniform_int(0, 11));
      DemGrid dem{Grid<double>(h, w), 10.0};
      for (auto& z : dem.heights) z = rng.uniform(0, 15);
      const SolarGeometry sun{rng.uniform(0, 360), rng.uniform(20, 85)};
      const auto clouds = scl_cloud_mask(scl);
      const auto m = build_eval_mask(scl, dem, sun, clouds);
      const auto hs = hillshade(dem, sun);
      const auto shadow = cloud_shadow_project(clouds, sun, 10.0);
      std::size_t valid = 0;
      for (std::size_t i = 0; i < scl.size(); ++i) {
        const bool a = scl_excluded(scl[i]), b = hs[i] < 0.5, c = shadow[i] != 0;
        CHECK(((m.provenance[i] & EvalMask::kScl) != 0) == a);
        CHECK(((m.provenance[i] & EvalMask::kTopoShadow) != 0) == b);
        CHECK(((m.provenance[i] & EvalMask::kCloudShadow) != 0) == c);
        CHECK(m.valid(i) == !(a || b || c));
        valid += !(a || b || c);
      }
      CHECK(m.valid_count() == valid);
      CHECK(build_eval_mask(scl, dem, sun, clouds) == m);
    }
  }
  SUBCASE("adding clouds never increases the valid count") {
    Rng rng(8);
    SclGrid scl(30, 30, 4);
    std::size_t prev = 30 * 30 + 1;
    for (int step = 0; step < 15; ++step) {
      scl(static_cast<int>(rng.uniform_int(0, 29)), static_cast<int>(rng.uniform_int(0, 29))) = 9;
      const auto m = build_eval_mask(scl, flat_dem(30, 30), {210.0, 70.0}, scl_cloud_mask(scl));
      CHECK(m.valid_count() <= prev);
      prev = m.valid_count();
    }
  }
  SUBCASE("restriction and file round trip") {
    testing::TempDir dir;
    Rng rng(2);
    Grid<std::uint8_t> bits(9, 11);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.uniform_int(0, 7));
    const EvalMask m(bits);
    BoolGrid region(9, 11, 1);
    region(0, 0) = 0;
    const auto r = m.restricted_to(region);
    CHECK((r.provenance(0, 0) & EvalMask::kOutsideRegion) != 0);
    CHECK(r.provenance(5, 5) == m.provenance(5, 5));
    write_eval_mask(r, dir / "m.tmask");
    CHECK(read_eval_mask(dir / "m.tmask") == r);
  }
}

TEST_CASE("bilinear DEM resampling") {
  DemGrid src{Grid<double>(4, 4), 30.0};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) src.heights(r, c) = 3.0 * r + 2.0 * c;
  const auto out = resample_bilinear(src, 12, 12, 10.0);
  // Inside the source pixel-centre hull a linear surface is reproduced exactly.
  for (int r = 1; r < 11; ++r)
    for (int c = 1; c < 11; ++c) {
      const double sr = (r + 0.5) / 3.0 - 0.5, sc = (c + 0.5) / 3.0 - 0.5;
      CHECK(out.heights(r, c) == doctest::Approx(3.0 * sr + 2.0 * sc).epsilon(1e-12));
    }
  CHECK(out.pixel_size_m == 10.0);
}
