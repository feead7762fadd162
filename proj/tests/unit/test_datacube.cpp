#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <limits>

#include "oracles.hpp"
#include "tempdir.hpp"
#include "tiad/container.hpp"
#include "tiad/datacube.hpp"
#include "tiad/error.hpp"

using namespace tiad;
using tiad::testing::TempDir;

namespace {

Frame clean_frame(UtcSeconds t, double cloud = 0.0, int size = 8) {
  Frame f;
  f.meta.acquisition_time = t;
  f.meta.cloud_fraction = cloud;
  f.meta.scene_id = "S" + std::to_string(t);
  f.scl = SclGrid(size, size, 4);
  for (auto& b : f.bands) b = Band(size, size, 0.3f);
  return f;
}

std::vector<Frame> frames_at(std::initializer_list<UtcSeconds> times) {
  std::vector<Frame> out;
  for (auto t : times) out.push_back(clean_frame(t));
  return out;
}

}  // namespace

TEST_CASE("band layout") {
  CHECK(kSpectralOrder.size() == 9);
  CHECK(output_band_indices() == std::array<int, 4>{2, 1, 0, 6});
  CHECK(band_name(BandId::B11) == "B11");
  CHECK(band_from_name("SCL") == BandId::SCL);
  CHECK_THROWS_AS(band_from_name("B10"), FormatError);
}

TEST_CASE("reflectance scaling") {
  CHECK(scale_reflectance(std::uint16_t{8160}) == 1.0f);
  CHECK(scale_reflectance(std::uint16_t{0}) == 0.0f);
  CHECK(scale_reflectance(std::uint16_t{16320}) == 1.0f);
  CHECK(scale_reflectance(std::uint16_t{4080}) == 0.5f);
  CHECK(scale_reflectance(std::uint16_t{65535}) == 1.0f);

  float prev = -1.0f;
  for (std::uint32_t dn = 0; dn <= 65535; dn += 7) {
    const float v = scale_reflectance(static_cast<std::uint16_t>(dn));
    CHECK_LE(prev, v);
    CHECK(std::clamp(v, 0.0f, 1.0f) == v);
    prev = v;
  }
  Grid<std::uint16_t> g(2, 3);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::uint16_t>(i * 4000);
  const Band b = scale_reflectance(g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(b[i] == scale_reflectance(g[i]));
}

TEST_CASE("qc filter") {
  SUBCASE("cloud above ten percent is rejected") { CHECK(qc_filter({clean_frame(1, 0.11)}).empty()); }
  SUBCASE("exactly ten percent is accepted") { CHECK(qc_filter({clean_frame(1, 0.10)}).size() == 1); }
  SUBCASE("a zero pixel in B08 rejects the frame") {
    Frame f = clean_frame(1);
    f.bands[spectral_index(BandId::B08)](3, 4) = 0.0f;
    CHECK(qc_filter({f}).empty());
    CHECK(qc_rejection_reason(f).find("B08") != std::string::npos);
  }
  SUBCASE("a missing pixel rejects the frame") {
    Frame f = clean_frame(1);
    f.bands[0](0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK(qc_filter({f}).empty());
  }
  SUBCASE("order preserved and idempotent") {
    std::vector<Frame> in = {clean_frame(5), clean_frame(1, 0.5), clean_frame(3), clean_frame(9, 0.02)};
    const auto once = qc_filter(in);
    REQUIRE(once.size() == 3);
    CHECK(once[0].meta.acquisition_time == 5);
    CHECK(once[1].meta.acquisition_time == 3);
    CHECK(once[2].meta.acquisition_time == 9);
    CHECK(qc_filter(once) == once);
  }
}

TEST_CASE("cube assembly") {
  SUBCASE("six frames, target is the sixth") {
    const auto cube = assemble_cube(frames_at({600, 100, 300, 200, 500, 400}), 600);
    REQUIRE(cube.length() == 4);
    for (int i = 0; i < 4; ++i) CHECK(cube.frames[i].meta.acquisition_time == 300 + 100 * i);
  }
  SUBCASE("target between acquisitions takes the latest earlier frame") {
    const auto cube = assemble_cube(frames_at({100, 200, 300, 400, 500, 600}), 450);
    CHECK(cube.target().meta.acquisition_time == 400);
    CHECK(cube.frames.front().meta.acquisition_time == 100);
  }
  SUBCASE("three frames") { CHECK_THROWS_AS(assemble_cube(frames_at({1, 2, 3}), 3), InsufficientHistory); }
  SUBCASE("four frames with one failing qc") {
    auto frames = frames_at({1, 2, 3, 4});
    frames[1].meta.cloud_fraction = 0.3;
    CHECK_THROWS_AS(assemble_cube(qc_filter(frames), 4), InsufficientHistory);
  }
  SUBCASE("output is strictly increasing with four frames") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Frame> frames;
      const int n = static_cast<int>(rng.uniform_int(4, 10));
      for (int i = 0; i < n; ++i) frames.push_back(clean_frame(1000 * (i + 1) + rng.uniform_int(0, 999)));
      const auto cube = assemble_cube(frames, 1000 * (n + 1));
      CHECK(cube.length() == 4);
      for (int i = 1; i < 4; ++i) CHECK(cube.frames[i].meta.acquisition_time > cube.frames[i - 1].meta.acquisition_time);
    }
  }
}

TEST_CASE("cube validation") {
  Rng rng(3);
  TimeCube cube = testing::random_cube(rng, 8, 8);
  CHECK_NOTHROW(cube.validate_for_detection());
  TimeCube bad = cube;
  bad.frames[2].bands[4](1, 1) = 1.5f;
  CHECK_THROWS_AS(bad.validate(), FormatError);
  bad = cube;
  bad.frames[2].meta.acquisition_time = bad.frames[1].meta.acquisition_time;
  CHECK_THROWS_AS(bad.validate(), FormatError);
  bad = cube;
  bad.frames[0].meta.cloud_fraction = 1.2;
  CHECK_THROWS_AS(bad.validate(), FormatError);
  bad = cube;
  bad.frames.pop_back();
  CHECK_NOTHROW(bad.validate());
  CHECK_THROWS_AS(bad.validate_for_detection(), FormatError);
}

TEST_CASE("cube file round trip") {
  TempDir dir;
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = static_cast<int>(rng.uniform_int(1, 24)), w = static_cast<int>(rng.uniform_int(1, 24));
    TimeCube cube = testing::random_cube(rng, h, w, static_cast<int>(rng.uniform_int(1, 6)));
    for (auto& f : cube.frames) {
      for (auto& c : f.scl) c = static_cast<std::uint8_t>(rng.uniform_int(0, 11));
      f.meta.cloud_fraction = rng.uniform();
      f.meta.center_lat = rng.uniform(-90, 90);
      f.meta.center_lon = rng.uniform(-180, 180);
    }
    const auto path = dir / ("c" + std::to_string(trial) + ".tcube");
    write_cube(cube, path);
    CHECK(read_cube(path) == cube);
  }
}

TEST_CASE("corrupt cube files") {
  TempDir dir;
  Rng rng(5);
  const TimeCube cube = testing::random_cube(rng, 6, 6);
  const auto good = dir / "good.tcube";
  write_cube(cube, good);
  std::ifstream is(good, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  auto write_bytes = [&](const std::string& name, const std::string& data) {
    const auto p = dir / name;
    std::ofstream(p, std::ios::binary) << data;
    return p;
  };
  CHECK_THROWS_AS(read_cube(write_bytes("trunc.tcube", bytes.substr(0, bytes.size() - 10))), FormatError);
  CHECK_THROWS_AS(read_cube(write_bytes("trail.tcube", bytes + "x")), FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(read_cube(write_bytes("magic.tcube", magic)), FormatError);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(read_cube(write_bytes("version.tcube", version)), FormatError);
  CHECK_THROWS_AS(read_cube(dir / "absent.tcube"), FormatError);

  SUBCASE("header claims four frames, payload holds three") {
    TimeCube three = cube;
    three.frames.pop_back();
    const auto p3 = dir / "three.tcube";
    write_cube(three, p3);
    std::ifstream i3(p3, std::ios::binary);
    const std::string b3((std::istreambuf_iterator<char>(i3)), std::istreambuf_iterator<char>());
    std::istringstream hs(b3);
    auto hdr = io::read_header(hs, "TIADCUBE", kCubeFormatVersion);
    const std::string payload = b3.substr(static_cast<std::size_t>(hs.tellg()));
    REQUIRE(hdr["frames"].size() == 3);
    hdr["frames"].push_back(hdr["frames"].back());
    hdr["frames"].back()["time"] = 4102444800;
    hdr["T"] = 4;
    std::ostringstream os;
    io::write_header(os, "TIADCUBE", kCubeFormatVersion, hdr);
    CHECK_THROWS_AS(read_cube(write_bytes("lying.tcube", os.str() + payload)), FormatError);
  }
}

TEST_CASE("manifest") {
  TempDir dir;
  const auto m = dir / "manifest.txt";
  {
    std::ofstream os(m);
    os << "# corpus\n\ncubes/a.tcube\n  /abs/b.tcube  \r\n";
  }
  const auto entries = read_manifest(m);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0] == dir.path() / "cubes/a.tcube");
  CHECK(entries[1] == "/abs/b.tcube");
  CHECK_THROWS_AS(read_manifest(dir / "none.txt"), FormatError);
}
