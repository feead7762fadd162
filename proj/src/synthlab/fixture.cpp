#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tiad/maskgen.hpp"
#include "tiad/synthlab.hpp"

namespace tiad::synthlab {

namespace {

constexpr double kAlbedoLoadingLo = 0.01;
constexpr double kAlbedoLoadingHi = 0.14;
constexpr double kBandFieldAmplitude = 0.002;
constexpr double kGainSpread = 0.05;
constexpr double kSensorNoise = 0.005;
constexpr double kDriftPerFrame = 0.004;
constexpr double kMinSunElevation = 35.0;
constexpr std::int64_t kDay = 86400;

Grid<double> unit_field(Rng& rng, int h, int w) {
  Grid<double> white(h, w);
  for (double& v : white) v = rng.normal();
  Grid<double> f = gaussian_blur(white, rng.uniform(4.0, 16.0));
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(f.size()));
  for (double& v : f) v = sd > 0 ? (v - mean) / sd : 0.0;
  return f;
}

}  // namespace

TimeCube gen_fixture_cube(Rng& rng, int height, int width, int frames) {
  // Location and a late-morning acquisition schedule with the sun well above the horizon.
  double lat = 0, lon = 0;
  std::vector<UtcSeconds> times(static_cast<std::size_t>(frames));
  for (;;) {
    lat = rng.uniform(-35.0, 45.0);
    lon = rng.uniform(-170.0, 170.0);
    const std::int64_t day0 = days_from_civil(2019, 1, 1) + rng.uniform_int(0, 5 * 365);
    const auto local_1030 = static_cast<std::int64_t>(std::llround((10.5 - lon / 15.0) * 3600.0));
    std::int64_t day = day0;
    for (int t = 0; t < frames; ++t) {
      times[static_cast<std::size_t>(t)] = day * kDay + local_1030;
      day += 5 * rng.uniform_int(1, 3);
    }
    if (maskgen::solar_position(times.back(), lat, lon).elevation_deg > kMinSunElevation) break;
  }

  // One shared albedo pattern, expressed with a different strength in every band.
  const Grid<double> albedo = unit_field(rng, height, width);
  std::array<Grid<double>, kSpectralBands> base;
  for (int b = 0; b < kSpectralBands; ++b) {
    const double level = rng.uniform(0.15, 0.35);
    const double load = rng.uniform(kAlbedoLoadingLo, kAlbedoLoadingHi);
    const Grid<double> own = unit_field(rng, height, width);
    base[b] = Grid<double>(height, width);
    for (std::size_t i = 0; i < own.size(); ++i) {
      base[b][i] = level + load * albedo[i] + kBandFieldAmplitude * own[i];
    }
  }
  std::array<double, kSpectralBands> drift{};
  for (double& d : drift) d = rng.uniform(-kDriftPerFrame, kDriftPerFrame);

  char tag[32];
  std::snprintf(tag, sizeof tag, "FX%08llx", static_cast<unsigned long long>(rng.next_u64() & 0xFFFFFFFFull));
  TimeCube cube;
  for (int t = 0; t < frames; ++t) {
    Frame f;
    f.meta.acquisition_time = times[static_cast<std::size_t>(t)];
    f.meta.center_lat = lat;
    f.meta.center_lon = lon;
    f.meta.cloud_fraction = 0.0;
    f.meta.scene_id = std::string(tag) + "_" + format_date(f.meta.acquisition_time);
    f.scl = SclGrid(height, width, 4);
    const double gain = 1.0 + rng.uniform(-kGainSpread, kGainSpread);
    for (int b = 0; b < kSpectralBands; ++b) {
      f.bands[b] = Band(height, width);
      for (std::size_t i = 0; i < f.scl.size(); ++i) {
        const double v = gain * base[b][i] + drift[b] * t + rng.normal(0.0, kSensorNoise);
        f.bands[b][i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    cube.frames.push_back(std::move(f));
  }
  return cube;
}

}  // namespace tiad::synthlab
