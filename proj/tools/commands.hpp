#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tiad/inpainter/train.hpp"

namespace tiad::cli {

struct Globals {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  int threads = 0;
};

struct IngestOptions {
  std::string local_dir;
  std::string pattern = "*";
  bool stac = false;
  bool live = false;
  std::string replay;  // recorded-response index for hermetic runs
  std::string endpoint = "https://planetarycomputer.microsoft.com/api/stac/v1/search";
  std::string collection = "sentinel-2-l2a";
  std::vector<double> bbox;
  std::string region;  // polygon file: one "lat lon" per line
  double spacing_km = 5.0;
  double point_half_extent_m = 500.0;
  std::string start;
  std::string end;
  double max_cloud = 0.10;
  int half_extent = 32;
  int center_row = -1;
  int center_col = -1;
  int retries = 3;
  int retry_delay_ms = 500;
  std::string target;
};

struct FixturesOptions {
  int count = 200;
  int size = 64;
  int frames = 4;
};

struct TrainOptions {
  std::string manifest;
  std::string resume;
  int checkpoint_every = 0;
  inpainter::TrainConfig train;
  inpainter::NetworkConfig net;
};

struct DetectOptions {
  std::string cube;
  std::string checkpoint;
  std::string method = "median";
  std::string dem;
};

struct SweepOptions {
  std::string manifest;
  std::string checkpoint;
  std::vector<std::string> methods = {"inpaint", "median", "rx"};
  std::vector<std::string> kinds;
  std::size_t n = 150;
  double intensity_lo = 0.003;
  double intensity_hi = 0.25;
};

struct TimeseriesOptions {
  std::string manifest;
  std::string checkpoint;
  std::vector<std::string> methods = {"inpaint", "median", "rx"};
  std::string event_date;
  std::string dem;
};

int run_ingest(const Globals& g, const IngestOptions& o);
int run_fixtures(const Globals& g, const FixturesOptions& o);
int run_train(const Globals& g, const TrainOptions& o);
int run_detect(const Globals& g, const DetectOptions& o);
int run_sweep(const Globals& g, const SweepOptions& o);
int run_timeseries(const Globals& g, const TimeseriesOptions& o);

}  // namespace tiad::cli
