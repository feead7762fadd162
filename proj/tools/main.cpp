#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"
#include "tiad/error.hpp"
#include "tiad/log.hpp"
#include "tiad/parallel.hpp"

namespace {

namespace cli = tiad::cli;

// 0 ok, 1 usage, 2 network, 3 format, 4 corpus, 5 mask/data.
int exit_code(tiad::ErrorKind k) {
  switch (k) {
    case tiad::ErrorKind::Network: return 2;
    case tiad::ErrorKind::Format: return 3;
    case tiad::ErrorKind::Corpus: return 4;
    case tiad::ErrorKind::Data: return 5;
    case tiad::ErrorKind::Usage: return 1;
  }
  return 1;
}

void add_train_options(CLI::App* sub, cli::TrainOptions& o) {
  auto& t = o.train;
  sub->add_option("--manifest", o.manifest, "Cube manifest")->required();
  sub->add_option("--resume", o.resume, "Directory of a previous run to continue");
  sub->add_option("--checkpoint-every", o.checkpoint_every, "Also save checkpoints every N epochs")->capture_default_str();
  sub->add_option("--epochs", t.epochs, "Total epochs including warmup")->capture_default_str();
  sub->add_option("--warmup-epochs", t.warmup_epochs)->capture_default_str();
  sub->add_option("--warmup-lr", t.warmup_lr)->capture_default_str();
  sub->add_option("--backbone-lr", t.backbone_lr)->capture_default_str();
  sub->add_option("--head-lr", t.head_lr)->capture_default_str();
  sub->add_option("--weight-decay", t.weight_decay)->capture_default_str();
  sub->add_option("--clip-norm", t.clip_norm)->capture_default_str();
  sub->add_option("--ema-decay", t.ema_decay)->capture_default_str();
  sub->add_option("--batch-size", t.batch_size)->capture_default_str();
  sub->add_option("--steps-per-epoch", t.steps_per_epoch)->capture_default_str();
  sub->add_option("--epoch-sample-fraction", t.epoch_sample_fraction)->capture_default_str();
  sub->add_option("--validation-cubes", t.validation_cubes)->capture_default_str();
  sub->add_option("--lambda-ssim-max", t.loss.lambda_ssim_max)->capture_default_str();
  sub->add_option("--lambda-hf-max", t.loss.lambda_hf_max)->capture_default_str();
  sub->add_option("--ramp-epochs", t.loss.ramp_epochs)->capture_default_str();
  sub->add_option("--width", o.net.scale_channels, "Channels per pyramid level")->capture_default_str();
}

// Globals plus the active subcommand; empty values are left at their defaults on replay.
std::string config_echo(const CLI::App& app, const CLI::App* active) {
  std::istringstream all(app.config_to_str(true, false));
  std::string out, line;
  const std::string prefix = active->get_name() + ".";
  while (std::getline(all, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(eq + 1) == "\"\"") continue;
    const std::string key = line.substr(0, eq);
    if (key.find('.') != std::string::npos && key.rfind(prefix, 0) != 0) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal inpainting anomaly detection for Sentinel-2 time series"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key=value config file; command-line flags take precedence");

  cli::Globals g;
  int verbose = 0;
  bool quiet = false;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("-v,--verbose", verbose, "More progress output");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  cli::IngestOptions ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Import scenes and build quality-controlled cubes");
  s_ingest->add_option("--local", ingest.local_dir, "Directory of <scene>/<BAND>.raw + meta");
  s_ingest->add_option("--pattern", ingest.pattern, "Scene directory glob")->capture_default_str();
  s_ingest->add_flag("--stac", ingest.stac, "Search and download from a STAC catalog");
  s_ingest->add_flag("--live", ingest.live, "Allow live network access");
  s_ingest->add_option("--replay", ingest.replay, "Recorded HTTP responses (index JSON) instead of the network");
  s_ingest->add_option("--endpoint", ingest.endpoint, "STAC item-search URL")
      ->envname("TIAD_STAC_ENDPOINT")
      ->capture_default_str();
  s_ingest->add_option("--collection", ingest.collection)->capture_default_str();
  s_ingest->add_option("--bbox", ingest.bbox, "lon_min,lat_min,lon_max,lat_max")->delimiter(',')->expected(4);
  s_ingest->add_option("--region", ingest.region, "Polygon file (lat lon per line) sampled on a lattice");
  s_ingest->add_option("--spacing-km", ingest.spacing_km)->capture_default_str();
  s_ingest->add_option("--point-half-extent-m", ingest.point_half_extent_m)->capture_default_str();
  s_ingest->add_option("--start", ingest.start, "UTC start (YYYY-MM-DD)");
  s_ingest->add_option("--end", ingest.end, "UTC end (YYYY-MM-DD)");
  s_ingest->add_option("--max-cloud", ingest.max_cloud)->capture_default_str();
  s_ingest->add_option("--half-extent", ingest.half_extent, "Window half size in pixels")->capture_default_str();
  s_ingest->add_option("--center-row", ingest.center_row, "Window centre row (-1 = asset centre)")->capture_default_str();
  s_ingest->add_option("--center-col", ingest.center_col, "Window centre column (-1 = asset centre)")->capture_default_str();
  s_ingest->add_option("--retries", ingest.retries)->capture_default_str();
  s_ingest->add_option("--retry-delay-ms", ingest.retry_delay_ms)->capture_default_str();
  s_ingest->add_option("--target", ingest.target, "Only build the cube for this date");

  cli::FixturesOptions fixtures;
  auto* s_fix = app.add_subcommand("fixtures", "Generate a procedural cube corpus");
  s_fix->add_option("--count", fixtures.count)->capture_default_str();
  s_fix->add_option("--size", fixtures.size)->capture_default_str();
  s_fix->add_option("--frames", fixtures.frames)->capture_default_str();

  cli::TrainOptions train;
  auto* s_train = app.add_subcommand("train", "Train the inpainting network");
  add_train_options(s_train, train);

  cli::DetectOptions detect;
  auto* s_detect = app.add_subcommand("detect", "Score one cube");
  s_detect->add_option("--cube", detect.cube)->required();
  s_detect->add_option("--checkpoint", detect.checkpoint, "Network checkpoint (method inpaint)");
  s_detect->add_option("--method", detect.method)
      ->check(CLI::IsMember({"inpaint", "median", "rx"}))
      ->capture_default_str();
  s_detect->add_option("--dem", detect.dem, "DEM directory (DEM.raw + meta); flat if omitted");

  cli::SweepOptions sweep;
  auto* s_sweep = app.add_subcommand("sweep", "Synthetic-anomaly benchmark");
  s_sweep->add_option("--manifest", sweep.manifest)->required();
  s_sweep->add_option("--checkpoint", sweep.checkpoint);
  s_sweep->add_option("--methods", sweep.methods)->delimiter(',');
  s_sweep->add_option("--kinds", sweep.kinds)->delimiter(',');
  s_sweep->add_option("--n", sweep.n)->capture_default_str();
  s_sweep->add_option("--intensity-lo", sweep.intensity_lo)->capture_default_str();
  s_sweep->add_option("--intensity-hi", sweep.intensity_hi)->capture_default_str();

  cli::TimeseriesOptions ts;
  auto* s_ts = app.add_subcommand("timeseries", "Score each date of a sequence");
  s_ts->add_option("--manifest", ts.manifest)->required();
  s_ts->add_option("--checkpoint", ts.checkpoint);
  s_ts->add_option("--methods", ts.methods)->delimiter(',');
  s_ts->add_option("--event-date", ts.event_date, "Draw a marker at this date");
  s_ts->add_option("--dem", ts.dem);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  tiad::log::set_verbosity(quiet ? tiad::log::Level::Error
                                 : verbose > 0 ? tiad::log::Level::Debug : tiad::log::Level::Info);
  tiad::set_thread_count(g.threads > 0 ? g.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));

  try {
    std::filesystem::create_directories(g.out);
    std::ofstream echo(g.out / "run_config.ini");
    echo << config_echo(app, app.get_subcommands().front());
    if (!echo) throw tiad::FormatError("cannot write config echo in " + g.out.string());
    echo.close();

    if (s_ingest->parsed()) return cli::run_ingest(g, ingest);
    if (s_fix->parsed()) return cli::run_fixtures(g, fixtures);
    if (s_train->parsed()) return cli::run_train(g, train);
    if (s_detect->parsed()) return cli::run_detect(g, detect);
    if (s_sweep->parsed()) return cli::run_sweep(g, sweep);
    if (s_ts->parsed()) return cli::run_timeseries(g, ts);
  } catch (const tiad::Error& e) {
    tiad::log::error(e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    tiad::log::error(e.what());
    return 3;
  } catch (const std::exception& e) {
    tiad::log::error(e.what());
    return 1;
  }
  return 0;
}
