#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "svg.hpp"
#include "tiad/detectors.hpp"
#include "tiad/error.hpp"
#include "tiad/ingest.hpp"
#include "tiad/log.hpp"
#include "tiad/maskgen.hpp"
#include "tiad/parallel.hpp"
#include "tiad/synthlab.hpp"

namespace tiad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FormatError("cannot create output directory " + dir.string());
}

std::vector<TimeCube> load_corpus(const std::string& manifest) {
  if (manifest.empty()) throw ShapeError("--manifest is required");
  const auto paths = read_manifest(manifest);
  std::vector<TimeCube> cubes(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) { cubes[i] = read_cube(paths[i]); });
  log::info("loaded ", cubes.size(), " cubes from ", manifest);
  return cubes;
}

std::unique_ptr<detectors::Predictor> load_inpainter(const std::string& checkpoint) {
  if (checkpoint.empty()) throw ShapeError("method inpaint needs --checkpoint");
  auto ckpt = inpainter::read_checkpoint(checkpoint);
  log::info("checkpoint ", checkpoint, " (", ckpt.kind, ", epoch ", ckpt.epoch, ")");
  return std::make_unique<inpainter::InpaintPredictor>(std::move(ckpt.params), ckpt.network);
}

struct MethodSet {
  std::vector<std::unique_ptr<detectors::Predictor>> owned;
  std::vector<synthlab::DetectorMethod> methods;
};

MethodSet make_methods(const std::vector<std::string>& ids, const std::string& checkpoint) {
  MethodSet s;
  for (const auto& id : ids) {
    if (id == "rx") {
      s.methods.push_back({"rx", nullptr});
      continue;
    }
    if (id == "median") {
      s.owned.push_back(std::make_unique<detectors::MedianPredictor>());
    } else if (id == "inpaint") {
      s.owned.push_back(load_inpainter(checkpoint));
    } else {
      throw ShapeError("unknown method '" + id + "' (inpaint, median, rx)");
    }
    s.methods.push_back({id, s.owned.back().get()});
  }
  if (s.methods.empty()) throw ShapeError("no methods selected");
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Every accepted frame with three accepted predecessors becomes a cube.
std::vector<TimeCube> cubes_from_series(const std::vector<Frame>& frames, const std::string& target) {
  std::vector<TimeCube> out;
  if (!target.empty()) {
    out.push_back(assemble_cube(frames, parse_utc(target) + 86399));
    return out;
  }
  for (std::size_t k = kDetectionFrames - 1; k < frames.size(); ++k) {
    out.push_back(assemble_cube(frames, frames[k].meta.acquisition_time));
  }
  return out;
}

std::vector<Frame> qc_report(const std::vector<RawFrame>& raw) {
  std::vector<Frame> accepted;
  for (const auto& r : raw) {
    Frame f = scale_frame(r);
    const std::string why = qc_rejection_reason(f);
    if (why.empty()) {
      log::info("accept ", f.meta.scene_id, " ", format_utc(f.meta.acquisition_time));
      accepted.push_back(std::move(f));
    } else {
      log::info("reject ", f.meta.scene_id, " ", format_utc(f.meta.acquisition_time), ": ", why);
    }
  }
  return accepted;
}

std::unique_ptr<ingest::HttpTransport> replay_transport(const std::string& index_path) {
  auto t = std::make_unique<ingest::ReplayTransport>();
  json index;
  try {
    index = json::parse(read_text(index_path));
    const fs::path base = fs::path(index_path).parent_path();
    for (const auto& r : index.at("routes")) {
      std::string body = r.contains("body_file") ? read_text(base / r.at("body_file").get<std::string>())
                                                 : r.value("body", std::string());
      t->add(r.value("method", std::string("GET")), r.at("url").get<std::string>(),
             {r.value("status", 200), std::move(body)}, r.value("request_body", std::string()));
    }
  } catch (const json::exception& e) {
    throw FormatError("bad replay index " + index_path + ": " + e.what());
  }
  return t;
}

std::vector<ingest::LatLon> read_polygon(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<ingest::LatLon> poly;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ingest::LatLon p;
    if (!(ls >> p.lat >> p.lon)) throw FormatError(path + ": expected 'lat lon' per line");
    poly.push_back(p);
  }
  return poly;
}

std::vector<std::string> methods_or_default(const std::vector<std::string>& v) {
  return v.empty() ? std::vector<std::string>{"inpaint", "median", "rx"} : v;
}

}  // namespace

int run_ingest(const Globals& g, const IngestOptions& o) {
  if (o.local_dir.empty() == !o.stac) throw ShapeError("choose exactly one of --local DIR or --stac");
  const fs::path cube_dir = g.out / "cubes";
  ensure_dir(cube_dir);

  std::vector<std::vector<RawFrame>> series;
  if (!o.local_dir.empty()) {
    series.push_back(ingest::import_local(o.local_dir, o.pattern));
    log::info("imported ", series.back().size(), " scenes from ", o.local_dir);
  } else {
    if (!o.live && o.replay.empty()) throw ShapeError("STAC access is disabled without --live (or --replay)");
    auto transport = o.replay.empty() ? ingest::make_http_transport() : replay_transport(o.replay);
    const ingest::RetryPolicy retry{o.retries, std::chrono::milliseconds(o.retry_delay_ms)};
    ingest::StacQuery q;
    q.endpoint_url = o.endpoint;
    q.collection = o.collection;
    q.start = parse_utc(o.start);
    q.end = parse_utc(o.end);
    q.max_cloud = o.max_cloud;
    std::vector<ingest::BBox> boxes;
    if (!o.region.empty()) {
      for (const auto& p : ingest::lattice_points(read_polygon(o.region), o.spacing_km)) {
        boxes.push_back(ingest::bbox_around(p, o.point_half_extent_m));
      }
      log::info("region lattice: ", boxes.size(), " points at ", o.spacing_km, " km");
    } else {
      if (o.bbox.size() != 4) throw ShapeError("--bbox needs lon_min,lat_min,lon_max,lat_max");
      boxes.push_back({o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]});
    }
    const ingest::PixelWindow window{o.center_row, o.center_col, o.half_extent};
    for (const auto& box : boxes) {
      q.bbox = box;
      const auto records = ingest::stac_search(q, *transport, retry);
      log::info("search returned ", records.size(), " scenes");
      std::vector<std::string> failures;
      series.push_back(ingest::fetch_scenes(records, window, *transport, retry, &failures));
      for (const auto& f : failures) log::warn("reject ", f);
    }
  }

  std::vector<fs::path> entries;
  for (const auto& raw : series) {
    const auto accepted = qc_report(raw);
    if (accepted.size() < kDetectionFrames) {
      log::warn("series has ", accepted.size(), " usable scenes; a cube needs ", kDetectionFrames);
      continue;
    }
    for (const auto& cube : cubes_from_series(accepted, o.target)) {
      std::string name = cube.target().meta.scene_id;
      std::replace_if(name.begin(), name.end(), [](char c) { return !std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-'; }, '_');
      const fs::path rel = fs::path("cubes") / (name + ".tcube");
      write_cube(cube, g.out / rel);
      entries.push_back(rel);
    }
  }
  if (entries.empty()) log::warn("no cubes produced; manifest is empty");
  write_manifest(g.out / "manifest.txt", entries);
  log::info("wrote ", entries.size(), " cubes; manifest ", (g.out / "manifest.txt").string());
  return 0;
}

int run_fixtures(const Globals& g, const FixturesOptions& o) {
  if (o.count < 0) throw ShapeError("--count must be non-negative");
  if (o.size < 8 || o.frames < kDetectionFrames) throw ShapeError("fixture size or frame count too small");
  ensure_dir(g.out / "cubes");
  std::vector<fs::path> entries(static_cast<std::size_t>(o.count));
  parallel_for(entries.size(), [&](std::size_t i) {
    Rng rng = Rng::derive(g.seed, i);
    const TimeCube cube = synthlab::gen_fixture_cube(rng, o.size, o.size, o.frames);
    char name[64];
    std::snprintf(name, sizeof name, "fixture_%05zu.tcube", i);
    entries[i] = fs::path("cubes") / name;
    write_cube(cube, g.out / entries[i]);
  });
  write_manifest(g.out / "manifest.txt", entries);
  log::info("wrote ", entries.size(), " fixture cubes to ", (g.out / "cubes").string());
  return 0;
}

namespace {

std::vector<inpainter::EpochMetrics> read_metrics(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<inpainter::EpochMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw FormatError(path.string() + ": malformed metrics row");
    rows.push_back({std::stoi(f[0]), f[1], std::strtod(f[2].c_str(), nullptr), std::strtod(f[3].c_str(), nullptr),
                    std::strtod(f[4].c_str(), nullptr), std::strtod(f[5].c_str(), nullptr)});
  }
  return rows;
}

void save_run(const fs::path& dir, const inpainter::TrainState& s, const inpainter::NetworkConfig& net,
              const inpainter::TrainConfig& cfg) {
  inpainter::Checkpoint raw{net, cfg.to_json(), s.epoch, cfg.seed, "raw", s.params, s.adam};
  inpainter::write_checkpoint(raw, dir / "checkpoint_raw.tckpt");
  inpainter::Checkpoint ema{net, cfg.to_json(), s.epoch, cfg.seed, "ema", s.ema, std::nullopt};
  inpainter::write_checkpoint(ema, dir / "checkpoint_ema.tckpt");
  write_text(dir / "metrics.csv", inpainter::metrics_csv(s.log));
}

}  // namespace

int run_train(const Globals& g, const TrainOptions& o) {
  inpainter::TrainConfig cfg = o.train;
  cfg.seed = g.seed;
  cfg.validate();
  ensure_dir(g.out);
  auto split = inpainter::split_corpus(load_corpus(o.manifest), cfg);
  log::info("training on ", split.train.size(), " cubes, validating on ", split.validation.size());

  inpainter::NetworkConfig net = o.net;
  inpainter::TrainState state;
  if (!o.resume.empty()) {
    const fs::path dir = o.resume;
    auto raw = inpainter::read_checkpoint(dir / "checkpoint_raw.tckpt");
    auto ema = inpainter::read_checkpoint(dir / "checkpoint_ema.tckpt");
    if (!raw.adam) throw FormatError("raw checkpoint lacks optimizer state; cannot resume");
    if (raw.epoch != ema.epoch) throw FormatError("raw and EMA checkpoints are from different epochs");
    net = raw.network;
    state.params = std::move(raw.params);
    state.ema = std::move(ema.params);
    state.adam = std::move(*raw.adam);
    state.epoch = raw.epoch;
    state.log = read_metrics(dir / "metrics.csv");
    log::info("resuming after epoch ", state.epoch);
  } else {
    net.validate();
    state = inpainter::init_train_state(net, cfg);
  }

  auto on_epoch = [&](const inpainter::TrainState& s, const inpainter::EpochMetrics& m) {
    if (o.checkpoint_every > 0 && m.epoch > 0 && m.epoch % o.checkpoint_every == 0) save_run(g.out, s, net, cfg);
  };
  state = inpainter::train(split.train, split.validation, net, cfg, std::move(state), {}, on_epoch);
  save_run(g.out, state, net, cfg);
  log::info("final val_l1 ", state.log.back().val_l1, " (init ", state.log.front().val_l1, ")");
  return 0;
}

int run_detect(const Globals& g, const DetectOptions& o) {
  if (o.cube.empty()) throw ShapeError("--cube is required");
  const TimeCube cube = read_cube(o.cube);
  cube.validate_for_detection();
  maskgen::DemGrid dem;
  if (!o.dem.empty()) dem = maskgen::resample_bilinear(maskgen::read_dem_dir(o.dem), cube.height(), cube.width());
  const auto eval = maskgen::eval_mask_for_target(cube, o.dem.empty() ? nullptr : &dem);
  const BoolGrid region = detectors::centered_target_mask(cube.height(), cube.width());
  const auto set = make_methods({o.method}, o.checkpoint);

  const auto map = detectors::score_target(cube, eval, region, set.methods[0].predictor);
  const double score = detectors::anomaly_score(map);
  ensure_dir(g.out);
  maskgen::write_eval_mask(eval, g.out / "eval_mask.tmask");
  detectors::write_score_map(map, g.out / (o.method + ".tsmap"));
  write_text(g.out / (o.method + "_score.json"),
             json{{"method", o.method}, {"cube", o.cube}, {"score", score}, {"valid_pixels", map.mask.valid_count()}}
                     .dump(2) + "\n");
  std::cout << o.method << ' ' << fmt(score) << '\n';
  return 0;
}

int run_sweep(const Globals& g, const SweepOptions& o) {
  const auto corpus = load_corpus(o.manifest);
  const auto set = make_methods(methods_or_default(o.methods), o.checkpoint);
  synthlab::ExperimentConfig cfg;
  cfg.n_samples = o.n;
  cfg.seed = g.seed;
  cfg.intensity_lo = o.intensity_lo;
  cfg.intensity_hi = o.intensity_hi;
  if (!o.kinds.empty()) {
    cfg.kinds.clear();
    for (const auto& k : o.kinds) cfg.kinds.push_back(synthlab::kind_from_name(k));
  }
  const auto report = synthlab::run_experiment(corpus, set.methods, cfg);
  ensure_dir(g.out);
  write_text(g.out / "metrics.csv", report.to_csv());
  write_text(g.out / "samples.csv", report.samples_csv());
  const auto sweep = synthlab::intensity_sweep(report);
  write_text(g.out / "intensity.csv", synthlab::sweep_csv(sweep));

  plot::LinePlot roc{"ROC (mean over samples)", "False positive rate", "True positive rate"};
  plot::LinePlot pr{"Precision-recall (mean over samples)", "Recall", "Precision"};
  double pos = 0, region = 0;
  for (const auto& s : report.samples) {
    pos += static_cast<double>(s.positives);
    region += static_cast<double>(s.region_pixels);
  }
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    const auto auc = report.stat(m, synthlab::Metric::RocAuc);
    const auto ap = report.stat(m, synthlab::Metric::PrAuc);
    plot::Series rs{report.methods[m] + (auc ? " (AUC " + fmt(std::round(auc->mean * 1000) / 1000) + ")" : "")};
    for (const auto& p : report.mean_roc[m]) rs.points.push_back({p.x, p.y});
    roc.series.push_back(rs);
    plot::Series ps{report.methods[m] + (ap ? " (AP " + fmt(std::round(ap->mean * 1000) / 1000) + ")" : "")};
    for (const auto& p : report.mean_pr[m]) ps.points.push_back({p.x, p.y});
    pr.series.push_back(ps);
  }
  roc.series.push_back({"random", {{0, 0}, {1, 1}}, true});
  const double base = region > 0 ? pos / region : 0.0;
  pr.series.push_back({"random", {{0, base}, {1, base}}, true});
  plot::write_svg(roc, (g.out / "roc.svg").string());
  plot::write_svg(pr, (g.out / "pr.svg").string());

  plot::LinePlot ip{"ROC-AUC by anomaly intensity", "Intensity (fraction of local dynamic range)", "ROC-AUC"};
  ip.x_min = 0.0;
  ip.x_max = 0.25;
  for (const auto& b : report.bins) ip.x_max = std::max(ip.x_max, b.hi);
  for (const auto& id : report.methods) {
    plot::Series s{id};
    s.markers = true;
    for (const auto& row : sweep) {
      if (row.method != id || !row.roc_auc) continue;
      s.points.push_back({0.5 * (row.bin.lo + row.bin.hi), row.roc_auc->mean});
      s.error.push_back(row.roc_auc->std);
    }
    ip.series.push_back(std::move(s));
  }
  ip.series.push_back({"random", {{ip.x_min, 0.5}, {ip.x_max, 0.5}}, true});
  plot::write_svg(ip, (g.out / "intensity.svg").string());

  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    const auto auc = report.stat(m, synthlab::Metric::RocAuc);
    log::info(report.methods[m], ": ROC-AUC ", auc ? fmt(auc->mean) : "n/a", " over ", auc ? auc->n : 0, " samples");
  }
  return 0;
}

int run_timeseries(const Globals& g, const TimeseriesOptions& o) {
  const auto cubes = load_corpus(o.manifest);
  std::map<UtcSeconds, Frame> by_time;
  for (const auto& c : cubes) {
    for (const auto& f : c.frames) by_time.emplace(f.meta.acquisition_time, f);
  }
  std::vector<Frame> frames;
  for (auto& [t, f] : by_time) frames.push_back(std::move(f));
  if (frames.size() < kDetectionFrames + 1) {
    throw InsufficientHistory("time series has " + std::to_string(frames.size()) + " frames, need at least " +
                              std::to_string(kDetectionFrames + 1));
  }
  const auto set = make_methods(methods_or_default(o.methods), o.checkpoint);

  const std::size_t ndates = frames.size() - (kDetectionFrames - 1);
  std::vector<std::vector<double>> raw(set.methods.size(), std::vector<double>(ndates));
  std::vector<UtcSeconds> dates(ndates);
  parallel_for(ndates, [&](std::size_t d) {
    TimeCube cube;
    cube.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(d),
                       frames.begin() + static_cast<std::ptrdiff_t>(d + kDetectionFrames));
    cube.validate_for_detection();
    dates[d] = cube.target().meta.acquisition_time;
    maskgen::DemGrid dem;
    if (!o.dem.empty()) dem = maskgen::resample_bilinear(maskgen::read_dem_dir(o.dem), cube.height(), cube.width());
    const auto eval = maskgen::eval_mask_for_target(cube, o.dem.empty() ? nullptr : &dem);
    const BoolGrid region = detectors::centered_target_mask(cube.height(), cube.width());
    for (std::size_t m = 0; m < set.methods.size(); ++m) {
      raw[m][d] = detectors::anomaly_score(detectors::score_target(cube, eval, region, set.methods[m].predictor));
    }
  });

  std::vector<std::vector<double>> norm(set.methods.size());
  std::vector<bool> normalized(set.methods.size(), true);
  for (std::size_t m = 0; m < set.methods.size(); ++m) {
    try {
      norm[m] = detectors::normalize_series(raw[m]);
    } catch (const DegenerateSeries& e) {
      log::warn(set.methods[m].id, ": ", e.what(), "; emitting raw scores");
      norm[m] = raw[m];
      normalized[m] = false;
    }
  }

  ensure_dir(g.out);
  std::ostringstream csv;
  csv << "date,method,raw_score,normalized_score\n";
  for (std::size_t d = 0; d < ndates; ++d) {
    for (std::size_t m = 0; m < set.methods.size(); ++m) {
      csv << format_date(dates[d]) << ',' << set.methods[m].id << ',' << fmt(raw[m][d]) << ','
          << (normalized[m] ? fmt(norm[m][d]) : "") << '\n';
    }
  }
  write_text(g.out / "timeseries.csv", csv.str());

  const double day = 86400.0;
  plot::LinePlot p{"Normalized anomaly score", "Acquisition date", "Score"};
  p.x_min = 0.0;
  p.x_max = std::max(1.0, static_cast<double>(dates.back() - dates.front()) / day);
  double ymax = 1.0;
  for (std::size_t m = 0; m < set.methods.size(); ++m) {
    plot::Series s{set.methods[m].id + (normalized[m] ? "" : " (raw)")};
    s.markers = true;
    for (std::size_t d = 0; d < ndates; ++d) {
      s.points.push_back({static_cast<double>(dates[d] - dates.front()) / day, norm[m][d]});
      ymax = std::max(ymax, norm[m][d]);
    }
    p.series.push_back(std::move(s));
  }
  p.y_max = ymax;
  const std::size_t step = std::max<std::size_t>(1, ndates / 6);
  for (std::size_t d = 0; d < ndates; d += step) {
    p.x_ticks.emplace_back(static_cast<double>(dates[d] - dates.front()) / day, format_date(dates[d]));
  }
  if (!o.event_date.empty()) {
    p.markers.push_back({static_cast<double>(parse_utc(o.event_date) - dates.front()) / day, "event " + o.event_date});
  }
  plot::write_svg(p, (g.out / "timeseries.svg").string());
  return 0;
}

}  // namespace tiad::cli
