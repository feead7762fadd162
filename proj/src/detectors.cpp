#include "tiad/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "tiad/container.hpp"
#include "tiad/error.hpp"

namespace tiad::detectors {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Pairwise summation over a contiguous range; fixed association order.
double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

void check_stack(const OutputStack& s, int h, int w) {
  for (const Band& b : s) {
    if (b.height() != h || b.width() != w) throw ShapeError("band shape differs from mask");
  }
}

}  // namespace

OutputStack median_predict(const TimeCube& cube) {
  if (cube.length() < kDetectionFrames) throw InsufficientHistory("median needs three preceding frames");
  const int t = cube.length() - 1;
  const auto& idx = output_band_indices();
  OutputStack out;
  for (int k = 0; k < kOutputBands; ++k) {
    const Band& a = cube.frames[t - 3].bands[idx[k]];
    const Band& b = cube.frames[t - 2].bands[idx[k]];
    const Band& c = cube.frames[t - 1].bands[idx[k]];
    out[k] = Band(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[k][i] = std::max(std::min(a[i], b[i]), std::min(std::max(a[i], b[i]), c[i]));
    }
  }
  return out;
}

ScoreMap rx_scores(const OutputStack& frame, const EvalMask& mask, const RxOptions& options) {
  constexpr int C = kOutputBands;
  const int h = mask.height(), w = mask.width();
  check_stack(frame, h, w);

  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < mask.provenance.size(); ++i) {
    if (mask.valid(i)) valid.push_back(i);
  }
  const std::size_t n = valid.size();
  if (n <= static_cast<std::size_t>(C)) {
    throw DegenerateStatistics(std::to_string(n) + " valid pixels, need at least " + std::to_string(C + 1));
  }

  std::vector<double> buf(n);
  Eigen::Vector4d mean;
  for (int b = 0; b < C; ++b) {
    for (std::size_t k = 0; k < n; ++k) buf[k] = frame[b][valid[k]];
    mean[b] = pairwise_sum(buf.data(), n) / static_cast<double>(n);
  }
  Eigen::Matrix4d cov;
  for (int a = 0; a < C; ++a) {
    for (int b = a; b < C; ++b) {
      for (std::size_t k = 0; k < n; ++k) {
        buf[k] = (frame[a][valid[k]] - mean[a]) * (frame[b][valid[k]] - mean[b]);
      }
      cov(a, b) = cov(b, a) = pairwise_sum(buf.data(), n) / static_cast<double>(n - 1);
    }
  }
  const double trace = cov.trace();
  // A zero-trace scene has zero deviation everywhere; any positive ridge keeps the solve defined.
  const double ridge = trace > 0.0 ? options.ridge_factor * trace / C : 1.0;
  const Eigen::Matrix4d reg = cov + ridge * Eigen::Matrix4d::Identity();
  const Eigen::LDLT<Eigen::Matrix4d> solver(reg);
  if (solver.info() != Eigen::Success) throw DegenerateStatistics("covariance factorisation failed");

  ScoreMap out{Grid<double>(h, w, kNaN), "rx", mask};
  for (std::size_t i : valid) {
    Eigen::Vector4d d;
    for (int b = 0; b < C; ++b) d[b] = frame[b][i] - mean[b];
    const double q = d.dot(solver.solve(d));
    out.scores[i] = std::sqrt(std::max(0.0, q));
  }
  return out;
}

ScoreMap residual_map(const OutputStack& pred, const OutputStack& obs, const EvalMask& mask) {
  const int h = mask.height(), w = mask.width();
  check_stack(pred, h, w);
  check_stack(obs, h, w);
  ScoreMap out{Grid<double>(h, w, kNaN), "residual", mask};
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (!mask.valid(i)) continue;
    double s = 0.0;
    for (int b = 0; b < kOutputBands; ++b) s += std::abs(static_cast<double>(pred[b][i]) - obs[b][i]);
    out.scores[i] = s / kOutputBands;
  }
  return out;
}

double percentile(std::span<double> values, double q) {
  if (values.empty()) throw EmptyMask("no values for percentile");
  std::sort(values.begin(), values.end());
  const double pos = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double anomaly_score(const ScoreMap& map) {
  std::vector<double> v;
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    if (map.mask.valid(i) && !std::isnan(map.scores[i])) v.push_back(map.scores[i]);
  }
  if (v.empty()) throw EmptyMask("no valid pixels in score map '" + map.method_id + "'");
  return percentile(v, kScoreQuantile);
}

std::vector<double> normalize_series(std::span<const double> scores) {
  if (scores.size() < 2) throw DegenerateSeries("need at least two scores");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DegenerateSeries("constant series");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

ScoreMap restrict_to(const ScoreMap& map, const BoolGrid& region) {
  ScoreMap out = map;
  out.mask = map.mask.restricted_to(region);
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (!out.mask.valid(i)) out.scores[i] = kNaN;
  }
  return out;
}

BoolGrid disc_mask(int height, int width, double center_row, double center_col, double radius) {
  BoolGrid out(height, width, 0);
  const double r2 = radius * radius;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double dr = r - center_row, dc = c - center_col;
      out(r, c) = dr * dr + dc * dc <= r2;
    }
  }
  return out;
}

double target_mask_radius(int size) { return 50.0 * size / 256.0; }

BoolGrid centered_target_mask(int height, int width) {
  return disc_mask(height, width, (height - 1) / 2.0, (width - 1) / 2.0, target_mask_radius(std::min(height, width)));
}

ScoreMap score_target(const TimeCube& cube, const EvalMask& mask, const BoolGrid& region, const Predictor* predictor,
                      const RxOptions& rx) {
  if (!region.same_shape(mask.provenance)) throw ShapeError("region and mask shapes differ");
  const OutputStack obs = output_bands(cube.target());
  if (!predictor) return restrict_to(rx_scores(obs, mask, rx), region);
  ScoreMap m = residual_map(predictor->predict(cube, region), obs, mask);
  m.method_id = predictor->id();
  return restrict_to(m, region);
}

void write_score_map(const ScoreMap& map, const std::filesystem::path& path) {
  auto os = io::open_for_write(path);
  io::write_header(os, "TIADSMAP", kScoreMapFormatVersion,
                   {{"H", map.height()}, {"W", map.width()}, {"method", map.method_id}});
  std::vector<float> f(map.scores.size());
  std::transform(map.scores.begin(), map.scores.end(), f.begin(), [](double v) { return static_cast<float>(v); });
  io::write_f32(os, f);
  io::write_u8(os, map.mask.provenance.values());
  if (!os) throw FormatError("write failed: " + path.string());
}

ScoreMap read_score_map(const std::filesystem::path& path) {
  auto is = io::open_for_read(path);
  const auto hdr = io::read_header(is, "TIADSMAP", kScoreMapFormatVersion);
  int h = 0, w = 0;
  std::string method;
  try {
    h = hdr.at("H").get<int>();
    w = hdr.at("W").get<int>();
    method = hdr.at("method").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt header: ") + e.what());
  }
  if (h <= 0 || w <= 0) throw FormatError("bad score-map dimensions");
  std::vector<float> f(static_cast<std::size_t>(h) * w);
  io::read_f32(is, f);
  Grid<std::uint8_t> bits(h, w);
  io::read_u8(is, bits.values());
  io::expect_eof(is);
  ScoreMap out{Grid<double>(h, w), method, EvalMask(std::move(bits))};
  std::copy(f.begin(), f.end(), out.scores.begin());
  return out;
}

}  // namespace tiad::detectors
