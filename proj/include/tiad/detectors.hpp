#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tiad/datacube.hpp"
#include "tiad/maskgen.hpp"

namespace tiad::detectors {

using maskgen::EvalMask;

/// Per-pixel anomaly scores; NaN exactly where the mask is invalid.
struct ScoreMap {
  Grid<double> scores;
  std::string method_id;
  EvalMask mask;

  int height() const { return scores.height(); }
  int width() const { return scores.width(); }
};

/// Something that predicts the output bands of a cube's target frame.
/// Implementations must not read target pixels inside the inpainting mask.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string id() const = 0;
  virtual OutputStack predict(const TimeCube& cube, const BoolGrid& inpaint_mask) const = 0;
};

/// Per-pixel, per-band median of the three frames preceding the target.
OutputStack median_predict(const TimeCube& cube);

class MedianPredictor final : public Predictor {
 public:
  std::string id() const override { return "median"; }
  OutputStack predict(const TimeCube& cube, const BoolGrid&) const override { return median_predict(cube); }
};

struct RxOptions {
  /// Ridge as a fraction of the mean band variance, trace(Σ)/C.
  double ridge_factor = 1e-6;
};

/// Global Reed–Xiaoli: Mahalanobis distance to the mean of the valid pixels.
/// Throws DegenerateStatistics when fewer than C+1 pixels are valid.
ScoreMap rx_scores(const OutputStack& frame, const EvalMask& mask, const RxOptions& options = {});

/// Mean over bands of |pred − obs|.
ScoreMap residual_map(const OutputStack& pred, const OutputStack& obs, const EvalMask& mask);

/// Linear interpolation between closest ranks at position (N−1)·q.
/// values is reordered. Throws EmptyMask when empty.
double percentile(std::span<double> values, double q);

inline constexpr double kScoreQuantile = 0.95;

/// 95th percentile of the valid scores. Throws EmptyMask.
double anomaly_score(const ScoreMap& map);

/// Min-max rescaling to [0,1]. Throws DegenerateSeries when max == min or
/// fewer than two entries.
std::vector<double> normalize_series(std::span<const double> scores);

/// Copy with scores outside region set to NaN and the mask restricted.
ScoreMap restrict_to(const ScoreMap& map, const BoolGrid& region);

/// Filled disc of the given radius (pixel centres within radius of the centre).
BoolGrid disc_mask(int height, int width, double center_row, double center_col, double radius);
/// Circular target mask at image centre; radius 50 px at 256 px, scaled with size.
BoolGrid centered_target_mask(int height, int width);
double target_mask_radius(int size);

/// Scores the target frame inside `region`. A null predictor means RX, whose
/// background statistics use every valid pixel of `mask`; predictor residuals
/// see the region as the inpainting mask. The result is restricted to the region.
ScoreMap score_target(const TimeCube& cube, const EvalMask& mask, const BoolGrid& region, const Predictor* predictor,
                      const RxOptions& rx = {});

inline constexpr std::uint32_t kScoreMapFormatVersion = 1;
void write_score_map(const ScoreMap& map, const std::filesystem::path& path);
ScoreMap read_score_map(const std::filesystem::path& path);

}  // namespace tiad::detectors
