#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiad/datacube.hpp"
#include "tiad/detectors.hpp"
#include "tiad/maskgen.hpp"
#include "tiad/rng.hpp"

namespace tiad::synthlab {

using maskgen::EvalMask;

enum class AnomalyKind { Brightness, Darkening, Texture, SpectralShift, Vegetation };
inline constexpr std::array<AnomalyKind, 5> kAllKinds = {AnomalyKind::Brightness, AnomalyKind::Darkening,
                                                          AnomalyKind::Texture, AnomalyKind::SpectralShift,
                                                          AnomalyKind::Vegetation};
std::string_view kind_name(AnomalyKind k);
/// Throws ShapeError for unknown names.
AnomalyKind kind_from_name(std::string_view name);

inline constexpr double kMinIntensity = 0.003;
inline constexpr double kMaxIntensity = 0.25;
inline constexpr double kAnomalyAreaFraction = 0.20;
inline constexpr double kTextureSigmaPx = 2.0;

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::Brightness;
  /// Fraction of the local dynamic range. Zero (no anomaly) or within [0.003, 0.25].
  double intensity = 0.0;
  double center_row = 0.0;
  double center_col = 0.0;
  double radius = 0.0;
  std::uint64_t seed = 0;

  /// Throws ShapeError.
  void validate() const;
};

/// p99 − p1 of the per-pixel band mean over valid pixels. Throws EmptyMask below two pixels.
double local_dynamic_range(const Frame& frame, const EvalMask& mask);

struct Injection {
  Frame frame;
  BoolGrid truth;  // disc ∩ valid mask
};

/// Perturbs the disc ∩ valid pixels of a 9-band frame and clips to [0,1].
/// Throws GeometryError when the disc leaves the frame or misses every valid pixel.
Injection inject_anomaly(const Frame& frame, const EvalMask& mask, const AnomalySpec& spec);

/// Radius whose disc covers 20% of `valid_area` pixels.
double anomaly_radius(std::size_t valid_area);

/// Centre drawn uniformly among pixels whose disc of `radius` lies inside the
/// container disc (and hence the frame). Throws GeometryError if none exists.
std::pair<int, int> place_disc(Rng& rng, int height, int width, double radius, double container_row,
                               double container_col, double container_radius);

/// Mann–Whitney AUC by rank summation with midranks. Throws SingleClass.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);
/// Average precision over descending thresholds, tie blocks sharing one threshold. Throws NoPositives.
double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);
/// Best F1 over distinct-score thresholds. Throws NoPositives.
double best_f1(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};
/// (FPR, TPR) corners from (0,0) to (1,1), one per tie block.
std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);
/// (recall, precision), one per tie block.
std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct IntensityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::string label() const;
  bool contains(double v) const { return v >= lo && v <= hi; }
};
/// [0.003,0.05], [0.05,0.10], [0.10,0.15], [0.15,0.20], [0.20,0.25].
const std::vector<IntensityBin>& default_bins();

/// Named detector; a null predictor selects RX.
struct DetectorMethod {
  std::string id;
  const detectors::Predictor* predictor = nullptr;
};

struct ExperimentConfig {
  std::size_t n_samples = 150;
  std::vector<AnomalyKind> kinds{kAllKinds.begin(), kAllKinds.end()};
  /// Intensities are drawn per bin from bin ∩ [lo, hi]. A range below the
  /// first bin (e.g. [0, 0]) forms a single bin of its own.
  double intensity_lo = kMinIntensity;
  double intensity_hi = kMaxIntensity;
  std::uint64_t seed = 0;
  /// Resolution of the averaged ROC/PR curves.
  int curve_points = 101;

  void validate() const;
};

struct SampleMetrics {
  std::optional<double> roc_auc;
  std::optional<double> pr_auc;
  std::optional<double> best_f1;
};

struct SampleResult {
  std::size_t index = 0;
  std::size_t cube_index = 0;
  AnomalyKind kind = AnomalyKind::Brightness;
  std::size_t bin = 0;
  double intensity = 0.0;
  std::size_t positives = 0;
  std::size_t region_pixels = 0;
  std::vector<SampleMetrics> per_method;  // aligned with MetricsReport::methods
};

struct Stat {
  std::size_t n = 0;  // defined values
  double mean = 0.0;
  double std = 0.0;   // population standard deviation
};
/// Absent when no value is defined.
std::optional<Stat> summarize(std::span<const std::optional<double>> values);

enum class Metric { RocAuc, PrAuc, BestF1 };
inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::RocAuc, Metric::PrAuc, Metric::BestF1};
std::string_view metric_name(Metric m);

struct MetricsReport {
  std::vector<std::string> methods;
  std::vector<AnomalyKind> kinds;
  std::vector<IntensityBin> bins;
  std::vector<SampleResult> samples;
  /// Per method: mean TPR on a uniform FPR grid and mean interpolated precision
  /// on a uniform recall grid, over samples with both classes.
  std::vector<std::vector<CurvePoint>> mean_roc;
  std::vector<std::vector<CurvePoint>> mean_pr;

  /// Samples matching the filter; nullopt means any.
  std::vector<const SampleResult*> select(std::optional<AnomalyKind> kind, std::optional<std::size_t> bin) const;
  std::optional<Stat> stat(std::size_t method, Metric metric, std::optional<AnomalyKind> kind = {},
                           std::optional<std::size_t> bin = {}) const;

  /// Columns method,kind,bin,metric,mean,std,n,n_defined; one row per
  /// (method, kind, bin) cell, then kind=all per bin, then the overall row.
  /// Undefined statistics leave mean and std empty.
  std::string to_csv() const;
  /// index,cube,kind,bin,intensity,positives,region_pixels,method,roc_auc,pr_auc,best_f1
  std::string samples_csv() const;
};

/// Per sample: draw a cube, build the eval mask and the centred inpainting
/// disc, inject one anomaly inside the disc, score every method on the disc ∩
/// eval-mask pixels and record the metrics. Kinds and bins are filled
/// round-robin. Samples run in parallel and aggregate in index order.
/// Intensity-zero samples have no positives, so their metrics are absent.
MetricsReport run_experiment(const std::vector<TimeCube>& corpus, const std::vector<DetectorMethod>& methods,
                             const ExperimentConfig& config);

struct SweepRow {
  std::string method;
  IntensityBin bin;
  std::optional<Stat> roc_auc;
};
/// ROC-AUC per (method, bin), all kinds pooled. Empty bins are absent.
std::vector<SweepRow> intensity_sweep(const MetricsReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Procedural cube: correlated smooth random fields shared across frames, with
/// per-frame gain, sensor noise and slow per-band drift. SCL is clear land.
TimeCube gen_fixture_cube(Rng& rng, int height, int width, int frames = kDetectionFrames);

/// Separable Gaussian blur with reflected borders; radius ceil(3σ).
Grid<double> gaussian_blur(const Grid<double>& g, double sigma);

}  // namespace tiad::synthlab
