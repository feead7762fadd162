#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tiad/grid.hpp"
#include "tiad/timeutil.hpp"

namespace tiad {

/// Sentinel-2 L2A layers in storage order. SCL is carried separately and is
/// never part of a reflectance array.
enum class BandId : std::uint8_t { B02, B03, B04, B05, B06, B07, B08, B11, B12, SCL };

inline constexpr int kSpectralBands = 9;
inline constexpr int kOutputBands = 4;
inline constexpr double kReflectanceScale = 8160.0;
inline constexpr double kPixelSizeM = 10.0;
inline constexpr double kMaxCloudFraction = 0.10;
inline constexpr int kDetectionFrames = 4;

inline constexpr std::array<BandId, kSpectralBands> kSpectralOrder = {
    BandId::B02, BandId::B03, BandId::B04, BandId::B05, BandId::B06,
    BandId::B07, BandId::B08, BandId::B11, BandId::B12};

/// Output (RGB+NIR) channel order: B04, B03, B02, B08.
inline constexpr std::array<BandId, kOutputBands> kOutputOrder = {BandId::B04, BandId::B03, BandId::B02,
                                                                   BandId::B08};

std::string_view band_name(BandId id);
/// Throws FormatError for unknown names.
BandId band_from_name(std::string_view name);
/// Position of a spectral band inside a 9-band reflectance array.
int spectral_index(BandId id);
/// Spectral indices of kOutputOrder: {2, 1, 0, 6}.
const std::array<int, kOutputBands>& output_band_indices();

struct FrameMeta {
  UtcSeconds acquisition_time = 0;
  double center_lat = 0.0;
  double center_lon = 0.0;
  double cloud_fraction = 0.0;
  double pixel_size_m = kPixelSizeM;
  std::string scene_id;

  /// Throws FormatError if any field is outside its domain.
  void validate() const;
  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

using Band = Grid<float>;
using SclGrid = Grid<std::uint8_t>;

/// One acquisition: nine scaled reflectance bands plus the SCL layer.
/// Missing pixels are NaN.
struct Frame {
  FrameMeta meta;
  std::array<Band, kSpectralBands> bands;
  SclGrid scl;

  int height() const { return scl.height(); }
  int width() const { return scl.width(); }
  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Raw decoded acquisition as delivered by ingestion (16-bit digital numbers).
struct RawFrame {
  FrameMeta meta;
  std::array<Grid<std::uint16_t>, kSpectralBands> dn;
  SclGrid scl;
};

/// Four-band stack in kOutputOrder (predictions and observed targets).
using OutputStack = std::array<Band, kOutputBands>;

/// Ordered frames over one location; oldest first, target last.
struct TimeCube {
  std::vector<Frame> frames;

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  const Frame& target() const { return frames.back(); }

  /// Shape, range and ordering checks; throws FormatError.
  void validate() const;
  /// validate() plus T == 4 and H == W.
  void validate_for_detection() const;

  friend bool operator==(const TimeCube&, const TimeCube&) = default;
};

/// clip(dn / 8160, 0, 1)
float scale_reflectance(std::uint16_t dn);
Band scale_reflectance(const Grid<std::uint16_t>& dn);
Frame scale_frame(const RawFrame& raw);

/// Why a frame failed quality control, empty when accepted.
std::string qc_rejection_reason(const Frame& frame);
/// Keeps frames with cloud_fraction <= 0.10 and no zero/NaN reflectance. Order preserved.
std::vector<Frame> qc_filter(const std::vector<Frame>& frames);

/// The target (latest frame at or before target_time) and its three predecessors,
/// oldest first. Throws InsufficientHistory.
TimeCube assemble_cube(std::vector<Frame> frames, UtcSeconds target_time);

/// Output-band view of one frame.
OutputStack output_bands(const Frame& frame);

inline constexpr std::uint32_t kCubeFormatVersion = 1;

void write_cube(const TimeCube& cube, const std::filesystem::path& path);
TimeCube read_cube(const std::filesystem::path& path);

/// Plain-text manifest: one path per line; blank lines and '#' comments skipped.
/// Relative entries resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& entries);

}  // namespace tiad
