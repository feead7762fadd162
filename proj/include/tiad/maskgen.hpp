#pragma once

#include <cstdint>
#include <filesystem>

#include "tiad/datacube.hpp"
#include "tiad/grid.hpp"
#include "tiad/timeutil.hpp"

namespace tiad::maskgen {

struct SolarGeometry {
  double azimuth_deg = 0.0;    // clockwise from north, [0, 360)
  double elevation_deg = 0.0;  // above horizon, refraction-corrected

  double zenith_deg() const { return 90.0 - elevation_deg; }
};

struct DemGrid {
  Grid<double> heights;
  double pixel_size_m = kPixelSizeM;
};

/// Per-pixel exclusion record. A pixel is valid exactly when no bit is set.
struct EvalMask {
  static constexpr std::uint8_t kScl = 1;
  static constexpr std::uint8_t kTopoShadow = 2;
  static constexpr std::uint8_t kCloudShadow = 4;
  /// Outside the scoring region (e.g. the circular target mask); set by callers.
  static constexpr std::uint8_t kOutsideRegion = 8;

  Grid<std::uint8_t> provenance;

  EvalMask() = default;
  explicit EvalMask(Grid<std::uint8_t> bits) : provenance(std::move(bits)) {}
  /// All-valid mask.
  static EvalMask all_valid(int height, int width) { return EvalMask(Grid<std::uint8_t>(height, width, 0)); }

  int height() const { return provenance.height(); }
  int width() const { return provenance.width(); }
  bool valid(int r, int c) const { return provenance(r, c) == 0; }
  bool valid(std::size_t i) const { return provenance[i] == 0; }
  BoolGrid valid_grid() const;
  std::size_t valid_count() const;

  /// Copy with kOutsideRegion set wherever region is false.
  EvalMask restricted_to(const BoolGrid& region) const;

  friend bool operator==(const EvalMask&, const EvalMask&) = default;
};

/// NOAA solar-position equations (with the NOAA refraction correction).
SolarGeometry solar_position(UtcSeconds time, double lat_deg, double lon_deg);

/// Horn slope/aspect on edge-replicated 3×3 neighbourhoods, then
/// max(0, cos Z cos S + sin Z sin S cos(azimuth − aspect)).
Grid<double> hillshade(const DemGrid& dem, const SolarGeometry& sun);

/// True where hillshade < 0.5 (strict).
BoolGrid topo_shadow(const Grid<double>& hillshade_grid);

/// Cloud heights swept for shadow projection: 500, 750, ..., 3000 m.
inline constexpr double kCloudHeightMinM = 500.0;
inline constexpr double kCloudHeightMaxM = 3000.0;
inline constexpr double kCloudHeightStepM = 250.0;

/// Grid offset (rows, cols) of the shadow cast by a cloud at height_m.
std::pair<int, int> shadow_offset_pixels(double height_m, const SolarGeometry& sun, double pixel_size_m);

/// Union over the height sweep of the cloud mask shifted away from the sun.
/// Throws SunBelowHorizon when elevation <= 0.
BoolGrid cloud_shadow_project(const BoolGrid& cloud_mask, const SolarGeometry& sun,
                              double pixel_size_m = kPixelSizeM);

/// SCL classes 3, 6, 8, 9, 10, 11.
bool scl_excluded(std::uint8_t code);
BoolGrid scl_exclusion(const SclGrid& scl);
/// SCL cloud classes 8, 9, 10: the cloud source for shadow projection.
BoolGrid scl_cloud_mask(const SclGrid& scl);

EvalMask build_eval_mask(const SclGrid& scl, const DemGrid& dem, const SolarGeometry& sun,
                         const BoolGrid& cloud_mask);

/// Eval mask for the target frame of a cube: SCL of the target, sun from its
/// metadata, clouds from SCL. A flat DEM is used when none is given.
EvalMask eval_mask_for_target(const TimeCube& cube, const DemGrid* dem = nullptr);

DemGrid flat_dem(int height, int width, double elevation_m = 0.0);

/// Bilinear resampling onto a grid of the given shape and pixel size, both
/// grids anchored at the same upper-left corner.
DemGrid resample_bilinear(const DemGrid& src, int height, int width, double pixel_size_m = kPixelSizeM);

/// Reads `<dir>/DEM.raw` (float32 LE heights) with `<dir>/meta`
/// (width, height, pixel_size_m). Throws FormatError.
DemGrid read_dem_dir(const std::filesystem::path& dir);

void write_eval_mask(const EvalMask& mask, const std::filesystem::path& path);
EvalMask read_eval_mask(const std::filesystem::path& path);

}  // namespace tiad::maskgen
