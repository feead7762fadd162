#include "tiad/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "tiad/container.hpp"
#include "tiad/error.hpp"

namespace tiad::maskgen {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  return r;
}

}  // namespace

BoolGrid EvalMask::valid_grid() const {
  BoolGrid out(height(), width());
  for (std::size_t i = 0; i < provenance.size(); ++i) out[i] = provenance[i] == 0;
  return out;
}

std::size_t EvalMask::valid_count() const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), std::uint8_t{0}));
}

EvalMask EvalMask::restricted_to(const BoolGrid& region) const {
  if (!region.same_shape(provenance)) throw ShapeError("region shape differs from mask");
  EvalMask out = *this;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) out.provenance[i] |= kOutsideRegion;
  }
  return out;
}

SolarGeometry solar_position(UtcSeconds time, double lat_deg, double lon_deg) {
  const double jd = static_cast<double>(time) / 86400.0 + 2440587.5;
  const double jc = (jd - 2451545.0) / 36525.0;

  const double mean_long = wrap360(280.46646 + jc * (36000.76983 + jc * 0.0003032));
  const double mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
  const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
  const double m = mean_anom * kDeg;
  const double eq_ctr = std::sin(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                        std::sin(2 * m) * (0.019993 - 0.000101 * jc) + std::sin(3 * m) * 0.000289;
  const double true_long = mean_long + eq_ctr;
  const double omega = (125.04 - 1934.136 * jc) * kDeg;
  const double app_long = true_long - 0.00569 - 0.00478 * std::sin(omega);
  const double mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
  const double obliq = (mean_obliq + 0.00256 * std::cos(omega)) * kDeg;
  const double decl = std::asin(std::sin(obliq) * std::sin(app_long * kDeg));

  const double y = std::pow(std::tan(obliq / 2), 2);
  const double l0 = mean_long * kDeg;
  const double eot_min = 4.0 / kDeg *
                         (y * std::sin(2 * l0) - 2 * ecc * std::sin(m) + 4 * ecc * y * std::sin(m) * std::cos(2 * l0) -
                          0.5 * y * y * std::sin(4 * l0) - 1.25 * ecc * ecc * std::sin(2 * m));

  std::int64_t sod = time % 86400;
  if (sod < 0) sod += 86400;
  const double minutes = static_cast<double>(sod) / 60.0;
  double tst = std::fmod(minutes + eot_min + 4.0 * lon_deg, 1440.0);
  if (tst < 0) tst += 1440.0;
  const double hour_angle = tst / 4.0 < 0 ? tst / 4.0 + 180.0 : tst / 4.0 - 180.0;

  const double lat = lat_deg * kDeg;
  const double ha = hour_angle * kDeg;
  const double cos_zen = std::clamp(std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(ha),
                                    -1.0, 1.0);
  const double zen = std::acos(cos_zen);
  const double elev = 90.0 - zen / kDeg;

  double refraction = 0.0;
  if (elev <= 85.0) {
    const double te = std::tan(elev * kDeg);
    if (elev > 5.0) {
      refraction = 58.1 / te - 0.07 / std::pow(te, 3) + 0.000086 / std::pow(te, 5);
    } else if (elev > -0.575) {
      refraction = 1735.0 + elev * (-518.2 + elev * (103.4 + elev * (-12.79 + elev * 0.711)));
    } else {
      refraction = -20.772 / te;
    }
    refraction /= 3600.0;
  }

  double azimuth = 0.0;
  const double denom = std::cos(lat) * std::sin(zen);
  if (std::abs(denom) > 1e-12) {
    const double a = std::acos(std::clamp((std::sin(lat) * cos_zen - std::sin(decl)) / denom, -1.0, 1.0)) / kDeg;
    azimuth = hour_angle > 0 ? wrap360(a + 180.0) : wrap360(540.0 - a);
  }
  return SolarGeometry{azimuth, elev + refraction};
}

Grid<double> hillshade(const DemGrid& dem, const SolarGeometry& sun) {
  const auto& z = dem.heights;
  const int h = z.height(), w = z.width();
  const double cs = dem.pixel_size_m;
  const double zen = sun.zenith_deg() * kDeg;
  const double az = sun.azimuth_deg * kDeg;
  const double cz = std::cos(zen), sz = std::sin(zen);
  auto at = [&](int r, int c) { return z(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1)); };

  Grid<double> out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double a = at(r - 1, c - 1), b = at(r - 1, c), cc = at(r - 1, c + 1);
      const double d = at(r, c - 1), f = at(r, c + 1);
      const double g = at(r + 1, c - 1), hh = at(r + 1, c), i = at(r + 1, c + 1);
      // Horn gradients; rows run north to south.
      const double dz_east = ((cc + 2 * f + i) - (a + 2 * d + g)) / (8 * cs);
      const double dz_north = ((a + 2 * b + cc) - (g + 2 * hh + i)) / (8 * cs);
      const double slope = std::atan(std::hypot(dz_east, dz_north));
      // Compass direction of steepest descent.
      const double aspect = (dz_east == 0.0 && dz_north == 0.0) ? 0.0 : std::atan2(-dz_east, -dz_north);
      out(r, c) = std::max(0.0, cz * std::cos(slope) + sz * std::sin(slope) * std::cos(az - aspect));
    }
  }
  return out;
}

BoolGrid topo_shadow(const Grid<double>& hs) {
  BoolGrid out(hs.height(), hs.width());
  for (std::size_t i = 0; i < hs.size(); ++i) out[i] = hs[i] < 0.5;
  return out;
}

std::pair<int, int> shadow_offset_pixels(double height_m, const SolarGeometry& sun, double pixel_size_m) {
  const double offset_m = height_m * std::tan(sun.zenith_deg() * kDeg);
  const double away = (sun.azimuth_deg + 180.0) * kDeg;
  const double east = offset_m * std::sin(away);
  const double north = offset_m * std::cos(away);
  return {static_cast<int>(std::lround(-north / pixel_size_m)), static_cast<int>(std::lround(east / pixel_size_m))};
}

BoolGrid cloud_shadow_project(const BoolGrid& cloud_mask, const SolarGeometry& sun, double pixel_size_m) {
  if (!(sun.elevation_deg > 0.0)) {
    throw SunBelowHorizon("solar elevation " + std::to_string(sun.elevation_deg) + " deg");
  }
  const int h = cloud_mask.height(), w = cloud_mask.width();
  BoolGrid out(h, w, 0);
  const int steps = static_cast<int>(std::lround((kCloudHeightMaxM - kCloudHeightMinM) / kCloudHeightStepM));
  for (int k = 0; k <= steps; ++k) {
    const auto [dr, dc] = shadow_offset_pixels(kCloudHeightMinM + k * kCloudHeightStepM, sun, pixel_size_m);
    if (std::abs(dr) >= h || std::abs(dc) >= w) continue;
    for (int r = 0; r < h; ++r) {
      const int rr = r + dr;
      if (rr < 0 || rr >= h) continue;
      for (int c = 0; c < w; ++c) {
        const int cc = c + dc;
        if (cc >= 0 && cc < w && cloud_mask(r, c)) out(rr, cc) = 1;
      }
    }
  }
  return out;
}

bool scl_excluded(std::uint8_t code) {
  switch (code) {
    case 3:   // cloud shadow
    case 6:   // water
    case 8:   // cloud, medium probability
    case 9:   // cloud, high probability
    case 10:  // thin cirrus
    case 11:  // snow / ice
      return true;
    default:
      return false;
  }
}

BoolGrid scl_exclusion(const SclGrid& scl) {
  BoolGrid out(scl.height(), scl.width());
  for (std::size_t i = 0; i < scl.size(); ++i) out[i] = scl_excluded(scl[i]);
  return out;
}

BoolGrid scl_cloud_mask(const SclGrid& scl) {
  BoolGrid out(scl.height(), scl.width());
  for (std::size_t i = 0; i < scl.size(); ++i) out[i] = scl[i] >= 8 && scl[i] <= 10;
  return out;
}

EvalMask build_eval_mask(const SclGrid& scl, const DemGrid& dem, const SolarGeometry& sun,
                         const BoolGrid& cloud_mask) {
  if (!scl.same_shape(dem.heights) || !scl.same_shape(cloud_mask)) {
    throw ShapeError("eval-mask inputs differ in shape");
  }
  const auto excluded = scl_exclusion(scl);
  const auto topo = topo_shadow(hillshade(dem, sun));
  const auto shadow = cloud_shadow_project(cloud_mask, sun, dem.pixel_size_m);
  Grid<std::uint8_t> bits(scl.height(), scl.width(), 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = static_cast<std::uint8_t>((excluded[i] ? EvalMask::kScl : 0) | (topo[i] ? EvalMask::kTopoShadow : 0) |
                                        (shadow[i] ? EvalMask::kCloudShadow : 0));
  }
  return EvalMask(std::move(bits));
}

EvalMask eval_mask_for_target(const TimeCube& cube, const DemGrid* dem) {
  const Frame& target = cube.target();
  const auto sun = solar_position(target.meta.acquisition_time, target.meta.center_lat, target.meta.center_lon);
  const DemGrid flat = flat_dem(target.height(), target.width());
  const DemGrid& used = dem ? *dem : flat;
  return build_eval_mask(target.scl, used, sun, scl_cloud_mask(target.scl));
}

DemGrid flat_dem(int height, int width, double elevation_m) {
  return DemGrid{Grid<double>(height, width, elevation_m), kPixelSizeM};
}

DemGrid resample_bilinear(const DemGrid& src, int height, int width, double pixel_size_m) {
  const auto& z = src.heights;
  if (z.empty()) throw ShapeError("empty DEM");
  DemGrid out{Grid<double>(height, width), pixel_size_m};
  const double scale = pixel_size_m / src.pixel_size_m;
  for (int r = 0; r < height; ++r) {
    // Pixel-centre mapping between the two grids.
    const double sr = std::clamp((r + 0.5) * scale - 0.5, 0.0, static_cast<double>(z.height() - 1));
    const int r0 = static_cast<int>(std::floor(sr));
    const int r1 = std::min(r0 + 1, z.height() - 1);
    const double fr = sr - r0;
    for (int c = 0; c < width; ++c) {
      const double sc = std::clamp((c + 0.5) * scale - 0.5, 0.0, static_cast<double>(z.width() - 1));
      const int c0 = static_cast<int>(std::floor(sc));
      const int c1 = std::min(c0 + 1, z.width() - 1);
      const double fc = sc - c0;
      out.heights(r, c) = (1 - fr) * ((1 - fc) * z(r0, c0) + fc * z(r0, c1)) + fr * ((1 - fc) * z(r1, c0) + fc * z(r1, c1));
    }
  }
  return out;
}

DemGrid read_dem_dir(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta");
  if (!meta) throw FormatError("missing DEM sidecar " + (dir / "meta").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.empty() || line[0] == '#') continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  int w = 0, h = 0;
  double ps = 0.0;
  try {
    w = std::stoi(kv.at("width"));
    h = std::stoi(kv.at("height"));
    ps = std::stod(kv.at("pixel_size_m"));
  } catch (const std::exception&) {
    throw FormatError("DEM sidecar needs width, height, pixel_size_m");
  }
  if (w <= 0 || h <= 0 || !(ps > 0)) throw FormatError("bad DEM dimensions");
  auto is = io::open_for_read(dir / "DEM.raw");
  std::vector<float> raw(static_cast<std::size_t>(w) * h);
  io::read_f32(is, raw);
  io::expect_eof(is);
  DemGrid dem{Grid<double>(h, w), ps};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) throw FormatError("non-finite DEM height");
    dem.heights[i] = raw[i];
  }
  return dem;
}

void write_eval_mask(const EvalMask& mask, const std::filesystem::path& path) {
  auto os = io::open_for_write(path);
  io::write_header(os, "TIADMASK", 1, {{"H", mask.height()}, {"W", mask.width()}});
  io::write_u8(os, mask.provenance.values());
  if (!os) throw FormatError("write failed: " + path.string());
}

EvalMask read_eval_mask(const std::filesystem::path& path) {
  auto is = io::open_for_read(path);
  const auto hdr = io::read_header(is, "TIADMASK", 1);
  int h = 0, w = 0;
  try {
    h = hdr.at("H").get<int>();
    w = hdr.at("W").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt header: ") + e.what());
  }
  if (h <= 0 || w <= 0) throw FormatError("bad mask dimensions");
  Grid<std::uint8_t> bits(h, w);
  io::read_u8(is, bits.values());
  io::expect_eof(is);
  return EvalMask(std::move(bits));
}

}  // namespace tiad::maskgen
