#include "tiad/datacube.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tiad/container.hpp"
#include "tiad/error.hpp"

namespace tiad {

namespace {
constexpr std::array<std::string_view, 10> kBandNames = {"B02", "B03", "B04", "B05", "B06",
                                                         "B07", "B08", "B11", "B12", "SCL"};
constexpr char kCubeMagic[] = "TIADCUBE";
}  // namespace

std::string_view band_name(BandId id) { return kBandNames[static_cast<std::size_t>(id)]; }

BandId band_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kBandNames.size(); ++i) {
    if (kBandNames[i] == name) return static_cast<BandId>(i);
  }
  throw FormatError("unknown band '" + std::string(name) + "'");
}

int spectral_index(BandId id) {
  if (id == BandId::SCL) throw FormatError("SCL is not a spectral band");
  return static_cast<int>(id);
}

const std::array<int, kOutputBands>& output_band_indices() {
  static const std::array<int, kOutputBands> idx = {spectral_index(kOutputOrder[0]), spectral_index(kOutputOrder[1]),
                                                    spectral_index(kOutputOrder[2]), spectral_index(kOutputOrder[3])};
  return idx;
}

void FrameMeta::validate() const {
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) throw FormatError("cloud_fraction outside [0,1]");
  if (!(center_lat >= -90.0 && center_lat <= 90.0)) throw FormatError("latitude outside [-90,90]");
  if (!(center_lon >= -180.0 && center_lon <= 180.0)) throw FormatError("longitude outside [-180,180]");
  if (pixel_size_m != kPixelSizeM) throw FormatError("pixel size must be 10 m");
}

void TimeCube::validate() const {
  if (frames.empty()) throw FormatError("cube has no frames");
  const int h = height(), w = width();
  if (h <= 0 || w <= 0) throw FormatError("cube has empty rasters");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame& f = frames[t];
    f.meta.validate();
    if (f.scl.height() != h || f.scl.width() != w) throw FormatError("SCL shape mismatch");
    for (const Band& b : f.bands) {
      if (b.height() != h || b.width() != w) throw FormatError("band shape mismatch");
      for (float v : b) {
        if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("reflectance outside [0,1] or NaN");
      }
    }
    if (t > 0 && f.meta.acquisition_time <= frames[t - 1].meta.acquisition_time) {
      throw FormatError("acquisition times not strictly increasing");
    }
  }
}

void TimeCube::validate_for_detection() const {
  validate();
  if (length() != kDetectionFrames) throw FormatError("detection needs exactly 4 frames");
  if (height() != width()) throw FormatError("detection needs a square window");
}

float scale_reflectance(std::uint16_t dn) {
  return static_cast<float>(std::clamp(static_cast<double>(dn) / kReflectanceScale, 0.0, 1.0));
}

Band scale_reflectance(const Grid<std::uint16_t>& dn) {
  Band out(dn.height(), dn.width());
  std::transform(dn.begin(), dn.end(), out.begin(), [](std::uint16_t v) { return scale_reflectance(v); });
  return out;
}

Frame scale_frame(const RawFrame& raw) {
  Frame f;
  f.meta = raw.meta;
  for (int b = 0; b < kSpectralBands; ++b) f.bands[b] = scale_reflectance(raw.dn[b]);
  f.scl = raw.scl;
  return f;
}

std::string qc_rejection_reason(const Frame& frame) {
  if (frame.meta.cloud_fraction > kMaxCloudFraction) {
    return "cloud fraction " + std::to_string(frame.meta.cloud_fraction) + " > 0.10";
  }
  for (int b = 0; b < kSpectralBands; ++b) {
    for (float v : frame.bands[b]) {
      if (std::isnan(v) || v == 0.0f) {
        return "zero or missing pixel in " + std::string(band_name(kSpectralOrder[b]));
      }
    }
  }
  return {};
}

std::vector<Frame> qc_filter(const std::vector<Frame>& frames) {
  std::vector<Frame> kept;
  for (const Frame& f : frames) {
    if (qc_rejection_reason(f).empty()) kept.push_back(f);
  }
  return kept;
}

TimeCube assemble_cube(std::vector<Frame> frames, UtcSeconds target_time) {
  std::stable_sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) {
    return a.meta.acquisition_time < b.meta.acquisition_time;
  });
  const auto end = std::upper_bound(frames.begin(), frames.end(), target_time,
                                    [](UtcSeconds t, const Frame& f) { return t < f.meta.acquisition_time; });
  const auto available = end - frames.begin();
  if (available < kDetectionFrames) {
    throw InsufficientHistory("need 4 accepted frames at or before " + format_utc(target_time) + ", have " +
                              std::to_string(available));
  }
  TimeCube cube;
  cube.frames.assign(std::make_move_iterator(end - kDetectionFrames), std::make_move_iterator(end));
  for (int t = 1; t < kDetectionFrames; ++t) {
    if (cube.frames[t].meta.acquisition_time == cube.frames[t - 1].meta.acquisition_time) {
      throw InsufficientHistory("duplicate acquisition time " + format_utc(cube.frames[t].meta.acquisition_time));
    }
  }
  return cube;
}

OutputStack output_bands(const Frame& frame) {
  OutputStack out;
  const auto& idx = output_band_indices();
  for (int k = 0; k < kOutputBands; ++k) out[k] = frame.bands[idx[k]];
  return out;
}

void write_cube(const TimeCube& cube, const std::filesystem::path& path) {
  cube.validate();
  nlohmann::json hdr;
  hdr["T"] = cube.length();
  hdr["C"] = kSpectralBands;
  hdr["H"] = cube.height();
  hdr["W"] = cube.width();
  auto& bands = hdr["bands"] = nlohmann::json::array();
  for (BandId b : kSpectralOrder) bands.push_back(band_name(b));
  auto& frames = hdr["frames"] = nlohmann::json::array();
  for (const Frame& f : cube.frames) {
    frames.push_back({{"time", f.meta.acquisition_time},
                      {"time_utc", format_utc(f.meta.acquisition_time)},
                      {"lat", f.meta.center_lat},
                      {"lon", f.meta.center_lon},
                      {"cloud_fraction", f.meta.cloud_fraction},
                      {"pixel_size_m", f.meta.pixel_size_m},
                      {"scene_id", f.meta.scene_id}});
  }
  auto os = io::open_for_write(path);
  io::write_header(os, kCubeMagic, kCubeFormatVersion, hdr);
  for (const Frame& f : cube.frames) {
    for (const Band& b : f.bands) io::write_f32(os, b.values());
  }
  for (const Frame& f : cube.frames) io::write_u8(os, f.scl.values());
  if (!os) throw FormatError("write failed: " + path.string());
}

TimeCube read_cube(const std::filesystem::path& path) {
  auto is = io::open_for_read(path);
  const auto hdr = io::read_header(is, kCubeMagic, kCubeFormatVersion);
  TimeCube cube;
  try {
    const int T = hdr.at("T").get<int>();
    const int C = hdr.at("C").get<int>();
    const int H = hdr.at("H").get<int>();
    const int W = hdr.at("W").get<int>();
    if (C != kSpectralBands) throw FormatError("expected 9 channels");
    if (T <= 0 || H <= 0 || W <= 0 || H > 1 << 15 || W > 1 << 15) throw FormatError("bad cube dimensions");
    const auto& frames = hdr.at("frames");
    if (!frames.is_array() || static_cast<int>(frames.size()) != T) throw FormatError("frame metadata count != T");
    const auto& bands = hdr.at("bands");
    for (int b = 0; b < kSpectralBands; ++b) {
      if (bands.at(b).get<std::string>() != band_name(kSpectralOrder[b])) throw FormatError("unexpected band order");
    }
    cube.frames.resize(T);
    for (int t = 0; t < T; ++t) {
      const auto& m = frames[t];
      FrameMeta& meta = cube.frames[t].meta;
      meta.acquisition_time = m.at("time").get<UtcSeconds>();
      meta.center_lat = m.at("lat").get<double>();
      meta.center_lon = m.at("lon").get<double>();
      meta.cloud_fraction = m.at("cloud_fraction").get<double>();
      meta.pixel_size_m = m.at("pixel_size_m").get<double>();
      meta.scene_id = m.value("scene_id", std::string{});
      for (Band& b : cube.frames[t].bands) b = Band(H, W);
      cube.frames[t].scl = SclGrid(H, W);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt header: ") + e.what());
  }
  for (Frame& f : cube.frames) {
    for (Band& b : f.bands) io::read_f32(is, b.values());
  }
  for (Frame& f : cube.frames) io::read_u8(is, f.scl.values());
  io::expect_eof(is);
  cube.validate();
  return cube;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest " + path.string());
  std::vector<std::filesystem::path> out;
  const auto base = path.parent_path();
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::filesystem::path p = line.substr(start);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& entries) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write manifest " + path.string());
  for (const auto& e : entries) os << e.generic_string() << '\n';
}

}  // namespace tiad
