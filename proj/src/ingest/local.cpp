#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tiad/error.hpp"
#include "tiad/ingest.hpp"

namespace tiad::ingest {

namespace fs = std::filesystem;

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

namespace {

std::map<std::string, std::string> read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing metadata sidecar " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

double number(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& where) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(where.string() + ": missing key '" + key + "'");
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size() || !std::isfinite(v)) {
    throw FormatError(where.string() + ": '" + key + "' is not a number: " + it->second);
  }
  return v;
}

std::string slurp(const fs::path& p, std::size_t expected, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError(p.parent_path().filename().string() + ": missing band " + what);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected) {
    throw FormatError(p.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected) + " for band " + what);
  }
  return bytes;
}

RawFrame read_scene(const fs::path& dir) {
  const fs::path meta_path = dir / "meta";
  const auto kv = read_sidecar(meta_path);
  RawFrame f;
  const double w = number(kv, "width", meta_path), h = number(kv, "height", meta_path);
  if (w < 1 || h < 1 || w > 65536 || h > 65536 || w != std::floor(w) || h != std::floor(h)) {
    throw FormatError(meta_path.string() + ": bad raster size");
  }
  const int width = static_cast<int>(w), height = static_cast<int>(h);
  try {
    f.meta.acquisition_time = parse_utc(kv.count("time") ? kv.at("time") : "");
  } catch (const FormatError& e) {
    throw FormatError(meta_path.string() + ": unparsable time: " + e.what());
  }
  f.meta.center_lat = number(kv, "lat", meta_path);
  f.meta.center_lon = number(kv, "lon", meta_path);
  f.meta.cloud_fraction = number(kv, "cloud_fraction", meta_path);
  if (kv.count("pixel_size_m")) f.meta.pixel_size_m = number(kv, "pixel_size_m", meta_path);
  f.meta.scene_id = kv.count("scene_id") ? kv.at("scene_id") : dir.filename().string();
  f.meta.validate();

  const std::size_t n = static_cast<std::size_t>(width) * height;
  for (int b = 0; b < kSpectralBands; ++b) {
    const std::string name(band_name(kSpectralOrder[b]));
    const std::string bytes = slurp(dir / (name + ".raw"), 2 * n, name);
    f.dn[b] = Grid<std::uint16_t>(height, width);
    for (std::size_t i = 0; i < n; ++i) {
      f.dn[b][i] = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]) |
                                              (static_cast<unsigned char>(bytes[2 * i + 1]) << 8));
    }
  }
  const std::string scl = slurp(dir / "SCL.raw", n, "SCL");
  f.scl = SclGrid(height, width);
  std::copy(scl.begin(), scl.end(), f.scl.begin());
  return f;
}

}  // namespace

std::vector<RawFrame> import_local(const fs::path& dir, const std::string& pattern) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> scenes;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && glob_match(pattern, e.path().filename().string())) scenes.push_back(e.path());
  }
  std::sort(scenes.begin(), scenes.end());
  std::vector<RawFrame> frames;
  for (const auto& s : scenes) frames.push_back(read_scene(s));
  std::stable_sort(frames.begin(), frames.end(), [](const RawFrame& a, const RawFrame& b) {
    return a.meta.acquisition_time < b.meta.acquisition_time;
  });
  return frames;
}

void write_local_scene(const fs::path& dir, const RawFrame& frame) {
  fs::create_directories(dir);
  {
    std::ofstream meta(dir / "meta");
    meta.precision(17);
    meta << "time=" << format_utc(frame.meta.acquisition_time) << "\n"
         << "lat=" << frame.meta.center_lat << "\n"
         << "lon=" << frame.meta.center_lon << "\n"
         << "cloud_fraction=" << frame.meta.cloud_fraction << "\n"
         << "width=" << frame.scl.width() << "\n"
         << "height=" << frame.scl.height() << "\n"
         << "pixel_size_m=" << frame.meta.pixel_size_m << "\n"
         << "scene_id=" << frame.meta.scene_id << "\n";
    if (!meta) throw FormatError("cannot write " + (dir / "meta").string());
  }
  for (int b = 0; b < kSpectralBands; ++b) {
    std::ofstream out(dir / (std::string(band_name(kSpectralOrder[b])) + ".raw"), std::ios::binary);
    for (std::uint16_t v : frame.dn[b]) {
      const char le[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
      out.write(le, 2);
    }
    if (!out) throw FormatError("cannot write band in " + dir.string());
  }
  std::ofstream scl(dir / "SCL.raw", std::ios::binary);
  scl.write(reinterpret_cast<const char*>(frame.scl.data()), static_cast<std::streamsize>(frame.scl.size()));
  if (!scl) throw FormatError("cannot write SCL in " + dir.string());
}

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kPi = 3.14159265358979323846;
constexpr double kKmPerDegree = kEarthRadiusKm * kPi / 180.0;

bool inside(const std::vector<LatLon>& poly, double lat, double lon) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.lat > lat) != (b.lat > lat) && lon < (b.lon - a.lon) * (lat - a.lat) / (b.lat - a.lat) + a.lon) in = !in;
  }
  return in;
}

}  // namespace

std::vector<LatLon> lattice_points(const std::vector<LatLon>& polygon, double spacing_km) {
  if (polygon.size() < 3) throw GeometryError("region polygon needs at least three vertices");
  if (!(spacing_km > 0)) throw GeometryError("lattice spacing must be positive");
  double lat0 = 90, lat1 = -90, lon0 = 180, lon1 = -180;
  for (const auto& p : polygon) {
    lat0 = std::min(lat0, p.lat);
    lat1 = std::max(lat1, p.lat);
    lon0 = std::min(lon0, p.lon);
    lon1 = std::max(lon1, p.lon);
  }
  const double dlat = spacing_km / kKmPerDegree;
  std::vector<LatLon> pts;
  for (int i = 0;; ++i) {
    const double lat = lat0 + i * dlat;
    if (lat > lat1) break;
    const double coslat = std::cos(lat * kPi / 180.0);
    if (coslat < 1e-9) continue;
    const double dlon = dlat / coslat;
    for (int j = 0;; ++j) {
      const double lon = lon0 + j * dlon;
      if (lon > lon1) break;
      if (inside(polygon, lat, lon)) pts.push_back({lat, lon});
    }
  }
  return pts;
}

BBox bbox_around(const LatLon& p, double half_extent_m) {
  const double dlat = half_extent_m / 1000.0 / kKmPerDegree;
  const double dlon = dlat / std::max(1e-9, std::cos(p.lat * kPi / 180.0));
  return {p.lon - dlon, p.lat - dlat, p.lon + dlon, p.lat + dlat};
}

}  // namespace tiad::ingest
