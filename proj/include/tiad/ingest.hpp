#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiad/datacube.hpp"

namespace tiad::ingest {

/// Degrees, (lon_min, lat_min, lon_max, lat_max).
struct BBox {
  double lon_min = 0.0;
  double lat_min = 0.0;
  double lon_max = 0.0;
  double lat_max = 0.0;

  bool intersects(const BBox& o) const {
    return lon_min <= o.lon_max && o.lon_min <= lon_max && lat_min <= o.lat_max && o.lat_min <= lat_max;
  }
};

struct StacQuery {
  std::string endpoint_url;  // item-search URL, e.g. https://host/api/stac/v1/search
  std::string collection = "sentinel-2-l2a";
  BBox bbox;
  UtcSeconds start = 0;
  UtcSeconds end = 0;
  double max_cloud = kMaxCloudFraction;
  int page_limit = 100;

  /// Throws ShapeError on a malformed box, reversed interval or bad threshold.
  void validate() const;
  /// STAC Item Search POST body.
  nlohmann::json search_body() const;
};

inline constexpr std::string_view kSclAsset = "SCL";

struct SceneRecord {
  std::string scene_id;
  UtcSeconds acquisition_time = 0;
  double cloud_fraction = 0.0;
  double center_lat = 0.0;
  double center_lon = 0.0;
  std::map<std::string, std::string> asset_urls;

  /// Spectral bands and SCL absent from asset_urls.
  std::vector<std::string> missing_assets() const;
  bool complete() const { return missing_assets().empty(); }
};

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::string body;
  std::string content_type = "application/json";
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One HTTP exchange. Throws NetworkError when no response was obtained.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// Real HTTP(S) client. HTTPS requires a build with OpenSSL.
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(60));

/// Serves canned responses keyed by method and URL (and body for POST).
/// Unknown requests answer 404.
class ReplayTransport final : public HttpTransport {
 public:
  void add(const std::string& method, const std::string& url, HttpResponse response, const std::string& body = {});
  HttpResponse send(const HttpRequest& request) override;
  const std::vector<HttpRequest>& requests() const { return requests_; }

 private:
  std::map<std::string, HttpResponse> routes_;
  std::vector<HttpRequest> requests_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};  // doubles after each failed attempt
};

/// Retries transport failures, 429 and 5xx. Throws NetworkError once attempts
/// are exhausted or on any other non-2xx status.
HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy);

/// Parses one FeatureCollection page. Throws ProtocolError.
std::vector<SceneRecord> parse_item_page(const nlohmann::json& page);

/// All items matching the query, following next links, filtered to
/// cloud_fraction <= max_cloud and the time interval, sorted by
/// (acquisition_time, scene_id). Throws NetworkError, ProtocolError.
std::vector<SceneRecord> stac_search(const StacQuery& query, HttpTransport& transport,
                                     const RetryPolicy& policy = {});

/// Square pixel window [row - half, row + half) × [col - half, col + half).
/// A negative centre means the asset centre.
struct PixelWindow {
  int center_row = -1;
  int center_col = -1;
  int half_extent = 32;
};

/// Decoded-raster wire format: "R16\0", u32 width, u32 height, width·height u16, all little-endian.
inline constexpr char kRasterMagic[4] = {'R', '1', '6', '\0'};
std::string encode_raster(const Grid<std::uint16_t>& raster);
/// Throws DecodeError.
Grid<std::uint16_t> decode_raster(const std::string& bytes);

/// Downloads and crops every band plus SCL. All ten layers or DecodeError/NetworkError.
RawFrame fetch_scene(const SceneRecord& record, const PixelWindow& window, HttpTransport& transport,
                     const RetryPolicy& policy = {});

/// Fetches concurrently; result ordered by (scene_id, time) whatever the completion order.
/// Failed scenes are reported in `failures` as "scene_id: reason" instead of aborting.
std::vector<RawFrame> fetch_scenes(const std::vector<SceneRecord>& records, const PixelWindow& window,
                                   HttpTransport& transport, const RetryPolicy& policy,
                                   std::vector<std::string>* failures = nullptr);

/// Reads `<dir>/<scene>/<BAND>.raw` (u16 LE; SCL.raw is u8) plus a `meta`
/// sidecar of key=value lines (time, lat, lon, cloud_fraction, width, height;
/// optional pixel_size_m). Scene directories are filtered by a glob pattern
/// over their names ('*' and '?'). Result is ordered by acquisition time.
/// Throws FormatError.
std::vector<RawFrame> import_local(const std::filesystem::path& dir, const std::string& pattern = "*");

/// Inverse of the import_local layout for one scene.
void write_local_scene(const std::filesystem::path& dir, const RawFrame& frame);

bool glob_match(std::string_view pattern, std::string_view text);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Lattice points with `spacing_km` between rows and between columns
/// (longitude step widened by 1/cos(lat)) that fall inside the polygon
/// (vertices as lat/lon, ray-casting test).
std::vector<LatLon> lattice_points(const std::vector<LatLon>& polygon, double spacing_km = 5.0);

/// BBox of `half_extent_m` metres around a point.
BBox bbox_around(const LatLon& p, double half_extent_m);

}  // namespace tiad::ingest
