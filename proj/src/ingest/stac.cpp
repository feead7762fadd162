#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <optional>
#include <set>

#include "tiad/error.hpp"
#include "tiad/ingest.hpp"
#include "tiad/log.hpp"
#include "tiad/parallel.hpp"

namespace tiad::ingest {

using nlohmann::json;

void StacQuery::validate() const {
  if (endpoint_url.empty()) throw ShapeError("STAC endpoint is empty");
  if (!(bbox.lon_min < bbox.lon_max && bbox.lat_min < bbox.lat_max)) throw ShapeError("bbox must satisfy min < max");
  if (bbox.lon_min < -180 || bbox.lon_max > 180 || bbox.lat_min < -90 || bbox.lat_max > 90) {
    throw ShapeError("bbox outside lon/lat range");
  }
  if (start > end) throw ShapeError("time range start is after end");
  if (!(max_cloud >= 0 && max_cloud <= 1)) throw ShapeError("max_cloud must be a fraction in [0,1]");
  if (page_limit < 1) throw ShapeError("page_limit must be positive");
}

json StacQuery::search_body() const {
  return {{"collections", {collection}},
          {"bbox", {bbox.lon_min, bbox.lat_min, bbox.lon_max, bbox.lat_max}},
          {"datetime", format_utc(start) + "/" + format_utc(end)},
          {"limit", page_limit},
          {"query", {{"eo:cloud_cover", {{"lte", max_cloud * 100.0}}}}}};
}

std::vector<std::string> SceneRecord::missing_assets() const {
  std::vector<std::string> missing;
  for (BandId b : kSpectralOrder) {
    if (!asset_urls.count(std::string(band_name(b)))) missing.emplace_back(band_name(b));
  }
  if (!asset_urls.count(std::string(kSclAsset))) missing.emplace_back(kSclAsset);
  return missing;
}

namespace {

bool is_layer_key(const std::string& key) {
  if (key == kSclAsset) return true;
  return std::any_of(kSpectralOrder.begin(), kSpectralOrder.end(), [&](BandId b) { return band_name(b) == key; });
}

SceneRecord parse_item(const json& item) {
  SceneRecord r;
  r.scene_id = item.at("id").get<std::string>();
  const json& props = item.at("properties");
  r.acquisition_time = parse_utc(props.at("datetime").get<std::string>());
  const double cc = props.at("eo:cloud_cover").get<double>();
  if (!(cc >= 0 && cc <= 100)) throw ProtocolError("item " + r.scene_id + " has cloud cover " + std::to_string(cc));
  r.cloud_fraction = cc / 100.0;
  if (item.contains("bbox") && item["bbox"].size() == 4) {
    const auto b = item["bbox"].get<std::vector<double>>();
    r.center_lon = 0.5 * (b[0] + b[2]);
    r.center_lat = 0.5 * (b[1] + b[3]);
  }
  if (item.contains("assets")) {
    for (const auto& [key, asset] : item["assets"].items()) {
      if (is_layer_key(key)) r.asset_urls[key] = asset.at("href").get<std::string>();
    }
  }
  return r;
}

}  // namespace

std::vector<SceneRecord> parse_item_page(const json& page) {
  std::vector<SceneRecord> out;
  try {
    if (!page.is_object() || page.value("type", "") != "FeatureCollection") {
      throw ProtocolError("response is not a FeatureCollection");
    }
    for (const json& item : page.at("features")) out.push_back(parse_item(item));
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed catalog response: ") + e.what());
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed catalog response: ") + e.what());
  }
  return out;
}

std::vector<SceneRecord> stac_search(const StacQuery& query, HttpTransport& transport, const RetryPolicy& policy) {
  query.validate();
  if (query.start == query.end) return {};

  std::vector<SceneRecord> found;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_requests;
  HttpRequest req{"POST", query.endpoint_url, query.search_body().dump()};
  for (int page_no = 1;; ++page_no) {
    if (!seen_requests.insert(req.method + req.url + req.body).second) {
      throw ProtocolError("pagination loops back to an earlier page");
    }
    const HttpResponse resp = send_with_retry(transport, req, policy);
    json page;
    try {
      page = json::parse(resp.body);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("catalog response is not JSON: ") + e.what());
    }
    auto records = parse_item_page(page);
    log::debug("STAC page ", page_no, ": ", records.size(), " items");
    for (auto& r : records) {
      if (r.cloud_fraction > query.max_cloud) continue;
      if (r.acquisition_time < query.start || r.acquisition_time > query.end) continue;
      if (seen_ids.insert(r.scene_id).second) found.push_back(std::move(r));
    }

    const json* next = nullptr;
    if (page.contains("links") && page["links"].is_array()) {
      for (const json& l : page["links"]) {
        if (l.is_object() && l.value("rel", "") == "next") next = &l;
      }
    }
    if (!next) break;
    try {
      HttpRequest n;
      n.url = next->at("href").get<std::string>();
      n.method = next->value("method", std::string("GET"));
      if (n.method == "POST") {
        json body = json::parse(req.body.empty() ? "{}" : req.body);
        if (next->contains("body")) {
          if (next->value("merge", false)) {
            body.merge_patch((*next)["body"]);
          } else {
            body = (*next)["body"];
          }
        }
        n.body = body.dump();
      } else if (n.method != "GET") {
        throw ProtocolError("unsupported next-link method " + n.method);
      }
      req = std::move(n);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("malformed next link: ") + e.what());
    }
  }
  std::sort(found.begin(), found.end(), [](const SceneRecord& a, const SceneRecord& b) {
    return a.acquisition_time != b.acquisition_time ? a.acquisition_time < b.acquisition_time
                                                    : a.scene_id < b.scene_id;
  });
  return found;
}

std::string encode_raster(const Grid<std::uint16_t>& raster) {
  std::string out(kRasterMagic, 4);
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put32(static_cast<std::uint32_t>(raster.width()));
  put32(static_cast<std::uint32_t>(raster.height()));
  out.reserve(out.size() + raster.size() * 2);
  for (std::uint16_t v : raster) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
  }
  return out;
}

Grid<std::uint16_t> decode_raster(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kRasterMagic, 4) != 0) {
    throw DecodeError("not a decoded raster (bad magic)");
  }
  auto get32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  const std::uint32_t w = get32(4), h = get32(8);
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) throw DecodeError("implausible raster size");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 12 + 2 * n) {
    throw DecodeError("raster payload is " + std::to_string(bytes.size() - 12) + " bytes, expected " +
                      std::to_string(2 * n));
  }
  Grid<std::uint16_t> g(static_cast<int>(h), static_cast<int>(w));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + 12);
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
  return g;
}

namespace {

// Crops the window from a layer whose resolution is an integer fraction of the
// reference grid, replicating coarse pixels.
Grid<std::uint16_t> crop(const Grid<std::uint16_t>& layer, const std::string& name, int ref_h, int ref_w,
                         int top, int left, int size) {
  if (ref_h % layer.height() != 0 || ref_w % layer.width() != 0 ||
      ref_h / layer.height() != ref_w / layer.width()) {
    throw DecodeError(name + ": raster " + std::to_string(layer.height()) + "x" + std::to_string(layer.width()) +
                      " does not align with the " + std::to_string(ref_h) + "x" + std::to_string(ref_w) + " grid");
  }
  const int f = ref_h / layer.height();
  Grid<std::uint16_t> out(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) out(r, c) = layer((top + r) / f, (left + c) / f);
  return out;
}

}  // namespace

RawFrame fetch_scene(const SceneRecord& record, const PixelWindow& window, HttpTransport& transport,
                     const RetryPolicy& policy) {
  if (const auto missing = record.missing_assets(); !missing.empty()) {
    throw DecodeError(record.scene_id + ": missing asset " + missing.front());
  }
  if (window.half_extent < 1) throw DecodeError("window half extent must be positive");

  auto download = [&](const std::string& key) {
    const HttpResponse r = send_with_retry(transport, {"GET", record.asset_urls.at(key), {}, {}}, policy);
    try {
      return decode_raster(r.body);
    } catch (const DecodeError& e) {
      throw DecodeError(record.scene_id + " " + key + ": " + e.what());
    }
  };

  std::array<Grid<std::uint16_t>, kSpectralBands> layers;
  for (int b = 0; b < kSpectralBands; ++b) layers[b] = download(std::string(band_name(kSpectralOrder[b])));
  Grid<std::uint16_t> scl = download(std::string(kSclAsset));

  int ref_h = 0, ref_w = 0;
  for (const auto& l : layers) {
    ref_h = std::max(ref_h, l.height());
    ref_w = std::max(ref_w, l.width());
  }
  const int size = 2 * window.half_extent;
  const int cr = window.center_row < 0 ? ref_h / 2 : window.center_row;
  const int cc = window.center_col < 0 ? ref_w / 2 : window.center_col;
  const int top = cr - window.half_extent, left = cc - window.half_extent;
  if (top < 0 || left < 0 || top + size > ref_h || left + size > ref_w) {
    throw DecodeError(record.scene_id + ": window of " + std::to_string(size) + " px at (" + std::to_string(cr) +
                      ", " + std::to_string(cc) + ") exceeds the " + std::to_string(ref_h) + "x" +
                      std::to_string(ref_w) + " asset extent");
  }

  RawFrame f;
  f.meta.acquisition_time = record.acquisition_time;
  f.meta.center_lat = record.center_lat;
  f.meta.center_lon = record.center_lon;
  f.meta.cloud_fraction = record.cloud_fraction;
  f.meta.scene_id = record.scene_id;
  for (int b = 0; b < kSpectralBands; ++b) {
    f.dn[b] = crop(layers[b], std::string(band_name(kSpectralOrder[b])), ref_h, ref_w, top, left, size);
  }
  const auto scl_crop = crop(scl, "SCL", ref_h, ref_w, top, left, size);
  f.scl = SclGrid(size, size);
  for (std::size_t i = 0; i < scl_crop.size(); ++i) {
    if (scl_crop[i] > 255) throw DecodeError(record.scene_id + " SCL: class code out of range");
    f.scl[i] = static_cast<std::uint8_t>(scl_crop[i]);
  }
  return f;
}

std::vector<RawFrame> fetch_scenes(const std::vector<SceneRecord>& records, const PixelWindow& window,
                                   HttpTransport& transport, const RetryPolicy& policy,
                                   std::vector<std::string>* failures) {
  std::vector<SceneRecord> order = records;
  std::sort(order.begin(), order.end(), [](const SceneRecord& a, const SceneRecord& b) {
    return a.scene_id != b.scene_id ? a.scene_id < b.scene_id : a.acquisition_time < b.acquisition_time;
  });
  std::vector<std::optional<RawFrame>> got(order.size());
  std::vector<std::string> why(order.size());
  std::mutex transport_mutex;
  // Sends are serialised; decoding runs in parallel.
  struct Locked final : HttpTransport {
    HttpTransport& inner;
    std::mutex& m;
    Locked(HttpTransport& i, std::mutex& mu) : inner(i), m(mu) {}
    HttpResponse send(const HttpRequest& r) override {
      std::lock_guard lock(m);
      return inner.send(r);
    }
  };
  parallel_for(order.size(), [&](std::size_t i) {
    Locked t(transport, transport_mutex);
    try {
      got[i] = fetch_scene(order[i], window, t, policy);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Network && !failures) throw;
      why[i] = order[i].scene_id + ": " + e.what();
    }
  });
  std::vector<RawFrame> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (got[i]) {
      out.push_back(std::move(*got[i]));
    } else if (failures) {
      failures->push_back(why[i]);
    } else {
      throw DecodeError(why[i]);
    }
  }
  return out;
}

}  // namespace tiad::ingest
