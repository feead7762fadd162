#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "oracles.hpp"
#include "tempdir.hpp"
#include "tiad/error.hpp"
#include "tiad/ingest.hpp"
#include "tiad/log.hpp"

using namespace tiad;
using namespace tiad::ingest;
using nlohmann::json;

namespace {

const bool quiet = (log::set_verbosity(log::Level::Error), true);

const std::string kEndpoint = "https://catalog.example.test/api/stac/v1/search";
const RetryPolicy kFast{3, std::chrono::milliseconds(1)};

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(TIAD_FIXTURE_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

StacQuery summer_query() {
  StacQuery q;
  q.endpoint_url = kEndpoint;
  q.bbox = {4.9, 52.35, 4.95, 52.38};
  q.start = parse_utc("2023-06-01T00:00:00Z");
  q.end = parse_utc("2023-08-01T00:00:00Z");
  return q;
}

json feature(const std::string& id, const std::string& time, double cloud) {
  json assets;
  for (BandId b : kSpectralOrder) assets[std::string(band_name(b))] = {{"href", "https://a.test/" + id + "/" + std::string(band_name(b))}};
  assets["SCL"] = {{"href", "https://a.test/" + id + "/SCL"}};
  return {{"type", "Feature"},
          {"id", id},
          {"bbox", {4.0, 52.0, 5.0, 53.0}},
          {"properties", {{"datetime", time}, {"eo:cloud_cover", cloud}}},
          {"assets", assets}};
}

// Full-resolution bands at `n` px, 20 m bands and SCL at n/2.
struct AssetSet {
  SceneRecord record;
  std::map<std::string, Grid<std::uint16_t>> layers;
};

AssetSet make_assets(const std::string& id, int n, std::uint64_t seed) {
  Rng rng(seed);
  AssetSet a;
  a.record.scene_id = id;
  a.record.acquisition_time = parse_utc("2023-07-15T10:46:29Z");
  a.record.cloud_fraction = 0.03;
  a.record.center_lat = 52.36;
  a.record.center_lon = 4.93;
  for (BandId b : kSpectralOrder) {
    const std::string name(band_name(b));
    const bool fine = name == "B02" || name == "B03" || name == "B04" || name == "B08";
    const int side = fine ? n : n / 2;
    Grid<std::uint16_t> g(side, side);
    for (auto& v : g) v = static_cast<std::uint16_t>(1000 + rng.uniform_int(0, 4000));
    a.layers[name] = g;
    a.record.asset_urls[name] = "https://a.test/" + id + "/" + name;
  }
  Grid<std::uint16_t> scl(n / 2, n / 2);
  for (auto& v : scl) v = static_cast<std::uint16_t>(rng.uniform_int(0, 11));
  a.layers["SCL"] = scl;
  a.record.asset_urls["SCL"] = "https://a.test/" + id + "/SCL";
  return a;
}

void serve(ReplayTransport& t, const AssetSet& a) {
  for (const auto& [name, g] : a.layers) t.add("GET", a.record.asset_urls.at(name), {200, encode_raster(g)});
}

RawFrame random_raw(Rng& rng, int n, const std::string& id, UtcSeconds t) {
  RawFrame f;
  f.meta.scene_id = id;
  f.meta.acquisition_time = t;
  f.meta.center_lat = 46.5;
  f.meta.center_lon = 7.25;
  f.meta.cloud_fraction = 0.04;
  for (auto& b : f.dn) {
    b = Grid<std::uint16_t>(n, n);
    for (auto& v : b) v = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
  }
  f.scl = SclGrid(n, n);
  for (auto& v : f.scl) v = static_cast<std::uint8_t>(rng.uniform_int(0, 11));
  return f;
}

bool same(const RawFrame& a, const RawFrame& b) { return a.meta == b.meta && a.dn == b.dn && a.scl == b.scl; }

}  // namespace

TEST_CASE("query validation and body") {
  StacQuery q = summer_query();
  CHECK_NOTHROW(q.validate());
  const json body = q.search_body();
  CHECK(body["collections"][0] == "sentinel-2-l2a");
  CHECK(body["bbox"].size() == 4);
  CHECK(body["query"]["eo:cloud_cover"]["lte"].get<double>() == doctest::Approx(10.0));
  CHECK(body["datetime"] == "2023-06-01T00:00:00Z/2023-08-01T00:00:00Z");
  q.bbox.lon_max = q.bbox.lon_min;
  CHECK_THROWS_AS(q.validate(), ShapeError);
  q = summer_query();
  std::swap(q.start, q.end);
  CHECK_THROWS_AS(q.validate(), ShapeError);
  q = summer_query();
  q.max_cloud = 1.5;
  CHECK_THROWS_AS(q.validate(), ShapeError);
}

TEST_CASE("empty time range issues no request") {
  StacQuery q = summer_query();
  q.end = q.start;
  ReplayTransport t;
  CHECK(stac_search(q, t).empty());
  CHECK(t.requests().empty());
}

TEST_CASE("recorded catalog response filters cloudy items") {
  ReplayTransport t;
  t.add("POST", kEndpoint, {200, read_fixture("search_three_items.json")});
  const auto recs = stac_search(summer_query(), t, kFast);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].scene_id == "S2A_MSIL2A_20230624T104621_R051_T31UFT");
  CHECK(recs[1].scene_id == "S2B_MSIL2A_20230715T104629_R051_T31UFT");
  CHECK(recs[0].acquisition_time < recs[1].acquisition_time);
  for (const auto& r : recs) {
    CHECK(r.cloud_fraction <= 0.10);
    CHECK(r.complete());
    CHECK(r.asset_urls.size() == 10);
    CHECK(r.center_lat == doctest::Approx(52.36));
  }
  REQUIRE(t.requests().size() == 1);
  CHECK(json::parse(t.requests()[0].body) == summer_query().search_body());

  // Ten percent exactly is accepted.
  json page = json::parse(read_fixture("search_three_items.json"));
  page["features"][1]["properties"]["eo:cloud_cover"] = 10.0;
  ReplayTransport t2;
  t2.add("POST", kEndpoint, {200, page.dump()});
  CHECK(stac_search(summer_query(), t2, kFast).size() == 3);
}

TEST_CASE("pagination is followed to exhaustion") {
  json p1 = {{"type", "FeatureCollection"},
             {"features", {feature("c", "2023-07-03T10:00:00Z", 1), feature("a", "2023-07-01T10:00:00Z", 2)}},
             {"links", {{{"rel", "next"}, {"href", kEndpoint}, {"method", "POST"}, {"body", {{"token", "p2"}}}, {"merge", true}}}}};
  json p2 = {{"type", "FeatureCollection"},
             {"features", {feature("b", "2023-07-02T10:00:00Z", 30), feature("d", "2023-07-01T10:00:00Z", 0)}},
             {"links", {{{"rel", "next"}, {"href", "https://catalog.example.test/page3"}}}}};
  json p3 = {{"type", "FeatureCollection"}, {"features", {feature("e", "2023-07-20T10:00:00Z", 5)}}, {"links", json::array()}};
  json body2 = summer_query().search_body();
  body2["token"] = "p2";

  ReplayTransport t;
  t.add("POST", kEndpoint, {200, p1.dump()}, summer_query().search_body().dump());
  t.add("POST", kEndpoint, {200, p2.dump()}, body2.dump());
  t.add("GET", "https://catalog.example.test/page3", {200, p3.dump()});
  const auto recs = stac_search(summer_query(), t, kFast);
  std::vector<std::string> ids;
  for (const auto& r : recs) ids.push_back(r.scene_id);
  CHECK(ids == std::vector<std::string>{"a", "d", "c", "e"});
  CHECK(t.requests().size() == 3);

  // A next link pointing back at the first page is a protocol error.
  json loop = p1;
  loop["links"][0]["body"] = nullptr;
  loop["links"][0].erase("merge");
  loop["links"][0].erase("body");
  ReplayTransport t2;
  t2.add("POST", kEndpoint, {200, loop.dump()});
  CHECK_THROWS_AS(stac_search(summer_query(), t2, kFast), ProtocolError);
}

TEST_CASE("malformed catalog responses") {
  for (const std::string body : {"not json", R"({"type":"Feature"})", R"({"type":"FeatureCollection"})",
                                 R"({"type":"FeatureCollection","features":[{"id":"x","properties":{}}]})",
                                 R"({"type":"FeatureCollection","features":[{"id":"x","properties":{"datetime":"2023-07-01T00:00:00Z","eo:cloud_cover":140}}]})"}) {
    CAPTURE(body);
    ReplayTransport t;
    t.add("POST", kEndpoint, {200, body});
    CHECK_THROWS_AS(stac_search(summer_query(), t, kFast), ProtocolError);
  }
}

TEST_CASE("retries") {
  struct Flaky final : HttpTransport {
    std::vector<HttpResponse> script;
    std::size_t calls = 0;
    HttpResponse send(const HttpRequest&) override {
      const auto& r = script.at(std::min(calls, script.size() - 1));
      ++calls;
      if (r.status == 0) throw NetworkError("connection reset");
      return r;
    }
  };
  Flaky ok;
  ok.script = {{503, ""}, {0, ""}, {200, "fine"}};
  CHECK(send_with_retry(ok, {}, kFast).body == "fine");
  CHECK(ok.calls == 3);

  Flaky exhausted;
  exhausted.script = {{500, ""}};
  CHECK_THROWS_AS(send_with_retry(exhausted, {}, kFast), NetworkError);
  CHECK(exhausted.calls == 3);

  Flaky forbidden;
  forbidden.script = {{403, ""}};
  CHECK_THROWS_AS(send_with_retry(forbidden, {}, kFast), NetworkError);
  CHECK(forbidden.calls == 1);

  Flaky limited;
  limited.script = {{429, ""}, {200, "ok"}};
  CHECK(send_with_retry(limited, {}, kFast).body == "ok");
}

TEST_CASE("HTTP server failing three times gives NetworkError") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/search", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  StacQuery q = summer_query();
  q.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/search";
  auto transport = make_http_transport(std::chrono::seconds(5));
  CHECK_THROWS_AS(stac_search(q, *transport, kFast), NetworkError);
  CHECK(hits == 3);
  server.stop();
  th.join();

  // Nothing listening on the freed port.
  CHECK_THROWS_AS(send_with_retry(*transport, {"GET", q.endpoint_url, {}, {}}, {2, std::chrono::milliseconds(1)}),
                  NetworkError);
}

TEST_CASE("raster wire format") {
  Rng rng(11);
  Grid<std::uint16_t> g(5, 7);
  for (auto& v : g) v = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
  const std::string bytes = encode_raster(g);
  CHECK(bytes.size() == 12 + 70);
  CHECK(decode_raster(bytes) == g);
  CHECK_THROWS_AS(decode_raster(bytes.substr(0, bytes.size() - 1)), DecodeError);
  CHECK_THROWS_AS(decode_raster("JPEG" + bytes.substr(4)), DecodeError);
  CHECK_THROWS_AS(decode_raster(""), DecodeError);
}

TEST_CASE("fetch_scene from a replayed asset set") {
  const AssetSet a = make_assets("scene-1", 64, 5);
  ReplayTransport t;
  serve(t, a);

  const RawFrame f = fetch_scene(a.record, {20, 30, 8}, t, kFast);
  CHECK(f.meta.scene_id == "scene-1");
  CHECK(f.meta.acquisition_time == a.record.acquisition_time);
  REQUIRE(f.scl.height() == 16);
  REQUIRE(f.scl.width() == 16);
  for (int b = 0; b < kSpectralBands; ++b) {
    const std::string name(band_name(kSpectralOrder[b]));
    const auto& src = a.layers.at(name);
    const int f2 = 64 / src.height();
    CHECK(f.dn[b].height() == 16);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) REQUIRE(f.dn[b](r, c) == src((12 + r) / f2, (22 + c) / f2));
  }
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) REQUIRE(f.scl(r, c) == a.layers.at("SCL")((12 + r) / 2, (22 + c) / 2));

  const RawFrame centred = fetch_scene(a.record, {-1, -1, 32}, t, kFast);
  CHECK(centred.dn[0] == a.layers.at("B02"));
}

TEST_CASE("fetch_scene failures") {
  AssetSet a = make_assets("scene-2", 32, 6);
  ReplayTransport t;
  serve(t, a);

  SUBCASE("missing SCL") {
    a.record.asset_urls.erase("SCL");
    try {
      fetch_scene(a.record, {}, t, kFast);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("SCL") != std::string::npos);
    }
  }
  SUBCASE("window beyond the asset") {
    CHECK_THROWS_AS(fetch_scene(a.record, {4, 16, 8}, t, kFast), DecodeError);
    CHECK_THROWS_AS(fetch_scene(a.record, {-1, -1, 17}, t, kFast), DecodeError);
    CHECK_NOTHROW(fetch_scene(a.record, {8, 8, 8}, t, kFast));
  }
  SUBCASE("corrupt band payload names the band") {
    t.add("GET", a.record.asset_urls.at("B11"), {200, "garbage"});
    try {
      fetch_scene(a.record, {}, t, kFast);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("B11") != std::string::npos);
    }
  }
  SUBCASE("asset not found") {
    t.add("GET", a.record.asset_urls.at("B03"), {404, ""});
    CHECK_THROWS_AS(fetch_scene(a.record, {}, t, kFast), NetworkError);
  }
}

TEST_CASE("fetch_scenes orders results and collects failures") {
  ReplayTransport t;
  std::vector<SceneRecord> recs;
  for (const std::string id : {"s3", "s1", "s2"}) {
    const AssetSet a = make_assets(id, 32, std::hash<std::string>{}(id));
    serve(t, a);
    recs.push_back(a.record);
  }
  recs.back().asset_urls.erase("B12");
  std::vector<std::string> failures;
  const auto frames = fetch_scenes(recs, {-1, -1, 8}, t, kFast, &failures);
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].meta.scene_id == "s1");
  CHECK(frames[1].meta.scene_id == "s3");
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].rfind("s2:", 0) == 0);
}

TEST_CASE("local import") {
  testing::TempDir dir;
  Rng rng(8);
  std::vector<RawFrame> written;
  const UtcSeconds base = parse_utc("2022-05-01T10:00:00Z");
  for (int i : {3, 0, 4, 1, 2}) {
    written.push_back(random_raw(rng, 12, "scene_" + std::to_string(i), base + i * 5 * 86400));
    write_local_scene(dir / written.back().meta.scene_id, written.back());
  }
  SUBCASE("five scenes come back time-sorted and intact") {
    const auto frames = import_local(dir.path());
    REQUIRE(frames.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(frames[i].meta.scene_id == "scene_" + std::to_string(i));
      const auto it = std::find_if(written.begin(), written.end(),
                                   [&](const RawFrame& w) { return w.meta.scene_id == frames[i].meta.scene_id; });
      CHECK(same(frames[i], *it));
    }
    CHECK(import_local(dir.path(), "scene_[0-9]").empty());
    CHECK(import_local(dir.path(), "scene_?").size() == 5);
    CHECK(import_local(dir.path(), "*_4").size() == 1);
  }
  SUBCASE("missing B11 is named") {
    std::filesystem::remove(dir / "scene_2" / "B11.raw");
    try {
      import_local(dir.path());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("B11") != std::string::npos);
    }
  }
  SUBCASE("unparsable sidecar") {
    std::ofstream(dir / "scene_1" / "meta") << "time=yesterday\nlat=1\nlon=2\ncloud_fraction=0\nwidth=12\nheight=12\n";
    CHECK_THROWS_AS(import_local(dir.path()), FormatError);
    std::ofstream(dir / "scene_1" / "meta") << "no equals sign\n";
    CHECK_THROWS_AS(import_local(dir.path()), FormatError);
  }
  SUBCASE("truncated band") {
    std::ofstream(dir / "scene_0" / "B04.raw", std::ios::binary) << "xy";
    CHECK_THROWS_AS(import_local(dir.path()), FormatError);
  }
}

TEST_CASE("local import edge cases") {
  testing::TempDir dir;
  CHECK(import_local(dir.path()).empty());
  CHECK_THROWS_AS(import_local(dir / "absent"), FormatError);
}

TEST_CASE("glob matching") {
  CHECK(glob_match("*", ""));
  CHECK(glob_match("S2?_*T31UFT", "S2B_MSIL2A_T31UFT"));
  CHECK_FALSE(glob_match("S2?_*T31UFT", "S2B_MSIL2A_T31UFU"));
  CHECK(glob_match("a*b*c", "aXXbYYc"));
  CHECK_FALSE(glob_match("a*b*c", "aXXbYY"));
  CHECK_FALSE(glob_match("?", ""));
}

TEST_CASE("sampling lattice") {
  // A 0.5° square at 45°N: 55.6 km tall, 39.3 km wide.
  const std::vector<LatLon> square = {{45.0, 7.0}, {45.0, 7.5}, {45.5, 7.5}, {45.5, 7.0}};
  const auto pts = lattice_points(square, 5.0);
  REQUIRE(!pts.empty());
  for (const auto& p : pts) {
    CHECK(p.lat >= 45.0);
    CHECK(p.lat <= 45.5);
    CHECK(p.lon >= 7.0);
    CHECK(p.lon <= 7.5);
  }
  CHECK(pts.size() >= 80);
  CHECK(pts.size() <= 100);
  // Neighbouring points along a row are 5 km apart on the ground.
  constexpr double kKmPerDeg = 111.19492664455873;
  const double dlon = std::abs(pts[1].lon - pts[0].lon);
  CHECK(pts[1].lat == pts[0].lat);
  CHECK(dlon * kKmPerDeg * std::cos(pts[0].lat * 3.14159265358979323846 / 180) == doctest::Approx(5.0).epsilon(0.02));
  CHECK_THROWS_AS(lattice_points({{0, 0}, {1, 1}}), GeometryError);

  const BBox b = bbox_around({52.0, 5.0}, 1280);
  CHECK((b.lat_max - b.lat_min) * kKmPerDeg == doctest::Approx(2.56).epsilon(0.01));
  CHECK(b.intersects(bbox_around({52.01, 5.0}, 1280)));
  CHECK_FALSE(b.intersects(bbox_around({53.0, 5.0}, 1280)));
}
