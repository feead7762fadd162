#include <optional>
#include <regex>
#include <thread>

#include <httplib.h>

#include "tiad/error.hpp"
#include "tiad/ingest.hpp"
#include "tiad/log.hpp"

namespace tiad::ingest {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string target;  // /path?query
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/?#]+)([^#]*))", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw NetworkError("unsupported URL: " + url);
  SplitUrl s{m[1].str(), m[2].str()};
  if (s.target.empty()) s.target = "/";
  return s;
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse send(const HttpRequest& request) override {
    const SplitUrl u = split_url(request.url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (u.origin.rfind("https", 0) == 0) throw NetworkError("built without TLS support: " + request.url);
#endif
    httplib::Client client(u.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_follow_location(true);
    httplib::Result res = request.method == "POST"
                              ? client.Post(u.target, request.body, request.content_type)
                              : client.Get(u.target);
    if (!res) throw NetworkError(request.method + " " + request.url + ": " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

std::string route_key(const std::string& method, const std::string& url, const std::string& body) {
  return method + " " + url + (method == "POST" ? "\n" + body : std::string());
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

void ReplayTransport::add(const std::string& method, const std::string& url, HttpResponse response,
                          const std::string& body) {
  routes_[route_key(method, url, body)] = std::move(response);
}

HttpResponse ReplayTransport::send(const HttpRequest& request) {
  requests_.push_back(request);
  // POST routes registered without a body match any body.
  for (const std::string& key : {route_key(request.method, request.url, request.body),
                                 route_key(request.method, request.url, {})}) {
    if (auto it = routes_.find(key); it != routes_.end()) return it->second;
  }
  return {404, "not recorded"};
}

HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request, const RetryPolicy& policy) {
  const int attempts = std::max(1, policy.max_attempts);
  auto delay = policy.base_delay;
  std::string last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    std::optional<HttpResponse> r;
    try {
      r = transport.send(request);
    } catch (const NetworkError& e) {
      last = e.what();
    }
    if (r) {
      if (r->status >= 200 && r->status < 300) {
        log::debug(request.method, " ", request.url, " ok (attempt ", attempt, "/", attempts, ")");
        return *r;
      }
      last = "HTTP " + std::to_string(r->status);
      if (r->status != 429 && r->status < 500) throw NetworkError(request.method + " " + request.url + ": " + last);
    }
    log::warn(request.method, " ", request.url, " attempt ", attempt, "/", attempts, " failed: ", last);
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw NetworkError(request.method + " " + request.url + " failed after " + std::to_string(attempts) +
                     " attempts: " + last);
}

}  // namespace tiad::ingest
