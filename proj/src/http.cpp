#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "citedag/http.hpp"

#include <httplib.h>

namespace citedag {

namespace {

// Splits "https://host:port/base/path?q" into ("https://host:port", "/base/path?q").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(int timeout_seconds) : timeout_seconds_(timeout_seconds) {}

  HttpResponse get(const std::string& url, const HttpHeaders& headers) override {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    configure(client);
    auto result = client.Get(path, to_headers(headers));
    return unwrap(result, url);
  }

  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body) override {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    configure(client);
    auto result = client.Post(path, to_headers(headers), body, "application/json");
    return unwrap(result, url);
  }

 private:
  void configure(httplib::Client& client) const {
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    client.set_follow_location(true);
  }

  static httplib::Headers to_headers(const HttpHeaders& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
  }

  static HttpResponse unwrap(const httplib::Result& result, const std::string& url) {
    if (!result) throw TransportError("request to " + url + " failed: " + httplib::to_string(result.error()));
    return {result->status, result->body};
  }

  int timeout_seconds_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(int timeout_seconds) {
  return std::make_shared<HttplibTransport>(timeout_seconds);
}

}  // namespace citedag
