#pragma once
// Minimal HTTP transport seam shared by the metadata and LLM clients.
// Tests substitute their own implementations to count or script calls.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "citedag/core_model.hpp"

namespace citedag {

// Connection-level failure (DNS, TLS, timeout). Always transient.
class TransportError : public Error {
 public:
  using Error::Error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers) = 0;
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body) = 0;
};

// cpp-httplib backed transport; supports http:// and https:// URLs.
std::shared_ptr<HttpTransport> make_http_transport(int timeout_seconds = 120);

}  // namespace citedag
