#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tripath {

struct HttpResponse {
  enum class Outcome { ok, timeout, unreachable };

  Outcome outcome = Outcome::ok;
  int status = 0;  // HTTP status when outcome is ok
  std::string body;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// Minimal POST-only HTTP seam so the orchestrator can be driven by mocks.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const std::string& body, const HeaderList& headers,
                            double timeout_seconds) = 0;
};

/// cpp-httplib backed transport; https requires an OpenSSL-enabled build.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const HeaderList& headers, double timeout_seconds) override;
};

}  // namespace tripath
