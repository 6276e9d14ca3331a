#include "tripath/transport.hpp"

#include <chrono>

#include "httplib.h"

namespace tripath {

HttpResponse HttpTransport::post(const std::string& base_url, const std::string& path,
                                 const std::string& body, const HeaderList& headers,
                                 double timeout_seconds) {
  httplib::Client client(base_url);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto result = client.Post(path, hdrs, body, "application/json");
  HttpResponse out;
  if (!result) {
    switch (result.error()) {
      case httplib::Error::Read:
      case httplib::Error::Write:
      case httplib::Error::ConnectionTimeout:
        out.outcome = HttpResponse::Outcome::timeout;
        break;
      default:
        out.outcome = HttpResponse::Outcome::unreachable;
        break;
    }
    return out;
  }
  out.status = result->status;
  out.body = result->body;
  return out;
}

}  // namespace tripath
