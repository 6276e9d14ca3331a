#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tripath/transport.hpp"

namespace tripath::testing {

struct CapturedRequest {
  std::string base_url;
  std::string path;
  nlohmann::json body;
  HeaderList headers;

  std::string prompt() const { return body.at("messages").at(0).at("content").get<std::string>(); }
  std::string header(const std::string& name) const {
    for (const auto& [k, v] : headers) {
      if (k == name) return v;
    }
    return {};
  }
};

inline HttpResponse completion(const std::string& content, int status = 200) {
  nlohmann::json body{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                      {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
  return {HttpResponse::Outcome::ok, status, body.dump()};
}

inline HttpResponse status_only(int status) { return {HttpResponse::Outcome::ok, status, "{}"}; }
inline HttpResponse timed_out() { return {HttpResponse::Outcome::timeout, 0, {}}; }
inline HttpResponse refused() { return {HttpResponse::Outcome::unreachable, 0, {}}; }

/// Records every request and answers from `respond`, which sees the
/// request and its 0-based arrival index. Tracks peak concurrency.
class MockTransport final : public Transport {
 public:
  using Responder = std::function<HttpResponse(const CapturedRequest&, std::size_t)>;

  explicit MockTransport(Responder respond, std::chrono::milliseconds latency = {})
      : respond_(std::move(respond)), latency_(latency) {}

  /// Replays `script` in order; once exhausted, repeats the last entry.
  static MockTransport scripted(std::vector<HttpResponse> script) {
    return MockTransport([script](const CapturedRequest&, std::size_t i) {
      return script[std::min(i, script.size() - 1)];
    });
  }

  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const HeaderList& headers, double) override {
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    CapturedRequest req{base_url, path, nlohmann::json::parse(body), headers};
    std::size_t index;
    {
      std::lock_guard lock(mu_);
      index = requests_.size();
      requests_.push_back(req);
    }
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    auto resp = respond_(req, index);
    --in_flight_;
    return resp;
  }

  std::vector<CapturedRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  std::size_t count() const {
    std::lock_guard lock(mu_);
    return requests_.size();
  }
  int peak_in_flight() const { return peak_.load(); }

 private:
  Responder respond_;
  std::chrono::milliseconds latency_;
  mutable std::mutex mu_;
  std::vector<CapturedRequest> requests_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

/// Sleeper that records requested delays instead of sleeping.
struct RecordingSleeper {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> delays =
      std::make_shared<std::vector<std::chrono::milliseconds>>();
  std::shared_ptr<std::mutex> mu = std::make_shared<std::mutex>();

  void operator()(std::chrono::milliseconds d) const {
    std::lock_guard lock(*mu);
    delays->push_back(d);
  }
};

}  // namespace tripath::testing
