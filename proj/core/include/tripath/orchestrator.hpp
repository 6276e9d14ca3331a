#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripath/record.hpp"
#include "tripath/transport.hpp"

namespace tripath {

struct LlmEndpointConfig {
  std::string id = "default";  // names the endpoint in errors and verdicts
  std::string base_url;
  std::string model;
  std::string api_key_env;     // empty: send no Authorization header
  double temperature = 0.8;
  int max_tokens = 300;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int backoff_base_ms = 500;
  int max_concurrent = 4;
};

/// Throws InvalidConfig.
void validate(const LlmEndpointConfig& cfg);

struct CompletionMeta {
  double latency_ms = 0.0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int attempts = 0;
};

struct Completion {
  std::string text;
  CompletionMeta meta;
};

struct PathBundle {
  std::string question;
  std::string answer_direct;
  std::string answer_cot;
  std::string question_reverse;
  std::array<CompletionMeta, 3> meta{};  // direct, cot, reverse
};

struct JudgeVerdict {
  std::string judge_id;
  std::optional<int> label;
  std::string raw;
};

struct JudgeResult {
  LabelStatus status = LabelStatus::unlabeled;
  std::optional<int> label;
  std::vector<JudgeVerdict> verdicts;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

Sleeper real_sleeper();
EnvLookup process_env();

/// Chat-completions client with retry. Timeouts, 429 and 5xx are retried
/// up to max_retries times with delay base * 2^k plus up to base ms of
/// jitter. A refused connection is not retried.
class ChatClient {
 public:
  explicit ChatClient(Transport& transport, Sleeper sleeper = real_sleeper(),
                      EnvLookup env = process_env(), std::uint64_t jitter_seed = 0);

  /// `what` names the call in errors. Throws EndpointUnreachable,
  /// EndpointRejected, RetriesExhausted(what), MalformedResponse,
  /// EmptyCompletion(what).
  Completion complete(const LlmEndpointConfig& cfg, const std::string& prompt,
                      std::string_view what) const;

  /// Delay before retry number `retry` (0-based) of `prompt`.
  std::chrono::milliseconds backoff(const LlmEndpointConfig& cfg, int retry,
                                    std::string_view prompt) const;

 private:
  Transport* transport_;
  Sleeper sleeper_;
  EnvLookup env_;
  std::uint64_t jitter_seed_;
};

/// Request body as sent on the wire.
std::string chat_request_body(const LlmEndpointConfig& cfg, const std::string& prompt);

/// Issues the direct, cot and reverse calls in that order; the reverse
/// call is conditioned on the direct answer.
PathBundle generate_paths(const std::string& question, const LlmEndpointConfig& cfg,
                          const ChatClient& client);

struct GenerateOptions {
  bool force = false;
  /// Called after each finished query with (done, total); serialized.
  std::function<void(std::size_t, std::size_t)> on_progress;
};

/// Runs generate_paths for every query with at most cfg.max_concurrent in
/// flight. Output order follows `queries`. Records already in `cached`
/// are reused unless options.force is set. The first failure is rethrown
/// after in-flight work drains.
std::vector<Record> generate_all(std::span<const QueryItem> queries, const LlmEndpointConfig& cfg,
                                 const ChatClient& client,
                                 const std::map<std::string, Record>& cached = {},
                                 const GenerateOptions& options = {});

/// First `0` or `1` not adjacent to another letter or digit.
std::optional<int> parse_verdict(std::string_view text);

/// Two-judge protocol. Concordant verdicts confirm the label; discordant
/// ones flag the pair for review. Throws UnparseableVerdict(judge id) when
/// a judge gives no 0/1 in max_retries+1 replies and JudgeUnreachable when
/// its endpoint fails.
JudgeResult judge_label(const std::string& question, const std::string& answer,
                        std::span<const LlmEndpointConfig> judges, const ChatClient& client);

struct LabelOptions {
  bool force = false;  // relabel records that already carry a status
  int concurrency = 4;
};

struct LabelOutcome {
  std::vector<Record> records;
  /// id -> verdicts for every record judged in this run.
  std::map<std::string, std::vector<JudgeVerdict>> verdicts;
  std::size_t unparseable = 0;
};

/// Judges the Q / A_dir pair of each record. An unparseable verdict marks
/// the record needs_review instead of aborting the run.
LabelOutcome label_dataset(std::span<const Record> records,
                           std::span<const LlmEndpointConfig> judges, const ChatClient& client,
                           const LabelOptions& options = {});

}  // namespace tripath
