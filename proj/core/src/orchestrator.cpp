#include "tripath/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/prompts.hpp"
#include "tripath/rng.hpp"

namespace tripath {

using nlohmann::json;

void validate(const LlmEndpointConfig& cfg) {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, "endpoint '" + cfg.id + "': " + what, cfg.id);
  };
  if (cfg.base_url.empty()) bad("base_url is empty");
  if (cfg.model.empty()) bad("model is empty");
  if (!(cfg.temperature >= 0.0)) bad("temperature must be >= 0");
  if (cfg.max_tokens <= 0) bad("max_tokens must be positive");
  if (!(cfg.timeout_seconds > 0.0)) bad("timeout must be positive");
  if (cfg.max_retries < 0) bad("max_retries must be >= 0");
  if (cfg.backoff_base_ms < 0) bad("backoff base must be >= 0");
  if (cfg.max_concurrent < 1) bad("max_concurrent must be >= 1");
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

std::string chat_request_body(const LlmEndpointConfig& cfg, const std::string& prompt) {
  return json{{"model", cfg.model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens}}
      .dump();
}

ChatClient::ChatClient(Transport& transport, Sleeper sleeper, EnvLookup env,
                       std::uint64_t jitter_seed)
    : transport_(&transport),
      sleeper_(std::move(sleeper)),
      env_(std::move(env)),
      jitter_seed_(jitter_seed) {}

std::chrono::milliseconds ChatClient::backoff(const LlmEndpointConfig& cfg, int retry,
                                              std::string_view prompt) const {
  const auto base = static_cast<std::uint64_t>(cfg.backoff_base_ms);
  const std::uint64_t scaled = base << std::min(retry, 16);
  const std::uint64_t jitter =
      base == 0 ? 0 : mix64(hash64(prompt, jitter_seed_) + static_cast<std::uint64_t>(retry)) % (base + 1);
  return std::chrono::milliseconds(scaled + jitter);
}

Completion ChatClient::complete(const LlmEndpointConfig& cfg, const std::string& prompt,
                                std::string_view what) const {
  HeaderList headers;
  if (!cfg.api_key_env.empty()) {
    const auto key = env_(cfg.api_key_env);
    if (!key || key->empty()) {
      throw Error(ErrorCode::InvalidConfig,
                  "environment variable " + cfg.api_key_env + " is not set", cfg.api_key_env);
    }
    headers.emplace_back("Authorization", "Bearer " + *key);
  }
  const std::string body = chat_request_body(cfg, prompt);
  const std::string subject(what);

  std::string last_failure;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(backoff(cfg, attempt - 1, prompt));
    const auto start = std::chrono::steady_clock::now();
    const auto resp =
        transport_->post(cfg.base_url, "/v1/chat/completions", body, headers, cfg.timeout_seconds);
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (resp.outcome == HttpResponse::Outcome::unreachable) {
      throw Error(ErrorCode::EndpointUnreachable, "cannot connect to " + cfg.base_url, subject);
    }
    if (resp.outcome == HttpResponse::Outcome::timeout) {
      last_failure = "timeout";
      continue;
    }
    if (resp.status == 429 || resp.status >= 500) {
      last_failure = "HTTP " + std::to_string(resp.status);
      continue;
    }
    if (resp.status < 200 || resp.status >= 300) {
      throw Error(ErrorCode::EndpointRejected,
                  subject + ": endpoint returned HTTP " + std::to_string(resp.status), subject);
    }

    Completion out;
    try {
      const auto doc = json::parse(resp.body);
      out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
        out.meta.prompt_tokens = usage->value("prompt_tokens", 0);
        out.meta.completion_tokens = usage->value("completion_tokens", 0);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, subject + ": " + e.what(), subject);
    }
    if (trim(out.text).empty()) {
      throw Error(ErrorCode::EmptyCompletion, subject + ": empty completion", subject);
    }
    out.meta.latency_ms = latency;
    out.meta.attempts = attempt + 1;
    return out;
  }
  throw Error(ErrorCode::RetriesExhausted,
              subject + ": gave up after " + std::to_string(cfg.max_retries + 1) +
                  " attempts (last: " + last_failure + ")",
              subject);
}

PathBundle generate_paths(const std::string& question, const LlmEndpointConfig& cfg,
                          const ChatClient& client) {
  if (trim(question).empty()) throw Error(ErrorCode::InvalidArgument, "query is empty");
  PathBundle b;
  b.question = question;
  auto direct = client.complete(cfg, render_prompt("direct", {{"question", question}}), "direct");
  auto cot = client.complete(cfg, render_prompt("cot", {{"question", question}}), "cot");
  auto reverse =
      client.complete(cfg, render_prompt("reverse", {{"answer", direct.text}}), "reverse");
  b.answer_direct = std::move(direct.text);
  b.answer_cot = std::move(cot.text);
  b.question_reverse = std::move(reverse.text);
  b.meta = {direct.meta, cot.meta, reverse.meta};
  return b;
}

namespace {

/// Runs job(i) for i in [0, n) on at most `workers` threads. Stops handing
/// out work after the first exception, which is rethrown.
template <typename Job>
void run_bounded(std::size_t n, int workers, Job job) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto loop = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(loop);
  if (count > 0) loop();
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace

std::vector<Record> generate_all(std::span<const QueryItem> queries, const LlmEndpointConfig& cfg,
                                 const ChatClient& client,
                                 const std::map<std::string, Record>& cached,
                                 const GenerateOptions& options) {
  validate(cfg);
  std::vector<Record> out(queries.size());
  std::mutex progress_mu;
  std::size_t done = 0;
  run_bounded(queries.size(), cfg.max_concurrent, [&](std::size_t i) {
    const auto& q = queries[i];
    if (auto it = cached.find(q.id); !options.force && it != cached.end()) {
      out[i] = it->second;
    } else {
      const auto bundle = generate_paths(q.question, cfg, client);
      Record& r = out[i];
      r.id = q.id;
      r.question = bundle.question;
      r.answer_direct = bundle.answer_direct;
      r.answer_cot = bundle.answer_cot;
      r.question_reverse = bundle.question_reverse;
      r.label_status = LabelStatus::unlabeled;
    }
    if (options.on_progress) {
      std::lock_guard lock(progress_mu);
      options.on_progress(++done, queries.size());
    }
  });
  return out;
}

std::optional<int> parse_verdict(std::string_view text) {
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1') continue;
    if (i > 0 && word_char(text[i - 1])) continue;
    if (i + 1 < text.size() && word_char(text[i + 1])) continue;
    // "1.5" or "0,3" are numbers, not verdicts.
    if (i + 2 < text.size() && (text[i + 1] == '.' || text[i + 1] == ',') &&
        std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
      continue;
    }
    return text[i] - '0';
  }
  return std::nullopt;
}

JudgeResult judge_label(const std::string& question, const std::string& answer,
                        std::span<const LlmEndpointConfig> judges, const ChatClient& client) {
  if (judges.size() != 2) {
    throw Error(ErrorCode::InvalidArgument,
                "the judge protocol needs exactly 2 judges, got " + std::to_string(judges.size()));
  }
  const std::string prompt = render_prompt("judge", {{"question", question}, {"answer", answer}});
  JudgeResult result;
  for (const auto& judge : judges) {
    JudgeVerdict verdict;
    verdict.judge_id = judge.id;
    for (int attempt = 0; attempt <= judge.max_retries && !verdict.label; ++attempt) {
      try {
        verdict.raw = client.complete(judge, prompt, judge.id).text;
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::EndpointUnreachable:
          case ErrorCode::RetriesExhausted:
          case ErrorCode::EndpointRejected:
            throw Error(ErrorCode::JudgeUnreachable, judge.id + ": " + e.what(), judge.id);
          case ErrorCode::EmptyCompletion:
          case ErrorCode::MalformedResponse:
            verdict.raw.clear();
            continue;
          default:
            throw;
        }
      }
      verdict.label = parse_verdict(verdict.raw);
    }
    if (!verdict.label) {
      throw Error(ErrorCode::UnparseableVerdict,
                  judge.id + ": no 0/1 verdict in reply '" + verdict.raw + "'", judge.id);
    }
    result.verdicts.push_back(std::move(verdict));
  }
  if (result.verdicts[0].label == result.verdicts[1].label) {
    result.status = LabelStatus::confirmed;
    result.label = result.verdicts[0].label;
  } else {
    result.status = LabelStatus::needs_review;
  }
  return result;
}

LabelOutcome label_dataset(std::span<const Record> records,
                           std::span<const LlmEndpointConfig> judges, const ChatClient& client,
                           const LabelOptions& options) {
  for (const auto& j : judges) validate(j);
  LabelOutcome outcome;
  outcome.records.assign(records.begin(), records.end());
  std::vector<std::vector<JudgeVerdict>> verdicts(records.size());
  std::vector<char> judged(records.size(), 0);
  std::atomic<std::size_t> unparseable{0};

  run_bounded(records.size(), options.concurrency, [&](std::size_t i) {
    Record& r = outcome.records[i];
    if (!options.force && r.label_status != LabelStatus::unlabeled) return;
    try {
      auto res = judge_label(r.question, r.answer_direct, judges, client);
      r.label_status = res.status;
      r.label = res.label;
      verdicts[i] = std::move(res.verdicts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableVerdict) throw;
      r.label_status = LabelStatus::needs_review;
      r.label.reset();
      ++unparseable;
    }
    judged[i] = 1;
  });

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (judged[i]) outcome.verdicts[outcome.records[i].id] = std::move(verdicts[i]);
  }
  outcome.unparseable = unparseable.load();
  return outcome;
}

}  // namespace tripath
