#include "tripath/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "tripath/checkpoint.hpp"
#include "tripath/config.hpp"
#include "tripath/embeddings.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/orchestrator.hpp"
#include "tripath/record.hpp"
#include "tripath/reporting.hpp"
#include "tripath/rng.hpp"
#include "tripath/segmenter.hpp"
#include "tripath/trainer.hpp"

#ifndef TRIPATH_VERSION
#define TRIPATH_VERSION "0.0.0"
#endif

namespace tripath::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigKeys[] = {
    "hidden_dim",   "num_heads",    "encoder_layers", "ffn_multiplier",
    "max_units",    "positional_encoding", "cross_attention_mode", "focal_gamma",
    "focal_alpha",  "learning_rate", "batch_size",    "epochs",
    "seed",         "layer_index",  "temperature",    "max_tokens",
};

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json config_json(const DetectorConfig& cfg) {
  json out = json::object();
  for (const auto& [key, value] : config_entries(cfg)) out[key] = value;
  return out;
}

/// Bookkeeping for the manifest written beside every run's outputs.
struct Run {
  std::string subcommand;
  std::string started = iso_now();
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::uint64_t seed = 0;

  void write(const fs::path& manifest_path) const {
    json m{{"subcommand", subcommand},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs},
           {"seed", seed},
           {"tool_version", TRIPATH_VERSION},
           {"started_at", started},
           {"finished_at", iso_now()}};
    atomic_write(manifest_path, m.dump(2) + "\n");
  }
};

fs::path manifest_beside(const fs::path& output) {
  auto p = output;
  if (!p.has_filename()) p = p.parent_path();
  return p.string() + ".manifest.json";
}

/// Config-key flags shared by every subcommand that reads DetectorConfig.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "Config file of key=value lines");
    for (const char* key : kConfigKeys) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app->add_option_function<std::string>(
             flag, [this, key](const std::string& v) { values[key] = v; },
             std::string("Override config key ") + key)
          ->type_name("VALUE");
    }
  }

  DetectorConfig resolve() const {
    DetectorConfig cfg = file.empty() ? DetectorConfig{} : load_config(file);
    for (const auto& [k, v] : values) set_config_value(cfg, k, v);
    validate(cfg);
    return cfg;
  }
};

struct EndpointFlags {
  std::string base_url;
  std::string model;
  std::string api_key_env;
  double timeout = 60.0;
  int max_retries = 3;
  int backoff_ms = 500;

  void attach(CLI::App* app, const std::string& prefix, bool required) {
    auto* u = app->add_option("--" + prefix + "base-url", base_url, "Endpoint base URL");
    auto* m = app->add_option("--" + prefix + "model", model, "Model name");
    if (required) {
      u->required();
      m->required();
    }
    app->add_option("--" + prefix + "api-key-env", api_key_env,
                    "Environment variable holding the API key");
  }

  LlmEndpointConfig make(const std::string& id, const DetectorConfig& cfg, int concurrency) const {
    LlmEndpointConfig e;
    e.id = id;
    e.base_url = base_url;
    e.model = model;
    e.api_key_env = api_key_env;
    e.temperature = cfg.temperature;
    e.max_tokens = cfg.max_tokens;
    e.timeout_seconds = timeout;
    e.max_retries = max_retries;
    e.backoff_base_ms = backoff_ms;
    e.max_concurrent = concurrency;
    return e;
  }
};

void attach_retry_flags(CLI::App* app, EndpointFlags& f) {
  app->add_option("--timeout", f.timeout, "Request timeout in seconds")->capture_default_str();
  app->add_option("--max-retries", f.max_retries, "Retries per request")->capture_default_str();
  app->add_option("--backoff-ms", f.backoff_ms, "Retry backoff base in milliseconds")
      ->capture_default_str();
}

Split assign_split(const std::string& id, std::uint64_t seed) {
  switch (hash64(id, seed) % 4) {
    case 0:
    case 1:
      return Split::train;
    case 2:
      return Split::val;
    default:
      return Split::test;
  }
}

/// Inputs for model-driven subcommands.
struct ModelInputs {
  std::string data;
  std::string states;
  std::string units;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "Dataset file")->required();
    app->add_option("--states", states, "Internal-state file")->required();
    app->add_option("--units", units, "Unit-embedding file")->required();
  }

  TableProvider provider(std::size_t d) const {
    return TableProvider(d, load_states(states, d), load_unit_embeddings(units, d));
  }

  void record(Run& run) const {
    run.inputs["data"] = data;
    run.inputs["states"] = states;
    run.inputs["units"] = units;
  }
};

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::usage:
      return 1;
    case ErrorClass::data:
      return 2;
    case ErrorClass::endpoint:
      return 3;
  }
  return 2;
}

void report_error(std::ostream& err, std::string_view code, std::string_view message,
                  std::string_view subject = {}, std::size_t line = 0) {
  json e{{"error", code}, {"message", message}};
  if (!subject.empty()) e["subject"] = subject;
  if (line) e["line"] = line;
  err << e.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env) {
  CLI::App app{"Tri-path hallucination detection toolkit", "tripath"};
  app.set_version_flag("--version", TRIPATH_VERSION);
  app.require_subcommand(1);

  HttpTransport http;
  Transport& transport = env.transport ? *env.transport : static_cast<Transport&>(http);
  std::function<void()> action;

  // ---- generate -----------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Produce the three reasoning paths per query");
  struct {
    std::string input, output;
    int concurrency = 4;
    bool force = false;
    std::uint64_t seed = 0;
    EndpointFlags endpoint;
    ConfigFlags config;
  } g;
  gen->add_option("--input", g.input, "Query file of {id, question} lines")->required();
  gen->add_option("--output", g.output, "Dataset file to write")->required();
  gen->add_option("--concurrency", g.concurrency, "Requests in flight")->capture_default_str();
  gen->add_flag("--force", g.force, "Regenerate ids already present in the output");
  gen->add_option("--split-seed", g.seed, "Seed for the hashed train/val/test assignment");
  g.endpoint.attach(gen, "", true);
  attach_retry_flags(gen, g.endpoint);
  g.config.attach(gen);
  gen->callback([&] {
    action = [&] {
      Run run{"generate"};
      const auto cfg = g.config.resolve();
      const auto endpoint = g.endpoint.make("generator", cfg, g.concurrency);
      const auto queries = load_queries(g.input);
      std::map<std::string, Record> cached;
      if (!g.force && fs::exists(g.output)) {
        for (auto& r : load_dataset(g.output)) cached.emplace(r.id, std::move(r));
      }
      ChatClient client(transport, env.sleeper, env.env);
      auto records = generate_all(queries, endpoint, client, cached, {g.force, {}});
      for (auto& r : records) {
        if (!cached.count(r.id) || g.force) r.split = assign_split(r.id, g.seed);
      }
      save_dataset(g.output, records);
      run.config = config_json(cfg);
      run.config["base_url"] = endpoint.base_url;
      run.config["model"] = endpoint.model;
      run.seed = g.seed;
      run.inputs["queries"] = g.input;
      run.outputs["dataset"] = g.output;
      run.write(manifest_beside(g.output));
      out << json{{"records", records.size()}, {"reused", cached.size()}}.dump() << '\n';
    };
  });

  // ---- label --------------------------------------------------------------
  auto* lab = app.add_subcommand("label", "Label Q/A_dir pairs with two LLM judges");
  struct {
    std::string input, output;
    int concurrency = 4;
    bool force = false;
    EndpointFlags a, b;
    ConfigFlags config;
  } l;
  lab->add_option("--input", l.input, "Dataset file")->required();
  lab->add_option("--output", l.output, "Labeled dataset file to write")->required();
  lab->add_option("--concurrency", l.concurrency, "Records judged in parallel")
      ->capture_default_str();
  lab->add_flag("--force", l.force, "Relabel records that already carry a status");
  l.a.attach(lab, "judge-a-", true);
  l.b.attach(lab, "judge-b-", true);
  attach_retry_flags(lab, l.a);
  l.config.attach(lab);
  lab->callback([&] {
    action = [&] {
      Run run{"label"};
      const auto cfg = l.config.resolve();
      l.b.timeout = l.a.timeout;
      l.b.max_retries = l.a.max_retries;
      l.b.backoff_ms = l.a.backoff_ms;
      const std::vector<LlmEndpointConfig> judges{l.a.make("judge-a", cfg, 1),
                                                  l.b.make("judge-b", cfg, 1)};
      const auto records = load_dataset(l.input);
      ChatClient client(transport, env.sleeper, env.env);
      const auto outcome = label_dataset(records, judges, client, {l.force, l.concurrency});
      save_dataset(l.output, outcome.records);

      std::string verdicts;
      for (const auto& r : outcome.records) {
        const auto it = outcome.verdicts.find(r.id);
        if (it == outcome.verdicts.end()) continue;
        json v = json::array();
        for (const auto& jv : it->second) {
          v.push_back({{"judge", jv.judge_id},
                       {"label", jv.label ? json(*jv.label) : json(nullptr)},
                       {"raw", jv.raw}});
        }
        verdicts += json{{"id", r.id}, {"verdicts", v}}.dump() + "\n";
      }
      const fs::path verdict_path = l.output + ".verdicts.jsonl";
      atomic_write(verdict_path, verdicts);

      std::size_t confirmed = 0, review = 0;
      for (const auto& r : outcome.records) {
        confirmed += r.label_status == LabelStatus::confirmed;
        review += r.label_status == LabelStatus::needs_review;
      }
      run.config = config_json(cfg);
      run.inputs["dataset"] = l.input;
      run.outputs["dataset"] = l.output;
      run.outputs["verdicts"] = verdict_path.string();
      run.write(manifest_beside(l.output));
      out << json{{"confirmed", confirmed},
                  {"needs_review", review},
                  {"unparseable", outcome.unparseable}}
                 .dump()
          << '\n';
    };
  });

  // ---- segment ------------------------------------------------------------
  auto* seg = app.add_subcommand("segment", "Split each chain of thought into reasoning units");
  struct {
    std::string input, output, lexicon;
    int min_unit_tokens = kDefaultMinUnitTokens;
    int max_units = kDefaultMaxUnits;
  } s;
  seg->add_option("--input", s.input, "Dataset file")->required();
  seg->add_option("--output", s.output, "Trajectory file to write")->required();
  seg->add_option("--lexicon", s.lexicon, "Connector lexicon (phrase<TAB>category lines)");
  seg->add_option("--min-unit-tokens", s.min_unit_tokens, "Merge units shorter than this")
      ->capture_default_str();
  seg->add_option("--max-units,--max_units", s.max_units, "Keep at most this many units")
      ->capture_default_str();
  seg->callback([&] {
    action = [&] {
      Run run{"segment"};
      const auto lexicon = s.lexicon.empty() ? default_lexicon() : load_lexicon(s.lexicon);
      const auto records = load_dataset(s.input);
      std::vector<std::pair<std::string, SemanticTrajectoryList>> stls;
      for (const auto& r : records) {
        try {
          stls.emplace_back(r.id, segment_cot(r.answer_cot, lexicon, s.min_unit_tokens, s.max_units));
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " (record " + r.id + ")", r.id);
        }
      }
      save_trajectories(s.output, stls);
      run.config = {{"min_unit_tokens", s.min_unit_tokens}, {"max_units", s.max_units}};
      run.inputs["dataset"] = s.input;
      if (!s.lexicon.empty()) run.inputs["lexicon"] = s.lexicon;
      run.outputs["trajectories"] = s.output;
      run.write(manifest_beside(s.output));
      out << json{{"records", stls.size()}}.dump() << '\n';
    };
  });

  // ---- embed-stub -----------------------------------------------------------
  auto* emb = app.add_subcommand("embed-stub", "Write deterministic stub embeddings");
  struct {
    std::string input, stl, states_out, units_out;
    int dim = 32;
    std::uint64_t seed = 0;
    int layer_index = 24;
  } e;
  emb->add_option("--input", e.input, "Dataset file")->required();
  emb->add_option("--stl", e.stl, "Trajectory file from `segment`")->required();
  emb->add_option("--states-out", e.states_out, "Internal-state file to write")->required();
  emb->add_option("--units-out", e.units_out, "Unit-embedding file to write")->required();
  emb->add_option("--dim", e.dim, "Embedding width")->capture_default_str();
  emb->add_option("--seed", e.seed, "Stub seed")->capture_default_str();
  emb->add_option("--layer-index", e.layer_index, "Layer tag stored with the states")
      ->capture_default_str();
  emb->callback([&] {
    action = [&] {
      if (e.dim < 1) throw Error(ErrorCode::InvalidArgument, "--dim must be positive");
      Run run{"embed-stub"};
      const auto d = static_cast<std::size_t>(e.dim);
      const auto records = load_dataset(e.input);
      const auto trajectories = load_trajectories(e.stl);
      std::vector<std::pair<std::string, InternalStateSet>> states;
      std::vector<std::pair<std::string, EmbeddingSequence>> units;
      for (const auto& r : records) {
        const auto it = trajectories.find(r.id);
        if (it == trajectories.end()) {
          throw Error(ErrorCode::MissingId, "no trajectory for " + r.id, r.id);
        }
        states.emplace_back(r.id, InternalStateSet{stub_embed(r.question, d, e.seed),
                                                   stub_embed(r.answer_direct, d, e.seed),
                                                   stub_embed(r.question_reverse, d, e.seed),
                                                   e.layer_index});
        units.emplace_back(r.id, embed_units(it->second, d, e.seed));
      }
      save_states(e.states_out, states);
      save_unit_embeddings(e.units_out, units);
      run.config = {{"dim", e.dim}, {"layer_index", e.layer_index}};
      run.seed = e.seed;
      run.inputs["dataset"] = e.input;
      run.inputs["trajectories"] = e.stl;
      run.outputs["states"] = e.states_out;
      run.outputs["units"] = e.units_out;
      run.write(manifest_beside(e.states_out));
      out << json{{"records", states.size()}, {"dim", e.dim}}.dump() << '\n';
    };
  });

  // ---- synth ----------------------------------------------------------------
  auto* syn = app.add_subcommand("synth", "Write a labeled synthetic corpus with embeddings");
  struct {
    int n = 64;
    int dim = 32;
    double separation = 4.0;
    std::uint64_t seed = 0;
    std::string out_dir;
  } y;
  syn->add_option("--n", y.n, "Record count (even)")->capture_default_str();
  syn->add_option("--dim", y.dim, "Embedding width")->capture_default_str();
  syn->add_option("--separation", y.separation, "Class separation")->capture_default_str();
  syn->add_option("--seed", y.seed, "Generator seed")->capture_default_str();
  syn->add_option("--out-dir", y.out_dir,
                  "Directory for dataset.jsonl, states.jsonl, units.jsonl, planted.jsonl")
      ->required();
  syn->callback([&] {
    action = [&] {
      Run run{"synth"};
      const auto data = synth_dataset(y.n, y.dim, y.seed, y.separation);
      const fs::path dir = y.out_dir;
      fs::create_directories(dir);
      std::vector<std::pair<std::string, InternalStateSet>> states;
      std::vector<std::pair<std::string, EmbeddingSequence>> units;
      std::string planted;
      for (const auto& r : data.records) {
        states.emplace_back(r.id, data.states.at(r.id));
        units.emplace_back(r.id, data.units.at(r.id));
        planted += json{{"id", r.id}, {"planted_unit", data.planted_unit.at(r.id)}}.dump() + "\n";
      }
      save_dataset(dir / "dataset.jsonl", data.records);
      save_states(dir / "states.jsonl", states);
      save_unit_embeddings(dir / "units.jsonl", units);
      atomic_write(dir / "planted.jsonl", planted);
      run.config = {{"n", y.n}, {"dim", y.dim}, {"separation", y.separation}};
      run.seed = y.seed;
      for (const char* f : {"dataset", "states", "units", "planted"}) {
        run.outputs[f] = (dir / (std::string(f) + ".jsonl")).string();
      }
      run.write(dir / "synth.manifest.json");
      out << json{{"records", data.records.size()}, {"out_dir", dir.string()}}.dump() << '\n';
    };
  });

  // ---- train ----------------------------------------------------------------
  auto* trn = app.add_subcommand("train", "Train the fusion detector");
  struct {
    ModelInputs in;
    ConfigFlags config;
    std::string checkpoint, log;
  } t;
  t.in.attach(trn);
  t.config.attach(trn);
  trn->add_option("--checkpoint", t.checkpoint, "Checkpoint directory to write")->required();
  trn->add_option("--log", t.log, "Epoch metrics file (default <checkpoint>.log.jsonl)");
  trn->callback([&] {
    action = [&] {
      Run run{"train"};
      const auto cfg = t.config.resolve();
      const auto records = load_dataset(t.in.data);
      const auto provider = t.in.provider(static_cast<std::size_t>(cfg.hidden_dim));
      const auto result = train(records, provider, cfg);
      save_checkpoint(t.checkpoint, result.checkpoint);

      std::string log;
      for (const auto& m : result.log) {
        json line{{"epoch", m.epoch}, {"train_loss", m.train_loss}};
        line["val_auroc"] = std::isnan(m.val_auroc) ? json(nullptr) : json(m.val_auroc);
        line["val_loss"] = std::isnan(m.val_loss) ? json(nullptr) : json(m.val_loss);
        log += line.dump() + "\n";
      }
      const fs::path log_path =
          t.log.empty() ? fs::path(fs::path(t.checkpoint).string() + ".log.jsonl") : fs::path(t.log);
      atomic_write(log_path, log);

      run.config = config_json(cfg);
      run.seed = cfg.seed;
      t.in.record(run);
      if (!t.config.file.empty()) run.inputs["config"] = t.config.file;
      run.outputs["checkpoint"] = t.checkpoint;
      run.outputs["log"] = log_path.string();
      run.write(manifest_beside(t.checkpoint));
      const auto& meta = result.checkpoint.meta;
      const auto& best = result.log[static_cast<std::size_t>(meta.best_epoch - 1)];
      json summary{{"epochs", meta.epochs}, {"best_epoch", meta.best_epoch},
                   {"final_loss", meta.final_loss}};
      summary["best_val_auroc"] = std::isnan(best.val_auroc) ? json(nullptr) : json(best.val_auroc);
      out << summary.dump() << '\n';
    };
  });

  // ---- eval -----------------------------------------------------------------
  auto* evl = app.add_subcommand("eval", "Score a split and report AUROC");
  struct {
    ModelInputs in;
    std::string checkpoint, split = "test", scores, report;
    int workers = 1;
  } v;
  v.in.attach(evl);
  evl->add_option("--checkpoint", v.checkpoint, "Checkpoint directory")->required();
  evl->add_option("--split", v.split, "train, val or test")->capture_default_str();
  evl->add_option("--scores", v.scores, "Per-record score file to write")->required();
  evl->add_option("--report", v.report, "Report JSON file (default <scores>.report.json)");
  evl->add_option("--workers", v.workers, "Scoring threads")->capture_default_str();
  evl->callback([&] {
    action = [&] {
      Run run{"eval"};
      const auto ck = load_checkpoint(v.checkpoint);
      const auto split = parse_split(v.split);
      const auto records = load_dataset(v.in.data);
      const auto provider = v.in.provider(static_cast<std::size_t>(ck.config.hidden_dim));
      const auto report = evaluate(ck, records, split, provider, std::max(1, v.workers));
      save_scores(v.scores, report.scores);
      const fs::path report_path =
          v.report.empty() ? fs::path(v.scores + ".report.json") : fs::path(v.report);
      atomic_write(report_path, report_json(report) + "\n");
      run.config = config_json(ck.config);
      run.config["split"] = v.split;
      run.seed = ck.config.seed;
      v.in.record(run);
      run.inputs["checkpoint"] = v.checkpoint;
      run.outputs["scores"] = v.scores;
      run.outputs["report"] = report_path.string();
      run.write(manifest_beside(v.scores));
      out << report_json(report) << '\n';
    };
  });

  // ---- inspect-attention ----------------------------------------------------
  auto* att = app.add_subcommand("inspect-attention", "Dump cross-attention weights per record");
  struct {
    ModelInputs in;
    std::string checkpoint, output, stl, split;
    std::vector<std::string> ids;
  } a;
  a.in.attach(att);
  att->add_option("--checkpoint", a.checkpoint, "Checkpoint directory")->required();
  att->add_option("--output", a.output, "Attention dump to write")->required();
  att->add_option("--ids", a.ids, "Record ids (comma separated)")->delimiter(',');
  att->add_option("--split", a.split, "Dump every record of this split instead of --ids");
  att->add_option("--stl", a.stl, "Trajectory file for unit column labels");
  att->callback([&] {
    action = [&] {
      if (a.ids.empty() == a.split.empty()) {
        throw Error(ErrorCode::InvalidArgument, "give exactly one of --ids or --split");
      }
      Run run{"inspect-attention"};
      const auto ck = load_checkpoint(a.checkpoint);
      const auto records = load_dataset(a.in.data);
      auto ids = a.ids;
      if (!a.split.empty()) {
        const auto split = parse_split(a.split);
        for (const auto& r : records) {
          if (r.split == split) ids.push_back(r.id);
        }
      }
      const auto provider = a.in.provider(static_cast<std::size_t>(ck.config.hidden_dim));
      const auto texts = a.stl.empty() ? std::map<std::string, std::vector<std::string>>{}
                                       : load_trajectories(a.stl);
      const auto dumps = export_attention(ck, records, ids, provider, texts);
      atomic_write(a.output, format_attention_dump(dumps));
      run.config = config_json(ck.config);
      a.in.record(run);
      run.inputs["checkpoint"] = a.checkpoint;
      if (!a.stl.empty()) run.inputs["trajectories"] = a.stl;
      run.outputs["attention"] = a.output;
      run.write(manifest_beside(a.output));
      out << json{{"records", dumps.size()}}.dump() << '\n';
    };
  });

  // ---- export-features -------------------------------------------------------
  auto* fea = app.add_subcommand("export-features", "Dump fused and raw feature vectors");
  struct {
    ModelInputs in;
    std::string checkpoint, output, split = "test";
  } f;
  f.in.attach(fea);
  fea->add_option("--checkpoint", f.checkpoint, "Checkpoint directory")->required();
  fea->add_option("--output", f.output, "Feature dump to write")->required();
  fea->add_option("--split", f.split, "train, val or test")->capture_default_str();
  fea->callback([&] {
    action = [&] {
      Run run{"export-features"};
      const auto ck = load_checkpoint(f.checkpoint);
      const auto records = load_dataset(f.in.data);
      const auto provider = f.in.provider(static_cast<std::size_t>(ck.config.hidden_dim));
      const auto dump = export_features(ck, records, parse_split(f.split), provider);
      atomic_write(f.output, format_feature_dump(dump));
      run.config = config_json(ck.config);
      run.config["split"] = f.split;
      f.in.record(run);
      run.inputs["checkpoint"] = f.checkpoint;
      run.outputs["features"] = f.output;
      run.write(manifest_beside(f.output));
      out << json{{"records", dump.ids.size()}}.dump() << '\n';
    };
  });

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
    if (!known) {
      out << app.help();
      report_error(err, "UsageError", "unknown subcommand '" + args.front() + "'");
      return 1;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << TRIPATH_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    // Subcommand-level help requests are raised from the subcommand itself.
    out << app.help();
    report_error(err, "UsageError", e.what());
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what(), e.subject(), e.line());
    return exit_code(error_class(e.code()));
  } catch (const fs::filesystem_error& e) {
    report_error(err, "IoError", e.what());
    return 2;
  } catch (const json::exception& e) {
    report_error(err, "MalformedLine", e.what());
    return 2;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tripath::cli
