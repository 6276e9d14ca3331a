#include "tripath/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/metrics.hpp"

namespace tripath {

using nlohmann::json;

namespace {

void require_width(const Checkpoint& ck, const EmbeddingProvider& provider) {
  if (provider.dim() != static_cast<std::size_t>(ck.config.hidden_dim)) {
    throw Error(ErrorCode::DimensionMismatch,
                "checkpoint hidden_dim " + std::to_string(ck.config.hidden_dim) +
                    " differs from provider width " + std::to_string(provider.dim()));
  }
}

std::string tsv_safe(std::string_view text) {
  std::string out = collapse_whitespace(text);
  std::replace(out.begin(), out.end(), '\t', ' ');
  return out;
}

}  // namespace

EvalReport evaluate(const Checkpoint& ck, std::span<const Record> records, Split split,
                    const EmbeddingProvider& provider, int workers) {
  require_width(ck, provider);
  std::vector<const Record*> selected;
  for (const auto& r : records) {
    if (r.split == split && r.label_status == LabelStatus::confirmed && r.label) selected.push_back(&r);
  }
  std::sort(selected.begin(), selected.end(),
            [](const Record* a, const Record* b) { return a->id < b->id; });

  std::vector<DetectorInput> inputs;
  std::vector<int> labels;
  for (const Record* r : selected) {
    inputs.push_back({provider.internal_states(*r), provider.unit_embeddings(*r)});
    labels.push_back(*r->label);
  }
  const auto outputs = forward_batch(inputs, ck.params, ck.config, workers);

  EvalReport report;
  std::vector<double> scores;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    scores.push_back(outputs[i].p_halluc);
    report.scores.push_back({selected[i]->id, outputs[i].p_halluc, labels[i]});
    labels[i] == 1 ? ++report.n_pos : ++report.n_neg;
  }
  report.auroc = auroc(scores, labels);
  const auto tm = threshold_metrics(scores, labels, 0.5);
  report.accuracy = tm.accuracy;
  report.precision = tm.precision;
  report.recall = tm.recall;
  report.f1 = tm.f1;
  return report;
}

void save_scores(const std::filesystem::path& path, std::span<const ScoredRecord> scores) {
  std::string out;
  for (const auto& s : scores) {
    out += json{{"id", s.id}, {"p_halluc", s.p_halluc}, {"label", s.label}}.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

std::string report_json(const EvalReport& r) {
  return json{{"auroc", r.auroc},       {"accuracy", r.accuracy}, {"precision", r.precision},
              {"recall", r.recall},     {"f1", r.f1},             {"n_pos", r.n_pos},
              {"n_neg", r.n_neg}}
      .dump();
}

std::vector<AttentionDump> export_attention(
    const Checkpoint& ck, std::span<const Record> records, std::span<const std::string> ids,
    const EmbeddingProvider& provider, const std::map<std::string, std::vector<std::string>>& unit_texts) {
  require_width(ck, provider);
  std::vector<AttentionDump> dumps;
  for (const auto& id : ids) {
    auto it = std::find_if(records.begin(), records.end(), [&](const Record& r) { return r.id == id; });
    if (it == records.end()) throw Error(ErrorCode::MissingId, "no record " + id, id);
    DetectorInput input{provider.internal_states(*it), provider.unit_embeddings(*it)};
    const auto out = forward(input, ck.params, ck.config);

    AttentionDump dump;
    dump.id = id;
    dump.label = it->label.value_or(-1);
    dump.p_halluc = out.p_halluc;
    dump.gate = out.gate;
    dump.weights = out.cross_attention;
    dump.columns.push_back("[CLS]");
    const auto texts = unit_texts.find(id);
    for (std::size_t c = 1; c < dump.weights.cols(); ++c) {
      if (texts != unit_texts.end() && c - 1 < texts->second.size()) {
        dump.columns.push_back(tsv_safe(texts->second[c - 1]));
      } else {
        dump.columns.push_back("u" + std::to_string(c));
      }
    }
    dumps.push_back(std::move(dump));
  }
  return dumps;
}

std::string format_attention_dump(std::span<const AttentionDump> dumps) {
  static constexpr const char* kRows[] = {"query", "answer", "reverse"};
  std::ostringstream out;
  out.precision(9);
  for (const auto& d : dumps) {
    out << "# id=" << d.id << "\tlabel=" << d.label << "\tp_halluc=" << d.p_halluc
        << "\tgate=" << d.gate << '\n';
    out << "segment";
    for (const auto& c : d.columns) out << '\t' << c;
    out << '\n';
    for (std::size_t r = 0; r < d.weights.rows(); ++r) {
      out << kRows[r];
      for (float w : d.weights.row(r)) out << '\t' << w;
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

FeatureDump export_features(const Checkpoint& ck, std::span<const Record> records, Split split,
                            const EmbeddingProvider& provider) {
  require_width(ck, provider);
  const auto d = static_cast<std::size_t>(ck.config.hidden_dim);
  std::vector<const Record*> selected;
  for (const auto& r : records) {
    if (r.split == split && r.label_status == LabelStatus::confirmed && r.label) selected.push_back(&r);
  }
  FeatureDump dump;
  dump.fused = Tensor2<float>(selected.size(), d);
  dump.raw = Tensor2<float>(selected.size(), 3 * d);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const Record& r = *selected[i];
    DetectorInput input{provider.internal_states(r), provider.unit_embeddings(r)};
    const auto out = forward(input, ck.params, ck.config);
    dump.ids.push_back(r.id);
    dump.labels.push_back(*r.label);
    std::copy(out.pooled_z.row(0).begin(), out.pooled_z.row(0).end(), dump.fused.row(i).begin());
    auto raw = dump.raw.row(i);
    std::copy(input.states.e_q.begin(), input.states.e_q.end(), raw.begin());
    std::copy(input.states.e_a_dir.begin(), input.states.e_a_dir.end(), raw.begin() + static_cast<std::ptrdiff_t>(d));
    std::copy(input.states.e_q_rev.begin(), input.states.e_q_rev.end(), raw.begin() + static_cast<std::ptrdiff_t>(2 * d));
  }
  return dump;
}

std::string format_feature_dump(const FeatureDump& dump) {
  std::ostringstream out;
  out << "id\tlabel";
  for (std::size_t c = 0; c < dump.fused.cols(); ++c) out << "\tfused_" << c;
  for (std::size_t c = 0; c < dump.raw.cols(); ++c) out << "\traw_" << c;
  out << '\n';
  for (std::size_t i = 0; i < dump.ids.size(); ++i) {
    out << dump.ids[i] << '\t' << dump.labels[i];
    for (float v : dump.fused.row(i)) out << '\t' << format_real(v);
    for (float v : dump.raw.row(i)) out << '\t' << format_real(v);
    out << '\n';
  }
  return out.str();
}

// ---- linear probe ---------------------------------------------------------------

double LinearProbe::score(std::span<const float> x) const {
  double z = bias;
  for (std::size_t c = 0; c < weights.size(); ++c) z += weights[c] * (x[c] - mean[c]) / scale[c];
  return 1.0 / (1.0 + std::exp(-z));
}

LinearProbe fit_linear_probe(const Tensor2<float>& x, std::span<const int> labels,
                             const ProbeOptions& options) {
  if (x.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "no probe training rows");
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  LinearProbe probe;
  probe.mean.assign(k, 0.0);
  probe.scale.assign(k, 0.0);
  probe.weights.assign(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) probe.mean[c] += x(r, c);
  }
  for (auto& m : probe.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) probe.scale[c] += (x(r, c) - probe.mean[c]) * (x(r, c) - probe.mean[c]);
  }
  for (auto& s : probe.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;
  }
  Tensor2<double> z(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) z(r, c) = (x(r, c) - probe.mean[c]) / probe.scale[c];
  }

  std::vector<double> grad(k);
  for (int it = 0; it < options.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double logit = probe.bias;
      for (std::size_t c = 0; c < k; ++c) logit += probe.weights[c] * z(r, c);
      const double err = 1.0 / (1.0 + std::exp(-logit)) - labels[r];
      for (std::size_t c = 0; c < k; ++c) grad[c] += err * z(r, c);
      grad_b += err;
    }
    for (std::size_t c = 0; c < k; ++c) {
      probe.weights[c] -= options.learning_rate * (grad[c] / static_cast<double>(n) + options.l2 * probe.weights[c]);
    }
    probe.bias -= options.learning_rate * grad_b / static_cast<double>(n);
  }
  return probe;
}

double probe_auroc(const Tensor2<float>& train_x, std::span<const int> train_y,
                   const Tensor2<float>& test_x, std::span<const int> test_y,
                   const ProbeOptions& options) {
  const auto probe = fit_linear_probe(train_x, train_y, options);
  std::vector<double> scores;
  for (std::size_t r = 0; r < test_x.rows(); ++r) scores.push_back(probe.score(test_x.row(r)));
  return auroc(scores, test_y);
}

}  // namespace tripath
