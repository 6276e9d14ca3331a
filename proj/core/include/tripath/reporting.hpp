#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tripath/checkpoint.hpp"
#include "tripath/detector.hpp"
#include "tripath/embeddings.hpp"
#include "tripath/record.hpp"

namespace tripath {

struct ScoredRecord {
  std::string id;
  double p_halluc = 0.0;
  int label = 0;
};

struct EvalReport {
  double auroc = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::vector<ScoredRecord> scores;  // sorted by id
};

/// Scores every confirmed record of `split`. Throws SingleClass when the
/// split lacks a class and DimensionMismatch when provider and checkpoint
/// widths differ.
EvalReport evaluate(const Checkpoint& checkpoint, std::span<const Record> records, Split split,
                    const EmbeddingProvider& provider, int workers = 1);

/// Lines `{id, p_halluc, label}`.
void save_scores(const std::filesystem::path& path, std::span<const ScoredRecord> scores);
std::string report_json(const EvalReport& report);

// ---- cross-attention dump -----------------------------------------------------

struct AttentionDump {
  std::string id;
  int label = -1;  // -1 when unlabeled
  double p_halluc = 0.0;
  double gate = 0.0;
  std::vector<std::string> columns;  // "[CLS]" then unit labels
  Tensor2<float> weights;            // rows: query, answer, reverse
};

/// `unit_texts` maps id -> unit strings used as column labels; ids missing
/// from it fall back to "u1".."um".
std::vector<AttentionDump> export_attention(
    const Checkpoint& checkpoint, std::span<const Record> records,
    std::span<const std::string> ids, const EmbeddingProvider& provider,
    const std::map<std::string, std::vector<std::string>>& unit_texts = {});

/// Tab-separated blocks, one per record:
///   # id=<id>  label=<label>  p_halluc=<p>  gate=<g>
///   segment  [CLS]  <unit 1>  ...  <unit m>
///   query    w      w           ...
///   answer   ...
///   reverse  ...
/// followed by a blank line.
std::string format_attention_dump(std::span<const AttentionDump> dumps);

// ---- fused-feature dump -------------------------------------------------------

struct FeatureDump {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Tensor2<float> fused;  // n x d, mean-pooled Z
  Tensor2<float> raw;    // n x 3d, [E_Q, E_{A_dir}, E_{Q_rev}]
};

/// Confirmed records of `split`, in dataset order.
FeatureDump export_features(const Checkpoint& checkpoint, std::span<const Record> records,
                            Split split, const EmbeddingProvider& provider);

/// Header `id label fused_0..fused_{d-1} raw_0..raw_{3d-1}`, tab-separated.
std::string format_feature_dump(const FeatureDump& dump);

// ---- linear probe ---------------------------------------------------------------

/// L2-regularized logistic regression on standardized features, fit by
/// full-batch gradient descent from zero weights.
struct LinearProbe {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const float> features) const;
};

struct ProbeOptions {
  double l2 = 1e-2;
  double learning_rate = 0.1;
  int iterations = 2000;
};

LinearProbe fit_linear_probe(const Tensor2<float>& features, std::span<const int> labels,
                             const ProbeOptions& options = {});

/// Fits on (train_x, train_y) and returns AUROC on (test_x, test_y).
double probe_auroc(const Tensor2<float>& train_x, std::span<const int> train_y,
                   const Tensor2<float>& test_x, std::span<const int> test_y,
                   const ProbeOptions& options = {});

}  // namespace tripath
