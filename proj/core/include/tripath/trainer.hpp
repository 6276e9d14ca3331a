#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tripath/checkpoint.hpp"
#include "tripath/detector.hpp"
#include "tripath/embeddings.hpp"
#include "tripath/record.hpp"

namespace tripath {

struct LabeledInput {
  std::string id;
  DetectorInput input;
  int label = 0;
};

/// Fetches and validates detector inputs for confirmed records of `split`
/// (all confirmed records when `split` is empty). Order follows `records`.
std::vector<LabeledInput> prepare_inputs(std::span<const Record> records,
                                         const EmbeddingProvider& provider,
                                         const DetectorConfig& config,
                                         std::optional<Split> split = std::nullopt);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auroc = 0.0;  // NaN when the validation split lacks a class
  double val_loss = 0.0;   // NaN when the validation split is empty

  bool operator==(const EpochMetrics&) const = default;
};

struct TrainOptions {
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the best validation epoch
  std::vector<EpochMetrics> log;
};

/// Adam with bias correction (beta 0.9/0.999, eps 1e-8).
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(std::span<float> params, std::span<const float> grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<float> m_, v_;
  long step_ = 0;
};

/// Scales `grads` in place so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<float> grads, double max_norm);

/// Minibatch focal-loss training with per-epoch reshuffling from the config
/// seed, gradient clipping at 1.0 and best-validation-AUROC selection (ties go
/// to the lower validation loss, then the earlier epoch). Throws SingleClassDataset when a class has fewer
/// than two training examples, NonFiniteLoss when a step diverges.
TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const DetectorConfig& config, const TrainOptions& options = {});

/// Convenience wrapper: train/val splits drawn from `records` via `provider`.
TrainResult train(std::span<const Record> records, const EmbeddingProvider& provider,
                  const DetectorConfig& config, const TrainOptions& options = {});

}  // namespace tripath
