#include "tripath/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "tripath/error.hpp"
#include "tripath/metrics.hpp"
#include "tripath/rng.hpp"

namespace tripath {

std::vector<LabeledInput> prepare_inputs(std::span<const Record> records,
                                         const EmbeddingProvider& provider,
                                         const DetectorConfig& config, std::optional<Split> split) {
  if (provider.dim() != static_cast<std::size_t>(config.hidden_dim)) {
    throw Error(ErrorCode::DimensionMismatch,
                "provider width " + std::to_string(provider.dim()) + " differs from hidden_dim " +
                    std::to_string(config.hidden_dim));
  }
  std::vector<LabeledInput> out;
  for (const auto& r : records) {
    if (r.label_status != LabelStatus::confirmed || !r.label) continue;
    if (split && r.split != *split) continue;
    LabeledInput item{r.id, {provider.internal_states(r), provider.unit_embeddings(r)}, *r.label};
    try {
      check_input(item.input, config);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (record " + r.id + ")", r.id);
    }
    out.push_back(std::move(item));
  }
  return out;
}

AdamOptimizer::AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size), v_(size) {}

void AdamOptimizer::step(std::span<float> params, std::span<const float> grads) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0f - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= static_cast<float>(lr_ * m_hat / (std::sqrt(v_hat) + eps_));
  }
}

double clip_grad_norm(std::span<float> grads, double max_norm) {
  double sq = 0.0;
  for (float g : grads) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

namespace {

struct SplitScore {
  double auroc;
  double loss;
};

SplitScore score_split(std::span<const LabeledInput> set, const FusionParams<float>& params,
                       const DetectorConfig& config) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (set.empty()) return {nan, nan};
  std::vector<DetectorInput> inputs;
  std::vector<int> labels;
  std::size_t pos = 0;
  for (const auto& item : set) {
    inputs.push_back(item.input);
    labels.push_back(item.label);
    pos += static_cast<std::size_t>(item.label);
  }
  const auto outputs = forward_batch(inputs, params, config);
  std::vector<double> scores;
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    scores.push_back(outputs[i].p_halluc);
    loss += focal_loss(outputs[i].logits, labels[i], config.focal_alpha, config.focal_gamma).loss;
  }
  loss /= static_cast<double>(set.size());
  if (pos == 0 || pos == set.size()) return {nan, loss};
  return {auroc(scores, labels), loss};
}

}  // namespace

TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const DetectorConfig& config, const TrainOptions& options) {
  validate(config);
  std::size_t pos = 0;
  for (const auto& item : train_set) pos += static_cast<std::size_t>(item.label);
  if (pos < 2 || train_set.size() - pos < 2) {
    throw Error(ErrorCode::SingleClassDataset,
                "training split needs at least two confirmed records per class (found " +
                    std::to_string(train_set.size() - pos) + " negative, " + std::to_string(pos) +
                    " positive)");
  }

  auto params = init_params<float>(config, config.seed);
  auto flat = flatten(params);
  AdamOptimizer adam(flat.size(), config.learning_rate);
  Rng shuffle_rng(mix64(config.seed ^ 0x5348554646ULL));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  TrainResult result;
  FusionParams<float> best = params;
  double best_auroc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const float weight = 1.0f / static_cast<float>(end - start);
      auto grad = make_zero_params<float>(config);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& item = train_set[order[k]];
        batch_loss += loss_and_gradient(item.input, item.label, params, config, grad, weight);
      }
      ++step;
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss diverged at step " + std::to_string(step),
                    std::to_string(step));
      }
      loss_sum += batch_loss;
      auto g = flatten(grad);
      clip_grad_norm(g, 1.0);
      adam.step(flat, g);
      unflatten<float>(flat, params);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(train_set.size());
    const auto val = score_split(val_set, params, config);
    metrics.val_auroc = val.auroc;
    metrics.val_loss = val.loss;
    result.log.push_back(metrics);
    if (options.on_epoch) options.on_epoch(metrics);

    const double score = std::isnan(val.auroc) ? 0.0 : val.auroc;
    const double vloss = std::isnan(val.loss) ? 0.0 : val.loss;
    if (score > best_auroc || (score == best_auroc && vloss < best_loss)) {
      best_auroc = score;
      best_loss = vloss;
      best = params;
      best_epoch = epoch;
    }
  }

  result.checkpoint.params = std::move(best);
  result.checkpoint.config = config;
  result.checkpoint.meta = {config.epochs, best_epoch, result.log.back().train_loss, config.seed};
  return result;
}

TrainResult train(std::span<const Record> records, const EmbeddingProvider& provider,
                  const DetectorConfig& config, const TrainOptions& options) {
  validate(config);
  const auto train_set = prepare_inputs(records, provider, config, Split::train);
  const auto val_set = prepare_inputs(records, provider, config, Split::val);
  return train(train_set, val_set, config, options);
}

}  // namespace tripath
