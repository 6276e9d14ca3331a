#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "tripath/config.hpp"
#include "tripath/embeddings.hpp"
#include "tripath/kernels.hpp"
#include "tripath/params.hpp"

namespace tripath {

/// Everything the network consumes for one query-answer pair.
struct DetectorInput {
  InternalStateSet states;
  EmbeddingSequence units;
};

struct ForwardOptions {
  /// Test hook: replace the learned gate value with a constant.
  std::optional<double> gate_override;
  /// Drop the cross-attention branch so Z = H_main (the "without CoT" arm).
  bool ablate_cross_attention = false;
};

// ---- stage 1: trajectory encoding ------------------------------------------

template <typename T>
struct TrajectoryEncoding {
  Tensor2<T> h_cot;        // 1 x d, output state at the CLS position
  Tensor2<T> unit_states;  // m x d
};

template <typename T>
struct EncodeCache {
  std::vector<nn::EncoderBlockCache<T>> blocks;
  std::size_t units = 0;
};

/// [CLS; e_1..e_m] (+ positional rows 0..m) through the encoder stack.
template <typename T>
TrajectoryEncoding<T> encode_trajectory(const Tensor2<T>& units, const FusionParams<T>& params,
                                        const DetectorConfig& config, EncodeCache<T>* cache);

template <typename T>
void encode_trajectory_backward(const EncodeCache<T>& cache, const FusionParams<T>& params,
                                const DetectorConfig& config, const Tensor2<T>& d_h_cot,
                                const Tensor2<T>& d_unit_states, FusionParams<T>& grad);

// ---- stage 2: intra-modal fusion --------------------------------------------

template <typename T>
struct FuseCache {
  nn::LayerNormCache<T> norm;
  Tensor2<T> normed;
  nn::AttentionCache<T> attention;
};

/// H_main = X_main + MHA(LayerNorm(X_main + E_seg)); X_main rows are
/// (E_Q, E_{A_dir}, E_{Q_rev}).
template <typename T>
Tensor2<T> fuse_main(const Tensor2<T>& x_main, const FusionParams<T>& params,
                     const DetectorConfig& config, FuseCache<T>* cache);

/// Returns the gradient with respect to X_main.
template <typename T>
Tensor2<T> fuse_main_backward(const FuseCache<T>& cache, const FusionParams<T>& params,
                              const DetectorConfig& config, const Tensor2<T>& d_h_main,
                              FusionParams<T>& grad);

// ---- stage 3: adaptive gate ---------------------------------------------------

template <typename T>
struct GateResult {
  T gate;
  /// Gated key/value rows: g*h_cot, then g*unit_states in full_trajectory mode.
  Tensor2<T> keys_values;
};

template <typename T>
struct GateCache {
  Tensor2<T> pooled;
  Tensor2<T> hidden;
  Tensor2<T> ungated;
  T gate{};
  bool overridden = false;
};

/// g = sigmoid(FFN(mean of H_main rows)), FFN = d -> d (tanh) -> 1.
template <typename T>
GateResult<T> apply_gate(const Tensor2<T>& h_main, const TrajectoryEncoding<T>& trajectory,
                         const FusionParams<T>& params, const DetectorConfig& config,
                         std::optional<double> gate_override, GateCache<T>* cache);

template <typename T>
struct GateGrads {
  Tensor2<T> d_h_main;
  Tensor2<T> d_h_cot;
  Tensor2<T> d_unit_states;
};

template <typename T>
GateGrads<T> apply_gate_backward(const GateCache<T>& cache, const FusionParams<T>& params,
                                 const DetectorConfig& config, const Tensor2<T>& d_keys_values,
                                 FusionParams<T>& grad);

// ---- stage 4: cross-modal fusion --------------------------------------------

template <typename T>
struct CrossResult {
  Tensor2<T> z;        // 3 x d
  Tensor2<T> weights;  // 3 x rows(keys_values), averaged over heads
};

/// Z = H_main + CrossAttn(queries = H_main, keys/values = gated trajectory).
template <typename T>
CrossResult<T> cross_modal_fuse(const Tensor2<T>& h_main, const Tensor2<T>& keys_values,
                                const FusionParams<T>& params, const DetectorConfig& config,
                                nn::AttentionCache<T>* cache);

template <typename T>
void cross_modal_fuse_backward(const nn::AttentionCache<T>& cache, const FusionParams<T>& params,
                               const DetectorConfig& config, const Tensor2<T>& d_z,
                               FusionParams<T>& grad, Tensor2<T>& d_h_main,
                               Tensor2<T>& d_keys_values);

// ---- stage 5: classifier ------------------------------------------------------

template <typename T>
struct ClassifyCache {
  Tensor2<T> pooled;
  nn::LayerNormCache<T> norm;
  Tensor2<T> normed;
  Tensor2<T> hidden;
};

/// Mean-pool Z rows, layer-normalize, then d -> d/2 (tanh) -> 2 logits.
template <typename T>
std::array<T, 2> classify(const Tensor2<T>& z, const FusionParams<T>& params, ClassifyCache<T>* cache);

template <typename T>
Tensor2<T> classify_backward(const ClassifyCache<T>& cache, const FusionParams<T>& params,
                             std::size_t z_rows, std::array<T, 2> d_logits, FusionParams<T>& grad);

// ---- loss ---------------------------------------------------------------------

template <typename T>
struct FocalLoss {
  T loss;
  std::array<T, 2> d_logits;
};

/// -alpha_t (1 - p_t)^gamma log p_t over a 2-way softmax, evaluated through
/// log-softmax. alpha_t = alpha for label 1 and 1 - alpha for label 0.
template <typename T>
FocalLoss<T> focal_loss(std::array<T, 2> logits, int label, double alpha, double gamma);

template <typename T>
std::array<T, 2> softmax2(std::array<T, 2> logits);

// ---- full model ---------------------------------------------------------------

template <typename T>
struct DetectionOutputT {
  std::array<T, 2> logits{};
  T p_halluc{};
  T gate{};
  Tensor2<T> cross_attention;  // 3 x (m+1), or 3 x 1 in cls_only mode
  Tensor2<T> h_cot;            // 1 x d
  Tensor2<T> pooled_z;         // 1 x d, mean of Z rows
};
using DetectionOutput = DetectionOutputT<float>;

template <typename T>
struct ForwardTrace {
  EncodeCache<T> encode;
  FuseCache<T> fuse;
  GateCache<T> gate;
  nn::AttentionCache<T> cross;
  ClassifyCache<T> classify;
  bool ablated = false;
};

/// Throws DimensionMismatch / TooManyUnits / EmptyInput on bad inputs.
void check_input(const DetectorInput& input, const DetectorConfig& config);

template <typename T>
DetectionOutputT<T> forward(const DetectorInput& input, const FusionParams<T>& params,
                            const DetectorConfig& config, const ForwardOptions& options = {},
                            ForwardTrace<T>* trace = nullptr);

/// Accumulates parameter gradients for d(loss)/d(logits).
template <typename T>
void backward(const ForwardTrace<T>& trace, const FusionParams<T>& params,
              const DetectorConfig& config, std::array<T, 2> d_logits, FusionParams<T>& grad);

/// Focal loss of one labeled input; gradients scaled by `weight` are
/// accumulated into `grad`.
template <typename T>
T loss_and_gradient(const DetectorInput& input, int label, const FusionParams<T>& params,
                    const DetectorConfig& config, FusionParams<T>& grad, T weight = T{1},
                    const ForwardOptions& options = {});

template <typename T>
T loss_only(const DetectorInput& input, int label, const FusionParams<T>& params,
            const DetectorConfig& config, const ForwardOptions& options = {});

/// Scores inputs independently, optionally across `workers` threads; the
/// result order always matches `inputs`.
std::vector<DetectionOutput> forward_batch(std::span<const DetectorInput> inputs,
                                           const FusionParams<float>& params,
                                           const DetectorConfig& config, int workers = 1,
                                           const ForwardOptions& options = {});

}  // namespace tripath
