#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tripath/config.hpp"
#include "tripath/tensor.hpp"

namespace tripath {

/// y = x W + b with W stored in x out layout.
template <typename T>
struct LinearParams {
  Tensor2<T> weight;
  Tensor2<T> bias;
};

template <typename T>
struct LayerNormParams {
  Tensor2<T> gain;
  Tensor2<T> bias;
};

template <typename T>
struct AttentionParams {
  LinearParams<T> query;
  LinearParams<T> key;
  LinearParams<T> value;
  LinearParams<T> output;
};

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FFN(LN(x)).
template <typename T>
struct EncoderBlockParams {
  LayerNormParams<T> norm1;
  AttentionParams<T> attention;
  LayerNormParams<T> norm2;
  LinearParams<T> ffn_in;
  LinearParams<T> ffn_out;
};

/// Every learnable tensor of the detector.
template <typename T>
struct FusionParams {
  Tensor2<T> cls_token;         // 1 x d
  Tensor2<T> positional_table;  // (max_units + 1) x d, CLS at row 0
  std::vector<EncoderBlockParams<T>> encoder;
  Tensor2<T> segment_table;  // 3 x d: query, answer, reverse
  LayerNormParams<T> main_norm;
  AttentionParams<T> main_attention;
  LinearParams<T> gate_hidden;  // d -> d
  LinearParams<T> gate_out;     // d -> 1
  AttentionParams<T> cross_attention;
  LayerNormParams<T> classifier_norm;
  LinearParams<T> classifier_hidden;  // d -> d/2
  LinearParams<T> classifier_out;     // d/2 -> 2
};

namespace detail {

template <typename L, typename F>
void visit_linear(L& p, const std::string& prefix, F& f) {
  f(prefix + ".weight", p.weight);
  f(prefix + ".bias", p.bias);
}

template <typename N, typename F>
void visit_norm(N& p, const std::string& prefix, F& f) {
  f(prefix + ".gain", p.gain);
  f(prefix + ".bias", p.bias);
}

template <typename A, typename F>
void visit_attention(A& p, const std::string& prefix, F& f) {
  visit_linear(p.query, prefix + ".query", f);
  visit_linear(p.key, prefix + ".key", f);
  visit_linear(p.value, prefix + ".value", f);
  visit_linear(p.output, prefix + ".output", f);
}

}  // namespace detail

/// Visits (name, tensor) pairs in the canonical order, which is also the
/// checkpoint manifest order. Works for const and mutable params.
template <typename P, typename F>
void visit_params(P& params, F&& f) {
  f(std::string("cls_token"), params.cls_token);
  f(std::string("positional_table"), params.positional_table);
  for (std::size_t i = 0; i < params.encoder.size(); ++i) {
    auto& block = params.encoder[i];
    const std::string prefix = "encoder." + std::to_string(i);
    detail::visit_norm(block.norm1, prefix + ".norm1", f);
    detail::visit_attention(block.attention, prefix + ".attention", f);
    detail::visit_norm(block.norm2, prefix + ".norm2", f);
    detail::visit_linear(block.ffn_in, prefix + ".ffn_in", f);
    detail::visit_linear(block.ffn_out, prefix + ".ffn_out", f);
  }
  f(std::string("segment_table"), params.segment_table);
  detail::visit_norm(params.main_norm, "main.norm", f);
  detail::visit_attention(params.main_attention, "main.attention", f);
  detail::visit_linear(params.gate_hidden, "gate.hidden", f);
  detail::visit_linear(params.gate_out, "gate.out", f);
  detail::visit_attention(params.cross_attention, "cross.attention", f);
  detail::visit_norm(params.classifier_norm, "classifier.norm", f);
  detail::visit_linear(params.classifier_hidden, "classifier.hidden", f);
  detail::visit_linear(params.classifier_out, "classifier.out", f);
}

/// Correctly shaped, zero-filled parameters (LayerNorm gains zero too).
template <typename T>
FusionParams<T> make_zero_params(const DetectorConfig& config);

/// Conventional transformer initialization: projection weights and tables
/// ~ N(0, 0.02), biases zero, LayerNorm gains one.
template <typename T>
FusionParams<T> init_params(const DetectorConfig& config, std::uint64_t seed);

template <typename U, typename T>
FusionParams<U> cast_params(const FusionParams<T>& params);

template <typename T>
std::size_t parameter_count(const FusionParams<T>& params);

/// Flattened view in canonical order, for optimizers and gradient checks.
template <typename T>
std::vector<T> flatten(const FusionParams<T>& params);
template <typename T>
void unflatten(std::span<const T> values, FusionParams<T>& params);

template <typename T>
bool all_finite(const FusionParams<T>& params);

}  // namespace tripath
