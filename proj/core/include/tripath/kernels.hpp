#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tripath/params.hpp"
#include "tripath/tensor.hpp"

// Forward/backward kernels for the detector. Every backward accumulates
// (+=) into parameter gradients and returns the input gradient. Loops run in
// a fixed order, so results are bit-stable for a given input.
namespace tripath::nn {

// ---- dense algebra --------------------------------------------------------

template <typename T>
Tensor2<T> matmul(const Tensor2<T>& a, const Tensor2<T>& b);  // a b
template <typename T>
Tensor2<T> matmul_nt(const Tensor2<T>& a, const Tensor2<T>& b);  // a b^T
template <typename T>
Tensor2<T> matmul_tn(const Tensor2<T>& a, const Tensor2<T>& b);  // a^T b

template <typename T>
void add_inplace(Tensor2<T>& dst, const Tensor2<T>& src);

template <typename T>
Tensor2<T> mean_rows(const Tensor2<T>& x);  // 1 x cols

// ---- linear ---------------------------------------------------------------

template <typename T>
Tensor2<T> linear(const Tensor2<T>& x, const LinearParams<T>& p);

template <typename T>
Tensor2<T> linear_backward(const Tensor2<T>& x, const LinearParams<T>& p, const Tensor2<T>& dy,
                           LinearParams<T>& grad);

// ---- layer normalization --------------------------------------------------

template <typename T>
struct LayerNormCache {
  Tensor2<T> normalized;  // pre-affine
  std::vector<T> inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise normalization with population variance, then gain/bias.
template <typename T>
Tensor2<T> layer_norm(const Tensor2<T>& x, const LayerNormParams<T>& p, LayerNormCache<T>* cache,
                      double eps = kLayerNormEps);

template <typename T>
Tensor2<T> layer_norm_backward(const LayerNormCache<T>& cache, const LayerNormParams<T>& p,
                               const Tensor2<T>& dy, LayerNormParams<T>& grad);

// ---- pointwise ------------------------------------------------------------

/// Max-shifted row softmax.
template <typename T>
Tensor2<T> softmax_rows(const Tensor2<T>& x);
template <typename T>
Tensor2<T> softmax_rows_backward(const Tensor2<T>& y, const Tensor2<T>& dy);

/// tanh-approximation GELU.
template <typename T>
Tensor2<T> gelu(const Tensor2<T>& x);
template <typename T>
Tensor2<T> gelu_backward(const Tensor2<T>& x, const Tensor2<T>& dy);

template <typename T>
Tensor2<T> tanh(const Tensor2<T>& x);
/// Backward of tanh given its output y.
template <typename T>
Tensor2<T> tanh_backward(const Tensor2<T>& y, const Tensor2<T>& dy);

// ---- attention ------------------------------------------------------------

template <typename T>
struct AttentionCache {
  Tensor2<T> q_in;
  Tensor2<T> kv_in;
  Tensor2<T> q;
  Tensor2<T> k;
  Tensor2<T> v;
  std::vector<Tensor2<T>> weights;  // per head, rows(q_in) x rows(kv_in)
  Tensor2<T> heads;                 // concatenated head outputs
};

/// Scaled dot-product attention per head (scale 1/sqrt(d/num_heads)),
/// concatenated and output-projected. Self-attention passes q_in == kv_in.
template <typename T>
Tensor2<T> multi_head_attention(const Tensor2<T>& q_in, const Tensor2<T>& kv_in,
                                const AttentionParams<T>& p, int num_heads,
                                AttentionCache<T>* cache);

template <typename T>
void multi_head_attention_backward(const AttentionCache<T>& cache, const AttentionParams<T>& p,
                                   int num_heads, const Tensor2<T>& dy, AttentionParams<T>& grad,
                                   Tensor2<T>& d_q_in, Tensor2<T>& d_kv_in);

/// Per-head weights averaged over heads.
template <typename T>
Tensor2<T> average_heads(const std::vector<Tensor2<T>>& weights);

// ---- encoder block --------------------------------------------------------

template <typename T>
struct EncoderBlockCache {
  LayerNormCache<T> norm1;
  Tensor2<T> normed1;
  AttentionCache<T> attention;
  Tensor2<T> mid;  // x + attention
  LayerNormCache<T> norm2;
  Tensor2<T> normed2;
  Tensor2<T> ffn_pre;
  Tensor2<T> ffn_act;
};

template <typename T>
Tensor2<T> encoder_block(const Tensor2<T>& x, const EncoderBlockParams<T>& p, int num_heads,
                         EncoderBlockCache<T>* cache);

template <typename T>
Tensor2<T> encoder_block_backward(const EncoderBlockCache<T>& cache, const EncoderBlockParams<T>& p,
                                  int num_heads, const Tensor2<T>& dy, EncoderBlockParams<T>& grad);

// ---- verification ---------------------------------------------------------

/// Relative error with the max(|a|, |b|, 1e-8) denominator.
double relative_error(double analytic, double numeric) noexcept;

/// Central-difference gradient check at 64-bit precision. Returns the
/// largest relative error over all coordinates of `point`.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic, double h = 1e-4);

}  // namespace tripath::nn
