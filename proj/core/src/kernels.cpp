#include "tripath/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tripath/error.hpp"

namespace tripath::nn {

namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

}  // namespace

template <typename T>
Tensor2<T> matmul(const Tensor2<T>& a, const Tensor2<T>& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tensor2<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor2<T> matmul_nt(const Tensor2<T>& a, const Tensor2<T>& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Tensor2<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      T acc{0};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename T>
Tensor2<T> matmul_tn(const Tensor2<T>& a, const Tensor2<T>& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  Tensor2<T> out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = arow[i];
      auto o = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aki * brow[j];
    }
  }
  return out;
}

template <typename T>
void add_inplace(Tensor2<T>& dst, const Tensor2<T>& src) {
  require_shape(dst.same_shape(src), "add: shapes differ");
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
Tensor2<T> mean_rows(const Tensor2<T>& x) {
  Tensor2<T> out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
  }
  const T inv = T{1} / static_cast<T>(x.rows());
  for (auto& v : out.values()) v *= inv;
  return out;
}

// ---- linear ---------------------------------------------------------------

template <typename T>
Tensor2<T> linear(const Tensor2<T>& x, const LinearParams<T>& p) {
  require_shape(x.cols() == p.weight.rows(), "linear: input width differs from weight rows");
  auto y = matmul(x, p.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += p.bias(0, c);
  }
  return y;
}

template <typename T>
Tensor2<T> linear_backward(const Tensor2<T>& x, const LinearParams<T>& p, const Tensor2<T>& dy,
                           LinearParams<T>& grad) {
  add_inplace(grad.weight, matmul_tn(x, dy));
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t c = 0; c < dy.cols(); ++c) grad.bias(0, c) += dy(r, c);
  }
  return matmul_nt(dy, p.weight);
}

// ---- layer normalization --------------------------------------------------

template <typename T>
Tensor2<T> layer_norm(const Tensor2<T>& x, const LayerNormParams<T>& p, LayerNormCache<T>* cache,
                      double eps) {
  require_shape(p.gain.cols() == x.cols() && p.bias.cols() == x.cols(),
                "layer_norm: gain/bias width differs from input");
  if (!x.all_finite()) throw Error(ErrorCode::NonFiniteInput, "layer_norm input is not finite");
  const std::size_t n = x.cols();
  Tensor2<T> normalized(x.rows(), n);
  std::vector<T> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    T mean{0};
    for (T v : row) mean += v;
    mean /= static_cast<T>(n);
    T var{0};
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    inv_std[r] = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t c = 0; c < n; ++c) normalized(r, c) = (row[c] - mean) * inv_std[r];
  }
  Tensor2<T> y(x.rows(), n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y(r, c) = normalized(r, c) * p.gain(0, c) + p.bias(0, c);
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor2<T> layer_norm_backward(const LayerNormCache<T>& cache, const LayerNormParams<T>& p,
                               const Tensor2<T>& dy, LayerNormParams<T>& grad) {
  const auto& xhat = cache.normalized;
  const std::size_t n = xhat.cols();
  Tensor2<T> dx(xhat.rows(), n);
  std::vector<T> dxhat(n);
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    T mean_d{0};
    T mean_dx{0};
    for (std::size_t c = 0; c < n; ++c) {
      grad.gain(0, c) += dy(r, c) * xhat(r, c);
      grad.bias(0, c) += dy(r, c);
      dxhat[c] = dy(r, c) * p.gain(0, c);
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xhat(r, c);
    }
    mean_d /= static_cast<T>(n);
    mean_dx /= static_cast<T>(n);
    for (std::size_t c = 0; c < n; ++c) {
      dx(r, c) = cache.inv_std[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
    }
  }
  return dx;
}

// ---- pointwise ------------------------------------------------------------

template <typename T>
Tensor2<T> softmax_rows(const Tensor2<T>& x) {
  Tensor2<T> y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum{0};
    for (std::size_t c = 0; c < x.cols(); ++c) {
      y(r, c) = std::exp(row[c] - mx);
      sum += y(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) /= sum;
  }
  return y;
}

template <typename T>
Tensor2<T> softmax_rows_backward(const Tensor2<T>& y, const Tensor2<T>& dy) {
  Tensor2<T> dx(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    T dot{0};
    for (std::size_t c = 0; c < y.cols(); ++c) dot += dy(r, c) * y(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) = y(r, c) * (dy(r, c) - dot);
  }
  return dx;
}

namespace {

template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluK = static_cast<T>(0.044715);

}  // namespace

template <typename T>
Tensor2<T> gelu(const Tensor2<T>& x) {
  Tensor2<T> y(x.rows(), x.cols());
  auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in[i];
    out[i] = T{0.5} * v * (T{1} + std::tanh(kGeluC<T> * (v + kGeluK<T> * v * v * v)));
  }
  return y;
}

template <typename T>
Tensor2<T> gelu_backward(const Tensor2<T>& x, const Tensor2<T>& dy) {
  Tensor2<T> dx(x.rows(), x.cols());
  auto in = x.values();
  auto g = dy.values();
  auto out = dx.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T v = in[i];
    const T t = std::tanh(kGeluC<T> * (v + kGeluK<T> * v * v * v));
    const T du = kGeluC<T> * (T{1} + T{3} * kGeluK<T> * v * v);
    out[i] = g[i] * (T{0.5} * (T{1} + t) + T{0.5} * v * (T{1} - t * t) * du);
  }
  return dx;
}

template <typename T>
Tensor2<T> tanh(const Tensor2<T>& x) {
  Tensor2<T> y(x.rows(), x.cols());
  auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  return y;
}

template <typename T>
Tensor2<T> tanh_backward(const Tensor2<T>& y, const Tensor2<T>& dy) {
  Tensor2<T> dx(y.rows(), y.cols());
  auto yv = y.values();
  auto g = dy.values();
  auto out = dx.values();
  for (std::size_t i = 0; i < yv.size(); ++i) out[i] = g[i] * (T{1} - yv[i] * yv[i]);
  return dx;
}

// ---- attention ------------------------------------------------------------

template <typename T>
Tensor2<T> multi_head_attention(const Tensor2<T>& q_in, const Tensor2<T>& kv_in,
                                const AttentionParams<T>& p, int num_heads,
                                AttentionCache<T>* cache) {
  const std::size_t d = p.query.weight.cols();
  require_shape(num_heads > 0 && d % static_cast<std::size_t>(num_heads) == 0,
                "attention: model width not divisible by num_heads");
  require_shape(kv_in.rows() > 0, "attention: empty key/value input");
  require_shape(q_in.cols() == p.query.weight.rows() && kv_in.cols() == p.key.weight.rows(),
                "attention: input width differs from projection");
  const std::size_t heads = static_cast<std::size_t>(num_heads);
  const std::size_t dh = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));

  auto q = linear(q_in, p.query);
  auto k = linear(kv_in, p.key);
  auto v = linear(kv_in, p.value);
  Tensor2<T> concat(q.rows(), d);
  std::vector<Tensor2<T>> weights;
  weights.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Tensor2<T> scores(q.rows(), k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < k.rows(); ++j) {
        T acc{0};
        for (std::size_t c = 0; c < dh; ++c) acc += q(i, off + c) * k(j, off + c);
        scores(i, j) = acc * scale;
      }
    }
    auto attn = softmax_rows(scores);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < k.rows(); ++j) {
        const T a = attn(i, j);
        for (std::size_t c = 0; c < dh; ++c) concat(i, off + c) += a * v(j, off + c);
      }
    }
    weights.push_back(std::move(attn));
  }
  auto out = linear(concat, p.output);
  if (cache) {
    cache->q_in = q_in;
    cache->kv_in = kv_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->weights = std::move(weights);
    cache->heads = std::move(concat);
  }
  return out;
}

template <typename T>
void multi_head_attention_backward(const AttentionCache<T>& cache, const AttentionParams<T>& p,
                                   int num_heads, const Tensor2<T>& dy, AttentionParams<T>& grad,
                                   Tensor2<T>& d_q_in, Tensor2<T>& d_kv_in) {
  const std::size_t d = p.query.weight.cols();
  const std::size_t heads = static_cast<std::size_t>(num_heads);
  const std::size_t dh = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  const auto& q = cache.q;
  const auto& k = cache.k;
  const auto& v = cache.v;

  auto d_concat = linear_backward(cache.heads, p.output, dy, grad.output);
  Tensor2<T> dq(q.rows(), d);
  Tensor2<T> dk(k.rows(), d);
  Tensor2<T> dv(v.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const auto& attn = cache.weights[h];
    Tensor2<T> d_attn(q.rows(), k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < k.rows(); ++j) {
        T acc{0};
        for (std::size_t c = 0; c < dh; ++c) {
          acc += d_concat(i, off + c) * v(j, off + c);
          dv(j, off + c) += attn(i, j) * d_concat(i, off + c);
        }
        d_attn(i, j) = acc;
      }
    }
    auto d_scores = softmax_rows_backward(attn, d_attn);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < k.rows(); ++j) {
        const T s = d_scores(i, j) * scale;
        for (std::size_t c = 0; c < dh; ++c) {
          dq(i, off + c) += s * k(j, off + c);
          dk(j, off + c) += s * q(i, off + c);
        }
      }
    }
  }
  d_q_in = linear_backward(cache.q_in, p.query, dq, grad.query);
  d_kv_in = linear_backward(cache.kv_in, p.key, dk, grad.key);
  add_inplace(d_kv_in, linear_backward(cache.kv_in, p.value, dv, grad.value));
}

template <typename T>
Tensor2<T> average_heads(const std::vector<Tensor2<T>>& weights) {
  if (weights.empty()) return {};
  Tensor2<T> out(weights.front().rows(), weights.front().cols());
  for (const auto& w : weights) add_inplace(out, w);
  const T inv = T{1} / static_cast<T>(weights.size());
  for (auto& v : out.values()) v *= inv;
  return out;
}

// ---- encoder block --------------------------------------------------------

template <typename T>
Tensor2<T> encoder_block(const Tensor2<T>& x, const EncoderBlockParams<T>& p, int num_heads,
                         EncoderBlockCache<T>* cache) {
  EncoderBlockCache<T> local;
  EncoderBlockCache<T>& c = cache ? *cache : local;
  c.normed1 = layer_norm(x, p.norm1, &c.norm1);
  auto y = x;
  add_inplace(y, multi_head_attention(c.normed1, c.normed1, p.attention, num_heads, &c.attention));
  c.mid = y;
  c.normed2 = layer_norm(c.mid, p.norm2, &c.norm2);
  c.ffn_pre = linear(c.normed2, p.ffn_in);
  c.ffn_act = gelu(c.ffn_pre);
  add_inplace(y, linear(c.ffn_act, p.ffn_out));
  return y;
}

template <typename T>
Tensor2<T> encoder_block_backward(const EncoderBlockCache<T>& c, const EncoderBlockParams<T>& p,
                                  int num_heads, const Tensor2<T>& dy, EncoderBlockParams<T>& grad) {
  // y = mid + FFN(LN2(mid)), mid = x + MHA(LN1(x))
  auto d_act = linear_backward(c.ffn_act, p.ffn_out, dy, grad.ffn_out);
  auto d_pre = gelu_backward(c.ffn_pre, d_act);
  auto d_normed2 = linear_backward(c.normed2, p.ffn_in, d_pre, grad.ffn_in);
  auto d_mid = dy;
  add_inplace(d_mid, layer_norm_backward(c.norm2, p.norm2, d_normed2, grad.norm2));

  Tensor2<T> d_q;
  Tensor2<T> d_kv;
  multi_head_attention_backward(c.attention, p.attention, num_heads, d_mid, grad.attention, d_q, d_kv);
  add_inplace(d_q, d_kv);
  auto dx = d_mid;
  add_inplace(dx, layer_norm_backward(c.norm1, p.norm1, d_q, grad.norm1));
  return dx;
}

// ---- verification ---------------------------------------------------------

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic, double h) {
  if (analytic.size() != point.size()) {
    throw Error(ErrorCode::LengthMismatch, "grad_check: analytic gradient length differs");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (fp - fm) / (2.0 * h)));
  }
  return worst;
}

#define TRIPATH_INSTANTIATE(T)                                                                     \
  template Tensor2<T> matmul<T>(const Tensor2<T>&, const Tensor2<T>&);                             \
  template Tensor2<T> matmul_nt<T>(const Tensor2<T>&, const Tensor2<T>&);                          \
  template Tensor2<T> matmul_tn<T>(const Tensor2<T>&, const Tensor2<T>&);                          \
  template void add_inplace<T>(Tensor2<T>&, const Tensor2<T>&);                                    \
  template Tensor2<T> mean_rows<T>(const Tensor2<T>&);                                             \
  template Tensor2<T> linear<T>(const Tensor2<T>&, const LinearParams<T>&);                        \
  template Tensor2<T> linear_backward<T>(const Tensor2<T>&, const LinearParams<T>&,                \
                                         const Tensor2<T>&, LinearParams<T>&);                     \
  template Tensor2<T> layer_norm<T>(const Tensor2<T>&, const LayerNormParams<T>&,                  \
                                    LayerNormCache<T>*, double);                                   \
  template Tensor2<T> layer_norm_backward<T>(const LayerNormCache<T>&, const LayerNormParams<T>&,  \
                                             const Tensor2<T>&, LayerNormParams<T>&);              \
  template Tensor2<T> softmax_rows<T>(const Tensor2<T>&);                                          \
  template Tensor2<T> softmax_rows_backward<T>(const Tensor2<T>&, const Tensor2<T>&);              \
  template Tensor2<T> gelu<T>(const Tensor2<T>&);                                                  \
  template Tensor2<T> gelu_backward<T>(const Tensor2<T>&, const Tensor2<T>&);                      \
  template Tensor2<T> tanh<T>(const Tensor2<T>&);                                                  \
  template Tensor2<T> tanh_backward<T>(const Tensor2<T>&, const Tensor2<T>&);                      \
  template Tensor2<T> multi_head_attention<T>(const Tensor2<T>&, const Tensor2<T>&,                \
                                              const AttentionParams<T>&, int, AttentionCache<T>*); \
  template void multi_head_attention_backward<T>(const AttentionCache<T>&,                         \
                                                 const AttentionParams<T>&, int,                   \
                                                 const Tensor2<T>&, AttentionParams<T>&,           \
                                                 Tensor2<T>&, Tensor2<T>&);                        \
  template Tensor2<T> average_heads<T>(const std::vector<Tensor2<T>>&);                            \
  template Tensor2<T> encoder_block<T>(const Tensor2<T>&, const EncoderBlockParams<T>&, int,       \
                                       EncoderBlockCache<T>*);                                     \
  template Tensor2<T> encoder_block_backward<T>(const EncoderBlockCache<T>&,                       \
                                                const EncoderBlockParams<T>&, int,                 \
                                                const Tensor2<T>&, EncoderBlockParams<T>&);

TRIPATH_INSTANTIATE(float)
TRIPATH_INSTANTIATE(double)
#undef TRIPATH_INSTANTIATE

}  // namespace tripath::nn
