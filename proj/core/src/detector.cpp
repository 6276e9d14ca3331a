#include "tripath/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "tripath/error.hpp"

namespace tripath {

namespace {

template <typename T>
Tensor2<T> slice_rows(const Tensor2<T>& x, std::size_t begin, std::size_t end) {
  Tensor2<T> out(end - begin, x.cols());
  for (std::size_t r = begin; r < end; ++r) {
    std::copy(x.row(r).begin(), x.row(r).end(), out.row(r - begin).begin());
  }
  return out;
}

template <typename T>
Tensor2<T> stack_rows(const Tensor2<T>& top, const Tensor2<T>& bottom) {
  Tensor2<T> out(top.rows() + bottom.rows(), top.cols());
  for (std::size_t r = 0; r < top.rows(); ++r) {
    std::copy(top.row(r).begin(), top.row(r).end(), out.row(r).begin());
  }
  for (std::size_t r = 0; r < bottom.rows(); ++r) {
    std::copy(bottom.row(r).begin(), bottom.row(r).end(), out.row(top.rows() + r).begin());
  }
  return out;
}

template <typename T>
void scale_inplace(Tensor2<T>& x, T s) {
  for (auto& v : x.values()) v *= s;
}

/// d(mean_rows)/dx: every row receives d_pooled / rows.
template <typename T>
void spread_mean_grad(const Tensor2<T>& d_pooled, std::size_t rows, Tensor2<T>& dst) {
  const T inv = T{1} / static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < dst.cols(); ++c) dst(r, c) += d_pooled(0, c) * inv;
  }
}

template <typename T>
Tensor2<T> x_main_of(const InternalStateSet& s) {
  const std::size_t d = s.dim();
  Tensor2<T> x(3, d);
  for (std::size_t c = 0; c < d; ++c) {
    x(0, c) = static_cast<T>(s.e_q[c]);
    x(1, c) = static_cast<T>(s.e_a_dir[c]);
    x(2, c) = static_cast<T>(s.e_q_rev[c]);
  }
  return x;
}

template <typename T>
T sigmoid(T s) {
  T g = s >= T{0} ? T{1} / (T{1} + std::exp(-s)) : std::exp(s) / (T{1} + std::exp(s));
  // Keep g strictly inside (0, 1) even where the float result would round.
  const T eps = std::numeric_limits<T>::epsilon();
  return std::clamp(g, eps, T{1} - eps);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

}  // namespace

// ---- stage 1 --------------------------------------------------------------------

template <typename T>
TrajectoryEncoding<T> encode_trajectory(const Tensor2<T>& units, const FusionParams<T>& params,
                                        const DetectorConfig& config, EncodeCache<T>* cache) {
  const std::size_t d = params.cls_token.cols();
  const std::size_t m = units.rows();
  if (m == 0) throw Error(ErrorCode::EmptyInput, "trajectory has no units");
  if (m > static_cast<std::size_t>(config.max_units)) {
    throw Error(ErrorCode::TooManyUnits,
                std::to_string(m) + " units exceed max_units " + std::to_string(config.max_units));
  }
  require(units.cols() == d, "unit embeddings have width " + std::to_string(units.cols()) +
                                 ", expected " + std::to_string(d));

  Tensor2<T> x(m + 1, d);
  std::copy(params.cls_token.row(0).begin(), params.cls_token.row(0).end(), x.row(0).begin());
  for (std::size_t r = 0; r < m; ++r) {
    std::copy(units.row(r).begin(), units.row(r).end(), x.row(r + 1).begin());
  }
  if (config.positional_encoding) {
    for (std::size_t r = 0; r <= m; ++r) {
      for (std::size_t c = 0; c < d; ++c) x(r, c) += params.positional_table(r, c);
    }
  }
  EncodeCache<T> local;
  EncodeCache<T>& c = cache ? *cache : local;
  c.units = m;
  c.blocks.assign(params.encoder.size(), {});
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    x = nn::encoder_block(x, params.encoder[l], config.num_heads, &c.blocks[l]);
  }
  return {slice_rows(x, 0, 1), slice_rows(x, 1, m + 1)};
}

template <typename T>
void encode_trajectory_backward(const EncodeCache<T>& cache, const FusionParams<T>& params,
                                const DetectorConfig& config, const Tensor2<T>& d_h_cot,
                                const Tensor2<T>& d_unit_states, FusionParams<T>& grad) {
  auto dx = stack_rows(d_h_cot, d_unit_states);
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    dx = nn::encoder_block_backward(cache.blocks[l], params.encoder[l], config.num_heads, dx,
                                    grad.encoder[l]);
  }
  for (std::size_t c = 0; c < dx.cols(); ++c) grad.cls_token(0, c) += dx(0, c);
  if (config.positional_encoding) {
    for (std::size_t r = 0; r <= cache.units; ++r) {
      for (std::size_t c = 0; c < dx.cols(); ++c) grad.positional_table(r, c) += dx(r, c);
    }
  }
}

// ---- stage 2 --------------------------------------------------------------------

template <typename T>
Tensor2<T> fuse_main(const Tensor2<T>& x_main, const FusionParams<T>& params,
                     const DetectorConfig& config, FuseCache<T>* cache) {
  require(x_main.rows() == 3 && x_main.cols() == params.segment_table.cols(),
          "internal-state stack must be 3 x " + std::to_string(params.segment_table.cols()));
  FuseCache<T> local;
  FuseCache<T>& c = cache ? *cache : local;
  auto with_segments = x_main;
  nn::add_inplace(with_segments, params.segment_table);
  c.normed = nn::layer_norm(with_segments, params.main_norm, &c.norm);
  auto h = x_main;
  nn::add_inplace(h, nn::multi_head_attention(c.normed, c.normed, params.main_attention,
                                              config.num_heads, &c.attention));
  return h;
}

template <typename T>
Tensor2<T> fuse_main_backward(const FuseCache<T>& cache, const FusionParams<T>& params,
                              const DetectorConfig& config, const Tensor2<T>& d_h_main,
                              FusionParams<T>& grad) {
  Tensor2<T> d_q;
  Tensor2<T> d_kv;
  nn::multi_head_attention_backward(cache.attention, params.main_attention, config.num_heads,
                                    d_h_main, grad.main_attention, d_q, d_kv);
  nn::add_inplace(d_q, d_kv);
  auto d_with_segments = nn::layer_norm_backward(cache.norm, params.main_norm, d_q, grad.main_norm);
  nn::add_inplace(grad.segment_table, d_with_segments);
  auto dx = d_h_main;
  nn::add_inplace(dx, d_with_segments);
  return dx;
}

// ---- stage 3 --------------------------------------------------------------------

template <typename T>
GateResult<T> apply_gate(const Tensor2<T>& h_main, const TrajectoryEncoding<T>& trajectory,
                         const FusionParams<T>& params, const DetectorConfig& config,
                         std::optional<double> gate_override, GateCache<T>* cache) {
  GateCache<T> local;
  GateCache<T>& c = cache ? *cache : local;
  c.pooled = nn::mean_rows(h_main);
  c.hidden = nn::tanh(nn::linear(c.pooled, params.gate_hidden));
  const T score = nn::linear(c.hidden, params.gate_out)(0, 0);
  c.overridden = gate_override.has_value();
  c.gate = c.overridden ? static_cast<T>(*gate_override) : sigmoid(score);
  c.ungated = config.cross_attention_mode == CrossAttentionMode::full_trajectory
                  ? stack_rows(trajectory.h_cot, trajectory.unit_states)
                  : trajectory.h_cot;
  auto kv = c.ungated;
  scale_inplace(kv, c.gate);
  return {c.gate, std::move(kv)};
}

template <typename T>
GateGrads<T> apply_gate_backward(const GateCache<T>& c, const FusionParams<T>& params,
                                 const DetectorConfig& config, const Tensor2<T>& d_kv,
                                 FusionParams<T>& grad) {
  const std::size_t d = c.ungated.cols();
  GateGrads<T> out;
  out.d_h_main = Tensor2<T>(3, d);
  auto d_ungated = d_kv;
  scale_inplace(d_ungated, c.gate);
  out.d_h_cot = slice_rows(d_ungated, 0, 1);
  out.d_unit_states = config.cross_attention_mode == CrossAttentionMode::full_trajectory
                          ? slice_rows(d_ungated, 1, d_ungated.rows())
                          : Tensor2<T>(0, d);
  if (c.overridden) return out;

  T d_gate{0};
  auto kv = d_kv.values();
  auto u = c.ungated.values();
  for (std::size_t i = 0; i < kv.size(); ++i) d_gate += kv[i] * u[i];
  Tensor2<T> d_score(1, 1, d_gate * c.gate * (T{1} - c.gate));
  auto d_hidden = nn::linear_backward(c.hidden, params.gate_out, d_score, grad.gate_out);
  auto d_pre = nn::tanh_backward(c.hidden, d_hidden);
  auto d_pooled = nn::linear_backward(c.pooled, params.gate_hidden, d_pre, grad.gate_hidden);
  spread_mean_grad(d_pooled, 3, out.d_h_main);
  return out;
}

// ---- stage 4 --------------------------------------------------------------------

template <typename T>
CrossResult<T> cross_modal_fuse(const Tensor2<T>& h_main, const Tensor2<T>& keys_values,
                                const FusionParams<T>& params, const DetectorConfig& config,
                                nn::AttentionCache<T>* cache) {
  require(keys_values.cols() == h_main.cols(), "cross-attention key/value width differs from H_main");
  nn::AttentionCache<T> local;
  nn::AttentionCache<T>& c = cache ? *cache : local;
  auto z = h_main;
  nn::add_inplace(z, nn::multi_head_attention(h_main, keys_values, params.cross_attention,
                                              config.num_heads, &c));
  return {std::move(z), nn::average_heads(c.weights)};
}

template <typename T>
void cross_modal_fuse_backward(const nn::AttentionCache<T>& cache, const FusionParams<T>& params,
                               const DetectorConfig& config, const Tensor2<T>& d_z,
                               FusionParams<T>& grad, Tensor2<T>& d_h_main,
                               Tensor2<T>& d_keys_values) {
  Tensor2<T> d_q;
  nn::multi_head_attention_backward(cache, params.cross_attention, config.num_heads, d_z,
                                    grad.cross_attention, d_q, d_keys_values);
  d_h_main = d_z;
  nn::add_inplace(d_h_main, d_q);
}

// ---- stage 5 --------------------------------------------------------------------

template <typename T>
std::array<T, 2> classify(const Tensor2<T>& z, const FusionParams<T>& params, ClassifyCache<T>* cache) {
  ClassifyCache<T> local;
  ClassifyCache<T>& c = cache ? *cache : local;
  c.pooled = nn::mean_rows(z);
  c.normed = nn::layer_norm(c.pooled, params.classifier_norm, &c.norm);
  c.hidden = nn::tanh(nn::linear(c.normed, params.classifier_hidden));
  const auto logits = nn::linear(c.hidden, params.classifier_out);
  return {logits(0, 0), logits(0, 1)};
}

template <typename T>
Tensor2<T> classify_backward(const ClassifyCache<T>& c, const FusionParams<T>& params,
                             std::size_t z_rows, std::array<T, 2> d_logits, FusionParams<T>& grad) {
  Tensor2<T> dl(1, 2);
  dl(0, 0) = d_logits[0];
  dl(0, 1) = d_logits[1];
  auto d_hidden = nn::linear_backward(c.hidden, params.classifier_out, dl, grad.classifier_out);
  auto d_pre = nn::tanh_backward(c.hidden, d_hidden);
  auto d_normed = nn::linear_backward(c.normed, params.classifier_hidden, d_pre, grad.classifier_hidden);
  auto d_pooled = nn::layer_norm_backward(c.norm, params.classifier_norm, d_normed, grad.classifier_norm);
  Tensor2<T> dz(z_rows, d_pooled.cols());
  spread_mean_grad(d_pooled, z_rows, dz);
  return dz;
}

// ---- loss -----------------------------------------------------------------------

template <typename T>
std::array<T, 2> softmax2(std::array<T, 2> logits) {
  const T mx = std::max(logits[0], logits[1]);
  const T e0 = std::exp(logits[0] - mx);
  const T e1 = std::exp(logits[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

template <typename T>
FocalLoss<T> focal_loss(std::array<T, 2> logits, int label, double alpha, double gamma) {
  if (label != 0 && label != 1) throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
  const auto t = static_cast<std::size_t>(label);
  const std::size_t o = 1 - t;
  const T mx = std::max(logits[0], logits[1]);
  const T lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
  const T log_pt = logits[t] - lse;
  const T pt = std::exp(log_pt);
  const T q = std::exp(logits[o] - lse);  // 1 - p_t without cancellation
  const T alpha_t = static_cast<T>(label == 1 ? alpha : 1.0 - alpha);
  const T g = static_cast<T>(gamma);
  const T w = gamma == 0.0 ? T{1} : std::pow(q, g);

  FocalLoss<T> out;
  out.loss = -alpha_t * w * log_pt;
  // dL/dz_t = -alpha_t (w q - gamma q^gamma p_t log p_t); dL/dz_o = -dL/dz_t.
  const T dz_t = -alpha_t * (w * q - g * w * pt * log_pt);
  out.d_logits[t] = dz_t;
  out.d_logits[o] = -dz_t;
  return out;
}

// ---- full model -------------------------------------------------------------------

void check_input(const DetectorInput& input, const DetectorConfig& config) {
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  validate(input.states, d, "input");
  validate(input.units, d, "input");
  if (input.units.size() > static_cast<std::size_t>(config.max_units)) {
    throw Error(ErrorCode::TooManyUnits, std::to_string(input.units.size()) +
                                             " units exceed max_units " +
                                             std::to_string(config.max_units));
  }
}

template <typename T>
DetectionOutputT<T> forward(const DetectorInput& input, const FusionParams<T>& params,
                            const DetectorConfig& config, const ForwardOptions& options,
                            ForwardTrace<T>* trace) {
  check_input(input, config);
  ForwardTrace<T> local;
  ForwardTrace<T>& tr = trace ? *trace : local;
  tr.ablated = options.ablate_cross_attention;

  const auto units = input.units.vectors.template cast<T>();
  const auto trajectory = encode_trajectory(units, params, config, &tr.encode);
  const auto h_main = fuse_main(x_main_of<T>(input.states), params, config, &tr.fuse);
  const auto gated = apply_gate(h_main, trajectory, params, config, options.gate_override, &tr.gate);

  DetectionOutputT<T> out;
  out.gate = gated.gate;
  out.h_cot = trajectory.h_cot;
  Tensor2<T> z;
  if (options.ablate_cross_attention) {
    z = h_main;
  } else {
    auto cross = cross_modal_fuse(h_main, gated.keys_values, params, config, &tr.cross);
    z = std::move(cross.z);
    out.cross_attention = std::move(cross.weights);
  }
  out.logits = classify(z, params, &tr.classify);
  out.p_halluc = softmax2(out.logits)[1];
  out.pooled_z = tr.classify.pooled;
  return out;
}

template <typename T>
void backward(const ForwardTrace<T>& tr, const FusionParams<T>& params, const DetectorConfig& config,
              std::array<T, 2> d_logits, FusionParams<T>& grad) {
  auto d_z = classify_backward(tr.classify, params, 3, d_logits, grad);
  if (tr.ablated) {
    fuse_main_backward(tr.fuse, params, config, d_z, grad);
    return;
  }
  Tensor2<T> d_h_main;
  Tensor2<T> d_kv;
  cross_modal_fuse_backward(tr.cross, params, config, d_z, grad, d_h_main, d_kv);
  auto gate_grads = apply_gate_backward(tr.gate, params, config, d_kv, grad);
  nn::add_inplace(d_h_main, gate_grads.d_h_main);
  fuse_main_backward(tr.fuse, params, config, d_h_main, grad);
  auto d_units = gate_grads.d_unit_states;
  if (d_units.rows() == 0) d_units = Tensor2<T>(tr.encode.units, d_h_main.cols());
  encode_trajectory_backward(tr.encode, params, config, gate_grads.d_h_cot, d_units, grad);
}

template <typename T>
T loss_and_gradient(const DetectorInput& input, int label, const FusionParams<T>& params,
                    const DetectorConfig& config, FusionParams<T>& grad, T weight,
                    const ForwardOptions& options) {
  ForwardTrace<T> trace;
  const auto out = forward(input, params, config, options, &trace);
  const auto fl = focal_loss(out.logits, label, config.focal_alpha, config.focal_gamma);
  backward(trace, params, config, {fl.d_logits[0] * weight, fl.d_logits[1] * weight}, grad);
  return fl.loss;
}

template <typename T>
T loss_only(const DetectorInput& input, int label, const FusionParams<T>& params,
            const DetectorConfig& config, const ForwardOptions& options) {
  const auto out = forward(input, params, config, options);
  return focal_loss(out.logits, label, config.focal_alpha, config.focal_gamma).loss;
}

std::vector<DetectionOutput> forward_batch(std::span<const DetectorInput> inputs,
                                           const FusionParams<float>& params,
                                           const DetectorConfig& config, int workers,
                                           const ForwardOptions& options) {
  std::vector<DetectionOutput> out(inputs.size());
  const auto n_workers = static_cast<std::size_t>(std::max(1, workers));
  if (n_workers == 1 || inputs.size() < 2) {
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = forward(inputs[i], params, config, options);
    return out;
  }
  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < inputs.size(); i += n_workers) {
          out[i] = forward(inputs[i], params, config, options);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

#define TRIPATH_INSTANTIATE(T)                                                                     \
  template TrajectoryEncoding<T> encode_trajectory<T>(const Tensor2<T>&, const FusionParams<T>&,   \
                                                      const DetectorConfig&, EncodeCache<T>*);     \
  template void encode_trajectory_backward<T>(const EncodeCache<T>&, const FusionParams<T>&,       \
                                              const DetectorConfig&, const Tensor2<T>&,            \
                                              const Tensor2<T>&, FusionParams<T>&);                \
  template Tensor2<T> fuse_main<T>(const Tensor2<T>&, const FusionParams<T>&,                      \
                                   const DetectorConfig&, FuseCache<T>*);                          \
  template Tensor2<T> fuse_main_backward<T>(const FuseCache<T>&, const FusionParams<T>&,           \
                                            const DetectorConfig&, const Tensor2<T>&,              \
                                            FusionParams<T>&);                                     \
  template GateResult<T> apply_gate<T>(const Tensor2<T>&, const TrajectoryEncoding<T>&,            \
                                       const FusionParams<T>&, const DetectorConfig&,              \
                                       std::optional<double>, GateCache<T>*);                      \
  template GateGrads<T> apply_gate_backward<T>(const GateCache<T>&, const FusionParams<T>&,        \
                                               const DetectorConfig&, const Tensor2<T>&,           \
                                               FusionParams<T>&);                                  \
  template CrossResult<T> cross_modal_fuse<T>(const Tensor2<T>&, const Tensor2<T>&,                \
                                              const FusionParams<T>&, const DetectorConfig&,       \
                                              nn::AttentionCache<T>*);                             \
  template void cross_modal_fuse_backward<T>(const nn::AttentionCache<T>&,                         \
                                             const FusionParams<T>&, const DetectorConfig&,        \
                                             const Tensor2<T>&, FusionParams<T>&, Tensor2<T>&,     \
                                             Tensor2<T>&);                                         \
  template std::array<T, 2> classify<T>(const Tensor2<T>&, const FusionParams<T>&,                 \
                                        ClassifyCache<T>*);                                        \
  template Tensor2<T> classify_backward<T>(const ClassifyCache<T>&, const FusionParams<T>&,        \
                                           std::size_t, std::array<T, 2>, FusionParams<T>&);       \
  template std::array<T, 2> softmax2<T>(std::array<T, 2>);                                         \
  template FocalLoss<T> focal_loss<T>(std::array<T, 2>, int, double, double);                      \
  template DetectionOutputT<T> forward<T>(const DetectorInput&, const FusionParams<T>&,            \
                                          const DetectorConfig&, const ForwardOptions&,            \
                                          ForwardTrace<T>*);                                       \
  template void backward<T>(const ForwardTrace<T>&, const FusionParams<T>&,                        \
                            const DetectorConfig&, std::array<T, 2>, FusionParams<T>&);            \
  template T loss_and_gradient<T>(const DetectorInput&, int, const FusionParams<T>&,               \
                                  const DetectorConfig&, FusionParams<T>&, T,                      \
                                  const ForwardOptions&);                                          \
  template T loss_only<T>(const DetectorInput&, int, const FusionParams<T>&,                       \
                          const DetectorConfig&, const ForwardOptions&);

TRIPATH_INSTANTIATE(float)
TRIPATH_INSTANTIATE(double)
#undef TRIPATH_INSTANTIATE

}  // namespace tripath
