#include "tripath/params.hpp"

#include "tripath/error.hpp"
#include "tripath/rng.hpp"

namespace tripath {

namespace {

template <typename T>
LinearParams<T> linear_shape(std::size_t in, std::size_t out) {
  return {Tensor2<T>(in, out), Tensor2<T>(1, out)};
}

template <typename T>
LayerNormParams<T> norm_shape(std::size_t d) {
  return {Tensor2<T>(1, d), Tensor2<T>(1, d)};
}

template <typename T>
AttentionParams<T> attention_shape(std::size_t d) {
  return {linear_shape<T>(d, d), linear_shape<T>(d, d), linear_shape<T>(d, d),
          linear_shape<T>(d, d)};
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
FusionParams<T> make_zero_params(const DetectorConfig& config) {
  validate(config);
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto ffn = d * static_cast<std::size_t>(config.ffn_multiplier);
  FusionParams<T> p;
  p.cls_token = Tensor2<T>(1, d);
  p.positional_table = Tensor2<T>(static_cast<std::size_t>(config.max_units) + 1, d);
  for (int i = 0; i < config.encoder_layers; ++i) {
    p.encoder.push_back({norm_shape<T>(d), attention_shape<T>(d), norm_shape<T>(d),
                         linear_shape<T>(d, ffn), linear_shape<T>(ffn, d)});
  }
  p.segment_table = Tensor2<T>(3, d);
  p.main_norm = norm_shape<T>(d);
  p.main_attention = attention_shape<T>(d);
  p.gate_hidden = linear_shape<T>(d, d);
  p.gate_out = linear_shape<T>(d, 1);
  p.cross_attention = attention_shape<T>(d);
  p.classifier_norm = norm_shape<T>(d);
  p.classifier_hidden = linear_shape<T>(d, d / 2);
  p.classifier_out = linear_shape<T>(d / 2, 2);
  return p;
}

template <typename T>
FusionParams<T> init_params(const DetectorConfig& config, std::uint64_t seed) {
  auto p = make_zero_params<T>(config);
  Rng rng(mix64(seed ^ 0x5EED0F1A7A11ULL));
  visit_params(p, [&](const std::string& name, Tensor2<T>& t) {
    if (ends_with(name, ".bias")) {
      t.fill(T{0});
    } else if (ends_with(name, ".gain")) {
      t.fill(T{1});
    } else {
      for (auto& v : t.values()) v = static_cast<T>(0.02 * rng.normal());
    }
  });
  return p;
}

template <typename U, typename T>
FusionParams<U> cast_params(const FusionParams<T>& params) {
  FusionParams<U> out;
  // Build the target layout by visiting both in lockstep.
  std::vector<const Tensor2<T>*> src;
  visit_params(params, [&](const std::string&, const Tensor2<T>& t) { src.push_back(&t); });
  out.encoder.resize(params.encoder.size());
  std::size_t i = 0;
  visit_params(out, [&](const std::string&, Tensor2<U>& t) { t = src[i++]->template cast<U>(); });
  return out;
}

template <typename T>
std::size_t parameter_count(const FusionParams<T>& params) {
  std::size_t n = 0;
  visit_params(params, [&](const std::string&, const Tensor2<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
std::vector<T> flatten(const FusionParams<T>& params) {
  std::vector<T> out;
  out.reserve(parameter_count(params));
  visit_params(params, [&](const std::string&, const Tensor2<T>& t) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  });
  return out;
}

template <typename T>
void unflatten(std::span<const T> values, FusionParams<T>& params) {
  if (values.size() != parameter_count(params)) {
    throw Error(ErrorCode::DimensionMismatch, "flat parameter vector has wrong length");
  }
  std::size_t offset = 0;
  visit_params(params, [&](const std::string&, Tensor2<T>& t) {
    for (auto& v : t.values()) v = values[offset++];
  });
}

template <typename T>
bool all_finite(const FusionParams<T>& params) {
  bool ok = true;
  visit_params(params, [&](const std::string&, const Tensor2<T>& t) { ok = ok && t.all_finite(); });
  return ok;
}

#define TRIPATH_INSTANTIATE(T)                                                        \
  template FusionParams<T> make_zero_params<T>(const DetectorConfig&);                \
  template FusionParams<T> init_params<T>(const DetectorConfig&, std::uint64_t);      \
  template std::size_t parameter_count<T>(const FusionParams<T>&);                    \
  template std::vector<T> flatten<T>(const FusionParams<T>&);                         \
  template void unflatten<T>(std::span<const T>, FusionParams<T>&);                   \
  template bool all_finite<T>(const FusionParams<T>&);

TRIPATH_INSTANTIATE(float)
TRIPATH_INSTANTIATE(double)
#undef TRIPATH_INSTANTIATE

template FusionParams<double> cast_params<double, float>(const FusionParams<float>&);
template FusionParams<float> cast_params<float, double>(const FusionParams<double>&);
template FusionParams<float> cast_params<float, float>(const FusionParams<float>&);
template FusionParams<double> cast_params<double, double>(const FusionParams<double>&);

}  // namespace tripath
