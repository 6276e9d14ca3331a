#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tripath {

enum class CrossAttentionMode {
  full_trajectory,  ///< keys/values = [gated CLS state; gated unit states]
  cls_only,         ///< keys/values = [gated CLS state] only
};

std::string_view to_string(CrossAttentionMode mode) noexcept;
CrossAttentionMode parse_cross_attention_mode(std::string_view text);

struct DetectorConfig {
  int hidden_dim = 32;
  int num_heads = 8;
  int encoder_layers = 2;
  int ffn_multiplier = 4;
  int max_units = 32;
  bool positional_encoding = true;
  CrossAttentionMode cross_attention_mode = CrossAttentionMode::full_trajectory;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 200;
  std::uint64_t seed = 0;
  int layer_index = 24;
  double temperature = 0.8;
  int max_tokens = 300;

  bool operator==(const DetectorConfig&) const = default;
};

/// Throws Error(InvalidConfig) naming the first violated constraint.
void validate(const DetectorConfig& config);

/// Sets one field from its textual form. Unknown keys and unparsable values
/// throw Error(InvalidConfig).
void set_config_value(DetectorConfig& config, std::string_view key, std::string_view value);

/// Flat `key=value` text, one field per line, '#' starts a comment.
DetectorConfig parse_config_text(std::string_view text, DetectorConfig base = {});
DetectorConfig load_config(const std::filesystem::path& path, DetectorConfig base = {});
std::string to_config_text(const DetectorConfig& config);

/// (key, textual value) pairs in to_config_text order.
std::vector<std::pair<std::string, std::string>> config_entries(const DetectorConfig& config);

}  // namespace tripath
