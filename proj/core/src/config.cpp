#include "tripath/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "tripath/error.hpp"
#include "tripath/io_util.hpp"

namespace tripath {

std::string_view to_string(CrossAttentionMode mode) noexcept {
  return mode == CrossAttentionMode::cls_only ? "cls_only" : "full_trajectory";
}

CrossAttentionMode parse_cross_attention_mode(std::string_view text) {
  if (text == "full_trajectory") return CrossAttentionMode::full_trajectory;
  if (text == "cls_only") return CrossAttentionMode::cls_only;
  throw Error(ErrorCode::InvalidConfig, "unknown cross_attention_mode '" + std::string(text) + "'",
              "cross_attention_mode");
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::InvalidConfig,
              "cannot parse '" + std::string(value) + "' for " + std::string(key), std::string(key));
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view value) {
  Int out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what, field);
}

}  // namespace

void validate(const DetectorConfig& c) {
  require(c.hidden_dim > 0, "hidden_dim", "hidden_dim must be positive");
  require(c.num_heads > 0, "num_heads", "num_heads must be positive");
  require(c.hidden_dim % c.num_heads == 0, "hidden_dim",
          "hidden_dim " + std::to_string(c.hidden_dim) + " is not divisible by num_heads " +
              std::to_string(c.num_heads));
  require(c.hidden_dim >= 2, "hidden_dim", "hidden_dim must be at least 2 for the classifier");
  require(c.encoder_layers > 0, "encoder_layers", "encoder_layers must be positive");
  require(c.ffn_multiplier > 0, "ffn_multiplier", "ffn_multiplier must be positive");
  require(c.max_units > 0, "max_units", "max_units must be positive");
  require(c.focal_gamma >= 0.0, "focal_gamma", "focal_gamma must be nonnegative");
  require(c.focal_alpha > 0.0 && c.focal_alpha < 1.0, "focal_alpha", "focal_alpha must lie in (0,1)");
  require(c.learning_rate > 0.0, "learning_rate", "learning_rate must be positive");
  require(c.batch_size > 0, "batch_size", "batch_size must be positive");
  require(c.epochs > 0, "epochs", "epochs must be positive");
  require(c.max_tokens > 0, "max_tokens", "max_tokens must be positive");
}

void set_config_value(DetectorConfig& c, std::string_view key, std::string_view value) {
  if (key == "hidden_dim") c.hidden_dim = parse_int<int>(key, value);
  else if (key == "num_heads") c.num_heads = parse_int<int>(key, value);
  else if (key == "encoder_layers") c.encoder_layers = parse_int<int>(key, value);
  else if (key == "ffn_multiplier") c.ffn_multiplier = parse_int<int>(key, value);
  else if (key == "max_units") c.max_units = parse_int<int>(key, value);
  else if (key == "positional_encoding") c.positional_encoding = parse_bool(key, value);
  else if (key == "cross_attention_mode") c.cross_attention_mode = parse_cross_attention_mode(value);
  else if (key == "focal_gamma") c.focal_gamma = parse_real(key, value);
  else if (key == "focal_alpha") c.focal_alpha = parse_real(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
  else if (key == "batch_size") c.batch_size = parse_int<int>(key, value);
  else if (key == "epochs") c.epochs = parse_int<int>(key, value);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "layer_index") c.layer_index = parse_int<int>(key, value);
  else if (key == "temperature") c.temperature = parse_real(key, value);
  else if (key == "max_tokens") c.max_tokens = parse_int<int>(key, value);
  else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'",
                   std::string(key));
}

DetectorConfig parse_config_text(std::string_view text, DetectorConfig base) {
  for (auto raw : split_lines(text)) {
    auto line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "expected key=value, got '" + std::string(line) + "'");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

DetectorConfig load_config(const std::filesystem::path& path, DetectorConfig base) {
  return parse_config_text(read_file(path), base);
}

std::string to_config_text(const DetectorConfig& c) {
  std::ostringstream out;
  out << "hidden_dim=" << c.hidden_dim << '\n'
      << "num_heads=" << c.num_heads << '\n'
      << "encoder_layers=" << c.encoder_layers << '\n'
      << "ffn_multiplier=" << c.ffn_multiplier << '\n'
      << "max_units=" << c.max_units << '\n'
      << "positional_encoding=" << (c.positional_encoding ? "true" : "false") << '\n'
      << "cross_attention_mode=" << to_string(c.cross_attention_mode) << '\n'
      << "focal_gamma=" << format_real(c.focal_gamma) << '\n'
      << "focal_alpha=" << format_real(c.focal_alpha) << '\n'
      << "learning_rate=" << format_real(c.learning_rate) << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "epochs=" << c.epochs << '\n'
      << "seed=" << c.seed << '\n'
      << "layer_index=" << c.layer_index << '\n'
      << "temperature=" << format_real(c.temperature) << '\n'
      << "max_tokens=" << c.max_tokens << '\n';
  return out.str();
}

std::vector<std::pair<std::string, std::string>> config_entries(const DetectorConfig& config) {
  const auto text = to_config_text(config);
  std::vector<std::pair<std::string, std::string>> out;
  for (auto line : split_lines(text)) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

}  // namespace tripath
