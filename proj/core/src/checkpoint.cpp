#include "tripath/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>

#include "json.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"

namespace tripath {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "tripath-checkpoint-v1";

json config_json(const DetectorConfig& c) {
  json j = json::object();
  for (const auto& [key, value] : config_entries(c)) j[key] = value;
  return j;
}

DetectorConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidField, "config must be an object", "config");
  DetectorConfig c;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw Error(ErrorCode::InvalidField, "config values are strings", key);
    set_config_value(c, key, value.get<std::string>());
  }
  validate(c);
  return c;
}

void put_f32(std::vector<unsigned char>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::vector<ManifestEntry> manifest_entries(const FusionParams<float>& params) {
  std::vector<ManifestEntry> entries;
  std::size_t offset = 0;
  visit_params(params, [&](const std::string& name, const Tensor2<float>& t) {
    entries.push_back({name, {t.rows(), t.cols()}, "f32", offset});
    offset += t.size() * 4;
  });
  return entries;
}

std::string encode_manifest(const Checkpoint& ck) {
  json j = json::object();
  j["format"] = kFormat;
  j["config"] = config_json(ck.config);
  j["training_meta"] = {{"epochs", ck.meta.epochs},
                        {"best_epoch", ck.meta.best_epoch},
                        {"final_loss", ck.meta.final_loss},
                        {"seed", ck.meta.seed}};
  json tensors = json::array();
  for (const auto& e : manifest_entries(ck.params)) {
    tensors.push_back({{"name", e.name}, {"dims", e.dims}, {"dtype", e.dtype}, {"offset_bytes", e.offset_bytes}});
  }
  j["tensors"] = std::move(tensors);
  return j.dump(2) + "\n";
}

std::vector<unsigned char> encode_blob(const FusionParams<float>& params) {
  std::vector<unsigned char> blob;
  blob.reserve(parameter_count(params) * 4);
  visit_params(params, [&](const std::string& name, const Tensor2<float>& t) {
    if (!t.all_finite()) throw Error(ErrorCode::NonFiniteTensor, "tensor " + name + " is not finite", name);
    for (float v : t.values()) put_f32(blob, v);
  });
  return blob;
}

Checkpoint decode_checkpoint(const std::string& manifest_text, const std::vector<unsigned char>& blob) {
  json j = json::parse(manifest_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedLine, "manifest is not a JSON object");
  for (const char* key : {"format", "config", "training_meta", "tensors"}) {
    if (!j.contains(key)) throw Error(ErrorCode::MissingField, "manifest lacks key", key);
  }
  if (j["format"] != kFormat) throw Error(ErrorCode::InvalidField, "unsupported checkpoint format", "format");

  Checkpoint ck;
  ck.config = config_from_json(j["config"]);
  const auto& meta = j["training_meta"];
  ck.meta.epochs = meta.value("epochs", 0);
  ck.meta.best_epoch = meta.value("best_epoch", 0);
  ck.meta.final_loss = meta.value("final_loss", 0.0);
  ck.meta.seed = meta.value("seed", std::uint64_t{0});
  ck.params = make_zero_params<float>(ck.config);

  std::map<std::string, Tensor2<float>*> slots;
  visit_params(ck.params, [&](const std::string& name, Tensor2<float>& t) { slots.emplace(name, &t); });

  std::size_t expected_bytes = 0;
  for (const auto& entry : j["tensors"]) {
    const auto name = entry.at("name").get<std::string>();
    if (entry.value("dtype", std::string{}) != "f32") {
      throw Error(ErrorCode::InvalidField, "tensor " + name + " is not f32", name);
    }
    std::size_t count = 1;
    for (const auto& dim : entry.at("dims")) count *= dim.get<std::size_t>();
    expected_bytes += count * 4;
  }
  if (blob.size() != expected_bytes) {
    throw Error(ErrorCode::BlobSizeMismatch, "blob holds " + std::to_string(blob.size()) +
                                                 " bytes, manifest describes " +
                                                 std::to_string(expected_bytes));
  }

  for (const auto& entry : j["tensors"]) {
    const auto name = entry.at("name").get<std::string>();
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorCode::UnknownTensorName, "unknown tensor " + name, name);
    auto& t = *it->second;
    const auto dims = entry.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 2 || dims[0] != t.rows() || dims[1] != t.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "tensor " + name + " has unexpected shape", name);
    }
    const auto offset = entry.at("offset_bytes").get<std::size_t>();
    if (offset + t.size() * 4 > blob.size()) {
      throw Error(ErrorCode::BlobSizeMismatch, "tensor " + name + " runs past the blob", name);
    }
    auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(blob.data() + offset + 4 * i);
    if (!t.all_finite()) throw Error(ErrorCode::NonFiniteTensor, "tensor " + name + " is not finite", name);
    slots.erase(it);
  }
  if (!slots.empty()) {
    throw Error(ErrorCode::MissingField, "manifest lacks tensor " + slots.begin()->first,
                slots.begin()->first);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  const auto blob = encode_blob(ck.params);
  const auto manifest = encode_manifest(ck);
  atomic_write_dir(dir, [&](const std::filesystem::path& tmp) {
    atomic_write(tmp / kManifestFile, manifest);
    atomic_write(tmp / kWeightsFile,
                 std::string_view(reinterpret_cast<const char*>(blob.data()), blob.size()));
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = read_file(dir / kManifestFile);
  const auto raw = read_file(dir / kWeightsFile);
  std::vector<unsigned char> blob(raw.begin(), raw.end());
  return decode_checkpoint(manifest, blob);
}

}  // namespace tripath
