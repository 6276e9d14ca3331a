#include "tripath/embeddings.hpp"

#include <cmath>
#include <unordered_set>

#include "json.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/rng.hpp"

namespace tripath {

using nlohmann::json;

namespace {

void check_vector(std::span<const float> v, std::size_t d, std::string_view id, const char* what) {
  if (v.size() != d) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " of " + std::string(id) + " has width " +
                    std::to_string(v.size()) + ", expected " + std::to_string(d),
                std::string(id));
  }
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::NonFiniteVector, std::string(what) + " of " + std::string(id) +
                                                  " has a non-finite entry",
                  std::string(id));
    }
  }
}

std::vector<float> json_vector(const json& v, std::string_view id, const char* key) {
  if (!v.is_array()) {
    throw Error(ErrorCode::InvalidField, std::string(key) + " of " + std::string(id) + " is not an array",
                key);
  }
  std::vector<float> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) {
      // JSON has no NaN/Inf literal; writers emit null for them.
      throw Error(ErrorCode::NonFiniteVector,
                  std::string(key) + " of " + std::string(id) + " holds a non-number", std::string(id));
    }
    out.push_back(x.get<float>());
  }
  return out;
}

json vector_json(std::span<const float> v) {
  json arr = json::array();
  for (float x : v) arr.push_back(static_cast<double>(x));
  return arr;
}

json parse_line(std::string_view line, std::size_t line_no) {
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + " is not a JSON object",
                {}, line_no);
  }
  return obj;
}

const json& field(const json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key)) {
    throw Error(ErrorCode::MissingField, "missing key at line " + std::to_string(line_no), key, line_no);
  }
  return obj.at(key);
}

std::size_t declared_dim(const json& obj, std::size_t expected_d, std::size_t line_no) {
  const auto& d = field(obj, "d", line_no);
  if (!d.is_number_unsigned()) throw Error(ErrorCode::InvalidField, "d must be a positive integer", "d", line_no);
  const auto found = d.get<std::size_t>();
  if (found != expected_d) {
    throw Error(ErrorCode::DimensionMismatch,
                "file declares d=" + std::to_string(found) + ", expected d=" + std::to_string(expected_d),
                std::to_string(expected_d) + "," + std::to_string(found), line_no);
  }
  return found;
}

template <typename Map>
Map restrict_to(Map all, std::span<const std::string> ids) {
  Map out;
  for (const auto& id : ids) {
    auto it = all.find(id);
    if (it == all.end()) throw Error(ErrorCode::MissingId, "id " + id + " not present", id);
    out.emplace(id, std::move(it->second));
  }
  return out;
}

}  // namespace

void validate(const InternalStateSet& s, std::size_t d, std::string_view id) {
  check_vector(s.e_q, d, id, "e_q");
  check_vector(s.e_a_dir, d, id, "e_a_dir");
  check_vector(s.e_q_rev, d, id, "e_q_rev");
}

void validate(const EmbeddingSequence& u, std::size_t d, std::string_view id) {
  if (u.size() == 0) {
    throw Error(ErrorCode::EmptyInput, "unit embedding sequence of " + std::string(id) + " is empty",
                std::string(id));
  }
  for (std::size_t r = 0; r < u.size(); ++r) check_vector(u.vectors.row(r), d, id, "unit");
}

std::vector<float> stub_embed(std::string_view text, std::size_t d, std::uint64_t seed) {
  const std::uint64_t key = hash64(text, seed);
  std::vector<double> v(d);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    v[i] = counter_normal(key, i);
    norm2 += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

EmbeddingSequence embed_units(std::span<const std::string> units, std::size_t d,
                              std::uint64_t seed) {
  EmbeddingSequence seq{Tensor2<float>(units.size(), d)};
  for (std::size_t r = 0; r < units.size(); ++r) {
    const auto v = stub_embed(units[r], d, seed);
    std::copy(v.begin(), v.end(), seq.vectors.row(r).begin());
  }
  return seq;
}

// ---- providers ------------------------------------------------------------

TableProvider::TableProvider(std::size_t d, std::map<std::string, InternalStateSet> states,
                             std::map<std::string, EmbeddingSequence> units)
    : d_(d), states_(std::move(states)), units_(std::move(units)) {
  for (const auto& [id, s] : states_) validate(s, d_, id);
  for (const auto& [id, u] : units_) validate(u, d_, id);
}

InternalStateSet TableProvider::internal_states(const Record& record) const {
  auto it = states_.find(record.id);
  if (it == states_.end()) throw Error(ErrorCode::MissingId, "no internal states for " + record.id, record.id);
  return it->second;
}

EmbeddingSequence TableProvider::unit_embeddings(const Record& record) const {
  auto it = units_.find(record.id);
  if (it == units_.end()) throw Error(ErrorCode::MissingId, "no unit embeddings for " + record.id, record.id);
  return it->second;
}

StubProvider::StubProvider(std::size_t d, std::uint64_t seed, ConnectorLexicon lexicon,
                           int min_unit_tokens, int max_units, int layer_index)
    : d_(d),
      seed_(seed),
      lexicon_(std::move(lexicon)),
      min_unit_tokens_(min_unit_tokens),
      max_units_(max_units),
      layer_index_(layer_index) {}

InternalStateSet StubProvider::internal_states(const Record& record) const {
  return {stub_embed(record.question, d_, seed_), stub_embed(record.answer_direct, d_, seed_),
          stub_embed(record.question_reverse, d_, seed_), layer_index_};
}

EmbeddingSequence StubProvider::unit_embeddings(const Record& record) const {
  const auto stl = segment_cot(record.answer_cot, lexicon_, min_unit_tokens_, max_units_);
  return embed_units(stl.units, d_, seed_);
}

// ---- files ----------------------------------------------------------------

std::map<std::string, InternalStateSet> load_states(const std::filesystem::path& path,
                                                    std::size_t expected_d) {
  std::map<std::string, InternalStateSet> out;
  std::size_t line_no = 0;
  const auto text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = parse_line(line, line_no);
    const auto& id_field = field(obj, "id", line_no);
    if (!id_field.is_string()) throw Error(ErrorCode::InvalidField, "id must be a string", "id", line_no);
    const auto id = id_field.get<std::string>();
    const auto d = declared_dim(obj, expected_d, line_no);
    InternalStateSet s;
    s.layer_index = field(obj, "layer_index", line_no).get<int>();
    s.e_q = json_vector(field(obj, "e_q", line_no), id, "e_q");
    s.e_a_dir = json_vector(field(obj, "e_a_dir", line_no), id, "e_a_dir");
    s.e_q_rev = json_vector(field(obj, "e_q_rev", line_no), id, "e_q_rev");
    validate(s, d, id);
    if (!out.emplace(id, std::move(s)).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id " + id, id, line_no);
    }
  }
  return out;
}

std::map<std::string, InternalStateSet> load_states(const std::filesystem::path& path,
                                                    std::span<const std::string> ids,
                                                    std::size_t expected_d) {
  return restrict_to(load_states(path, expected_d), ids);
}

std::map<std::string, EmbeddingSequence> load_unit_embeddings(const std::filesystem::path& path,
                                                              std::size_t expected_d) {
  std::map<std::string, EmbeddingSequence> out;
  std::size_t line_no = 0;
  const auto text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = parse_line(line, line_no);
    const auto& id_field = field(obj, "id", line_no);
    if (!id_field.is_string()) throw Error(ErrorCode::InvalidField, "id must be a string", "id", line_no);
    const auto id = id_field.get<std::string>();
    const auto d = declared_dim(obj, expected_d, line_no);
    const auto& units = field(obj, "units", line_no);
    if (!units.is_array()) throw Error(ErrorCode::InvalidField, "units must be an array", "units", line_no);
    EmbeddingSequence seq{Tensor2<float>(units.size(), d)};
    for (std::size_t r = 0; r < units.size(); ++r) {
      const auto v = json_vector(units[r], id, "unit");
      check_vector(v, d, id, "unit");
      std::copy(v.begin(), v.end(), seq.vectors.row(r).begin());
    }
    validate(seq, d, id);
    if (!out.emplace(id, std::move(seq)).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id " + id, id, line_no);
    }
  }
  return out;
}

std::map<std::string, EmbeddingSequence> load_unit_embeddings(const std::filesystem::path& path,
                                                              std::span<const std::string> ids,
                                                              std::size_t expected_d) {
  return restrict_to(load_unit_embeddings(path, expected_d), ids);
}

std::size_t peek_dimension(const std::filesystem::path& path) {
  std::size_t line_no = 0;
  const auto text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = parse_line(line, line_no);
    const auto& d = field(obj, "d", line_no);
    if (!d.is_number_unsigned()) throw Error(ErrorCode::InvalidField, "d must be a positive integer", "d", line_no);
    return d.get<std::size_t>();
  }
  return 0;
}

void save_states(const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, InternalStateSet>>& states) {
  std::string out;
  for (const auto& [id, s] : states) {
    validate(s, s.dim(), id);
    json obj = json::object();
    obj["id"] = id;
    obj["layer_index"] = s.layer_index;
    obj["d"] = s.dim();
    obj["e_q"] = vector_json(s.e_q);
    obj["e_a_dir"] = vector_json(s.e_a_dir);
    obj["e_q_rev"] = vector_json(s.e_q_rev);
    out += obj.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

void save_unit_embeddings(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, EmbeddingSequence>>& units) {
  std::string out;
  for (const auto& [id, seq] : units) {
    validate(seq, seq.dim(), id);
    json obj = json::object();
    obj["id"] = id;
    obj["d"] = seq.dim();
    json rows = json::array();
    for (std::size_t r = 0; r < seq.size(); ++r) rows.push_back(vector_json(seq.vectors.row(r)));
    obj["units"] = std::move(rows);
    out += obj.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

void save_trajectories(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, SemanticTrajectoryList>>& stls) {
  std::string out;
  for (const auto& [id, stl] : stls) {
    json obj = json::object();
    obj["id"] = id;
    obj["units"] = stl.units;
    json b = json::array();
    for (auto [s, e] : stl.boundaries) b.push_back(json::array({s, e}));
    obj["boundaries"] = std::move(b);
    out += obj.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

std::map<std::string, std::vector<std::string>> load_trajectories(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::size_t line_no = 0;
  const auto text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = parse_line(line, line_no);
    const auto id = field(obj, "id", line_no).get<std::string>();
    const auto& units = field(obj, "units", line_no);
    if (!units.is_array()) throw Error(ErrorCode::InvalidField, "units must be an array", "units", line_no);
    std::vector<std::string> texts;
    for (const auto& u : units) texts.push_back(u.get<std::string>());
    if (!out.emplace(id, std::move(texts)).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id " + id, id, line_no);
    }
  }
  return out;
}

// ---- synthetic corpus -----------------------------------------------------

SyntheticData synth_dataset(int n, int d, std::uint64_t seed, double separation) {
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::InvalidArgument, "n must be even and at least 2");
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "d must be positive");
  if (!(separation >= 0.0)) throw Error(ErrorCode::InvalidArgument, "separation must be nonnegative");
  const auto dim = static_cast<std::size_t>(d);

  Rng rng(mix64(seed) ^ 0x53594E5448ULL);
  SyntheticData out;
  out.direction.resize(dim);
  {
    double norm2 = 0.0;
    std::vector<double> u(dim);
    for (auto& x : u) {
      x = rng.normal();
      norm2 += x * x;
    }
    for (std::size_t i = 0; i < dim; ++i) out.direction[i] = static_cast<float>(u[i] / std::sqrt(norm2));
  }

  const int per_class = n / 2;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const int rank = i / 2;  // position within its class
    Record r;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04d", i);
    r.id = id;
    const auto item = std::to_string(i);
    r.question = "What is true about item " + item + "?";
    r.answer_direct = "Item " + item + " is described by answer " + item + ".";
    r.question_reverse = "Which item has answer " + item + "?";
    const int m = 3 + static_cast<int>(rng.uniform_index(4));
    std::vector<std::string> unit_texts;
    for (int k = 1; k <= m; ++k) {
      unit_texts.push_back("Fact " + std::to_string(k) + " about item " + item + " holds.");
      if (!r.answer_cot.empty()) r.answer_cot += ' ';
      r.answer_cot += unit_texts.back();
    }
    r.label = label;
    r.label_status = LabelStatus::confirmed;
    if (4 * rank < 2 * per_class) {
      r.split = Split::train;
    } else if (4 * rank < 3 * per_class) {
      r.split = Split::val;
    } else {
      r.split = Split::test;
    }

    InternalStateSet s;
    s.e_q = stub_embed(r.question, dim, seed);
    s.e_a_dir = stub_embed(r.answer_direct, dim, seed);
    s.e_q_rev = stub_embed(r.question_reverse, dim, seed);
    auto units = embed_units(unit_texts, dim, seed);

    int planted = -1;
    const auto planted_draw = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m)));
    if (label == 1 && separation > 0.0) {
      for (std::size_t c = 0; c < dim; ++c) {
        s.e_a_dir[c] += static_cast<float>(separation) * out.direction[c];
      }
      planted = planted_draw;
      auto row = units.vectors.row(static_cast<std::size_t>(planted));
      for (std::size_t c = 0; c < dim; ++c) row[c] = -out.direction[c];
    }

    out.planted_unit[r.id] = planted;
    out.states[r.id] = std::move(s);
    out.units[r.id] = std::move(units);
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace tripath
