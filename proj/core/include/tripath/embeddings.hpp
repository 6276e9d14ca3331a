#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripath/record.hpp"
#include "tripath/segmenter.hpp"
#include "tripath/tensor.hpp"

namespace tripath {

/// Sub-symbolic signals for one record: query embedding, direct-answer
/// hidden state and reverse-question hidden state, all of width d.
struct InternalStateSet {
  std::vector<float> e_q;
  std::vector<float> e_a_dir;
  std::vector<float> e_q_rev;
  int layer_index = 24;

  std::size_t dim() const noexcept { return e_q.size(); }
  bool operator==(const InternalStateSet&) const = default;
};

/// Per-unit embeddings e_1..e_m aligned with the trajectory units (m x d).
struct EmbeddingSequence {
  Tensor2<float> vectors;

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  bool operator==(const EmbeddingSequence&) const = default;
};

/// Throws DimensionMismatch / NonFiniteVector / EmptyInput as appropriate.
void validate(const InternalStateSet& states, std::size_t d, std::string_view id);
void validate(const EmbeddingSequence& units, std::size_t d, std::string_view id);

/// Reproducible structure-free text vector: d standard normals drawn from a
/// counter-based stream keyed by hash(seed, text), scaled to unit L2 norm.
std::vector<float> stub_embed(std::string_view text, std::size_t d, std::uint64_t seed);

/// Source of detector inputs for a record. The detector only ever sees
/// these two value types, so providers are interchangeable.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual InternalStateSet internal_states(const Record& record) const = 0;
  virtual EmbeddingSequence unit_embeddings(const Record& record) const = 0;
};

/// Serves precomputed vectors (for example hidden states extracted offline).
class TableProvider final : public EmbeddingProvider {
 public:
  TableProvider(std::size_t d, std::map<std::string, InternalStateSet> states,
                std::map<std::string, EmbeddingSequence> units);

  std::size_t dim() const override { return d_; }
  InternalStateSet internal_states(const Record& record) const override;
  EmbeddingSequence unit_embeddings(const Record& record) const override;

 private:
  std::size_t d_;
  std::map<std::string, InternalStateSet> states_;
  std::map<std::string, EmbeddingSequence> units_;
};

/// Computes stub vectors from record text on demand; the chain of thought
/// is segmented with the given lexicon and limits.
class StubProvider final : public EmbeddingProvider {
 public:
  StubProvider(std::size_t d, std::uint64_t seed, ConnectorLexicon lexicon = default_lexicon(),
               int min_unit_tokens = kDefaultMinUnitTokens, int max_units = kDefaultMaxUnits,
               int layer_index = 24);

  std::size_t dim() const override { return d_; }
  InternalStateSet internal_states(const Record& record) const override;
  EmbeddingSequence unit_embeddings(const Record& record) const override;

 private:
  std::size_t d_;
  std::uint64_t seed_;
  ConnectorLexicon lexicon_;
  int min_unit_tokens_;
  int max_units_;
  int layer_index_;
};

EmbeddingSequence embed_units(std::span<const std::string> units, std::size_t d,
                              std::uint64_t seed);

// ---- files ----------------------------------------------------------------
// State file lines: {id, layer_index, d, e_q, e_a_dir, e_q_rev}
// Unit file lines:  {id, d, units: [[...], ...]}

std::map<std::string, InternalStateSet> load_states(const std::filesystem::path& path,
                                                    std::size_t expected_d);
std::map<std::string, InternalStateSet> load_states(const std::filesystem::path& path,
                                                    std::span<const std::string> ids,
                                                    std::size_t expected_d);
std::map<std::string, EmbeddingSequence> load_unit_embeddings(const std::filesystem::path& path,
                                                              std::size_t expected_d);
std::map<std::string, EmbeddingSequence> load_unit_embeddings(const std::filesystem::path& path,
                                                              std::span<const std::string> ids,
                                                              std::size_t expected_d);

/// Declared dimension of the first line, or 0 for an empty file.
std::size_t peek_dimension(const std::filesystem::path& path);

void save_states(const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, InternalStateSet>>& states);
void save_unit_embeddings(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, EmbeddingSequence>>& units);

// ---- trajectory files -----------------------------------------------------
// Lines: {id, units: [...], boundaries: [[start, end], ...]}

void save_trajectories(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, SemanticTrajectoryList>>& stls);
/// id -> unit texts.
std::map<std::string, std::vector<std::string>> load_trajectories(const std::filesystem::path& path);

// ---- synthetic corpus -----------------------------------------------------

struct SyntheticData {
  std::vector<Record> records;
  std::map<std::string, InternalStateSet> states;
  std::map<std::string, EmbeddingSequence> units;
  /// 0-based index of the planted contradiction unit per record, -1 if none.
  std::map<std::string, int> planted_unit;
  /// Unit direction along which hallucinated direct answers are displaced.
  std::vector<float> direction;
};

/// Balanced desk-scale corpus with labels by construction. Class-1 records
/// get E_{A_dir} displaced by `separation` along a fixed random unit
/// direction u, and one randomly placed trajectory unit is replaced by the
/// contradiction vector -u.
/// With separation 0 no displacement or contradiction is planted, so the
/// two classes share one distribution. Splits are stratified 50/25/25.
SyntheticData synth_dataset(int n, int d, std::uint64_t seed, double separation);

}  // namespace tripath
