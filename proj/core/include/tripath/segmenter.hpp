#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tripath {

enum class ConnectorCategory { logical, causal, sequential, fact_intro };

std::string_view to_string(ConnectorCategory category) noexcept;
ConnectorCategory parse_connector_category(std::string_view text);

struct Connector {
  std::string phrase;
  ConnectorCategory category;
};

/// Discourse cues that open a new reasoning unit. Matching is
/// case-insensitive, longest phrase first, anchored at word boundaries; a
/// space inside a phrase matches any run of whitespace.
class ConnectorLexicon {
 public:
  ConnectorLexicon() = default;
  /// Throws Error(InvalidField) on empty or duplicate (case-folded) phrases.
  explicit ConnectorLexicon(std::vector<Connector> entries);

  const std::vector<Connector>& entries() const noexcept { return entries_; }

  /// Length of the longest phrase matching at `pos`, with its category.
  std::optional<std::pair<std::size_t, ConnectorCategory>> match_at(std::string_view text,
                                                                    std::size_t pos) const;
  /// Whole-string lookup, case-insensitive.
  std::optional<ConnectorCategory> lookup(std::string_view phrase) const;

 private:
  std::vector<Connector> entries_;  // sorted longest phrase first
};

ConnectorLexicon default_lexicon();

/// `phrase<TAB>category` per line; blank lines and '#' comments skipped.
ConnectorLexicon parse_lexicon(std::string_view text);
ConnectorLexicon load_lexicon(const std::filesystem::path& path);

inline constexpr int kDefaultMinUnitTokens = 3;
inline constexpr int kDefaultMaxUnits = 32;

/// Ordered reasoning units of a chain-of-thought text. `boundaries`
/// partition `source` into contiguous half-open spans; each unit is its span
/// with surrounding whitespace trimmed.
struct SemanticTrajectoryList {
  std::string source;
  std::vector<std::string> units;
  std::vector<std::pair<std::size_t, std::size_t>> boundaries;

  std::size_t size() const noexcept { return units.size(); }
  bool operator==(const SemanticTrajectoryList&) const = default;
};

/// Deterministic four-pass segmentation:
///  1. split after `.`, `!`, `?` followed by whitespace or end of text,
///     except inside decimals and after the abbreviations
///     e.g. / i.e. / etc. / Mr. / Dr. / vs.;
///  2. inside each sentence, split immediately before every connector match
///     (the connector opens the following unit);
///  3. merge units with fewer than `min_unit_tokens` whitespace tokens into
///     their predecessor (a short first unit merges forward);
///  4. fold units beyond `max_units` into the last kept unit.
/// Throws Error(EmptyInput) when `text` is blank.
SemanticTrajectoryList segment_cot(std::string_view text, const ConnectorLexicon& lexicon,
                                   int min_unit_tokens = kDefaultMinUnitTokens,
                                   int max_units = kDefaultMaxUnits);

}  // namespace tripath
