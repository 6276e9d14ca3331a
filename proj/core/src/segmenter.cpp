#include "tripath/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "tripath/error.hpp"
#include "tripath/io_util.hpp"

namespace tripath {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) {
  const auto u = static_cast<unsigned char>(c);
  // Bytes >= 0x80 belong to multi-byte UTF-8 letters.
  return std::isalnum(u) != 0 || c == '_' || u >= 0x80;
}
char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string fold_phrase(std::string_view s) {
  std::string out;
  for (char c : collapse_whitespace(s)) out.push_back(fold(c));
  return out;
}

constexpr std::array<std::string_view, 6> kAbbreviations = {"e.g.", "i.e.", "etc.",
                                                            "mr.",  "dr.",  "vs."};

bool ends_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string token;
  for (std::size_t i = start; i <= dot; ++i) token.push_back(fold(text[i]));
  // Strip opening punctuation such as "(" before the abbreviation.
  while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front()))) {
    token.erase(token.begin());
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), token) != kAbbreviations.end();
}

bool is_sentence_end(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c != '.' && c != '!' && c != '?') return false;
  if (i + 1 < text.size() && !is_space(text[i + 1])) return false;
  if (c == '.') {
    if (i > 0 && i + 1 < text.size() && is_digit(text[i - 1]) && is_digit(text[i + 1])) return false;
    if (ends_abbreviation(text, i)) return false;
  }
  return true;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

using Span = std::pair<std::size_t, std::size_t>;

}  // namespace

std::string_view to_string(ConnectorCategory category) noexcept {
  switch (category) {
    case ConnectorCategory::logical: return "logical";
    case ConnectorCategory::causal: return "causal";
    case ConnectorCategory::sequential: return "sequential";
    case ConnectorCategory::fact_intro: return "fact_intro";
  }
  return "logical";
}

ConnectorCategory parse_connector_category(std::string_view text) {
  if (text == "logical") return ConnectorCategory::logical;
  if (text == "causal") return ConnectorCategory::causal;
  if (text == "sequential") return ConnectorCategory::sequential;
  if (text == "fact_intro") return ConnectorCategory::fact_intro;
  throw Error(ErrorCode::InvalidField, "unknown connector category '" + std::string(text) + "'",
              "category");
}

ConnectorLexicon::ConnectorLexicon(std::vector<Connector> entries) {
  std::set<std::string> seen;
  for (auto& e : entries) {
    e.phrase = fold_phrase(e.phrase);
    if (e.phrase.empty()) throw Error(ErrorCode::InvalidField, "empty connector phrase", "phrase");
    if (!seen.insert(e.phrase).second) {
      throw Error(ErrorCode::InvalidField, "duplicate connector phrase '" + e.phrase + "'", e.phrase);
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Connector& a, const Connector& b) {
    return a.phrase.size() > b.phrase.size();
  });
  entries_ = std::move(entries);
}

std::optional<std::pair<std::size_t, ConnectorCategory>> ConnectorLexicon::match_at(
    std::string_view text, std::size_t pos) const {
  if (pos >= text.size() || (pos > 0 && is_word(text[pos - 1]))) return std::nullopt;
  for (const auto& entry : entries_) {
    std::size_t t = pos;
    bool ok = true;
    for (std::size_t k = 0; k < entry.phrase.size() && ok; ++k) {
      const char pc = entry.phrase[k];
      if (pc == ' ') {
        if (t >= text.size() || !is_space(text[t])) {
          ok = false;
        } else {
          while (t < text.size() && is_space(text[t])) ++t;
        }
      } else if (t < text.size() && fold(text[t]) == pc) {
        ++t;
      } else {
        ok = false;
      }
    }
    if (ok && (t == text.size() || !is_word(text[t]))) return std::pair{t - pos, entry.category};
  }
  return std::nullopt;
}

std::optional<ConnectorCategory> ConnectorLexicon::lookup(std::string_view phrase) const {
  const auto key = fold_phrase(phrase);
  for (const auto& e : entries_) {
    if (e.phrase == key) return e.category;
  }
  return std::nullopt;
}

ConnectorLexicon default_lexicon() {
  using C = ConnectorCategory;
  return ConnectorLexicon({
      {"therefore", C::logical},   {"thus", C::logical},        {"hence", C::logical},
      {"so", C::logical},          {"consequently", C::logical}, {"it follows that", C::logical},
      {"because", C::causal},      {"since", C::causal},        {"as a result", C::causal},
      {"due to", C::causal},       {"first", C::sequential},    {"second", C::sequential},
      {"third", C::sequential},    {"next", C::sequential},     {"then", C::sequential},
      {"finally", C::sequential},  {"step", C::sequential},     {"we know that", C::fact_intro},
      {"note that", C::fact_intro}, {"recall that", C::fact_intro}, {"given that", C::fact_intro},
  });
}

ConnectorLexicon parse_lexicon(std::string_view text) {
  std::vector<Connector> entries;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::MalformedLine, "expected phrase<TAB>category", {}, line_no);
    }
    entries.push_back({std::string(line.substr(0, tab)),
                       parse_connector_category(trim(line.substr(tab + 1)))});
  }
  return ConnectorLexicon(std::move(entries));
}

ConnectorLexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path));
}

SemanticTrajectoryList segment_cot(std::string_view text, const ConnectorLexicon& lexicon,
                                   int min_unit_tokens, int max_units) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyInput, "chain-of-thought text is blank");
  if (max_units < 1) throw Error(ErrorCode::InvalidArgument, "max_units must be positive");

  // Pass 1: sentences as contiguous spans; trailing whitespace stays with
  // the sentence it follows.
  std::vector<Span> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_sentence_end(text, i)) continue;
    std::size_t next = i + 1;
    while (next < text.size() && is_space(text[next])) ++next;
    sentences.emplace_back(start, next);
    start = next;
  }
  if (start < text.size()) sentences.emplace_back(start, text.size());

  // Pass 2: split before connectors that do not open their sentence.
  std::vector<Span> pieces;
  for (auto [s, e] : sentences) {
    std::size_t content = s;
    while (content < e && is_space(text[content])) ++content;
    const auto sentence = text.substr(0, e);
    std::size_t piece_start = s;
    std::size_t pos = content;
    while (pos < e) {
      auto m = lexicon.match_at(sentence, pos);
      if (m) {
        if (pos > content) {
          pieces.emplace_back(piece_start, pos);
          piece_start = pos;
        }
        pos += m->first;
      } else {
        ++pos;
      }
    }
    pieces.emplace_back(piece_start, e);
  }

  // Pass 3: absorb short pieces.
  const auto min_tokens = static_cast<std::size_t>(std::max(min_unit_tokens, 0));
  std::vector<Span> merged;
  std::optional<std::size_t> carry_start;
  for (auto [s, e] : pieces) {
    if (carry_start) {
      s = *carry_start;
      carry_start.reset();
    }
    const bool short_piece = count_tokens(text.substr(s, e - s)) < min_tokens;
    if (short_piece && merged.empty()) {
      carry_start = s;
    } else if (short_piece) {
      merged.back().second = e;
    } else {
      merged.emplace_back(s, e);
    }
  }
  if (carry_start) {
    if (merged.empty()) {
      merged.emplace_back(*carry_start, text.size());
    } else {
      merged.back().second = text.size();
    }
  }

  // Pass 4: truncate.
  const auto cap = static_cast<std::size_t>(max_units);
  if (merged.size() > cap) {
    merged[cap - 1].second = merged.back().second;
    merged.resize(cap);
  }

  SemanticTrajectoryList stl;
  stl.source = std::string(text);
  for (auto [s, e] : merged) {
    stl.units.emplace_back(trim(text.substr(s, e - s)));
    stl.boundaries.emplace_back(s, e);
  }
  return stl;
}

}  // namespace tripath
