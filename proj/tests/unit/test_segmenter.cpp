#include <fstream>

#include "doctest.h"
#include "support/corpus.hpp"
#include "support/temp_dir.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/segmenter.hpp"

using namespace tripath;
using Units = std::vector<std::string>;

namespace {

std::string joined(const SemanticTrajectoryList& stl) {
  std::string out;
  for (const auto& u : stl.units) out += u + " ";
  return collapse_whitespace(out);
}

void check_contract(const std::string& text, const SemanticTrajectoryList& stl) {
  CHECK(joined(stl) == collapse_whitespace(text));
  REQUIRE(stl.boundaries.size() == stl.units.size());
  REQUIRE_FALSE(stl.units.empty());
  CHECK(stl.boundaries.front().first == 0);
  CHECK(stl.boundaries.back().second == text.size());
  for (std::size_t i = 0; i < stl.units.size(); ++i) {
    CHECK(stl.boundaries[i].first < stl.boundaries[i].second);
    if (i + 1 < stl.units.size()) CHECK(stl.boundaries[i].second == stl.boundaries[i + 1].first);
    const auto [s, e] = stl.boundaries[i];
    CHECK(stl.units[i] == trim(std::string_view(text).substr(s, e - s)));
  }
}

}  // namespace

TEST_SUITE("segmenter") {
  TEST_CASE("worked examples") {
    const auto lex = default_lexicon();
    CHECK(segment_cot("Paris is the capital of France.", lex).units ==
          Units{"Paris is the capital of France."});
    CHECK(segment_cot("Ireland has two official languages. Therefore, not everyone speaks Irish.", lex)
              .units == Units{"Ireland has two official languages.",
                              "Therefore, not everyone speaks Irish."});
    CHECK(segment_cot("x equals 2 because 2 plus 2 is 4, so y is 4.", lex, 2).units ==
          Units{"x equals 2", "because 2 plus 2 is 4,", "so y is 4."});
  }

  TEST_CASE("blank text is rejected") {
    CHECK_THROWS_AS(segment_cot("", default_lexicon()), Error);
    try {
      segment_cot(" \n\t", default_lexicon());
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyInput);
    }
  }

  TEST_CASE("decimals and abbreviations do not end sentences") {
    const auto lex = default_lexicon();
    CHECK(segment_cot("The ratio is 3.14 exactly here. Done with that now.", lex).size() == 2);
    CHECK(segment_cot("Ask Dr. Who about it e.g. later today. Then stop it all.", lex).units ==
          Units{"Ask Dr. Who about it e.g. later today.", "Then stop it all."});
  }

  TEST_CASE("short units merge backward; a short first unit merges forward") {
    const auto lex = default_lexicon();
    CHECK(segment_cot("It rains a lot here. So wet. We stay inside today.", lex).units ==
          Units{"It rains a lot here. So wet.", "We stay inside today."});
    CHECK(segment_cot("Yes. The sky is blue today.", lex).units ==
          Units{"Yes. The sky is blue today."});
  }

  TEST_CASE("overflow folds into the last kept unit") {
    const auto stl = segment_cot("One two three. Four five six. Seven eight nine.", default_lexicon(), 3, 2);
    CHECK(stl.units == Units{"One two three.", "Four five six. Seven eight nine."});
  }

  TEST_CASE("lexicon matching rules") {
    const auto lex = default_lexicon();
    CHECK(lex.lookup("Therefore") == ConnectorCategory::logical);
    CHECK(lex.lookup("as a result") == ConnectorCategory::causal);
    CHECK_FALSE(lex.lookup("sow").has_value());
    const std::string text = "as a result we go";
    const auto m = lex.match_at(text, 0);
    REQUIRE(m.has_value());
    CHECK(m->first == std::string("as a result").size());
    CHECK_FALSE(lex.match_at("sow the seeds", 0).has_value());
    CHECK(lex.match_at("As\t a\nresult, x", 0)->first == 12);
    CHECK(lex.entries().size() == 21);
  }

  TEST_CASE("custom lexicon file") {
    testing::TempDir dir;
    std::ofstream(dir / "lex.tsv") << "# custom\nmoreover\tlogical\nin short\tlogical\n";
    const auto lex = load_lexicon(dir / "lex.tsv");
    CHECK(segment_cot("Cats purr when calm moreover they knead blankets.", lex).units ==
          Units{"Cats purr when calm", "moreover they knead blankets."});
    CHECK(segment_cot("Cats purr when calm so they knead blankets.", lex).size() == 1);
    CHECK_THROWS_AS(ConnectorLexicon({{"so", ConnectorCategory::logical}, {"SO", ConnectorCategory::causal}}),
                    Error);
  }

  TEST_CASE("contract holds on random and curated corpora") {
    const auto lex = default_lexicon();
    for (const auto& text : testing::random_cot_corpus(1000, 7)) {
      CAPTURE(text);
      check_contract(text, segment_cot(text, lex));
    }
    for (const auto& text : testing::curated_cot_texts()) {
      CAPTURE(text);
      const auto stl = segment_cot(text, lex);
      check_contract(text, stl);
      CHECK(stl.size() >= 2);
    }
  }

  TEST_CASE("deterministic") {
    const auto& t = testing::curated_cot_texts()[3];
    CHECK(segment_cot(t, default_lexicon()) == segment_cot(t, default_lexicon()));
  }
}
