#include <cmath>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/reporting.hpp"

using namespace tripath;
using tripath::testing::TempDir;

namespace {

Checkpoint untrained(int d, std::uint64_t seed) {
  DetectorConfig cfg;
  cfg.hidden_dim = d;
  cfg.num_heads = 4;
  cfg.seed = seed;
  return {init_params<float>(cfg, seed), cfg, {}};
}

TableProvider provider_of(const SyntheticData& data, std::size_t d) {
  return TableProvider(d, data.states, data.units);
}

}  // namespace

TEST_SUITE("reporting") {
  TEST_CASE("untrained checkpoint carries no signal on separation-0 data") {
    const auto data = synth_dataset(512, 16, 2, 0.0);
    const auto report = evaluate(untrained(16, 1), data.records, Split::test, provider_of(data, 16));
    CHECK(report.n_pos == 64);
    CHECK(report.n_neg == 64);
    CHECK(report.auroc >= 0.35);
    CHECK(report.auroc <= 0.65);
  }

  TEST_CASE("report agrees with the oracle and is worker-independent") {
    const auto data = synth_dataset(96, 16, 3, 1.0);
    const auto provider = provider_of(data, 16);
    const auto ck = untrained(16, 4);
    const auto a = evaluate(ck, data.records, Split::train, provider, 1);
    const auto b = evaluate(ck, data.records, Split::train, provider, 4);
    CHECK(report_json(a) == report_json(b));
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < a.scores.size(); ++i) {
      if (i) CHECK(a.scores[i - 1].id < a.scores[i].id);
      s.push_back(a.scores[i].p_halluc);
      y.push_back(a.scores[i].label);
    }
    CHECK(std::abs(a.auroc - testing::brute_force_auroc(s, y)) <= 1e-12);
    const auto j = nlohmann::json::parse(report_json(a));
    CHECK(j.at("auroc").get<double>() == doctest::Approx(a.auroc));
    CHECK(j.at("n_pos") == 24);

    TempDir dir;
    save_scores(dir / "scores.jsonl", a.scores);
    const auto content = read_file(dir / "scores.jsonl");
    const auto lines = split_lines(content);
    REQUIRE(lines.size() == a.scores.size());
    const auto first = nlohmann::json::parse(lines[0]);
    CHECK(first.at("id") == a.scores[0].id);
    CHECK(first.at("label") == a.scores[0].label);
  }

  TEST_CASE("evaluation errors") {
    const auto data = synth_dataset(16, 8, 3, 1.0);
    auto code = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code([&] { evaluate(untrained(16, 1), data.records, Split::test, provider_of(data, 8)); }) ==
          ErrorCode::DimensionMismatch);
    std::vector<Record> one_class;
    for (const auto& r : data.records) {
      if (*r.label == 1) one_class.push_back(r);
    }
    DetectorConfig cfg;
    cfg.hidden_dim = 8;
    cfg.num_heads = 2;
    const Checkpoint ck{init_params<float>(cfg, 1), cfg, {}};
    CHECK(code([&] { evaluate(ck, one_class, Split::train, provider_of(data, 8)); }) == ErrorCode::SingleClass);
  }

  TEST_CASE("attention export") {
    const auto data = synth_dataset(16, 16, 5, 2.0);
    const auto provider = provider_of(data, 16);
    const auto ck = untrained(16, 2);
    const std::vector<std::string> ids{data.records[1].id, data.records[0].id};
    std::map<std::string, std::vector<std::string>> texts;
    texts[ids[0]] = std::vector<std::string>(data.units.at(ids[0]).size(), "unit\ttext");
    const auto dumps = export_attention(ck, data.records, ids, provider, texts);
    REQUIRE(dumps.size() == 2);
    CHECK(dumps[0].id == ids[0]);
    CHECK(dumps[0].label == 1);
    for (const auto& dump : dumps) {
      const auto m = data.units.at(dump.id).size();
      REQUIRE(dump.weights.rows() == 3);
      REQUIRE(dump.weights.cols() == m + 1);
      CHECK(dump.columns.size() == m + 1);
      CHECK(dump.columns[0] == "[CLS]");
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0;
        for (float w : dump.weights.row(r)) s += w;
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
    }
    CHECK(dumps[1].columns[1] == "u1");

    const auto text = format_attention_dump(dumps);
    const auto lines = split_lines(text);
    CHECK(lines[0].rfind("# id=" + ids[0] + "\tlabel=1\tp_halluc=", 0) == 0);
    CHECK(lines[1].rfind("segment\t[CLS]\t", 0) == 0);
    // Tabs inside unit text must not break the columns.
    std::size_t tabs = 0;
    for (char c : lines[1]) tabs += c == '\t';
    CHECK(tabs == data.units.at(ids[0]).size() + 1);
    CHECK(lines[2].rfind("query\t", 0) == 0);
    CHECK(lines[3].rfind("answer\t", 0) == 0);
    CHECK(lines[4].rfind("reverse\t", 0) == 0);

    const std::vector<std::string> missing{"nope"};
    try {
      export_attention(ck, data.records, missing, provider);
      FAIL("expected MissingId");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingId);
      CHECK(e.subject() == "nope");
    }
  }

  TEST_CASE("feature export") {
    const auto data = synth_dataset(32, 16, 6, 2.0);
    const auto dump = export_features(untrained(16, 3), data.records, Split::val, provider_of(data, 16));
    REQUIRE(dump.ids.size() == 8);
    CHECK(dump.fused.rows() == 8);
    CHECK(dump.fused.cols() == 16);
    CHECK(dump.raw.cols() == 48);
    const auto& first = data.states.at(dump.ids[0]);
    CHECK(dump.raw(0, 16) == first.e_a_dir[0]);
    CHECK(dump.raw(0, 47) == first.e_q_rev[15]);
    const auto text = format_feature_dump(dump);
    const auto lines = split_lines(text);
    REQUIRE(lines.size() == 9);
    std::istringstream header{std::string(lines[0])};
    std::vector<std::string> cols;
    for (std::string c; header >> c;) cols.push_back(c);
    REQUIRE(cols.size() == 2 + 16 + 48);
    CHECK(cols[0] == "id");
    CHECK(cols[1] == "label");
    CHECK(cols[2] == "fused_0");
    CHECK(cols[18] == "raw_0");
  }

  TEST_CASE("linear probe") {
    // One informative coordinate plus a large-scale nuisance one.
    Tensor2<float> x(40, 2);
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      y.push_back(i % 2);
      x(i, 0) = static_cast<float>(i % 2) * 0.5f + 0.01f * static_cast<float>(i % 7);
      x(i, 1) = 1000.0f * static_cast<float>((i * 37) % 11);
    }
    const auto probe = fit_linear_probe(x, y);
    CHECK(probe.weights[0] > std::abs(probe.weights[1]));
    CHECK(probe_auroc(x, y, x, y) == 1.0);
    Tensor2<float> constant(4, 1, 3.0f);
    const std::vector<int> cy{0, 1, 0, 1};
    CHECK(std::isfinite(fit_linear_probe(constant, cy).score(constant.row(0))));
  }
}
