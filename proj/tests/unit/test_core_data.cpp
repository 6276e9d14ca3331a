#include <bit>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support/temp_dir.hpp"
#include "tripath/checkpoint.hpp"
#include "tripath/config.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/params.hpp"
#include "tripath/record.hpp"

using namespace tripath;
using tripath::testing::TempDir;

namespace {

Record sample(const std::string& id, std::optional<int> label = 1) {
  Record r;
  r.id = id;
  r.question = "Which languages are official in Ireland?";
  r.answer_direct = "Irish and English.";
  r.answer_cot = "Ireland has two official languages. Therefore both count.";
  r.question_reverse = "What are the official languages of Ireland?";
  r.label = label;
  r.label_status = label ? LabelStatus::confirmed : LabelStatus::unlabeled;
  r.split = Split::val;
  return r;
}

template <typename F>
Error capture(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected tripath::Error");
  return Error(ErrorCode::InvalidArgument, "unreachable");
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("two valid lines load in order") {
    TempDir dir;
    const std::vector<Record> records{sample("q1"), sample("q2", std::nullopt)};
    save_dataset(dir / "d.jsonl", records);
    const auto loaded = load_dataset(dir / "d.jsonl");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded == records);
  }

  TEST_CASE("write(load(f)) preserves every field") {
    auto r = sample("tab\tand \"quote\" é");
    r.answer_cot = "line one\nline two";
    const auto text = serialize_dataset(std::vector<Record>{r});
    const auto again = parse_dataset(text);
    CHECK(again.front() == r);
    CHECK(serialize_dataset(again) == text);
  }

  TEST_CASE("duplicate ids are rejected with the id") {
    const auto text = serialize_dataset(std::vector<Record>{sample("q1"), sample("q1")});
    const auto e = capture([&] { parse_dataset(text); });
    CHECK(e.code() == ErrorCode::DuplicateId);
    CHECK(e.subject() == "q1");
    CHECK(e.line() == 2);
  }

  TEST_CASE("missing question reports the field and line") {
    auto obj = nlohmann::json::parse(serialize_record(sample("q2")));
    obj.erase("question");
    const auto text = serialize_record(sample("q1")) + "\n" + obj.dump() + "\n";
    const auto e = capture([&] { parse_dataset(text); });
    CHECK(e.code() == ErrorCode::MissingField);
    CHECK(e.subject() == "question");
    CHECK(e.line() == 2);
  }

  TEST_CASE("malformed line") {
    const auto e = capture([] { parse_dataset("{\"id\": \n"); });
    CHECK(e.code() == ErrorCode::MalformedLine);
    CHECK(e.line() == 1);
  }

  TEST_CASE("label present iff confirmed") {
    auto r = sample("q1");
    r.label_status = LabelStatus::needs_review;
    CHECK(capture([&] { validate(r); }).code() == ErrorCode::InvalidField);
    r = sample("q1", std::nullopt);
    r.label_status = LabelStatus::confirmed;
    CHECK(capture([&] { validate(r); }).code() == ErrorCode::InvalidField);
  }

  TEST_CASE("select_split excludes unconfirmed records by default") {
    auto flagged = sample("q2", std::nullopt);
    flagged.label_status = LabelStatus::needs_review;
    const std::vector<Record> records{sample("q1"), flagged};
    CHECK(select_split(records, Split::val).size() == 1);
    CHECK(select_split(records, Split::val, true).size() == 2);
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const DetectorConfig c;
    CHECK(c.num_heads == 8);
    CHECK(c.layer_index == 24);
    CHECK(c.temperature == 0.8);
    CHECK(c.max_tokens == 300);
    CHECK(c.focal_gamma == 2.0);
    CHECK(c.focal_alpha == 0.25);
    CHECK_NOTHROW(validate(c));
  }

  TEST_CASE("hidden_dim must divide by num_heads") {
    DetectorConfig c;
    c.hidden_dim = 30;
    CHECK(capture([&] { validate(c); }).code() == ErrorCode::InvalidConfig);
  }

  TEST_CASE("text round trip and overrides") {
    DetectorConfig c;
    c.hidden_dim = 16;
    c.num_heads = 2;
    c.learning_rate = 3.3e-4;
    c.cross_attention_mode = CrossAttentionMode::cls_only;
    c.positional_encoding = false;
    c.seed = 18446744073709551615ULL;
    CHECK(parse_config_text(to_config_text(c)) == c);
    const auto d = parse_config_text("# comment\nepochs = 7\n\nfocal_gamma=0\n");
    CHECK(d.epochs == 7);
    CHECK(d.focal_gamma == 0.0);
    CHECK(capture([] { parse_config_text("no_such_key=1"); }).code() == ErrorCode::InvalidConfig);
    CHECK(capture([] { parse_config_text("epochs=seven"); }).code() == ErrorCode::InvalidConfig);
  }
}

TEST_SUITE("checkpoint") {
  DetectorConfig small_config() {
    DetectorConfig c;
    c.hidden_dim = 16;
    c.num_heads = 2;
    c.max_units = 5;
    return c;
  }

  TEST_CASE("round trip is bit-exact for several initializations") {
    TempDir dir;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      Checkpoint ck{init_params<float>(small_config(), seed), small_config(), {9, 4, 0.125, seed}};
      save_checkpoint(dir / "ck", ck);
      const auto back = load_checkpoint(dir / "ck");
      CHECK(back.config == ck.config);
      CHECK(back.meta == ck.meta);
      const auto a = flatten(ck.params);
      const auto b = flatten(back.params);
      REQUIRE(a.size() == b.size());
      bool identical = true;
      for (std::size_t i = 0; i < a.size(); ++i) {
        identical = identical && std::bit_cast<std::uint32_t>(a[i]) == std::bit_cast<std::uint32_t>(b[i]);
      }
      CHECK(identical);
    }
  }

  TEST_CASE("manifest offsets are cumulative in canonical order") {
    const auto p = init_params<float>(small_config(), 5);
    const auto entries = manifest_entries(p);
    std::vector<std::string> names;
    visit_params(p, [&](const std::string& n, const Tensor2<float>&) { names.push_back(n); });
    REQUIRE(entries.size() == names.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries[i].name == names[i]);
      CHECK(entries[i].offset_bytes == offset);
      CHECK(entries[i].dtype == "f32");
      std::size_t n = 1;
      for (auto dim : entries[i].dims) n *= dim;
      offset += 4 * n;
    }
    CHECK(encode_blob(p).size() == offset);
    CHECK(entries.front().name == "cls_token");
  }

  TEST_CASE("truncated blob") {
    TempDir dir;
    Checkpoint ck{init_params<float>(small_config(), 1), small_config(), {}};
    save_checkpoint(dir / "ck", ck);
    const auto blob_path = dir / "ck" / kWeightsFile;
    const auto size = std::filesystem::file_size(blob_path);
    std::filesystem::resize_file(blob_path, size - 4);
    CHECK(capture([&] { load_checkpoint(dir / "ck"); }).code() == ErrorCode::BlobSizeMismatch);
  }

  TEST_CASE("NaN parameter is refused on save") {
    TempDir dir;
    Checkpoint ck{init_params<float>(small_config(), 1), small_config(), {}};
    ck.params.gate_hidden.weight(0, 3) = std::nanf("");
    const auto e = capture([&] { save_checkpoint(dir / "ck", ck); });
    CHECK(e.code() == ErrorCode::NonFiniteTensor);
    CHECK(e.subject() == "gate.hidden.weight");
    CHECK_FALSE(std::filesystem::exists(dir / "ck"));
  }

  TEST_CASE("unknown tensor name") {
    const Checkpoint ck{init_params<float>(small_config(), 1), small_config(), {}};
    auto manifest = nlohmann::json::parse(encode_manifest(ck));
    manifest["tensors"][2]["name"] = "encoder.9.bogus";
    const auto blob = encode_blob(ck.params);
    const auto e = capture([&] { decode_checkpoint(manifest.dump(), blob); });
    CHECK(e.code() == ErrorCode::UnknownTensorName);
  }

  TEST_CASE("save replaces an existing checkpoint atomically") {
    TempDir dir;
    Checkpoint a{init_params<float>(small_config(), 1), small_config(), {}};
    Checkpoint b{init_params<float>(small_config(), 2), small_config(), {}};
    save_checkpoint(dir / "ck", a);
    save_checkpoint(dir / "ck", b);
    CHECK(flatten(load_checkpoint(dir / "ck").params) == flatten(b.params));
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
    CHECK(entries == 1);
  }
}
