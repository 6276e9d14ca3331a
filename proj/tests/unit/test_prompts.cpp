#include "doctest.h"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"
#include "tripath/prompts.hpp"

using namespace tripath;

namespace {

std::string golden(const std::string& name) {
  return read_file(std::filesystem::path(TRIPATH_GOLDEN_DIR) / (name + ".txt"));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("renderings match golden files byte for byte") {
    CHECK(render_prompt("direct", {{"question", "Q1?"}}) == golden("direct"));
    CHECK(render_prompt("cot", {{"question", "Q1?"}}) == golden("cot"));
    CHECK(render_prompt("reverse", {{"answer", "Paris."}}) == golden("reverse"));
    CHECK(render_prompt("judge", {{"question", "Q1?"}, {"answer", "Paris."}}) == golden("judge"));
  }

  TEST_CASE("unknown template and missing variable") {
    CHECK(code_of([] { render_prompt("direct2", {}); }) == ErrorCode::UnknownTemplate);
    CHECK(code_of([] { render_prompt("judge", {{"question", "Q"}}); }) == ErrorCode::MissingVariable);
    try {
      render_prompt("reverse", {{"question", "Q"}});
    } catch (const Error& e) {
      CHECK(e.subject() == "answer");
    }
  }

  TEST_CASE("substitution is literal") {
    CHECK(substitute("a {{x}} b {{x}}", {{"x", "{{y}}"}}) == "a {{y}} b {{y}}");
    CHECK(substitute("no vars {{ here", {}) == "no vars {{ here");
    CHECK(substitute("", {}).empty());
    const std::string odd = "line\n\ttab \"quote\" \xc3\xa9";
    CHECK(render_prompt("direct", {{"question", odd}}).find(odd) != std::string::npos);
    CHECK(render_prompt("direct", {{"question", "Q"}, {"unused", "z"}}).find("z") == std::string::npos);
  }
}
