#include "tripath/prompts.hpp"

#include <array>
#include <utility>

#include "tripath/error.hpp"

namespace tripath {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kTemplates{{
    {"direct", "Answer the question directly and concisely.\nQuestion: {{question}}\nAnswer:"},
    {"cot",
     "Answer the question. Think step by step and show your reasoning before the final "
     "answer.\nQuestion: {{question}}\nAnswer:"},
    {"reverse",
     "Given the following answer, state the most plausible original question it "
     "answers.\nAnswer: {{answer}}\nQuestion:"},
    {"judge",
     "Question: {{question}}\nAnswer: {{answer}}\nDoes the answer contain a hallucination "
     "(factually incorrect or unsupported content)? Reply with a single digit: 1 for yes, 0 "
     "for no."},
}};

}  // namespace

std::string_view prompt_template(std::string_view id) {
  for (const auto& [name, text] : kTemplates) {
    if (name == id) return text;
  }
  throw Error(ErrorCode::UnknownTemplate, "unknown prompt template '" + std::string(id) + "'",
              std::string(id));
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text, pos, open - pos);
    const std::string name(text.substr(open + 2, close - open - 2));
    const auto it = vars.find(name);
    if (it == vars.end()) {
      throw Error(ErrorCode::MissingVariable, "no binding for '" + name + "'", name);
    }
    out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

std::string render_prompt(std::string_view id, const std::map<std::string, std::string>& vars) {
  return substitute(prompt_template(id), vars);
}

}  // namespace tripath
