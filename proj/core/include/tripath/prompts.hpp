#pragma once

#include <map>
#include <string>
#include <string_view>

namespace tripath {

/// Fixed templates: "direct", "cot", "reverse", "judge".
std::string_view prompt_template(std::string_view id);

/// Replaces every `{{name}}` with its binding, byte for byte. Throws
/// UnknownTemplate or MissingVariable(name).
std::string render_prompt(std::string_view id, const std::map<std::string, std::string>& vars);

/// Same substitution on an arbitrary template text.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars);

}  // namespace tripath
