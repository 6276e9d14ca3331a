#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tripath {

/// Reads a whole file; throws Error(IoError) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Replaces a directory atomically: `fill` populates a fresh temp directory
/// which is then renamed over `dir`.
template <typename Fill>
void atomic_write_dir(const std::filesystem::path& dir, Fill&& fill);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

std::string_view trim(std::string_view text) noexcept;
std::string collapse_whitespace(std::string_view text);

/// Shortest decimal form that parses back to the same double.
std::string format_real(double value);

std::filesystem::path temp_sibling(const std::filesystem::path& path);
void replace_path(const std::filesystem::path& from, const std::filesystem::path& to);

template <typename Fill>
void atomic_write_dir(const std::filesystem::path& dir, Fill&& fill) {
  const auto tmp = temp_sibling(dir);
  std::filesystem::remove_all(tmp);
  std::filesystem::create_directories(tmp);
  try {
    fill(tmp);
  } catch (...) {
    std::filesystem::remove_all(tmp);
    throw;
  }
  replace_path(tmp, dir);
}

}  // namespace tripath
