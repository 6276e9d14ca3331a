#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tripath {

enum class LabelStatus { confirmed, needs_review, unlabeled };
enum class Split { train, val, test };

std::string_view to_string(LabelStatus status) noexcept;
std::string_view to_string(Split split) noexcept;
LabelStatus parse_label_status(std::string_view text);
Split parse_split(std::string_view text);

/// One query with its three generated paths and (optionally) a judge label.
/// label: 0 = non-hallucination, 1 = hallucination; present iff confirmed.
struct Record {
  std::string id;
  std::string question;
  std::string answer_direct;
  std::string answer_cot;
  std::string question_reverse;
  std::optional<int> label;
  LabelStatus label_status = LabelStatus::unlabeled;
  Split split = Split::train;

  bool operator==(const Record&) const = default;
};

/// Throws Error(InvalidField) when a record breaks its invariants.
void validate(const Record& record);

/// Parses line-delimited records. Blank lines are skipped; duplicate ids,
/// malformed lines and missing keys are reported with their 1-based line.
std::vector<Record> parse_dataset(std::string_view text);
std::vector<Record> load_dataset(const std::filesystem::path& path);

std::string serialize_record(const Record& record);
std::string serialize_dataset(std::span<const Record> records);
void save_dataset(const std::filesystem::path& path, std::span<const Record> records);

/// Records of `split` that are usable for training or scoring. Unconfirmed
/// records are excluded unless `include_unconfirmed` is set.
std::vector<Record> select_split(std::span<const Record> records, Split split,
                                 bool include_unconfirmed = false);

/// Minimal `{id, question}` input for the generation stage.
struct QueryItem {
  std::string id;
  std::string question;
};
std::vector<QueryItem> load_queries(const std::filesystem::path& path);

}  // namespace tripath
