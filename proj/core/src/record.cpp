#include "tripath/record.hpp"

#include <unordered_set>

#include "json.hpp"
#include "tripath/error.hpp"
#include "tripath/io_util.hpp"

namespace tripath {

using nlohmann::json;

std::string_view to_string(LabelStatus status) noexcept {
  switch (status) {
    case LabelStatus::confirmed: return "confirmed";
    case LabelStatus::needs_review: return "needs_review";
    case LabelStatus::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

LabelStatus parse_label_status(std::string_view text) {
  if (text == "confirmed") return LabelStatus::confirmed;
  if (text == "needs_review") return LabelStatus::needs_review;
  if (text == "unlabeled") return LabelStatus::unlabeled;
  throw Error(ErrorCode::InvalidField, "unknown label_status '" + std::string(text) + "'",
              "label_status");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw Error(ErrorCode::InvalidField, "unknown split '" + std::string(text) + "'", "split");
}

void validate(const Record& record) {
  if (record.id.empty()) throw Error(ErrorCode::InvalidField, "id is empty", "id");
  if (record.question.empty()) {
    throw Error(ErrorCode::InvalidField, "question is empty in record " + record.id, "question");
  }
  if (record.label && *record.label != 0 && *record.label != 1) {
    throw Error(ErrorCode::InvalidField, "label must be 0 or 1 in record " + record.id, "label");
  }
  const bool confirmed = record.label_status == LabelStatus::confirmed;
  if (confirmed != record.label.has_value()) {
    throw Error(ErrorCode::InvalidField,
                "label must be present iff label_status is confirmed (record " + record.id + ")",
                "label");
  }
}

namespace {

constexpr const char* kKeys[] = {"id",       "question", "answer_direct", "answer_cot",
                                 "question_reverse", "label", "label_status", "split"};

std::string string_field(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    throw Error(ErrorCode::InvalidField, std::string(key) + " must be a string", key);
  }
  return v.get<std::string>();
}

Record record_from_json(const json& obj) {
  for (const char* key : kKeys) {
    if (!obj.contains(key)) throw Error(ErrorCode::MissingField, "missing key", key);
  }
  Record r;
  r.id = string_field(obj, "id");
  r.question = string_field(obj, "question");
  r.answer_direct = string_field(obj, "answer_direct");
  r.answer_cot = string_field(obj, "answer_cot");
  r.question_reverse = string_field(obj, "question_reverse");
  const auto& label = obj.at("label");
  if (label.is_number_integer()) {
    r.label = label.get<int>();
  } else if (!label.is_null()) {
    throw Error(ErrorCode::InvalidField, "label must be 0, 1 or null", "label");
  }
  r.label_status = parse_label_status(string_field(obj, "label_status"));
  r.split = parse_split(string_field(obj, "split"));
  validate(r);
  return r;
}

json record_to_json(const Record& r) {
  json obj = json::object();
  obj["id"] = r.id;
  obj["question"] = r.question;
  obj["answer_direct"] = r.answer_direct;
  obj["answer_cot"] = r.answer_cot;
  obj["question_reverse"] = r.question_reverse;
  obj["label"] = r.label ? json(*r.label) : json(nullptr);
  obj["label_status"] = std::string(to_string(r.label_status));
  obj["split"] = std::string(to_string(r.split));
  return obj;
}

}  // namespace

std::vector<Record> parse_dataset(std::string_view text) {
  std::vector<Record> records;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + " is not a JSON object",
                  {}, line_no);
    }
    Record r;
    try {
      r = record_from_json(obj);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (line " + std::to_string(line_no) + ")",
                  e.subject(), line_no);
    }
    if (!seen.insert(r.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id " + r.id, r.id, line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Record> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

std::string serialize_record(const Record& record) { return record_to_json(record).dump(); }

std::string serialize_dataset(std::span<const Record> records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, std::span<const Record> records) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    validate(r);
    if (!seen.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "duplicate id " + r.id, r.id);
  }
  atomic_write(path, serialize_dataset(records));
}

std::vector<Record> select_split(std::span<const Record> records, Split split,
                                 bool include_unconfirmed) {
  std::vector<Record> out;
  for (const auto& r : records) {
    if (r.split != split) continue;
    if (!include_unconfirmed && r.label_status != LabelStatus::confirmed) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<QueryItem> load_queries(const std::filesystem::path& path) {
  std::vector<QueryItem> items;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  const auto text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + " is not a JSON object",
                  {}, line_no);
    }
    for (const char* key : {"id", "question"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw Error(ErrorCode::MissingField, "missing string key at line " + std::to_string(line_no),
                    key, line_no);
      }
    }
    QueryItem item{obj["id"].get<std::string>(), obj["question"].get<std::string>()};
    if (item.id.empty() || trim(item.question).empty()) {
      throw Error(ErrorCode::InvalidField, "empty id or question", "question", line_no);
    }
    if (!seen.insert(item.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id " + item.id, item.id, line_no);
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace tripath
