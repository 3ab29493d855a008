#include "ksprune/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "ksprune/errors.hpp"

namespace ksprune {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

void note_empty_answer(Dataset& ds, const CqaRecord& rec) {
  if (rec.answer.empty()) {
    ++ds.empty_answers;
    spdlog::debug("{}: row {} has an empty answer", ds.info.id, rec.row_index);
  }
}

void load_jsonl(Dataset& ds, const std::string& text, const LoadOptions& options) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;

    try {
      auto obj = ordered_json::parse(line);
      if (!obj.is_object()) throw std::invalid_argument("row is not a JSON object");
      CqaRecord rec;
      rec.dataset_id = ds.info.id;
      rec.row_index = ds.records.size();
      rec.category = ds.info.category;
      for (const char* key : {"context", "question", "answer"}) {
        auto it = obj.find(key);
        if (it == obj.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
        if (!it->is_string()) throw std::invalid_argument(std::string("field \"") + key + "\" is not a string");
      }
      rec.context = obj["context"].get<std::string>();
      rec.question = obj["question"].get<std::string>();
      rec.answer = obj["answer"].get<std::string>();
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (it.key() == "context" || it.key() == "question" || it.key() == "answer") continue;
        rec.extra.emplace_back(it.key(), it.value().dump());
      }
      note_empty_answer(ds, rec);
      ds.records.push_back(std::move(rec));
      ds.raw_rows.emplace_back(line);
    } catch (const std::exception& e) {
      ParseError err(ds.info.path.string(), line_no, e.what());
      if (!options.skip_bad_rows) throw err;
      ++ds.skipped_rows;
      spdlog::warn("skipping bad row: {}", err.what());
    }
  }
}

void load_csv(Dataset& ds, const std::string& text, const LoadOptions& options) {
  csv::Reader reader(text);
  std::optional<csv::Row> header;
  try {
    header = reader.next();
  } catch (const std::invalid_argument& e) {
    throw ParseError(ds.info.path.string(), 1, e.what());
  }
  if (!header) return;
  ds.csv_header = header->raw;

  int col_context = -1, col_question = -1, col_answer = -1;
  for (std::size_t i = 0; i < header->fields.size(); ++i) {
    const auto& name = header->fields[i];
    if (name == "context") col_context = static_cast<int>(i);
    else if (name == "question") col_question = static_cast<int>(i);
    else if (name == "answer") col_answer = static_cast<int>(i);
  }
  if (col_context < 0 || col_question < 0 || col_answer < 0) {
    throw ParseError(ds.info.path.string(), 1, "CSV header must name context, question and answer columns");
  }

  while (true) {
    std::optional<csv::Row> row;
    const std::size_t line_no = reader.line();
    try {
      row = reader.next();
    } catch (const std::invalid_argument& e) {
      // Quoting errors desynchronize the reader; there is no safe way to skip.
      throw ParseError(ds.info.path.string(), line_no, e.what());
    }
    if (!row) break;
    if (row->fields.size() == 1 && is_blank(row->raw)) continue;
    if (row->fields.size() != header->fields.size()) {
      ParseError err(ds.info.path.string(), row->first_line,
                     "expected " + std::to_string(header->fields.size()) + " columns, got " +
                         std::to_string(row->fields.size()));
      if (!options.skip_bad_rows) throw err;
      ++ds.skipped_rows;
      spdlog::warn("skipping bad row: {}", err.what());
      continue;
    }
    CqaRecord rec;
    rec.dataset_id = ds.info.id;
    rec.row_index = ds.records.size();
    rec.category = ds.info.category;
    rec.context = row->fields[col_context];
    rec.question = row->fields[col_question];
    rec.answer = row->fields[col_answer];
    for (std::size_t i = 0; i < row->fields.size(); ++i) {
      if (static_cast<int>(i) == col_context || static_cast<int>(i) == col_question ||
          static_cast<int>(i) == col_answer) {
        continue;
      }
      rec.extra.emplace_back(header->fields[i], row->fields[i]);
    }
    note_empty_answer(ds, rec);
    ds.records.push_back(std::move(rec));
    ds.raw_rows.push_back(std::move(row->raw));
  }
}

}  // namespace

DataFormat parse_format(std::string_view name) {
  if (name == "jsonl") return DataFormat::kJsonl;
  if (name == "csv") return DataFormat::kCsv;
  throw ConfigError("unknown dataset format \"" + std::string(name) + "\" (expected jsonl or csv)");
}

std::string_view format_name(DataFormat format) {
  return format == DataFormat::kJsonl ? "jsonl" : "csv";
}

DatasetRegistry::DatasetRegistry(std::vector<Dataset> datasets) : datasets_(std::move(datasets)) {
  std::unordered_set<std::string> seen;
  for (const auto& ds : datasets_) {
    if (!seen.insert(ds.info.id).second) throw ConfigError("duplicate dataset id \"" + ds.info.id + "\"");
  }
}

std::size_t DatasetRegistry::total_rows() const {
  std::size_t n = 0;
  for (const auto& ds : datasets_) n += ds.size();
  return n;
}

std::size_t DatasetRegistry::position_of(std::string_view id) const {
  for (std::size_t i = 0; i < datasets_.size(); ++i) {
    if (datasets_[i].info.id == id) return i;
  }
  throw LookupError("unknown dataset \"" + std::string(id) + "\"");
}

bool DatasetRegistry::contains(std::string_view id) const {
  for (const auto& ds : datasets_) {
    if (ds.info.id == id) return true;
  }
  return false;
}

const Dataset& DatasetRegistry::dataset(std::string_view id) const {
  return datasets_[position_of(id)];
}

const CqaRecord& DatasetRegistry::record(std::string_view dataset_id, std::size_t row_index) const {
  const Dataset& ds = dataset(dataset_id);
  if (row_index >= ds.size()) {
    throw LookupError("row " + std::to_string(row_index) + " out of range for dataset \"" +
                      std::string(dataset_id) + "\" (" + std::to_string(ds.size()) + " rows)");
  }
  return ds.records[row_index];
}

Dataset load_dataset(const DatasetInfo& info, const LoadOptions& options) {
  Dataset ds;
  ds.info = info;
  const std::string text = read_file(info.path);
  if (info.format == DataFormat::kJsonl) {
    load_jsonl(ds, text, options);
  } else {
    load_csv(ds, text, options);
  }
  if (ds.records.empty()) spdlog::warn("dataset \"{}\" ({}) has no rows", info.id, info.path.string());
  if (ds.empty_answers > 0) {
    spdlog::warn("dataset \"{}\": {} row(s) with an empty answer", info.id, ds.empty_answers);
  }
  return ds;
}

DatasetRegistry load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw ConfigError("manifest not found: " + path.string());
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  const auto entries = manifest.contains("datasets") ? manifest["datasets"] : manifest;
  if (!entries.is_array() || entries.empty()) {
    throw ConfigError("manifest " + path.string() + " must list at least one dataset");
  }

  const auto base = path.parent_path();
  std::vector<DatasetInfo> infos;
  std::unordered_set<std::string> seen;
  for (const auto& entry : entries) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("path")) {
      throw ConfigError("manifest entries need at least \"id\" and \"path\"");
    }
    DatasetInfo info;
    info.id = entry["id"].get<std::string>();
    if (info.id.empty()) throw ConfigError("dataset id must not be empty");
    if (!seen.insert(info.id).second) throw ConfigError("duplicate dataset id \"" + info.id + "\" in manifest");
    info.category = entry.value("category", std::string{});
    std::filesystem::path p = entry["path"].get<std::string>();
    info.path = p.is_absolute() ? p : base / p;
    info.format = parse_format(entry.value("format", std::string("jsonl")));
    info.is_protected = entry.value("protected", false);
    if (!std::filesystem::exists(info.path)) {
      throw ConfigError("dataset \"" + info.id + "\": file not found: " + info.path.string());
    }
    infos.push_back(std::move(info));
  }

  std::vector<Dataset> datasets;
  datasets.reserve(infos.size());
  for (const auto& info : infos) datasets.push_back(load_dataset(info, options));
  return DatasetRegistry(std::move(datasets));
}

const CqaRecord& get_record(const DatasetRegistry& registry, std::string_view dataset_id,
                            std::size_t row_index) {
  return registry.record(dataset_id, row_index);
}

std::size_t write_dataset(std::span<const CqaRecord> records, const std::filesystem::path& path,
                          DataFormat format) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  if (format == DataFormat::kJsonl) {
    for (const auto& rec : records) {
      ordered_json obj;
      obj["context"] = rec.context;
      obj["question"] = rec.question;
      obj["answer"] = rec.answer;
      for (const auto& [key, raw] : rec.extra) obj[key] = ordered_json::parse(raw);
      out << obj.dump() << '\n';
    }
  } else {
    std::vector<std::string> header = {"context", "question", "answer"};
    if (!records.empty()) {
      for (const auto& [key, value] : records.front().extra) header.push_back(key);
    }
    out << csv::join_row(header) << '\n';
    for (const auto& rec : records) {
      if (rec.extra.size() + 3 != header.size()) {
        throw ConfigError("CSV output requires records with identical extra columns");
      }
      std::vector<std::string> fields = {rec.context, rec.question, rec.answer};
      for (const auto& [key, value] : rec.extra) fields.push_back(value);
      out << csv::join_row(fields) << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
  return records.size();
}

}  // namespace ksprune
