#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ksprune {

enum class DataFormat { kJsonl, kCsv };

DataFormat parse_format(std::string_view name);
std::string_view format_name(DataFormat format);

/// Address of one row: dataset id plus dense 0-based index.
struct RowRef {
  std::string dataset_id;
  std::size_t row_index = 0;

  friend bool operator==(const RowRef&, const RowRef&) = default;
  friend auto operator<=>(const RowRef&, const RowRef&) = default;
};

/// One context/question/answer row. Text fields are kept byte-for-byte as read.
struct CqaRecord {
  std::string dataset_id;
  std::size_t row_index = 0;
  std::string context;
  std::string question;
  std::string answer;
  std::string category;
  // Columns or keys beyond the three canonical ones, in source order. For
  // JSONL the value is the raw JSON encoding of the field.
  std::vector<std::pair<std::string, std::string>> extra;

  RowRef ref() const { return {dataset_id, row_index}; }
};

struct DatasetInfo {
  std::string id;
  std::string category;
  std::filesystem::path path;
  DataFormat format = DataFormat::kJsonl;
  bool is_protected = false;
};

/// A loaded dataset. `raw_rows[i]` is the exact byte span record i was parsed
/// from (without the terminating newline), so survivors can be re-emitted
/// unchanged.
struct Dataset {
  DatasetInfo info;
  std::vector<CqaRecord> records;
  std::vector<std::string> raw_rows;
  std::string csv_header;  // raw header line, CSV only
  std::size_t empty_answers = 0;
  std::size_t skipped_rows = 0;

  std::size_t size() const { return records.size(); }
};

struct LoadOptions {
  bool skip_bad_rows = false;
};

/// Immutable, manifest-ordered collection of datasets.
class DatasetRegistry {
 public:
  DatasetRegistry() = default;
  explicit DatasetRegistry(std::vector<Dataset> datasets);

  std::span<const Dataset> datasets() const { return datasets_; }
  std::size_t dataset_count() const { return datasets_.size(); }
  std::size_t total_rows() const;

  const Dataset& dataset(std::string_view id) const;
  const Dataset& dataset_at(std::size_t position) const { return datasets_.at(position); }
  std::size_t position_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  const CqaRecord& record(std::string_view dataset_id, std::size_t row_index) const;

 private:
  std::vector<Dataset> datasets_;
};

/// Reads a JSON manifest:
/// `{"datasets": [{"id", "category", "path", "format", "protected"}...]}`.
/// Relative paths resolve against the manifest's directory.
DatasetRegistry load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});

/// Loads a single dataset file described by `info`.
Dataset load_dataset(const DatasetInfo& info, const LoadOptions& options = {});

const CqaRecord& get_record(const DatasetRegistry& registry, std::string_view dataset_id,
                            std::size_t row_index);

/// Serializes records to `path`. CSV output writes a header with the three
/// canonical columns followed by the union of extra columns of the first record.
std::size_t write_dataset(std::span<const CqaRecord> records, const std::filesystem::path& path,
                          DataFormat format);

}  // namespace ksprune
