#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ksprune::csv {

/// One physical CSV record, which may span several lines when a quoted
/// field contains newlines.
struct Row {
  std::vector<std::string> fields;
  std::string raw;          // record text without the trailing line break
  std::size_t first_line;   // 1-based
};

/// Incremental RFC 4180 reader over an in-memory buffer.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  /// Returns the next record, or nullopt at end of input. Throws
  /// std::invalid_argument with a reason on malformed quoting.
  std::optional<Row> next();
  std::size_t line() const { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

std::string escape_field(std::string_view field);
std::string join_row(const std::vector<std::string>& fields);

}  // namespace ksprune::csv
