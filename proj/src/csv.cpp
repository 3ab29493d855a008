#include "csv.hpp"

#include <stdexcept>

namespace ksprune::csv {

std::optional<Row> Reader::next() {
  if (pos_ >= text_.size()) return std::nullopt;

  Row row;
  row.first_line = line_;
  const std::size_t start = pos_;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };

  while (pos_ < text_.size()) {
    const char c = text_[pos_];
    if (in_quotes) {
      if (c == '"') {
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
          field.push_back('"');
          pos_ += 2;
          continue;
        }
        in_quotes = false;
        ++pos_;
        continue;
      }
      if (c == '\n') ++line_;
      field.push_back(c);
      ++pos_;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        throw std::invalid_argument("unexpected quote inside unquoted field");
      }
      in_quotes = true;
      field_was_quoted = true;
      ++pos_;
      continue;
    }
    if (c == ',') {
      end_field();
      ++pos_;
      continue;
    }
    if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
      row.raw.assign(text_.substr(start, pos_ - start));
      pos_ += 2;
      ++line_;
      end_field();
      return row;
    }
    if (c == '\n') {
      row.raw.assign(text_.substr(start, pos_ - start));
      ++pos_;
      ++line_;
      end_field();
      return row;
    }
    if (field_was_quoted) throw std::invalid_argument("text after closing quote");
    field.push_back(c);
    ++pos_;
  }
  if (in_quotes) throw std::invalid_argument("unterminated quoted field");
  row.raw.assign(text_.substr(start));
  end_field();
  return row;
}

std::string escape_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape_field(fields[i]);
  }
  return out;
}

}  // namespace ksprune::csv
