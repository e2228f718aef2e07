#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rkmeans {

// Minimal RFC-4180 record reader over an in-memory document. Accepts LF or
// CRLF line endings and quoted fields with "" escapes.
class CsvReader {
 public:
  explicit CsvReader(std::string_view text) : text_(text) {}

  // Reads the next record into `fields`; returns false at end of input.
  bool next(std::vector<std::string>& fields);

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

// Writes one record, quoting fields that need it.
void write_csv_record(std::ostream& out, std::span<const std::string> fields);

}  // namespace rkmeans
