#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace dialogkit {

// Line-oriented reader over plain or gzip-compressed files (detected by
// content, so .jsonl and .jsonl.gz both work through the same path).
class LineReader {
 public:
  explicit LineReader(const std::string& path);  // throws DataError when unreadable
  ~LineReader();
  LineReader(LineReader&&) noexcept;
  LineReader& operator=(LineReader&&) noexcept;

  // Fills `line` (without trailing newline) and returns true, or returns
  // false at end of input.
  bool next(std::string& line);

  const std::string& path() const;
  std::size_t line_number() const;  // 1-based index of the last returned line

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Expands input patterns into a sorted, deduplicated path list. '*', '?' and
// '[' are interpreted in the final path component; a literal path must exist
// or DataError is thrown.
std::vector<std::string> glob_paths(const std::vector<std::string>& patterns);

// Parses one JSONL line, attaching file/line context to parse failures.
nlohmann::json parse_json_line(const std::string& line, const std::string& path,
                               std::size_t lineno);

}  // namespace dialogkit
