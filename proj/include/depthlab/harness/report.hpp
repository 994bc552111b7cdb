#pragma once

#include <string>
#include <vector>

namespace depthlab::harness {

// Shortest round-trip decimal form; keeps report bytes stable across runs.
std::string format_double(double v);

std::string fnv1a_hex(const std::string& bytes);

// Minimal RFC-4180 writer: header row, CRLF line endings, quoting only when
// a cell needs it.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text_file(const std::string& path, const std::string& text);

}  // namespace depthlab::harness
