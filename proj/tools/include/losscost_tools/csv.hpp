#pragma once

#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace losscost::tools {

/// Full-precision scientific notation, the format of every real CSV field.
std::string format_real(double x);

/// Minimal CSV writer; fields are written verbatim, so callers pass labels
/// without commas or quotes.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double x) { return field(format_real(x)); }
  CsvWriter& field(int x) { return field(std::to_string(x)); }
  CsvWriter& field(long long x) { return field(std::to_string(x)); }
  CsvWriter& field(unsigned long long x) { return field(std::to_string(x)); }
  CsvWriter& field(std::size_t x) { return field(std::to_string(x)); }
  void end_row();
  void close();

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  bool first_ = true;
};

}  // namespace losscost::tools
