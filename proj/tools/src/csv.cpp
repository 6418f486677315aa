#include "losscost_tools/csv.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace losscost::tools {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  return fmt::format("{:.17e}", x);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : path_(path), file_(std::fopen(path.string().c_str(), "wb")) {
  if (file_ == nullptr) throw std::runtime_error("cannot write " + path.string());
  for (auto h : header) field(h);
  end_row();
}

CsvWriter::~CsvWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

CsvWriter& CsvWriter::field(std::string_view text) {
  if (!first_) std::fputc(',', file_);
  std::fwrite(text.data(), 1, text.size(), file_);
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  std::fputc('\n', file_);
  first_ = true;
}

void CsvWriter::close() {
  if (file_ == nullptr) return;
  const bool failed = std::ferror(file_) != 0;
  std::fclose(file_);
  file_ = nullptr;
  if (failed) throw std::runtime_error("error writing " + path_.string());
}

}  // namespace losscost::tools
