#include "brw/csv.hpp"

#include <cmath>
#include <cstdio>

namespace brw {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, std::string_view schema, int version, std::string_view config_hash,
                     std::initializer_list<std::string_view> columns)
    : out_(out) {
  out_ << "# schema=" << schema << '/' << version << " tool=" << kToolVersion << " config=" << config_hash
       << '\n';
  bool first = true;
  for (auto c : columns) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::sep() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::operator<<(double x) {
  sep();
  out_ << format_double(x);
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::uint64_t x) {
  sep();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::int64_t x) {
  sep();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::operator<<(bool x) {
  sep();
  out_ << (x ? 1 : 0);
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::string_view s) {
  sep();
  out_ << s;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
}

}  // namespace brw
