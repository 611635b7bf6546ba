#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace brw {

inline constexpr std::string_view kToolVersion = "brw/0.1.0";

/// Shortest text that round-trips: 17 significant digits.
std::string format_double(double x);

/// Writes rows of a CSV document whose first line is a `#` comment carrying
/// schema name/version, tool version and config hash.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::string_view schema, int version, std::string_view config_hash,
            std::initializer_list<std::string_view> columns);

  CsvWriter& operator<<(double x);
  CsvWriter& operator<<(std::uint64_t x);
  CsvWriter& operator<<(std::int64_t x);
  CsvWriter& operator<<(unsigned x) { return *this << static_cast<std::uint64_t>(x); }
  CsvWriter& operator<<(int x) { return *this << static_cast<std::int64_t>(x); }
  CsvWriter& operator<<(bool x);
  CsvWriter& operator<<(std::string_view s);
  CsvWriter& operator<<(const char* s) { return *this << std::string_view(s); }
  CsvWriter& operator<<(const std::string& s) { return *this << std::string_view(s); }
  /// Terminates the current row.
  void end_row();

 private:
  void sep();
  std::ostream& out_;
  bool row_started_ = false;
};

}  // namespace brw
