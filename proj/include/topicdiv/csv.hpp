#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace topicdiv::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; -1 when absent.
  int col(std::string_view name) const;
  // Column index by name; throws naming the column and file context.
  int require_col(std::string_view name, std::string_view context) const;
};

// RFC 4180 style: quoted fields, doubled quotes, CRLF tolerated.
Table read_string(std::string_view text, std::string_view context);
Table read_file(const std::filesystem::path& path);

// Shortest decimal string that round-trips the exact double.
std::string format_double(double x);

// strtod-compatible parse of a full field; throws with context on failure.
double parse_double(std::string_view field, std::string_view context);

// Empty field means missing (NaN); otherwise parse_double.
double parse_double_or_nan(std::string_view field, std::string_view context);

long long parse_int(std::string_view field, std::string_view context);

unsigned long long parse_uint(std::string_view field, std::string_view context);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  Writer& field(std::string_view s);
  Writer& field(double x);                 // format_double; NaN written as empty
  Writer& field(long long x);
  Writer& field(unsigned long long x);
  Writer& field(int x) { return field(static_cast<long long>(x)); }
  void end_row();

 private:
  std::ofstream out_;
  bool row_started_ = false;
  std::filesystem::path path_;
};

std::string quote_if_needed(std::string_view s);

}  // namespace topicdiv::csv
