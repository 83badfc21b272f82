#include "topicdiv/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace topicdiv::csv {

namespace {

[[noreturn]] void fail(std::string_view context, const std::string& what) {
  throw std::runtime_error(std::string(context) + ": " + what);
}

}  // namespace

int Table::col(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require_col(std::string_view name, std::string_view context) const {
  const int i = col(name);
  if (i < 0) fail(context, "missing required column '" + std::string(name) + "'");
  return i;
}

Table read_string(std::string_view text, std::string_view context) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool any_char = false;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any_char = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field.empty() && !field_was_quoted) {
          in_quotes = true;
          field_was_quoted = true;
          any_char = true;
        } else {
          fail(context, "stray quote inside unquoted field");
        }
        break;
      case ',':
        end_field();
        any_char = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any_char || !record.empty() || !field.empty()) end_record();
        break;
      default:
        field.push_back(c);
        any_char = true;
        break;
    }
  }
  if (in_quotes) fail(context, "unterminated quoted field");
  if (any_char || !record.empty() || !field.empty()) {
    if (any_char) end_record();
  }

  if (records.empty()) fail(context, "empty CSV (no header row)");
  Table t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      std::ostringstream msg;
      msg << "row " << r << " has " << records[r].size() << " fields, expected "
          << t.header.size();
      fail(context, msg.str());
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_string(ss.str(), path.string());
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, std::string_view context) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(context, "invalid numeric field '" + std::string(field) + "'");
  }
  return value;
}

double parse_double_or_nan(std::string_view field, std::string_view context) {
  if (field.empty()) return std::nan("");
  return parse_double(field, context);
}

long long parse_int(std::string_view field, std::string_view context) {
  long long value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(context, "invalid integer field '" + std::string(field) + "'");
  }
  return value;
}

unsigned long long parse_uint(std::string_view field, std::string_view context) {
  unsigned long long value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(context, "invalid unsigned integer field '" + std::string(field) + "'");
  }
  return value;
}

std::string quote_if_needed(std::string_view s) {
  const bool needs = s.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open CSV output: " + path.string());
}

Writer& Writer::field(std::string_view s) {
  if (row_started_) out_ << ',';
  out_ << quote_if_needed(s);
  row_started_ = true;
  return *this;
}

Writer& Writer::field(double x) {
  if (std::isnan(x)) return field(std::string_view{});
  return field(std::string_view(format_double(x)));
}

Writer& Writer::field(long long x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return field(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
}

Writer& Writer::field(unsigned long long x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return field(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
}

void Writer::end_row() {
  out_ << '\n';
  row_started_ = false;
  if (!out_) throw std::runtime_error("write failure on CSV output: " + path_.string());
}

}  // namespace topicdiv::csv
