#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace testsupport {

// Self-cleaning scratch directory for filesystem-facing tests.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / ("topicdiv_test_" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create a scratch directory");
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_file: cannot open " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("slurp: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline int count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  int n = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// Minimal well-formedness scan for the emitted SVGs: tags balance, exactly one
// root element, attributes stay inside quotes. Not a general XML parser.
inline bool xml_well_formed(std::string_view text) {
  std::vector<std::string> stack;
  int roots = 0;
  std::size_t i = 0;
  auto skip_until = [&](std::string_view end) {
    auto pos = text.find(end, i);
    if (pos == std::string_view::npos) return false;
    i = pos + end.size();
    return true;
  };
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    if (text.compare(i, 2, "<?") == 0) {
      if (!skip_until("?>")) return false;
      continue;
    }
    if (text.compare(i, 4, "<!--") == 0) {
      if (!skip_until("-->")) return false;
      continue;
    }
    bool closing = text.compare(i, 2, "</") == 0;
    std::size_t name_start = i + (closing ? 2 : 1);
    std::size_t j = name_start;
    while (j < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == ':' || text[j] == '-' ||
            text[j] == '_')) {
      ++j;
    }
    if (j == name_start) return false;
    std::string name(text.substr(name_start, j - name_start));
    bool in_quote = false;
    char quote = 0;
    std::size_t end = std::string_view::npos;
    for (std::size_t k = j; k < text.size(); ++k) {
      char c = text[k];
      if (in_quote) {
        if (c == quote) in_quote = false;
      } else if (c == '"' || c == '\'') {
        in_quote = true;
        quote = c;
      } else if (c == '>') {
        end = k;
        break;
      }
    }
    if (end == std::string_view::npos) return false;
    bool self_closing = end > j && text[end - 1] == '/';
    if (closing) {
      if (self_closing || stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      if (stack.empty()) {
        ++roots;
        if (roots > 1) return false;
      }
      if (!self_closing) stack.push_back(name);
    }
    i = end + 1;
  }
  return stack.empty() && roots == 1;
}

// Runs fn, expecting an exception whose what() contains `fragment`.
template <typename Fn>
bool throws_with(Fn&& fn, std::string_view fragment) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string_view(e.what()).find(fragment) != std::string_view::npos;
  }
  return false;
}

}  // namespace testsupport
