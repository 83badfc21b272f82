#include "topicdiv/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "topicdiv/csv.hpp"
#include "topicdiv/rng.hpp"

namespace topicdiv::corpus {

namespace {

enum class CharClass {
  space,
  punct,
  digit,
  latin,
  han,
  kana,
  hangul,
  cyrillic,
  greek,
  arabic,
  other_letter,
};

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

CharClass classify(char32_t c) {
  if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
      c == 0x00A0 || in(c, 0x2000, 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
      c == 0x205F || c == 0x3000) {
    return CharClass::space;
  }
  if (in(c, U'0', U'9') || in(c, 0xFF10, 0xFF19)) return CharClass::digit;
  if (in(c, 0x0021, 0x002F) || in(c, 0x003A, 0x0040) || in(c, 0x005B, 0x0060) ||
      in(c, 0x007B, 0x007E) || in(c, 0x00A1, 0x00BF) || c == 0x00D7 || c == 0x00F7 ||
      in(c, 0x2010, 0x205E) || in(c, 0x3001, 0x303F) || in(c, 0xFF01, 0xFF0F) ||
      in(c, 0xFF1A, 0xFF20) || in(c, 0xFF3B, 0xFF40) || in(c, 0xFF5B, 0xFF65) ||
      c == 0xFFFD) {
    return CharClass::punct;
  }
  if (in(c, U'a', U'z') || in(c, U'A', U'Z') || in(c, 0x00C0, 0x00FF) ||
      in(c, 0x0100, 0x024F)) {
    return CharClass::latin;
  }
  if (in(c, 0x4E00, 0x9FFF) || in(c, 0x3400, 0x4DBF) || in(c, 0xF900, 0xFAFF)) {
    return CharClass::han;
  }
  if (in(c, 0x3040, 0x30FF) || in(c, 0x31F0, 0x31FF)) return CharClass::kana;
  if (in(c, 0xAC00, 0xD7AF) || in(c, 0x1100, 0x11FF)) return CharClass::hangul;
  if (in(c, 0x0400, 0x04FF)) return CharClass::cyrillic;
  if (in(c, 0x0370, 0x03FF)) return CharClass::greek;
  if (in(c, 0x0600, 0x06FF)) return CharClass::arabic;
  if (c < 0x80) return CharClass::punct;  // residual ASCII control chars
  return CharClass::other_letter;
}

char32_t fold(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 0x20;
  if (c >= 0xFF21 && c <= 0xFF3A) return c - 0xFF21 + U'a';  // fullwidth Latin
  return c;
}

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

// Decodes one code point; invalid sequences yield U+FFFD and advance one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    const char32_t c = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
    i += 2;
    return c < 0x80 ? 0xFFFD : c;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    const char32_t c = ((b0 & 0x0Fu) << 12) |
                       ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
    i += 3;
    if (c < 0x800 || (c >= 0xD800 && c <= 0xDFFF)) return 0xFFFD;
    return c;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    const char32_t c = ((b0 & 0x07u) << 18) |
                       ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                       ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
                       (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
    i += 4;
    return (c < 0x10000 || c > 0x10FFFF) ? 0xFFFD : c;
  }
  ++i;
  return 0xFFFD;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t before = i;
    if (decode_utf8(s, i) == 0xFFFD && static_cast<unsigned char>(s[before]) >= 0x80) {
      return false;
    }
  }
  return true;
}

struct Unit {
  std::string text;
  bool all_digits = true;
};

// Maximal runs of same-script letter/digit code points; digits merge into
// Latin runs so alphanumerics like "co2" stay whole.
std::vector<Unit> split_units(std::string_view text) {
  std::vector<Unit> units;
  Unit cur;
  CharClass cur_class = CharClass::space;

  auto flush = [&] {
    if (!cur.text.empty()) units.push_back(std::move(cur));
    cur = Unit{};
    cur_class = CharClass::space;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t folded = fold(decode_utf8(text, i));
    const CharClass cls = classify(folded);
    if (cls == CharClass::space || cls == CharClass::punct) {
      flush();
      continue;
    }
    const bool mergeable =
        !cur.text.empty() &&
        (cls == cur_class ||
         (cls == CharClass::digit && cur_class == CharClass::latin) ||
         (cls == CharClass::latin && cur_class == CharClass::digit));
    if (!mergeable && !cur.text.empty()) flush();
    append_utf8(cur.text, folded);
    if (cls != CharClass::digit) cur.all_digits = false;
    if (cur_class == CharClass::space || cls == CharClass::latin) cur_class = cls;
  }
  flush();
  return units;
}

std::vector<std::string> read_entry_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

std::string join_units(const std::vector<std::string>& units) {
  std::string out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i) out.push_back(' ');
    out += units[i];
  }
  return out;
}

}  // namespace

Lexicon Lexicon::from_lists(std::span<const std::string> entries,
                            std::span<const std::string> stopwords) {
  const Lexicon empty;
  Lexicon lex;

  std::set<std::vector<std::string>> seen_entries;
  for (const std::string& raw : entries) {
    std::vector<std::string> units = tokenize(raw, empty);
    if (units.empty()) continue;
    if (!seen_entries.insert(units).second) continue;
    lex.by_first_[units.front()].push_back(std::move(units));
    ++lex.entry_count_;
  }
  for (auto& [first, seqs] : lex.by_first_) {
    std::sort(seqs.begin(), seqs.end(), [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return a.size() > b.size();
      return a < b;
    });
  }

  for (const std::string& raw : stopwords) {
    const std::vector<std::string> units = tokenize(raw, empty);
    if (units.empty()) continue;
    lex.stopwords_[join_units(units)] = true;
  }

  for (const auto& [first, seqs] : lex.by_first_) {
    for (const auto& seq : seqs) {
      const std::string normalized = join_units(seq);
      if (lex.stopwords_.count(normalized)) {
        throw std::runtime_error("lexicon entry '" + normalized +
                                 "' is also a stopword; the sets must be disjoint");
      }
    }
  }
  return lex;
}

Lexicon Lexicon::from_files(const std::filesystem::path& entries_path,
                            const std::filesystem::path& stopwords_path) {
  std::vector<std::string> entries;
  std::vector<std::string> stopwords;
  if (!entries_path.empty()) entries = read_entry_lines(entries_path);
  if (!stopwords_path.empty()) stopwords = read_entry_lines(stopwords_path);
  return from_lists(entries, stopwords);
}

bool Lexicon::is_stopword(const std::string& unit) const {
  return stopwords_.count(unit) > 0;
}

const std::vector<std::vector<std::string>>* Lexicon::entries_starting_with(
    const std::string& first) const {
  const auto it = by_first_.find(first);
  return it == by_first_.end() ? nullptr : &it->second;
}

std::vector<std::string> tokenize(std::string_view text, const Lexicon& lexicon) {
  std::vector<Unit> units = split_units(text);

  // Digits-only units never reach lexicon matching; entries were normalized
  // through this same path so they cannot contain one either.
  std::vector<Unit> kept;
  kept.reserve(units.size());
  for (auto& u : units) {
    if (!u.all_digits) kept.push_back(std::move(u));
  }

  std::vector<std::string> out;
  out.reserve(kept.size());
  std::size_t i = 0;
  while (i < kept.size()) {
    const std::vector<std::vector<std::string>>* candidates =
        lexicon.entries_starting_with(kept[i].text);
    bool matched = false;
    if (candidates) {
      for (const auto& seq : *candidates) {
        if (i + seq.size() > kept.size()) continue;
        bool ok = true;
        for (std::size_t k = 1; k < seq.size(); ++k) {
          if (kept[i + k].text != seq[k]) {
            ok = false;
            break;
          }
        }
        if (ok) {
          out.push_back(join_units(seq));
          i += seq.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      if (!lexicon.is_stopword(kept[i].text)) out.push_back(kept[i].text);
      ++i;
    }
  }
  return out;
}

std::vector<RawDocument> load_corpus(const std::filesystem::path& manifest_path,
                                     const std::filesystem::path& text_dir) {
  const csv::Table manifest = csv::read_file(manifest_path);
  const std::string ctx = manifest_path.string();
  const int c_doc = manifest.require_col("doc_id", ctx);
  const int c_firm = manifest.require_col("firm_id", ctx);
  const int c_year = manifest.require_col("year", ctx);
  const int c_file = manifest.require_col("filename", ctx);

  std::vector<RawDocument> docs;
  docs.reserve(manifest.rows.size());
  std::map<std::pair<std::string, int>, std::string> seen;
  std::set<std::string> seen_ids;

  for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
    const auto& row = manifest.rows[r];
    RawDocument doc;
    doc.doc_id = row[static_cast<std::size_t>(c_doc)];
    doc.firm_id = row[static_cast<std::size_t>(c_firm)];
    std::ostringstream where;
    where << ctx << " row " << (r + 1) << " (doc_id=" << doc.doc_id << ")";
    if (doc.doc_id.empty()) throw std::runtime_error(where.str() + ": empty doc_id");
    if (doc.firm_id.empty()) throw std::runtime_error(where.str() + ": empty firm_id");
    if (!seen_ids.insert(doc.doc_id).second) {
      throw std::runtime_error(where.str() + ": duplicate doc_id");
    }
    doc.year = static_cast<int>(csv::parse_int(row[static_cast<std::size_t>(c_year)], where.str()));

    const auto key = std::make_pair(doc.firm_id, doc.year);
    const auto [it, inserted] = seen.emplace(key, doc.doc_id);
    if (!inserted) {
      throw std::runtime_error(where.str() + ": duplicate (firm_id, year) also used by doc_id=" +
                               it->second);
    }

    const std::filesystem::path file = text_dir / row[static_cast<std::size_t>(c_file)];
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error(where.str() + ": cannot open text file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    doc.text = ss.str();
    if (!valid_utf8(doc.text)) {
      throw std::runtime_error(where.str() + ": text file is not valid UTF-8: " + file.string());
    }
    if (doc.text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
      throw std::runtime_error(where.str() + ": text file is empty: " + file.string());
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<TokenizedDocument> tokenize_corpus(std::span<const RawDocument> docs,
                                               const Lexicon& lexicon) {
  std::vector<TokenizedDocument> out;
  out.reserve(docs.size());
  for (const RawDocument& doc : docs) {
    out.push_back({doc.doc_id, tokenize(doc.text, lexicon)});
  }
  return out;
}

int Vocabulary::id_of(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? -1 : it->second;
}

void Vocabulary::save_csv(const std::filesystem::path& path) const {
  csv::Writer w(path);
  w.field("id").field("token").field("doc_freq");
  w.end_row();
  for (int i = 0; i < size(); ++i) {
    w.field(static_cast<long long>(i)).field(id_to_token_[static_cast<std::size_t>(i)])
        .field(static_cast<long long>(doc_freq_[static_cast<std::size_t>(i)]));
    w.end_row();
  }
}

Vocabulary Vocabulary::load_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_id = t.require_col("id", ctx);
  const int c_token = t.require_col("token", ctx);
  const int c_df = t.require_col("doc_freq", ctx);
  Vocabulary v;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long long id = csv::parse_int(t.rows[r][static_cast<std::size_t>(c_id)], ctx);
    if (id != static_cast<long long>(r)) {
      throw std::runtime_error(ctx + ": vocabulary ids must be dense and ascending");
    }
    v.id_to_token_.push_back(t.rows[r][static_cast<std::size_t>(c_token)]);
    v.doc_freq_.push_back(
        static_cast<int>(csv::parse_int(t.rows[r][static_cast<std::size_t>(c_df)], ctx)));
    v.token_to_id_[v.id_to_token_.back()] = static_cast<int>(r);
  }
  if (v.id_to_token_.empty()) throw std::runtime_error(ctx + ": empty vocabulary");
  return v;
}

Vocabulary build_vocabulary(std::span<const TokenizedDocument> docs, int min_doc_freq) {
  if (min_doc_freq < 1) throw std::invalid_argument("build_vocabulary: min_doc_freq must be >= 1");

  std::map<std::string, std::pair<long long, int>> freq;  // token -> (corpus freq, doc freq)
  std::set<std::string> in_doc;
  for (const TokenizedDocument& doc : docs) {
    in_doc.clear();
    for (const std::string& tok : doc.tokens) {
      auto& [cf, df] = freq[tok];
      ++cf;
      if (in_doc.insert(tok).second) ++df;
    }
  }

  std::vector<std::pair<std::string, std::pair<long long, int>>> kept;
  for (auto& [tok, counts] : freq) {
    if (counts.second >= min_doc_freq) kept.emplace_back(tok, counts);
  }
  if (kept.empty()) {
    throw std::runtime_error(
        "build_vocabulary: no token survives the document-frequency threshold");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });

  Vocabulary v;
  v.id_to_token_.reserve(kept.size());
  for (auto& [tok, counts] : kept) {
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
    v.doc_freq_.push_back(counts.second);
  }
  return v;
}

EncodeResult encode(std::span<const TokenizedDocument> docs, const Vocabulary& vocab) {
  EncodeResult result;
  result.docs.reserve(docs.size());
  for (const TokenizedDocument& doc : docs) {
    std::map<std::int32_t, std::int32_t> counts;
    for (const std::string& tok : doc.tokens) {
      const int id = vocab.id_of(tok);
      if (id >= 0) ++counts[id];
    }
    if (counts.empty()) {
      result.dropped_doc_ids.push_back(doc.doc_id);
      continue;
    }
    EncodedDocument enc;
    enc.doc_id = doc.doc_id;
    enc.counts.assign(counts.begin(), counts.end());
    for (const auto& [id, n] : enc.counts) enc.total_tokens += n;
    result.docs.push_back(std::move(enc));
  }
  return result;
}

CorpusSplit split_train_validation(std::span<const EncodedDocument> docs,
                                   double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("split_train_validation: fraction must be in (0, 1)");
  }
  if (docs.size() < 2) {
    throw std::invalid_argument("split_train_validation: need at least two documents");
  }
  const std::size_t n = docs.size();
  // The 1e-9 slack keeps ceil exact on binary fractions like 0.2 * 10.
  auto m = static_cast<std::size_t>(
      std::ceil(validation_fraction * static_cast<double>(n) - 1e-9));
  m = std::min(std::max<std::size_t>(m, 1), n);

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<bool> is_validation(n, false);
  for (std::size_t i = 0; i < m; ++i) is_validation[idx[i]] = true;

  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    (is_validation[i] ? split.validation : split.train).push_back(docs[i]);
  }
  return split;
}

void write_encoded_csv(const std::filesystem::path& path,
                       std::span<const EncodedDocument> docs) {
  csv::Writer w(path);
  w.field("doc_id").field("token_id").field("count");
  w.end_row();
  for (const EncodedDocument& doc : docs) {
    for (const auto& [id, n] : doc.counts) {
      w.field(doc.doc_id).field(static_cast<long long>(id)).field(static_cast<long long>(n));
      w.end_row();
    }
  }
}

std::vector<EncodedDocument> read_encoded_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_doc = t.require_col("doc_id", ctx);
  const int c_id = t.require_col("token_id", ctx);
  const int c_n = t.require_col("count", ctx);

  std::vector<EncodedDocument> docs;
  for (const auto& row : t.rows) {
    const std::string& doc_id = row[static_cast<std::size_t>(c_doc)];
    if (docs.empty() || docs.back().doc_id != doc_id) {
      docs.push_back(EncodedDocument{doc_id, {}, 0});
    }
    const auto id = static_cast<std::int32_t>(csv::parse_int(row[static_cast<std::size_t>(c_id)], ctx));
    const auto n = static_cast<std::int32_t>(csv::parse_int(row[static_cast<std::size_t>(c_n)], ctx));
    if (n <= 0) throw std::runtime_error(ctx + ": non-positive count for doc " + doc_id);
    if (!docs.back().counts.empty() && docs.back().counts.back().first >= id) {
      throw std::runtime_error(ctx + ": token ids must be ascending within doc " + doc_id);
    }
    docs.back().counts.emplace_back(id, n);
    docs.back().total_tokens += n;
  }
  return docs;
}

}  // namespace topicdiv::corpus
