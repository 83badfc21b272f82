#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topicdiv::corpus {

struct RawDocument {
  std::string doc_id;
  std::string firm_id;
  int year = 0;
  std::string text;
};

// Multi-word entries emitted as single atomic tokens, plus a stopword set.
// Both are normalized through the same unit segmentation as document text,
// so matching is exact by construction.
class Lexicon {
 public:
  Lexicon() = default;

  static Lexicon from_lists(std::span<const std::string> entries,
                            std::span<const std::string> stopwords);
  // Either path may be empty; missing files are an error, empty paths are not.
  static Lexicon from_files(const std::filesystem::path& entries_path,
                            const std::filesystem::path& stopwords_path);

  bool is_stopword(const std::string& unit) const;
  // Entry unit sequences starting with `first`, longest first; nullptr if none.
  const std::vector<std::vector<std::string>>* entries_starting_with(
      const std::string& first) const;

  std::size_t entry_count() const { return entry_count_; }
  std::size_t stopword_count() const { return stopwords_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> by_first_;
  std::unordered_map<std::string, bool> stopwords_;
  std::size_t entry_count_ = 0;
};

// Lowercase-folds, strips punctuation, segments on script boundaries,
// drops digits-only units, applies lexicon entries greedily (longest first),
// removes stopwords last. Idempotent on its own output.
std::vector<std::string> tokenize(std::string_view text, const Lexicon& lexicon);

struct TokenizedDocument {
  std::string doc_id;
  std::vector<std::string> tokens;
};

// Manifest columns: doc_id,firm_id,year,filename. Text files live under
// text_dir. Errors cite doc_id and row number.
std::vector<RawDocument> load_corpus(const std::filesystem::path& manifest_path,
                                     const std::filesystem::path& text_dir);

std::vector<TokenizedDocument> tokenize_corpus(std::span<const RawDocument> docs,
                                               const Lexicon& lexicon);

class Vocabulary {
 public:
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id_of(const std::string& token) const;
  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  int doc_freq(int id) const { return doc_freq_.at(static_cast<std::size_t>(id)); }

  void save_csv(const std::filesystem::path& path) const;
  static Vocabulary load_csv(const std::filesystem::path& path);

  friend Vocabulary build_vocabulary(std::span<const TokenizedDocument>, int);

 private:
  std::vector<std::string> id_to_token_;
  std::vector<int> doc_freq_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Ids ordered by descending total corpus frequency, ties lexicographic.
// Tokens appearing in fewer than min_doc_freq documents are excluded.
Vocabulary build_vocabulary(std::span<const TokenizedDocument> docs, int min_doc_freq);

struct EncodedDocument {
  std::string doc_id;
  std::vector<std::pair<std::int32_t, std::int32_t>> counts;  // (token id, count), id-ascending
  std::int32_t total_tokens = 0;
};

struct EncodeResult {
  std::vector<EncodedDocument> docs;
  std::vector<std::string> dropped_doc_ids;  // empty after out-of-vocabulary removal
};

EncodeResult encode(std::span<const TokenizedDocument> docs, const Vocabulary& vocab);

struct CorpusSplit {
  std::vector<EncodedDocument> train;
  std::vector<EncodedDocument> validation;
  std::uint64_t seed = 0;
};

// ceil(validation_fraction * n) documents go to validation, chosen by a
// seeded shuffle; both sides keep the input's relative order.
CorpusSplit split_train_validation(std::span<const EncodedDocument> docs,
                                   double validation_fraction, std::uint64_t seed);

// Stage artifacts: long-form encoded counts, split assignment, doc metadata.
void write_encoded_csv(const std::filesystem::path& path,
                       std::span<const EncodedDocument> docs);
std::vector<EncodedDocument> read_encoded_csv(const std::filesystem::path& path);

}  // namespace topicdiv::corpus
