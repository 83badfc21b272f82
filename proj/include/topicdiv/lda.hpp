#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topicdiv/corpus.hpp"

namespace topicdiv::lda {

struct LdaHyperParams {
  int topic_count = 0;
  double alpha = 0.0;
  double beta = 0.0;
  int passes = 0;
  std::uint64_t seed = 0;

  void validate() const;  // topic_count >= 1, alpha > 0, beta > 0, passes >= 1
};

struct TopicDistribution {
  std::vector<double> probs;  // length K, sums to 1
};

class LdaModel {
 public:
  LdaModel() = default;
  LdaModel(LdaHyperParams hyper, int vocab_size, int train_doc_count,
           std::vector<double> phi_row_major);

  int topic_count() const { return hyper_.topic_count; }
  int vocab_size() const { return vocab_size_; }
  int train_doc_count() const { return train_doc_count_; }
  const LdaHyperParams& hyper() const { return hyper_; }

  double phi(int topic, int word) const {
    return phi_[static_cast<std::size_t>(topic) * static_cast<std::size_t>(vocab_size_) +
                static_cast<std::size_t>(word)];
  }
  const std::vector<double>& phi_flat() const { return phi_; }

  // Bit-exact binary round trip.
  void save(const std::filesystem::path& path) const;
  static LdaModel load(const std::filesystem::path& path);

 private:
  LdaHyperParams hyper_;
  int vocab_size_ = 0;
  int train_doc_count_ = 0;
  std::vector<double> phi_;  // K x V row-major
};

// Collapsed Gibbs sampling over the training documents. Deterministic for a
// fixed (hyperparameters, corpus) pair.
LdaModel fit_lda(std::span<const corpus::EncodedDocument> train, const LdaHyperParams& hyper);

struct InferenceConfig {
  int burn_in = 50;
  int samples = 50;
};

// Fold-in Gibbs on a single held-out document with frozen phi; theta is the
// mean of (n_dk + alpha) / (N_d + K alpha) over post-burn-in sweeps.
TopicDistribution infer_theta(const LdaModel& model, const corpus::EncodedDocument& doc,
                              const InferenceConfig& cfg, std::uint64_t seed);

// Mean negative per-token held-out log likelihood (natural log). Each
// document's inference stream is seeded with seed ^ fnv1a64(doc_id), so the
// value is independent of document order.
double log_perplexity(const LdaModel& model, std::span<const corpus::EncodedDocument> docs,
                      const InferenceConfig& cfg, std::uint64_t seed);

// Top n (token, probability) pairs for a topic; probability descending,
// token ascending on ties.
std::vector<std::pair<std::string, double>> top_words(const LdaModel& model,
                                                      const corpus::Vocabulary& vocab,
                                                      int topic, int n);

// Training-state consistency check used by tests and debug builds.
struct GibbsCounts {
  std::vector<int> doc_topic;    // D x K
  std::vector<int> topic_word;   // K x V
  std::vector<int> topic_total;  // K
};

}  // namespace topicdiv::lda
