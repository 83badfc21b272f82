#include "topicdiv/lda.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "topicdiv/rng.hpp"

namespace topicdiv::lda {

namespace {

constexpr char kMagic[8] = {'T', 'D', 'I', 'V', 'L', 'D', 'A', '1'};

static_assert(std::endian::native == std::endian::little,
              "model files are defined little-endian");

struct FlatDoc {
  std::vector<std::int32_t> words;  // token id per position, id-ascending expansion
};

FlatDoc flatten(const corpus::EncodedDocument& doc, int vocab_size) {
  FlatDoc flat;
  flat.words.reserve(static_cast<std::size_t>(doc.total_tokens));
  for (const auto& [id, n] : doc.counts) {
    if (id < 0 || id >= vocab_size) {
      throw std::invalid_argument("document " + doc.doc_id + " has token id " +
                                  std::to_string(id) + " outside the vocabulary");
    }
    for (std::int32_t k = 0; k < n; ++k) flat.words.push_back(id);
  }
  if (flat.words.empty()) {
    throw std::invalid_argument("document " + doc.doc_id + " is empty");
  }
  return flat;
}

int infer_vocab_size(std::span<const corpus::EncodedDocument> docs) {
  std::int32_t max_id = -1;
  for (const auto& doc : docs) {
    if (!doc.counts.empty()) max_id = std::max(max_id, doc.counts.back().first);
  }
  return static_cast<int>(max_id + 1);
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void LdaHyperParams::validate() const {
  if (topic_count < 1) throw std::invalid_argument("LDA: topic_count must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("LDA: alpha must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("LDA: beta must be positive");
  if (passes < 1) throw std::invalid_argument("LDA: passes must be >= 1");
}

LdaModel::LdaModel(LdaHyperParams hyper, int vocab_size, int train_doc_count,
                   std::vector<double> phi_row_major)
    : hyper_(hyper),
      vocab_size_(vocab_size),
      train_doc_count_(train_doc_count),
      phi_(std::move(phi_row_major)) {
  if (phi_.size() != static_cast<std::size_t>(hyper_.topic_count) *
                         static_cast<std::size_t>(vocab_size_)) {
    throw std::invalid_argument("LdaModel: phi size does not match K x V");
  }
}

LdaModel fit_lda(std::span<const corpus::EncodedDocument> train, const LdaHyperParams& hyper) {
  hyper.validate();
  if (train.empty()) throw std::invalid_argument("fit_lda: empty training set");

  const int V = infer_vocab_size(train);
  if (V < 1) throw std::invalid_argument("fit_lda: training set has no tokens");
  const int K = hyper.topic_count;
  const auto D = train.size();

  std::vector<FlatDoc> docs;
  docs.reserve(D);
  for (const auto& doc : train) docs.push_back(flatten(doc, V));

  GibbsCounts c;
  c.doc_topic.assign(D * static_cast<std::size_t>(K), 0);
  c.topic_word.assign(static_cast<std::size_t>(K) * static_cast<std::size_t>(V), 0);
  c.topic_total.assign(static_cast<std::size_t>(K), 0);

  std::vector<std::vector<std::int32_t>> z(D);
  Rng rng(hyper.seed);

  for (std::size_t d = 0; d < D; ++d) {
    z[d].resize(docs[d].words.size());
    for (std::size_t p = 0; p < docs[d].words.size(); ++p) {
      const auto k = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(K)));
      z[d][p] = k;
      ++c.doc_topic[d * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
      ++c.topic_word[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) +
                     static_cast<std::size_t>(docs[d].words[p])];
      ++c.topic_total[static_cast<std::size_t>(k)];
    }
  }

  const double vbeta = static_cast<double>(V) * hyper.beta;
  std::vector<double> weights(static_cast<std::size_t>(K));

  for (int pass = 0; pass < hyper.passes; ++pass) {
    for (std::size_t d = 0; d < D; ++d) {
      int* nd = &c.doc_topic[d * static_cast<std::size_t>(K)];
      for (std::size_t p = 0; p < docs[d].words.size(); ++p) {
        const std::int32_t w = docs[d].words[p];
        const std::int32_t old_k = z[d][p];
        --nd[old_k];
        --c.topic_word[static_cast<std::size_t>(old_k) * static_cast<std::size_t>(V) +
                       static_cast<std::size_t>(w)];
        --c.topic_total[static_cast<std::size_t>(old_k)];

        double total = 0.0;
        for (int k = 0; k < K; ++k) {
          const double wk =
              (nd[k] + hyper.alpha) *
              (c.topic_word[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) +
                            static_cast<std::size_t>(w)] +
               hyper.beta) /
              (c.topic_total[static_cast<std::size_t>(k)] + vbeta);
          weights[static_cast<std::size_t>(k)] = wk;
          total += wk;
        }
        const double u = rng.uniform01() * total;
        double acc = 0.0;
        std::int32_t new_k = static_cast<std::int32_t>(K) - 1;
        for (int k = 0; k < K; ++k) {
          acc += weights[static_cast<std::size_t>(k)];
          if (u < acc) {
            new_k = static_cast<std::int32_t>(k);
            break;
          }
        }

        z[d][p] = new_k;
        ++nd[new_k];
        ++c.topic_word[static_cast<std::size_t>(new_k) * static_cast<std::size_t>(V) +
                       static_cast<std::size_t>(w)];
        ++c.topic_total[static_cast<std::size_t>(new_k)];
      }
    }
  }

#ifndef NDEBUG
  {
    long long grand = 0;
    for (int k = 0; k < K; ++k) {
      long long row = 0;
      for (int w = 0; w < V; ++w) {
        row += c.topic_word[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) +
                            static_cast<std::size_t>(w)];
      }
      assert(row == c.topic_total[static_cast<std::size_t>(k)]);
      grand += row;
    }
    long long tokens = 0;
    for (const auto& doc : docs) tokens += static_cast<long long>(doc.words.size());
    assert(grand == tokens);
  }
#endif

  std::vector<double> phi(static_cast<std::size_t>(K) * static_cast<std::size_t>(V));
  for (int k = 0; k < K; ++k) {
    const double denom = c.topic_total[static_cast<std::size_t>(k)] + vbeta;
    for (int w = 0; w < V; ++w) {
      phi[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) + static_cast<std::size_t>(w)] =
          (c.topic_word[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) +
                        static_cast<std::size_t>(w)] +
           hyper.beta) /
          denom;
    }
  }
  return LdaModel(hyper, V, static_cast<int>(D), std::move(phi));
}

TopicDistribution infer_theta(const LdaModel& model, const corpus::EncodedDocument& doc,
                              const InferenceConfig& cfg, std::uint64_t seed) {
  if (cfg.burn_in < 0 || cfg.samples < 1) {
    throw std::invalid_argument("infer_theta: burn_in must be >= 0 and samples >= 1");
  }
  const int K = model.topic_count();
  const int V = model.vocab_size();
  const FlatDoc flat = flatten(doc, V);
  const auto n_tokens = flat.words.size();
  const double alpha = model.hyper().alpha;

  // The chain is coupled to topic content, not topic index: assignments start
  // at the per-token MAP topic and each draw scans topics in descending weight
  // order. Relabeling the model therefore reproduces exactly permuted
  // assignments, making held-out perplexity invariant to topic order.
  Rng rng(seed);
  std::vector<int> nd(static_cast<std::size_t>(K), 0);
  std::vector<std::int32_t> z(n_tokens);
  for (std::size_t p = 0; p < n_tokens; ++p) {
    const std::int32_t w = flat.words[p];
    std::int32_t best = 0;
    for (int k = 1; k < K; ++k) {
      if (model.phi(k, w) > model.phi(best, w)) best = static_cast<std::int32_t>(k);
    }
    z[p] = best;
    ++nd[static_cast<std::size_t>(best)];
  }

  std::vector<double> weights(static_cast<std::size_t>(K));
  std::vector<int> order(static_cast<std::size_t>(K));
  std::vector<double> theta(static_cast<std::size_t>(K), 0.0);
  const double denom = static_cast<double>(n_tokens) + static_cast<double>(K) * alpha;

  const int sweeps = cfg.burn_in + cfg.samples;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t p = 0; p < n_tokens; ++p) {
      const std::int32_t w = flat.words[p];
      --nd[static_cast<std::size_t>(z[p])];
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        const double wk = (nd[static_cast<std::size_t>(k)] + alpha) * model.phi(k, w);
        weights[static_cast<std::size_t>(k)] = wk;
        total += wk;
        order[static_cast<std::size_t>(k)] = k;
      }
      std::sort(order.begin(), order.end(), [&weights](int a, int b) {
        const double wa = weights[static_cast<std::size_t>(a)];
        const double wb = weights[static_cast<std::size_t>(b)];
        if (wa != wb) return wa > wb;
        return a < b;
      });
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      std::int32_t new_k = static_cast<std::int32_t>(order.back());
      for (int k : order) {
        acc += weights[static_cast<std::size_t>(k)];
        if (u < acc) {
          new_k = static_cast<std::int32_t>(k);
          break;
        }
      }
      z[p] = new_k;
      ++nd[static_cast<std::size_t>(new_k)];
    }
    if (sweep >= cfg.burn_in) {
      for (int k = 0; k < K; ++k) {
        theta[static_cast<std::size_t>(k)] += (nd[static_cast<std::size_t>(k)] + alpha) / denom;
      }
    }
  }

  double total = 0.0;
  for (double& t : theta) {
    t /= static_cast<double>(cfg.samples);
    total += t;
  }
  for (double& t : theta) t /= total;  // removes residual fp drift
  return TopicDistribution{std::move(theta)};
}

double log_perplexity(const LdaModel& model, std::span<const corpus::EncodedDocument> docs,
                      const InferenceConfig& cfg, std::uint64_t seed) {
  if (docs.empty()) throw std::invalid_argument("log_perplexity: empty document set");
  double loglik = 0.0;
  long long n_tokens = 0;
  for (const auto& doc : docs) {
    const TopicDistribution theta =
        infer_theta(model, doc, cfg, seed ^ fnv1a64(doc.doc_id));
    for (const auto& [w, n] : doc.counts) {
      double p = 0.0;
      for (int k = 0; k < model.topic_count(); ++k) {
        p += theta.probs[static_cast<std::size_t>(k)] * model.phi(k, w);
      }
      if (!(p > 0.0)) {
        throw std::runtime_error("log_perplexity: zero mixture probability for token " +
                                 std::to_string(w) + " in doc " + doc.doc_id);
      }
      loglik += static_cast<double>(n) * std::log(p);
      n_tokens += n;
    }
  }
  return -loglik / static_cast<double>(n_tokens);
}

std::vector<std::pair<std::string, double>> top_words(const LdaModel& model,
                                                      const corpus::Vocabulary& vocab,
                                                      int topic, int n) {
  if (topic < 0 || topic >= model.topic_count()) {
    throw std::invalid_argument("top_words: topic index out of range");
  }
  if (n < 1 || n > model.vocab_size()) {
    throw std::invalid_argument("top_words: n must be in [1, vocab size]");
  }
  if (vocab.size() != model.vocab_size()) {
    throw std::invalid_argument("top_words: vocabulary size does not match the model");
  }
  std::vector<std::pair<std::string, double>> all;
  all.reserve(static_cast<std::size_t>(model.vocab_size()));
  for (int w = 0; w < model.vocab_size(); ++w) {
    all.emplace_back(vocab.token(w), model.phi(topic, w));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  all.resize(static_cast<std::size_t>(n));
  return all;
}

void LdaModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, static_cast<std::int32_t>(hyper_.topic_count));
  write_pod(out, static_cast<std::int32_t>(vocab_size_));
  write_pod(out, static_cast<std::int32_t>(hyper_.passes));
  write_pod(out, static_cast<std::int32_t>(train_doc_count_));
  write_pod(out, hyper_.alpha);
  write_pod(out, hyper_.beta);
  write_pod(out, hyper_.seed);
  out.write(reinterpret_cast<const char*>(phi_.data()),
            static_cast<std::streamsize>(phi_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failure on model file: " + path.string());
}

LdaModel LdaModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a topic model file (bad magic): " + path.string());
  }
  std::int32_t k = 0;
  std::int32_t v = 0;
  std::int32_t passes = 0;
  std::int32_t d = 0;
  LdaHyperParams hyper;
  read_pod(in, k);
  read_pod(in, v);
  read_pod(in, passes);
  read_pod(in, d);
  read_pod(in, hyper.alpha);
  read_pod(in, hyper.beta);
  read_pod(in, hyper.seed);
  hyper.topic_count = k;
  hyper.passes = passes;
  if (!in || k < 1 || v < 1 || passes < 1 || d < 0) {
    throw std::runtime_error("corrupt model header: " + path.string());
  }
  std::vector<double> phi(static_cast<std::size_t>(k) * static_cast<std::size_t>(v));
  in.read(reinterpret_cast<char*>(phi.data()),
          static_cast<std::streamsize>(phi.size() * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(phi.size() * sizeof(double))) {
    throw std::runtime_error("truncated model file: " + path.string());
  }
  return LdaModel(hyper, v, d, std::move(phi));
}

}  // namespace topicdiv::lda
