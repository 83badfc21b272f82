#include "topicdiv/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "topicdiv/corpus.hpp"
#include "topicdiv/csv.hpp"
#include "topicdiv/diversity.hpp"
#include "topicdiv/hashing.hpp"
#include "topicdiv/hpo.hpp"
#include "topicdiv/iv.hpp"
#include "topicdiv/lda.hpp"
#include "topicdiv/matching.hpp"
#include "topicdiv/panel.hpp"
#include "topicdiv/placebo.hpp"
#include "topicdiv/regression.hpp"
#include "topicdiv/report.hpp"
#include "topicdiv/version.hpp"

namespace topicdiv::pipeline {
namespace fs = std::filesystem;
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view value, std::string_view context) {
  std::vector<std::string> items;
  std::string current;
  std::stringstream ss{std::string(value)};
  while (std::getline(ss, current, ',')) {
    std::string item = trim(current);
    if (item.empty()) {
      throw ConfigError("empty item in list value for " + std::string(context));
    }
    items.push_back(std::move(item));
  }
  return items;
}

bool parse_bool(const std::string& value, const std::string& context) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("expected a boolean for " + context + ", got '" + value + "'");
}

int parse_config_int(const std::string& value, const std::string& context) {
  try {
    return static_cast<int>(csv::parse_int(value, context));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t parse_config_uint(const std::string& value, const std::string& context) {
  try {
    return csv::parse_uint(value, context);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

double parse_config_double(const std::string& value, const std::string& context) {
  try {
    return csv::parse_double(value, context);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

const std::vector<std::string> kStageNames = {"corpus", "hpo",      "lda",    "diversity",
                                              "panel",  "estimate", "figures"};

const std::vector<std::string> kSpecNames = {"baseline", "moderation", "heterogeneity",
                                             "robustness", "iv", "psm", "placebo"};

const std::vector<std::string> kModerators = {"mt_positive", "mt_neutral", "mt_negative",
                                              "salarytop3", "salarysum", "sshrrat"};

const std::vector<std::string> kHeterogeneity = {"certification", "worksafety", "largescale",
                                                 "high_competition"};

const std::vector<std::string> kControls = {"size", "lev",   "cashflow", "fixed",
                                            "top1", "board", "tobinq"};

struct OutcomeDef {
  const char* column;
  const char* slug;
  const char* label;
};

const OutcomeDef kOutcomes[2] = {{"y_gini", "gini", "Gini-Simpson diversity"},
                                 {"y_ent", "entropy", "Shannon entropy"}};

struct Artifacts {
  fs::path out;
  fs::path corpus_dir, hpo_dir, lda_dir, diversity_dir, panel_dir, estimate_dir, figures_dir;
  fs::path vocabulary, encoded, split, docmeta;
  fs::path trials, best;
  fs::path model, top_words;
  fs::path diversity_csv, box_gini, box_entropy, box_gini_outliers, box_entropy_outliers;
  fs::path panel_csv, drops;
  fs::path cache, log;
};

Artifacts artifacts(const PipelineConfig& cfg) {
  Artifacts a;
  a.out = cfg.paths.output_dir;
  a.corpus_dir = a.out / "corpus";
  a.hpo_dir = a.out / "hpo";
  a.lda_dir = a.out / "lda";
  a.diversity_dir = a.out / "diversity";
  a.panel_dir = a.out / "panel";
  a.estimate_dir = a.out / "estimate";
  a.figures_dir = a.out / "figures";
  a.vocabulary = a.corpus_dir / "vocabulary.csv";
  a.encoded = a.corpus_dir / "encoded.csv";
  a.split = a.corpus_dir / "split.csv";
  a.docmeta = a.corpus_dir / "docmeta.csv";
  a.trials = a.hpo_dir / "trials.csv";
  a.best = a.hpo_dir / "best.csv";
  a.model = a.lda_dir / "model.bin";
  a.top_words = a.lda_dir / "top_words.csv";
  a.diversity_csv = a.diversity_dir / "diversity.csv";
  a.box_gini = a.diversity_dir / "box_gini.csv";
  a.box_entropy = a.diversity_dir / "box_entropy.csv";
  a.box_gini_outliers = a.diversity_dir / "box_gini_outliers.csv";
  a.box_entropy_outliers = a.diversity_dir / "box_entropy_outliers.csv";
  a.panel_csv = a.panel_dir / "panel.csv";
  a.drops = a.panel_dir / "drops.csv";
  a.cache = a.out / ".stage_cache.json";
  a.log = a.out / "run_log.jsonl";
  return a;
}

std::vector<std::string> effective_specs(const PipelineConfig& cfg) {
  return cfg.estimate.specs.empty() ? kSpecNames : cfg.estimate.specs;
}

bool has_spec(const PipelineConfig& cfg, const std::string& name) {
  const auto specs = effective_specs(cfg);
  return std::find(specs.begin(), specs.end(), name) != specs.end();
}

std::vector<fs::path> estimate_outputs(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  std::vector<fs::path> out;
  auto table_pair = [&](const std::string& stem) {
    out.push_back(a.estimate_dir / (stem + ".csv"));
    out.push_back(a.estimate_dir / (stem + ".txt"));
  };
  for (const OutcomeDef& o : kOutcomes) {
    const std::string suffix = std::string("_") + o.slug;
    if (has_spec(cfg, "baseline")) table_pair("baseline" + suffix);
    if (has_spec(cfg, "moderation")) {
      for (const std::string& m : kModerators) table_pair("mod_" + m + suffix);
    }
    if (has_spec(cfg, "heterogeneity")) {
      for (const std::string& m : kHeterogeneity) table_pair("het_" + m + suffix);
    }
    if (has_spec(cfg, "robustness")) {
      table_pair("robust_nospecial" + suffix);
      table_pair("robust_gri" + suffix);
      table_pair("robust_roa" + suffix);
    }
    if (has_spec(cfg, "iv")) {
      for (const char* iv : {"iv1", "iv2", "iv3"}) table_pair(std::string("iv_") + iv + suffix);
    }
    if (has_spec(cfg, "psm")) table_pair("psm" + suffix);
    if (has_spec(cfg, "placebo")) {
      out.push_back(a.estimate_dir / ("placebo_" + std::string(o.slug) + ".csv"));
      out.push_back(a.estimate_dir / ("placebo_" + std::string(o.slug) + "_meta.csv"));
    }
  }
  if (has_spec(cfg, "psm")) {
    out.push_back(a.estimate_dir / "psm_balance.csv");
    out.push_back(a.estimate_dir / "psm_att.csv");
  }
  return out;
}

std::vector<fs::path> figures_outputs(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  std::vector<fs::path> out = {a.figures_dir / "box_gini.svg", a.figures_dir / "box_entropy.svg"};
  for (const OutcomeDef& o : kOutcomes) {
    if (fs::exists(a.estimate_dir / ("placebo_" + std::string(o.slug) + ".csv"))) {
      out.push_back(a.figures_dir / ("placebo_" + std::string(o.slug) + ".svg"));
    }
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct StageKey {
  std::string key;
  std::map<std::string, std::string> inputs;  // path -> content hash
};

class KeyBuilder {
 public:
  void add(std::string_view name, std::string_view value) {
    acc_ += name;
    acc_ += '=';
    acc_ += value;
    acc_ += ';';
  }
  // Exact match for literals; without it a const char* argument would pick
  // the bool overload (standard conversion) over string_view (user-defined).
  void add(std::string_view name, const char* value) { add(name, std::string_view(value)); }
  void add(std::string_view name, double value) { add(name, csv::format_double(value)); }
  void add(std::string_view name, int value) { add(name, std::to_string(value)); }
  void add(std::string_view name, bool value) { add(name, value ? "1" : "0"); }
  void add(std::string_view name, std::uint64_t value) { add(name, hex64(value)); }

  // Hashes the file; records it in the inputs map.
  void add_file(const fs::path& path) {
    const std::uint64_t h = hash_file(path);
    inputs_[path.string()] = hex64(h);
    add("file:" + path.string(), h);
  }

  StageKey finish() const { return {hex64(fnv1a64(acc_)), inputs_}; }

 private:
  std::string acc_;
  std::map<std::string, std::string> inputs_;
};

// Key unavailable (missing input) means the stage cannot be skipped.
std::optional<StageKey> stage_key(const std::string& stage, const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  KeyBuilder kb;
  kb.add("version", std::string_view(kVersion));
  kb.add("stage", stage);
  try {
    if (stage == "corpus") {
      kb.add("min_doc_freq", cfg.corpus.min_doc_freq);
      kb.add("validation_fraction", cfg.corpus.validation_fraction);
      kb.add("seed", cfg.corpus.seed);
      kb.add_file(cfg.paths.manifest);
      if (!cfg.paths.lexicon.empty()) kb.add_file(cfg.paths.lexicon);
      if (!cfg.paths.stopwords.empty()) kb.add_file(cfg.paths.stopwords);
      const csv::Table manifest = csv::read_file(cfg.paths.manifest);
      const int fcol = manifest.require_col("filename", cfg.paths.manifest.string());
      for (const auto& row : manifest.rows) {
        kb.add_file(cfg.paths.text_dir / row[static_cast<std::size_t>(fcol)]);
      }
    } else if (stage == "hpo") {
      const HpoConfig& h = cfg.hpo;
      kb.add("enabled", h.enabled);
      kb.add("n_trials", h.n_trials);
      kb.add("gamma", h.gamma);
      kb.add("n_startup", h.n_startup);
      kb.add("n_candidates", h.n_candidates);
      kb.add("burn_in", h.burn_in);
      kb.add("samples", h.samples);
      kb.add("topics", csv::format_double(h.topics_min) + ".." + csv::format_double(h.topics_max));
      kb.add("passes", csv::format_double(h.passes_min) + ".." + csv::format_double(h.passes_max));
      kb.add("alpha", csv::format_double(h.alpha_min) + ".." + csv::format_double(h.alpha_max));
      kb.add("beta", csv::format_double(h.beta_min) + ".." + csv::format_double(h.beta_max));
      kb.add("seed", h.seed);
      kb.add_file(a.encoded);
      kb.add_file(a.split);
    } else if (stage == "lda") {
      kb.add("hpo_enabled", cfg.hpo.enabled);
      kb.add("seed", cfg.lda.seed);
      if (cfg.hpo.enabled) {
        kb.add_file(a.best);
      } else {
        kb.add("topics", cfg.lda.topics);
        kb.add("alpha", cfg.lda.alpha);
        kb.add("beta", cfg.lda.beta);
        kb.add("passes", cfg.lda.passes);
      }
      kb.add_file(a.encoded);
      kb.add_file(a.split);
    } else if (stage == "diversity") {
      kb.add("burn_in", cfg.lda.burn_in);
      kb.add("samples", cfg.lda.samples);
      kb.add("seed", cfg.lda.seed);
      kb.add_file(a.model);
      kb.add_file(a.encoded);
      kb.add_file(a.docmeta);
    } else if (stage == "panel") {
      kb.add("winsorize", cfg.panel.winsorize);
      kb.add("winsor_tail", cfg.panel.winsor_tail);
      kb.add("sample_mode", cfg.panel.sample_mode);
      kb.add_file(cfg.paths.financials);
      if (!cfg.paths.competition.empty()) kb.add_file(cfg.paths.competition);
      kb.add_file(a.diversity_csv);
    } else if (stage == "estimate") {
      std::string specs;
      for (const std::string& s : effective_specs(cfg)) specs += s + ",";
      kb.add("specs", specs);
      kb.add("placebo_reps", cfg.estimate.placebo_reps);
      kb.add("placebo_seed", cfg.estimate.placebo_seed);
      kb.add("caliper", cfg.estimate.caliper);
      kb.add_file(a.panel_csv);
    } else if (stage == "figures") {
      kb.add_file(a.box_gini);
      kb.add_file(a.box_entropy);
      kb.add_file(a.box_gini_outliers);
      kb.add_file(a.box_entropy_outliers);
      for (const OutcomeDef& o : kOutcomes) {
        const fs::path p = a.estimate_dir / ("placebo_" + std::string(o.slug) + ".csv");
        const fs::path meta = a.estimate_dir / ("placebo_" + std::string(o.slug) + "_meta.csv");
        kb.add("has_placebo_" + std::string(o.slug), fs::exists(p));
        if (fs::exists(p)) {
          kb.add_file(p);
          kb.add_file(meta);
        }
      }
    } else {
      throw std::logic_error("unknown stage " + stage);
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return kb.finish();
}

std::vector<fs::path> stage_outputs(const std::string& stage, const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  if (stage == "corpus") return {a.vocabulary, a.encoded, a.split, a.docmeta};
  if (stage == "hpo") return {a.trials, a.best};
  if (stage == "lda") return {a.model, a.top_words};
  if (stage == "diversity") {
    return {a.diversity_csv, a.box_gini, a.box_entropy, a.box_gini_outliers,
            a.box_entropy_outliers};
  }
  if (stage == "panel") return {a.panel_csv, a.drops};
  if (stage == "estimate") return estimate_outputs(cfg);
  if (stage == "figures") return figures_outputs(cfg);
  throw std::logic_error("unknown stage " + stage);
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing artifact " + path.string() + "; run the " + producer +
                             " stage first");
  }
}

// ---------------------------------------------------------------------------
// corpus stage

void write_split_csv(const fs::path& path, const corpus::CorpusSplit& split) {
  csv::Writer w(path);
  w.field("doc_id").field("subset");
  w.end_row();
  for (const auto& d : split.train) {
    w.field(d.doc_id).field("train");
    w.end_row();
  }
  for (const auto& d : split.validation) {
    w.field(d.doc_id).field("validation");
    w.end_row();
  }
}

std::unordered_map<std::string, std::string> read_split_csv(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto id = static_cast<std::size_t>(t.require_col("doc_id", path.string()));
  const auto subset = static_cast<std::size_t>(t.require_col("subset", path.string()));
  std::unordered_map<std::string, std::string> out;
  for (const auto& row : t.rows) out[row[id]] = row[subset];
  return out;
}

void stage_corpus(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  const std::vector<corpus::RawDocument> raw =
      corpus::load_corpus(cfg.paths.manifest, cfg.paths.text_dir);
  const corpus::Lexicon lexicon =
      corpus::Lexicon::from_files(cfg.paths.lexicon, cfg.paths.stopwords);
  const std::vector<corpus::TokenizedDocument> tokenized = corpus::tokenize_corpus(raw, lexicon);
  const corpus::Vocabulary vocab = corpus::build_vocabulary(tokenized, cfg.corpus.min_doc_freq);
  const corpus::EncodeResult enc = corpus::encode(tokenized, vocab);
  if (enc.docs.empty()) {
    throw std::runtime_error("corpus stage: no documents survive vocabulary encoding");
  }
  const corpus::CorpusSplit split = corpus::split_train_validation(
      enc.docs, cfg.corpus.validation_fraction, cfg.corpus.seed);

  fs::create_directories(a.corpus_dir);
  vocab.save_csv(a.vocabulary);
  corpus::write_encoded_csv(a.encoded, enc.docs);
  write_split_csv(a.split, split);

  std::unordered_map<std::string, const corpus::RawDocument*> by_id;
  for (const auto& d : raw) by_id[d.doc_id] = &d;
  csv::Writer meta(a.docmeta);
  meta.field("doc_id").field("firm_id").field("year");
  meta.end_row();
  for (const auto& d : enc.docs) {
    const corpus::RawDocument* r = by_id.at(d.doc_id);
    meta.field(d.doc_id).field(r->firm_id).field(static_cast<long long>(r->year));
    meta.end_row();
  }
}

// ---------------------------------------------------------------------------
// hpo + lda stages

struct LoadedSplit {
  std::vector<corpus::EncodedDocument> train;
  std::vector<corpus::EncodedDocument> validation;
};

LoadedSplit load_split(const Artifacts& a) {
  require_artifact(a.encoded, "corpus");
  require_artifact(a.split, "corpus");
  const std::vector<corpus::EncodedDocument> docs = corpus::read_encoded_csv(a.encoded);
  const auto assignment = read_split_csv(a.split);
  LoadedSplit out;
  for (const auto& d : docs) {
    const auto it = assignment.find(d.doc_id);
    if (it == assignment.end()) {
      throw std::runtime_error("doc " + d.doc_id + " missing from " + a.split.string());
    }
    if (it->second == "train") {
      out.train.push_back(d);
    } else if (it->second == "validation") {
      out.validation.push_back(d);
    } else {
      throw std::runtime_error("unknown subset '" + it->second + "' in " + a.split.string());
    }
  }
  if (out.train.empty()) throw std::runtime_error("empty training split");
  return out;
}

hpo::SearchSpace hpo_space(const HpoConfig& h) {
  hpo::SearchSpace space;
  space.dims = {
      {"topics", hpo::ParamKind::integer, h.topics_min, h.topics_max, hpo::ParamScale::linear},
      {"passes", hpo::ParamKind::integer, h.passes_min, h.passes_max, hpo::ParamScale::log_scale},
      {"alpha", hpo::ParamKind::real, h.alpha_min, h.alpha_max, hpo::ParamScale::log_scale},
      {"beta", hpo::ParamKind::real, h.beta_min, h.beta_max, hpo::ParamScale::log_scale},
  };
  space.validate();
  return space;
}

lda::LdaHyperParams params_from_vector(const std::vector<double>& p, std::uint64_t seed) {
  lda::LdaHyperParams hp;
  hp.topic_count = static_cast<int>(std::llround(p[0]));
  hp.passes = static_cast<int>(std::llround(p[1]));
  hp.alpha = p[2];
  hp.beta = p[3];
  hp.seed = seed;
  return hp;
}

void stage_hpo(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  const LoadedSplit split = load_split(a);
  if (split.validation.empty()) {
    throw std::runtime_error("hpo stage needs a nonempty validation split");
  }
  const hpo::SearchSpace space = hpo_space(cfg.hpo);
  const lda::InferenceConfig icfg{cfg.hpo.burn_in, cfg.hpo.samples};

  hpo::Objective objective = [&](const std::vector<double>& p, std::uint64_t seed) {
    const lda::LdaHyperParams hp = params_from_vector(p, seed);
    const lda::LdaModel model = lda::fit_lda(split.train, hp);
    return lda::log_perplexity(model, split.validation, icfg, seed);
  };
  hpo::TpeOptions options;
  options.gamma = cfg.hpo.gamma;
  options.n_startup = cfg.hpo.n_startup;
  options.n_candidates = cfg.hpo.n_candidates;
  const hpo::OptimizeResult result =
      hpo::optimize(objective, space, cfg.hpo.n_trials, cfg.hpo.seed, options);

  fs::create_directories(a.hpo_dir);
  hpo::save_history_csv(a.trials, result.history, space);
  csv::Writer best(a.best);
  best.field("topics").field("passes").field("alpha").field("beta");
  best.field("objective").field("trial_index").field("seed");
  best.end_row();
  best.field(result.best.params[0]).field(result.best.params[1]);
  best.field(result.best.params[2]).field(result.best.params[3]);
  best.field(result.best.objective).field(result.best.trial_index);
  best.field(static_cast<unsigned long long>(result.best.seed));
  best.end_row();
}

lda::LdaHyperParams final_lda_params(const PipelineConfig& cfg, const Artifacts& a) {
  lda::LdaHyperParams hp;
  if (cfg.hpo.enabled) {
    require_artifact(a.best, "hpo");
    const csv::Table t = csv::read_file(a.best);
    if (t.rows.size() != 1) {
      throw std::runtime_error(a.best.string() + ": expected exactly one row");
    }
    auto value = [&](const char* name) {
      return csv::parse_double(t.rows[0][static_cast<std::size_t>(
                                   t.require_col(name, a.best.string()))],
                               a.best.string());
    };
    hp.topic_count = static_cast<int>(std::llround(value("topics")));
    hp.passes = static_cast<int>(std::llround(value("passes")));
    hp.alpha = value("alpha");
    hp.beta = value("beta");
  } else {
    hp.topic_count = cfg.lda.topics;
    hp.passes = cfg.lda.passes;
    hp.alpha = cfg.lda.alpha;
    hp.beta = cfg.lda.beta;
  }
  hp.seed = cfg.lda.seed;
  hp.validate();
  return hp;
}

void stage_lda(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  const LoadedSplit split = load_split(a);
  require_artifact(a.vocabulary, "corpus");
  const corpus::Vocabulary vocab = corpus::Vocabulary::load_csv(a.vocabulary);
  const lda::LdaHyperParams hp = final_lda_params(cfg, a);
  const lda::LdaModel model = lda::fit_lda(split.train, hp);

  fs::create_directories(a.lda_dir);
  model.save(a.model);
  csv::Writer words(a.top_words);
  words.field("topic").field("rank").field("token").field("probability");
  words.end_row();
  const int n_top = std::min(15, model.vocab_size());
  for (int k = 0; k < model.topic_count(); ++k) {
    const auto top = lda::top_words(model, vocab, k, n_top);
    for (std::size_t r = 0; r < top.size(); ++r) {
      words.field(k).field(static_cast<long long>(r + 1)).field(top[r].first);
      words.field(top[r].second);
      words.end_row();
    }
  }
}

// ---------------------------------------------------------------------------
// diversity stage

struct DocMeta {
  std::string firm_id;
  int year = 0;
};

std::unordered_map<std::string, DocMeta> read_docmeta(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto id = static_cast<std::size_t>(t.require_col("doc_id", path.string()));
  const auto firm = static_cast<std::size_t>(t.require_col("firm_id", path.string()));
  const auto year = static_cast<std::size_t>(t.require_col("year", path.string()));
  std::unordered_map<std::string, DocMeta> out;
  for (const auto& row : t.rows) {
    out[row[id]] = {row[firm], static_cast<int>(csv::parse_int(row[year], path.string()))};
  }
  return out;
}

void write_box_csvs(const fs::path& stats_path, const fs::path& outliers_path,
                    const std::vector<diversity::AnnualBoxStats>& stats) {
  csv::Writer w(stats_path);
  w.field("year").field("q1").field("median").field("q3");
  w.field("whisker_lo").field("whisker_hi").field("n");
  w.end_row();
  for (const auto& s : stats) {
    w.field(static_cast<long long>(s.year)).field(s.q1).field(s.median).field(s.q3);
    w.field(s.whisker_lo).field(s.whisker_hi).field(static_cast<long long>(s.n));
    w.end_row();
  }
  csv::Writer o(outliers_path);
  o.field("year").field("value");
  o.end_row();
  for (const auto& s : stats) {
    for (double v : s.outliers) {
      o.field(static_cast<long long>(s.year)).field(v);
      o.end_row();
    }
  }
}

std::vector<diversity::AnnualBoxStats> read_box_csvs(const fs::path& stats_path,
                                                     const fs::path& outliers_path) {
  const csv::Table t = csv::read_file(stats_path);
  const std::string ctx = stats_path.string();
  auto col = [&](const char* name) { return static_cast<std::size_t>(t.require_col(name, ctx)); };
  const auto year = col("year"), q1 = col("q1"), median = col("median"), q3 = col("q3");
  const auto wlo = col("whisker_lo"), whi = col("whisker_hi"), n = col("n");
  std::vector<diversity::AnnualBoxStats> stats;
  std::map<int, std::size_t> index;
  for (const auto& row : t.rows) {
    diversity::AnnualBoxStats s;
    s.year = static_cast<int>(csv::parse_int(row[year], ctx));
    s.q1 = csv::parse_double(row[q1], ctx);
    s.median = csv::parse_double(row[median], ctx);
    s.q3 = csv::parse_double(row[q3], ctx);
    s.whisker_lo = csv::parse_double(row[wlo], ctx);
    s.whisker_hi = csv::parse_double(row[whi], ctx);
    s.n = static_cast<int>(csv::parse_int(row[n], ctx));
    index[s.year] = stats.size();
    stats.push_back(std::move(s));
  }
  const csv::Table ot = csv::read_file(outliers_path);
  const std::string octx = outliers_path.string();
  const auto oyear = static_cast<std::size_t>(ot.require_col("year", octx));
  const auto ovalue = static_cast<std::size_t>(ot.require_col("value", octx));
  for (const auto& row : ot.rows) {
    const int y = static_cast<int>(csv::parse_int(row[oyear], octx));
    const auto it = index.find(y);
    if (it == index.end()) {
      throw std::runtime_error(octx + ": outlier year " + std::to_string(y) +
                               " absent from " + ctx);
    }
    stats[it->second].outliers.push_back(csv::parse_double(row[ovalue], octx));
  }
  return stats;
}

void stage_diversity(const PipelineConfig& cfg, int jobs) {
  const Artifacts a = artifacts(cfg);
  require_artifact(a.model, "lda");
  require_artifact(a.encoded, "corpus");
  require_artifact(a.docmeta, "corpus");
  const lda::LdaModel model = lda::LdaModel::load(a.model);
  const std::vector<corpus::EncodedDocument> docs = corpus::read_encoded_csv(a.encoded);
  const auto meta = read_docmeta(a.docmeta);
  const lda::InferenceConfig icfg{cfg.lda.burn_in, cfg.lda.samples};

  std::vector<diversity::DiversityRecord> records(docs.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](std::size_t lo, std::size_t hi) {
    try {
      for (std::size_t i = lo; i < hi; ++i) {
        const auto it = meta.find(docs[i].doc_id);
        if (it == meta.end()) {
          throw std::runtime_error("doc " + docs[i].doc_id + " missing from " +
                                   a.docmeta.string());
        }
        const lda::TopicDistribution theta =
            lda::infer_theta(model, docs[i], icfg, cfg.lda.seed ^ fnv1a64(docs[i].doc_id));
        records[i] = {it->second.firm_id, it->second.year,
                      diversity::gini_simpson(theta.probs),
                      diversity::shannon_entropy(theta.probs)};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(docs.size())));
  if (threads <= 1) {
    worker(0, docs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (docs.size() + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = static_cast<std::size_t>(t) * chunk;
      const std::size_t hi = std::min(docs.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  fs::create_directories(a.diversity_dir);
  diversity::write_diversity_csv(a.diversity_csv, records);
  write_box_csvs(a.box_gini, a.box_gini_outliers,
                 diversity::annual_box_stats(records, diversity::Metric::gini));
  write_box_csvs(a.box_entropy, a.box_entropy_outliers,
                 diversity::annual_box_stats(records, diversity::Metric::entropy));
}

// ---------------------------------------------------------------------------
// panel stage

void stage_panel(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  require_artifact(a.diversity_csv, "diversity");
  std::vector<panel::FinancialRow> rows = panel::load_financial_csv(cfg.paths.financials);
  if (!cfg.paths.competition.empty()) {
    panel::apply_competition_csv(rows, cfg.paths.competition);
  }
  const std::vector<diversity::DiversityRecord> records =
      diversity::read_diversity_csv(a.diversity_csv);
  panel::JoinResult join = panel::join_lead_outcome(rows, records);
  const int missing_iv = panel::construct_ivs(join.panel, records);
  panel::derive_largescale(join.panel);
  const panel::SampleMode mode = cfg.panel.sample_mode == "exclude_special"
                                     ? panel::SampleMode::exclude_special
                                     : panel::SampleMode::baseline;
  panel::FilterResult filtered = panel::filter_sample(join.panel, mode);
  if (filtered.panel.empty()) {
    throw std::runtime_error("panel stage: no observations survive filtering");
  }
  if (cfg.panel.winsorize) {
    panel::winsorize_panel(filtered.panel, cfg.panel.winsor_tail);
  }

  fs::create_directories(a.panel_dir);
  panel::write_panel_csv(a.panel_csv, filtered.panel);
  csv::Writer drops(a.drops);
  drops.field("reason").field("count");
  drops.end_row();
  drops.field("no_lead_outcome").field(static_cast<long long>(join.dropped_no_lead));
  drops.end_row();
  drops.field("missing_iv_lead").field(static_cast<long long>(missing_iv));
  drops.end_row();
  for (const auto& [reason, count] : filtered.dropped) {
    drops.field(reason).field(static_cast<long long>(count));
    drops.end_row();
  }
}

// ---------------------------------------------------------------------------
// estimate stage

est::RegressionSpec base_spec(const std::string& outcome) {
  est::RegressionSpec spec;
  spec.outcome = outcome;
  spec.regressors = {"loss"};
  spec.regressors.insert(spec.regressors.end(), kControls.begin(), kControls.end());
  spec.absorb = {"firm", "year"};
  spec.cluster = "firm";
  return spec;
}

void emit_pair(const est::RegressionResult& result, const fs::path& dir, const std::string& stem,
               const std::string& title) {
  report::emit_table(result, report::TableStyle::csv, dir / (stem + ".csv"), title);
  report::emit_table(result, report::TableStyle::text, dir / (stem + ".txt"), title);
}

void emit_iv_pair(const est::TslsResult& result, const fs::path& dir, const std::string& stem,
                  const std::string& title) {
  report::emit_iv_table(result, report::TableStyle::csv, dir / (stem + ".csv"), title);
  report::emit_iv_table(result, report::TableStyle::text, dir / (stem + ".txt"), title);
}

void run_psm(const PipelineConfig& cfg, const DataTable& table, const fs::path& dir) {
  const std::vector<std::string> covariates(kControls.begin(), kControls.end());
  const est::LogitResult logit = est::logit_propensity(table, "loss", covariates);
  std::vector<double> pscores(logit.pscores.data(), logit.pscores.data() + logit.pscores.size());
  const Eigen::VectorXd& loss = table.numeric("loss");
  std::vector<int> treated(static_cast<std::size_t>(loss.size()));
  for (Eigen::Index i = 0; i < loss.size(); ++i) {
    treated[static_cast<std::size_t>(i)] = loss[i] != 0.0 ? 1 : 0;
  }
  const est::MatchDiagnostics match = est::nn_match(pscores, treated, cfg.estimate.caliper);
  if (match.pairs.empty()) {
    throw std::runtime_error("psm: no matched pairs inside the caliper");
  }

  const std::vector<est::BalanceRow> balance =
      est::balance_diagnostics(table, "loss", covariates, match.pairs);
  csv::Writer bal(dir / "psm_balance.csv");
  bal.field("covariate").field("bias_before").field("bias_after");
  bal.field("t_after").field("p_after").field("undefined");
  bal.end_row();
  for (const auto& row : balance) {
    bal.field(row.covariate).field(row.bias_before).field(row.bias_after);
    bal.field(row.t_after).field(row.p_after).field(static_cast<long long>(row.undefined));
    bal.end_row();
  }

  csv::Writer att(dir / "psm_att.csv");
  att.field("outcome").field("att").field("se").field("n_pairs");
  att.field("off_support").field("unmatched").field("support_lo").field("support_hi");
  att.end_row();
  for (const OutcomeDef& o : kOutcomes) {
    const Eigen::VectorXd& y = table.numeric(o.column);
    const std::vector<double> outcome(y.data(), y.data() + y.size());
    const auto [estimate, variance] = est::att(match.pairs, outcome);
    att.field(o.column).field(estimate).field(std::sqrt(variance));
    att.field(static_cast<long long>(match.pairs.size()));
    att.field(static_cast<long long>(match.off_support));
    att.field(static_cast<long long>(match.unmatched));
    att.field(match.support_lo).field(match.support_hi);
    att.end_row();
  }

  // Matched-sample regression; reused controls enter once per match, which is
  // frequency weighting.
  std::vector<Eigen::Index> matched_rows;
  for (const auto& p : match.pairs) {
    matched_rows.push_back(p.treated_row);
    matched_rows.push_back(p.control_row);
  }
  const DataTable matched = table.select_rows(matched_rows);
  for (const OutcomeDef& o : kOutcomes) {
    const est::RegressionResult r = est::ols_fe(matched, base_spec(o.column));
    emit_pair(r, dir, std::string("psm_") + o.slug,
              std::string("Matched-sample regression (") + o.label + ")");
  }
}

void run_placebo(const PipelineConfig& cfg, const DataTable& table, const fs::path& dir) {
  for (const OutcomeDef& o : kOutcomes) {
    const est::PlaceboDistribution dist =
        est::placebo_run(table, base_spec(o.column), "loss", cfg.estimate.placebo_reps,
                         cfg.estimate.placebo_seed ^ fnv1a64(o.column));
    csv::Writer w(dir / ("placebo_" + std::string(o.slug) + ".csv"));
    w.field("rep").field("coefficient").field("p_value");
    w.end_row();
    for (std::size_t i = 0; i < dist.coefficients.size(); ++i) {
      w.field(static_cast<long long>(i + 1)).field(dist.coefficients[i]);
      w.field(dist.p_values[i]);
      w.end_row();
    }
    csv::Writer meta(dir / ("placebo_" + std::string(o.slug) + "_meta.csv"));
    meta.field("baseline_coef").field("n_reps").field("failed_reps").field("bandwidth");
    meta.end_row();
    meta.field(dist.baseline_coef).field(static_cast<long long>(dist.n_reps));
    meta.field(static_cast<long long>(dist.failed_reps)).field(dist.kde.bandwidth);
    meta.end_row();
  }
}

void stage_estimate(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  require_artifact(a.panel_csv, "panel");
  const std::vector<panel::PanelObservation> rows = panel::read_panel_csv(a.panel_csv);
  if (rows.empty()) throw std::runtime_error("estimate stage: empty panel");
  const DataTable table = panel::to_table(rows);
  fs::create_directories(a.estimate_dir);

  for (const OutcomeDef& o : kOutcomes) {
    const std::string suffix = std::string("_") + o.slug;
    const est::RegressionSpec base = base_spec(o.column);
    if (has_spec(cfg, "baseline")) {
      emit_pair(est::ols_fe(table, base), a.estimate_dir, "baseline" + suffix,
                std::string("Baseline (") + o.label + ")");
    }
    if (has_spec(cfg, "moderation")) {
      for (const std::string& m : kModerators) {
        const est::RegressionSpec spec = est::with_interaction(base, "loss", m);
        emit_pair(est::ols_fe(table, spec), a.estimate_dir, "mod_" + m + suffix,
                  "Moderation by " + m + " (" + o.label + ")");
      }
    }
    if (has_spec(cfg, "heterogeneity")) {
      for (const std::string& m : kHeterogeneity) {
        const est::RegressionSpec spec = est::with_interaction(base, "loss", m);
        emit_pair(est::ols_fe(table, spec), a.estimate_dir, "het_" + m + suffix,
                  "Heterogeneity by " + m + " (" + o.label + ")");
      }
    }
    if (has_spec(cfg, "robustness")) {
      std::vector<Eigen::Index> keep;
      const Eigen::VectorXd& st = table.numeric("st_flag");
      const Eigen::VectorXd& fin = table.numeric("financial_industry");
      for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (st[i] == 0.0 && fin[i] == 0.0) keep.push_back(i);
      }
      if (keep.empty()) {
        throw std::runtime_error("robustness: every row is ST or financial-industry");
      }
      emit_pair(est::ols_fe(table.select_rows(keep), base), a.estimate_dir,
                "robust_nospecial" + suffix,
                std::string("Excluding special observations (") + o.label + ")");

      est::RegressionSpec gri = base;
      gri.regressors.push_back("gri");
      emit_pair(est::ols_fe(table, gri), a.estimate_dir, "robust_gri" + suffix,
                std::string("Controlling for GRI adoption (") + o.label + ")");

      est::RegressionSpec roa = base;
      roa.regressors.erase(roa.regressors.begin());
      roa.regressors.insert(roa.regressors.begin(), "roa");
      emit_pair(est::ols_fe(table, roa), a.estimate_dir, "robust_roa" + suffix,
                std::string("Continuous profitability treatment (") + o.label + ")");
    }
    if (has_spec(cfg, "iv")) {
      est::RegressionSpec second = base;
      second.regressors.erase(second.regressors.begin());  // loss becomes endogenous
      for (const char* iv : {"iv1", "iv2", "iv3"}) {
        const est::TslsResult r = est::tsls(table, second, {"loss"}, {iv});
        emit_iv_pair(r, a.estimate_dir, std::string("iv_") + iv + suffix,
                     std::string("2SLS with ") + iv + " (" + o.label + ")");
      }
    }
  }
  if (has_spec(cfg, "psm")) run_psm(cfg, table, a.estimate_dir);
  if (has_spec(cfg, "placebo")) run_placebo(cfg, table, a.estimate_dir);
}

// ---------------------------------------------------------------------------
// figures stage

void stage_figures(const PipelineConfig& cfg) {
  const Artifacts a = artifacts(cfg);
  require_artifact(a.box_gini, "diversity");
  require_artifact(a.box_entropy, "diversity");
  fs::create_directories(a.figures_dir);
  report::emit_boxplot_svg(read_box_csvs(a.box_gini, a.box_gini_outliers),
                           a.figures_dir / "box_gini.svg", "Gini-Simpson diversity");
  report::emit_boxplot_svg(read_box_csvs(a.box_entropy, a.box_entropy_outliers),
                           a.figures_dir / "box_entropy.svg", "Shannon entropy");

  for (const OutcomeDef& o : kOutcomes) {
    const fs::path reps_path = a.estimate_dir / ("placebo_" + std::string(o.slug) + ".csv");
    const fs::path meta_path = a.estimate_dir / ("placebo_" + std::string(o.slug) + "_meta.csv");
    if (!fs::exists(reps_path) || !fs::exists(meta_path)) continue;
    const csv::Table reps = csv::read_file(reps_path);
    const std::string ctx = reps_path.string();
    const auto coef = static_cast<std::size_t>(reps.require_col("coefficient", ctx));
    const auto pval = static_cast<std::size_t>(reps.require_col("p_value", ctx));
    est::PlaceboDistribution dist;
    for (const auto& row : reps.rows) {
      dist.coefficients.push_back(csv::parse_double(row[coef], ctx));
      dist.p_values.push_back(csv::parse_double(row[pval], ctx));
    }
    const csv::Table meta = csv::read_file(meta_path);
    const std::string mctx = meta_path.string();
    if (meta.rows.size() != 1) throw std::runtime_error(mctx + ": expected exactly one row");
    dist.baseline_coef = csv::parse_double(
        meta.rows[0][static_cast<std::size_t>(meta.require_col("baseline_coef", mctx))], mctx);
    dist.n_reps = static_cast<int>(csv::parse_int(
        meta.rows[0][static_cast<std::size_t>(meta.require_col("n_reps", mctx))], mctx));
    dist.failed_reps = static_cast<int>(csv::parse_int(
        meta.rows[0][static_cast<std::size_t>(meta.require_col("failed_reps", mctx))], mctx));
    std::set<double> distinct(dist.coefficients.begin(), dist.coefficients.end());
    if (distinct.size() >= 2) dist.kde = est::kde_curve(dist.coefficients);
    report::emit_density_svg(dist, a.figures_dir / ("placebo_" + std::string(o.slug) + ".svg"),
                             std::string("Placebo distribution (") + o.label + ")");
  }
}

// ---------------------------------------------------------------------------
// orchestration

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json load_cache(const fs::path& path) {
  if (!fs::exists(path)) return nlohmann::json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) return nlohmann::json::object();
  try {
    nlohmann::json j;
    in >> j;
    if (!j.is_object()) return nlohmann::json::object();
    return j;
  } catch (const nlohmann::json::exception&) {
    return nlohmann::json::object();  // corrupt cache: rebuild everything
  }
}

void save_cache(const fs::path& path, const nlohmann::json& cache) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << cache.dump(2) << '\n';
}

void check_stage_inputs(const PipelineConfig& cfg, const std::vector<std::string>& requested) {
  auto selected = [&](const char* name) {
    return std::find(requested.begin(), requested.end(), name) != requested.end();
  };
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("config: ") + what + " path is required");
    if (!fs::exists(p)) {
      throw ConfigError(std::string(what) + " not found: " + p.string());
    }
  };
  if (selected("corpus")) {
    need(cfg.paths.manifest, "manifest");
    need(cfg.paths.text_dir, "text_dir");
    if (!cfg.paths.lexicon.empty()) need(cfg.paths.lexicon, "lexicon");
    if (!cfg.paths.stopwords.empty()) need(cfg.paths.stopwords, "stopwords");
  }
  if (selected("panel")) {
    need(cfg.paths.financials, "financials");
    if (!cfg.paths.competition.empty()) need(cfg.paths.competition, "competition");
  }
  if (cfg.paths.output_dir.empty()) throw ConfigError("config: output_dir is required");
}

std::vector<std::string> normalize_stages(const std::vector<std::string>& wanted) {
  if (wanted.empty()) return kStageNames;
  for (const std::string& s : wanted) {
    if (std::find(kStageNames.begin(), kStageNames.end(), s) == kStageNames.end()) {
      throw ConfigError("unknown stage '" + s + "'");
    }
  }
  std::vector<std::string> ordered;
  for (const std::string& s : kStageNames) {
    if (std::find(wanted.begin(), wanted.end(), s) != wanted.end()) ordered.push_back(s);
  }
  return ordered;
}

}  // namespace

const std::vector<std::string>& stage_names() { return kStageNames; }

RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  PipelineConfig cfg = config;
  if (options.seed) {
    cfg.corpus.seed = *options.seed;
    cfg.hpo.seed = *options.seed ^ fnv1a64("hpo");
    cfg.lda.seed = *options.seed ^ fnv1a64("lda");
    cfg.estimate.placebo_seed = *options.seed ^ fnv1a64("placebo");
  }
  if (options.jobs) cfg.run.jobs = *options.jobs;
  cfg.validate();

  const std::vector<std::string> requested =
      normalize_stages(options.stages.empty() ? cfg.run.stages : options.stages);
  check_stage_inputs(cfg, requested);

  const Artifacts a = artifacts(cfg);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) {
    throw ConfigError("cannot create output_dir " + a.out.string());
  }

  nlohmann::json cache = load_cache(a.cache);
  std::ofstream log(a.log, std::ios::binary | std::ios::app);
  if (!log) throw ConfigError("cannot open run log " + a.log.string());

  RunReport report;
  for (const std::string& stage : requested) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    nlohmann::json entry;
    entry["ts"] = iso_utc_now();
    entry["stage"] = stage;

    if (stage == "hpo" && !cfg.hpo.enabled) {
      entry["status"] = "disabled";
      entry["seconds"] = 0.0;
      log << entry.dump() << '\n' << std::flush;
      report.stages.push_back({stage, "disabled", 0.0});
      continue;
    }

    const std::optional<StageKey> key = stage_key(stage, cfg);
    if (key) {
      entry["key"] = key->key;
      nlohmann::json inputs = nlohmann::json::object();
      for (const auto& [path, hash] : key->inputs) inputs[path] = hash;
      entry["inputs"] = inputs;
    }

    bool skip = false;
    if (!options.force && key && cache.contains(stage) && cache[stage].value("key", "") == key->key) {
      skip = true;
      for (const fs::path& p : stage_outputs(stage, cfg)) {
        if (!fs::exists(p)) {
          skip = false;
          break;
        }
      }
    }
    if (skip) {
      entry["status"] = "skipped";
      entry["seconds"] = elapsed();
      log << entry.dump() << '\n' << std::flush;
      report.stages.push_back({stage, "skipped", elapsed()});
      continue;
    }

    try {
      if (stage == "corpus") {
        stage_corpus(cfg);
      } else if (stage == "hpo") {
        stage_hpo(cfg);
      } else if (stage == "lda") {
        stage_lda(cfg);
      } else if (stage == "diversity") {
        stage_diversity(cfg, cfg.run.jobs);
      } else if (stage == "panel") {
        stage_panel(cfg);
      } else if (stage == "estimate") {
        stage_estimate(cfg);
      } else if (stage == "figures") {
        stage_figures(cfg);
      }
    } catch (const std::exception& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      entry["seconds"] = elapsed();
      log << entry.dump() << '\n' << std::flush;
      throw StageError(stage, "stage " + stage + " failed: " + e.what());
    }

    // Recompute the key: the stage may consume artifacts written upstream in
    // this same run, and the pre-run key may have been unavailable.
    const std::optional<StageKey> post_key = stage_key(stage, cfg);
    if (post_key) {
      cache[stage] = {{"key", post_key->key}};
      save_cache(a.cache, cache);
      entry["key"] = post_key->key;
      nlohmann::json inputs = nlohmann::json::object();
      for (const auto& [path, hash] : post_key->inputs) inputs[path] = hash;
      entry["inputs"] = inputs;
    }
    nlohmann::json arts = nlohmann::json::array();
    for (const fs::path& p : stage_outputs(stage, cfg)) arts.push_back(p.string());
    entry["artifacts"] = arts;
    entry["status"] = "ok";
    entry["seconds"] = elapsed();
    log << entry.dump() << '\n' << std::flush;
    report.stages.push_back({stage, "ok", elapsed()});
  }
  return report;
}

void clean_outputs(const PipelineConfig& config) {
  const Artifacts a = artifacts(config);
  for (const fs::path& dir : {a.corpus_dir, a.hpo_dir, a.lda_dir, a.diversity_dir, a.panel_dir,
                              a.estimate_dir, a.figures_dir}) {
    fs::remove_all(dir);
  }
  fs::remove(a.cache);
  fs::remove(a.log);
}

// ---------------------------------------------------------------------------
// config parsing

std::map<std::string, std::map<std::string, std::string>> parse_ini(std::string_view text,
                                                                    std::string_view context) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = std::string(context) + ":" + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError(where + ": malformed section header '" + t + "'");
      }
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      sections.try_emplace(section);
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
    }
    if (section.empty()) {
      throw ConfigError(where + ": key outside of any [section]");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    auto [it, inserted] = sections[section].emplace(key, value);
    (void)it;
    if (!inserted) {
      throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
    }
  }
  return sections;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (corpus.min_doc_freq < 1) fail("[corpus] min_doc_freq must be >= 1");
  if (!(corpus.validation_fraction > 0.0 && corpus.validation_fraction < 1.0)) {
    fail("[corpus] validation_fraction must lie in (0, 1)");
  }
  if (hpo.n_trials < 1) fail("[hpo] n_trials must be >= 1");
  if (!(hpo.gamma > 0.0 && hpo.gamma < 1.0)) fail("[hpo] gamma must lie in (0, 1)");
  if (hpo.n_startup < 1) fail("[hpo] n_startup must be >= 1");
  if (hpo.n_candidates < 1) fail("[hpo] n_candidates must be >= 1");
  if (hpo.burn_in < 0) fail("[hpo] burn_in must be >= 0");
  if (hpo.samples < 1) fail("[hpo] samples must be >= 1");
  auto check_bounds = [&](double lo, double hi, const char* name, bool positive) {
    if (!(lo < hi)) fail(std::string("[hpo] ") + name + " bounds must satisfy min < max");
    if (positive && !(lo > 0.0)) fail(std::string("[hpo] ") + name + " bounds must be positive");
  };
  check_bounds(hpo.topics_min, hpo.topics_max, "topics", true);
  check_bounds(hpo.passes_min, hpo.passes_max, "passes", true);
  check_bounds(hpo.alpha_min, hpo.alpha_max, "alpha", true);
  check_bounds(hpo.beta_min, hpo.beta_max, "beta", true);
  auto integral = [](double v) { return v == std::floor(v); };
  if (!integral(hpo.topics_min) || !integral(hpo.topics_max) || !integral(hpo.passes_min) ||
      !integral(hpo.passes_max)) {
    fail("[hpo] topics and passes bounds must be integers");
  }
  if (hpo.topics_min < 1) fail("[hpo] topics_min must be >= 1");
  if (hpo.passes_min < 1) fail("[hpo] passes_min must be >= 1");
  if (lda.topics < 1) fail("[lda] topics must be >= 1");
  if (!(lda.alpha > 0.0)) fail("[lda] alpha must be positive");
  if (!(lda.beta > 0.0)) fail("[lda] beta must be positive");
  if (lda.passes < 1) fail("[lda] passes must be >= 1");
  if (lda.burn_in < 0) fail("[lda] burn_in must be >= 0");
  if (lda.samples < 1) fail("[lda] samples must be >= 1");
  if (panel.winsorize && !(panel.winsor_tail > 0.0 && panel.winsor_tail < 0.5)) {
    fail("[panel] winsor_tail must lie in (0, 0.5)");
  }
  if (panel.sample_mode != "baseline" && panel.sample_mode != "exclude_special") {
    fail("[panel] sample_mode must be baseline or exclude_special");
  }
  for (const std::string& s : estimate.specs) {
    if (std::find(kSpecNames.begin(), kSpecNames.end(), s) == kSpecNames.end()) {
      fail("[estimate] unknown spec '" + s + "'");
    }
  }
  if (estimate.placebo_reps < 1) fail("[estimate] placebo_reps must be >= 1");
  if (!(estimate.caliper > 0.0)) fail("[estimate] caliper must be positive");
  for (const std::string& s : run.stages) {
    if (std::find(kStageNames.begin(), kStageNames.end(), s) == kStageNames.end()) {
      fail("[run] unknown stage '" + s + "'");
    }
  }
  if (run.jobs < 1) fail("[run] jobs must be >= 1");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto sections = parse_ini(buffer.str(), path.string());

  PipelineConfig cfg;
  const fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& value) -> fs::path {
    if (value.empty()) return {};
    const fs::path p(value);
    return p.is_absolute() ? p : base / p;
  };

  for (const auto& [section, kv] : sections) {
    for (const auto& [key, value] : kv) {
      const std::string where = "[" + section + "] " + key;
      if (section == "paths") {
        if (key == "manifest") cfg.paths.manifest = resolve(value);
        else if (key == "text_dir") cfg.paths.text_dir = resolve(value);
        else if (key == "lexicon") cfg.paths.lexicon = resolve(value);
        else if (key == "stopwords") cfg.paths.stopwords = resolve(value);
        else if (key == "financials") cfg.paths.financials = resolve(value);
        else if (key == "competition") cfg.paths.competition = resolve(value);
        else if (key == "output_dir") cfg.paths.output_dir = resolve(value);
        else throw ConfigError("unknown key " + where);
      } else if (section == "corpus") {
        if (key == "min_doc_freq") cfg.corpus.min_doc_freq = parse_config_int(value, where);
        else if (key == "validation_fraction") cfg.corpus.validation_fraction = parse_config_double(value, where);
        else if (key == "seed") cfg.corpus.seed = parse_config_uint(value, where);
        else throw ConfigError("unknown key " + where);
      } else if (section == "hpo") {
        if (key == "enabled") cfg.hpo.enabled = parse_bool(value, where);
        else if (key == "n_trials") cfg.hpo.n_trials = parse_config_int(value, where);
        else if (key == "gamma") cfg.hpo.gamma = parse_config_double(value, where);
        else if (key == "n_startup") cfg.hpo.n_startup = parse_config_int(value, where);
        else if (key == "n_candidates") cfg.hpo.n_candidates = parse_config_int(value, where);
        else if (key == "burn_in") cfg.hpo.burn_in = parse_config_int(value, where);
        else if (key == "samples") cfg.hpo.samples = parse_config_int(value, where);
        else if (key == "topics_min") cfg.hpo.topics_min = parse_config_double(value, where);
        else if (key == "topics_max") cfg.hpo.topics_max = parse_config_double(value, where);
        else if (key == "passes_min") cfg.hpo.passes_min = parse_config_double(value, where);
        else if (key == "passes_max") cfg.hpo.passes_max = parse_config_double(value, where);
        else if (key == "alpha_min") cfg.hpo.alpha_min = parse_config_double(value, where);
        else if (key == "alpha_max") cfg.hpo.alpha_max = parse_config_double(value, where);
        else if (key == "beta_min") cfg.hpo.beta_min = parse_config_double(value, where);
        else if (key == "beta_max") cfg.hpo.beta_max = parse_config_double(value, where);
        else if (key == "seed") cfg.hpo.seed = parse_config_uint(value, where);
        else throw ConfigError("unknown key " + where);
      } else if (section == "lda") {
        if (key == "topics") cfg.lda.topics = parse_config_int(value, where);
        else if (key == "alpha") cfg.lda.alpha = parse_config_double(value, where);
        else if (key == "beta") cfg.lda.beta = parse_config_double(value, where);
        else if (key == "passes") cfg.lda.passes = parse_config_int(value, where);
        else if (key == "burn_in") cfg.lda.burn_in = parse_config_int(value, where);
        else if (key == "samples") cfg.lda.samples = parse_config_int(value, where);
        else if (key == "seed") cfg.lda.seed = parse_config_uint(value, where);
        else throw ConfigError("unknown key " + where);
      } else if (section == "panel") {
        if (key == "winsorize") cfg.panel.winsorize = parse_bool(value, where);
        else if (key == "winsor_tail") cfg.panel.winsor_tail = parse_config_double(value, where);
        else if (key == "sample_mode") cfg.panel.sample_mode = value;
        else throw ConfigError("unknown key " + where);
      } else if (section == "estimate") {
        if (key == "specs") cfg.estimate.specs = split_list(value, where);
        else if (key == "placebo_reps") cfg.estimate.placebo_reps = parse_config_int(value, where);
        else if (key == "placebo_seed") cfg.estimate.placebo_seed = parse_config_uint(value, where);
        else if (key == "caliper") cfg.estimate.caliper = parse_config_double(value, where);
        else throw ConfigError("unknown key " + where);
      } else if (section == "run") {
        if (key == "stages") cfg.run.stages = split_list(value, where);
        else if (key == "jobs") cfg.run.jobs = parse_config_int(value, where);
        else throw ConfigError("unknown key " + where);
      } else {
        throw ConfigError("unknown section [" + section + "] in " + path.string());
      }
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace topicdiv::pipeline
