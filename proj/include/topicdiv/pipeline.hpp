#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topicdiv::pipeline {

// Configuration problems: unknown keys, bad values, missing input files.
// The CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A stage body failed at run time. The CLI maps these to exit code 2.
struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& message)
      : std::runtime_error(message), stage(std::move(stage_name)) {}
  std::string stage;
};

struct PathsConfig {
  std::filesystem::path manifest;
  std::filesystem::path text_dir;
  std::filesystem::path lexicon;    // optional; empty disables
  std::filesystem::path stopwords;  // optional; empty disables
  std::filesystem::path financials;
  std::filesystem::path competition;  // optional; empty disables
  std::filesystem::path output_dir;
};

struct CorpusConfig {
  int min_doc_freq = 1;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct HpoConfig {
  bool enabled = true;
  int n_trials = 20;
  double gamma = 0.25;
  int n_startup = 10;
  int n_candidates = 24;
  int burn_in = 20;   // held-out inference during tuning
  int samples = 20;
  double topics_min = 2;
  double topics_max = 20;
  double passes_min = 50;
  double passes_max = 300;
  double alpha_min = 0.01;
  double alpha_max = 2.0;
  double beta_min = 0.005;
  double beta_max = 1.0;
  std::uint64_t seed = 0;
};

struct LdaConfig {
  int topics = 10;  // used when hpo is disabled
  double alpha = 0.5;
  double beta = 0.1;
  int passes = 200;
  int burn_in = 50;  // held-out inference for diversity scoring
  int samples = 50;
  std::uint64_t seed = 0;
};

struct PanelConfig {
  bool winsorize = false;
  double winsor_tail = 0.01;
  std::string sample_mode = "baseline";  // or exclude_special
};

struct EstimateConfig {
  std::vector<std::string> specs;  // subset of {baseline, moderation, heterogeneity, robustness, iv, psm, placebo}
  int placebo_reps = 1000;
  std::uint64_t placebo_seed = 0;
  double caliper = 0.05;
};

struct RunConfig {
  std::vector<std::string> stages;  // empty = all, dependency order
  int jobs = 1;
};

struct PipelineConfig {
  PathsConfig paths;
  CorpusConfig corpus;
  HpoConfig hpo;
  LdaConfig lda;
  PanelConfig panel;
  EstimateConfig estimate;
  RunConfig run;

  void validate() const;  // value ranges only; path existence is checked per selected stage
};

// INI-style: [section] headers, key = value lines, # or ; full-line comments.
std::map<std::string, std::map<std::string, std::string>> parse_ini(std::string_view text,
                                                                    std::string_view context);

// Loads and validates; relative paths are resolved against the config file's
// directory. Unknown sections or keys are errors.
PipelineConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  bool force = false;                      // ignore the stage cache
  std::optional<std::uint64_t> seed;       // overrides every stage seed
  std::optional<int> jobs;                 // overrides [run] jobs
  std::vector<std::string> stages;         // subset to run; empty = config selection
};

struct StageOutcome {
  std::string name;
  std::string status;  // ok | skipped | disabled
  double seconds = 0.0;
};

struct RunReport {
  std::vector<StageOutcome> stages;
};

// Canonical stage order: corpus, hpo, lda, diversity, panel, estimate, figures.
const std::vector<std::string>& stage_names();

// Runs the selected stages in dependency order. Each stage is memoized on a
// key derived from its input-file hashes and config slice (stored in
// .stage_cache.json under the output directory) and appends one line to
// run_log.jsonl. Throws ConfigError or StageError.
RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

// Removes the output directory's stage artifacts, cache and log.
void clean_outputs(const PipelineConfig& config);

}  // namespace topicdiv::pipeline
