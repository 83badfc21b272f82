#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace topicdiv::hpo {

enum class ParamKind { integer, real };
enum class ParamScale { linear, log_scale };

struct Dimension {
  std::string name;
  ParamKind kind = ParamKind::real;
  double lo = 0.0;
  double hi = 0.0;
  ParamScale scale = ParamScale::linear;
};

struct SearchSpace {
  std::vector<Dimension> dims;

  void validate() const;  // nonempty, lo < hi, log scale needs lo > 0, unique names
};

struct Trial {
  std::vector<double> params;
  double objective = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
};

struct TpeOptions {
  double gamma = 0.25;
  int n_startup = 10;
  int n_candidates = 24;
};

struct TrialHistory {
  std::vector<Trial> trials;
  TpeOptions options;
};

// Good set = the ceil(gamma * n) best trials by (objective, trial_index);
// the rest are bad. Both sides come back in trial_index order.
std::pair<std::vector<Trial>, std::vector<Trial>> split_good_bad(const TrialHistory& history);

// Prior sample while history is shorter than n_startup, otherwise the
// candidate maximizing l(x)/g(x) under per-dimension Gaussian KDEs.
std::vector<double> tpe_suggest(const TrialHistory& history, const SearchSpace& space,
                                std::uint64_t seed);

using Objective = std::function<double(const std::vector<double>& params, std::uint64_t seed)>;

struct OptimizeResult {
  Trial best;
  TrialHistory history;
};

// Runs n_trials evaluations; trial t uses seed master_seed ^ t. Non-finite
// objective values are quarantined (objective = +inf, failed flag) and never
// become best unless every trial failed, which is an error.
OptimizeResult optimize(const Objective& objective, const SearchSpace& space, int n_trials,
                        std::uint64_t master_seed, const TpeOptions& options = {});

// History CSV: trial_index,<dim names...>,objective,seed.
void save_history_csv(const std::filesystem::path& path, const TrialHistory& history,
                      const SearchSpace& space);
TrialHistory load_history_csv(const std::filesystem::path& path, const SearchSpace& space,
                              const TpeOptions& options = {});

}  // namespace topicdiv::hpo
