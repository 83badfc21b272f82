#include "topicdiv/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "topicdiv/csv.hpp"
#include "topicdiv/rng.hpp"
#include "topicdiv/stats.hpp"

namespace topicdiv::hpo {

namespace {

constexpr double kDensityFloor = 1e-12;

double to_internal(const Dimension& dim, double x) {
  return dim.scale == ParamScale::log_scale ? std::log(x) : x;
}

double from_internal(const Dimension& dim, double t) {
  return dim.scale == ParamScale::log_scale ? std::exp(t) : t;
}

// Round integer dims, then clamp into [lo, hi] in the original space.
double finalize(const Dimension& dim, double raw) {
  double x = raw;
  if (dim.kind == ParamKind::integer) x = std::round(x);
  x = std::clamp(x, dim.lo, dim.hi);
  if (dim.kind == ParamKind::integer) x = std::round(x);
  return x;
}

double prior_draw(const Dimension& dim, Rng& rng) {
  const double t = rng.uniform(to_internal(dim, dim.lo), to_internal(dim, dim.hi));
  return finalize(dim, from_internal(dim, t));
}

struct DimKde {
  std::vector<double> centers;  // internal scale
  double bandwidth = 0.0;
};

DimKde make_kde(const Dimension& dim, const std::vector<const Trial*>& trials, std::size_t d) {
  DimKde kde;
  kde.centers.reserve(trials.size());
  for (const Trial* t : trials) kde.centers.push_back(to_internal(dim, t->params[d]));
  const double range = to_internal(dim, dim.hi) - to_internal(dim, dim.lo);
  const double floor_value = 1e-3 * range;
  if (kde.centers.size() < 2) {
    kde.bandwidth = std::max(floor_value, 1e-12);
  } else {
    kde.bandwidth = stats::silverman_bandwidth(kde.centers, floor_value);
    if (!(kde.bandwidth > 0.0)) kde.bandwidth = std::max(floor_value, 1e-12);
  }
  return kde;
}

double kde_density(const DimKde& kde, double t) {
  double acc = 0.0;
  for (double c : kde.centers) acc += stats::normal_pdf((t - c) / kde.bandwidth);
  return acc / (kde.bandwidth * static_cast<double>(kde.centers.size()));
}

}  // namespace

void SearchSpace::validate() const {
  if (dims.empty()) throw std::invalid_argument("SearchSpace: no dimensions");
  std::set<std::string> names;
  for (const Dimension& dim : dims) {
    if (dim.name.empty()) throw std::invalid_argument("SearchSpace: unnamed dimension");
    if (!names.insert(dim.name).second) {
      throw std::invalid_argument("SearchSpace: duplicate dimension name '" + dim.name + "'");
    }
    if (!(dim.lo < dim.hi)) {
      throw std::invalid_argument("SearchSpace: dimension '" + dim.name + "' needs lo < hi");
    }
    if (dim.scale == ParamScale::log_scale && !(dim.lo > 0.0)) {
      throw std::invalid_argument("SearchSpace: log dimension '" + dim.name +
                                  "' needs positive bounds");
    }
    if (dim.kind == ParamKind::integer &&
        (std::round(dim.lo) != dim.lo || std::round(dim.hi) != dim.hi)) {
      throw std::invalid_argument("SearchSpace: integer dimension '" + dim.name +
                                  "' needs integer bounds");
    }
  }
}

std::pair<std::vector<Trial>, std::vector<Trial>> split_good_bad(const TrialHistory& history) {
  const auto& trials = history.trials;
  if (trials.size() < 2) {
    throw std::invalid_argument("split_good_bad: need at least two trials");
  }
  const double gamma = history.options.gamma;
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("split_good_bad: gamma must be in (0, 1)");
  }

  std::vector<std::size_t> order(trials.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (trials[a].objective != trials[b].objective) {
      return trials[a].objective < trials[b].objective;
    }
    return trials[a].trial_index < trials[b].trial_index;
  });

  const auto n_good = static_cast<std::size_t>(
      std::ceil(gamma * static_cast<double>(trials.size()) - 1e-9));
  std::vector<bool> good_mask(trials.size(), false);
  for (std::size_t i = 0; i < std::max<std::size_t>(n_good, 1); ++i) good_mask[order[i]] = true;

  std::pair<std::vector<Trial>, std::vector<Trial>> out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    (good_mask[i] ? out.first : out.second).push_back(trials[i]);
  }
  return out;
}

std::vector<double> tpe_suggest(const TrialHistory& history, const SearchSpace& space,
                                std::uint64_t seed) {
  space.validate();
  for (const Trial& t : history.trials) {
    if (t.params.size() != space.dims.size()) {
      throw std::invalid_argument("tpe_suggest: trial parameter arity does not match the space");
    }
  }

  Rng rng(seed);
  const auto n_dims = space.dims.size();
  std::vector<double> out(n_dims);

  if (history.trials.size() < static_cast<std::size_t>(history.options.n_startup) ||
      history.trials.size() < 2) {
    for (std::size_t d = 0; d < n_dims; ++d) out[d] = prior_draw(space.dims[d], rng);
    return out;
  }

  auto [good, bad] = split_good_bad(history);
  if (bad.empty()) {
    for (std::size_t d = 0; d < n_dims; ++d) out[d] = prior_draw(space.dims[d], rng);
    return out;
  }

  std::vector<const Trial*> good_ptr;
  std::vector<const Trial*> bad_ptr;
  for (const Trial& t : good) good_ptr.push_back(&t);
  for (const Trial& t : bad) bad_ptr.push_back(&t);

  std::vector<DimKde> lo_kde;
  std::vector<DimKde> hi_kde;
  for (std::size_t d = 0; d < n_dims; ++d) {
    lo_kde.push_back(make_kde(space.dims[d], good_ptr, d));
    hi_kde.push_back(make_kde(space.dims[d], bad_ptr, d));
  }

  const int n_candidates = std::max(history.options.n_candidates, 1);
  double best_ratio = -std::numeric_limits<double>::infinity();
  std::vector<double> best(n_dims);
  std::vector<double> cand(n_dims);

  for (int c = 0; c < n_candidates; ++c) {
    for (std::size_t d = 0; d < n_dims; ++d) {
      const DimKde& kde = lo_kde[d];
      const auto pick = static_cast<std::size_t>(rng.below(kde.centers.size()));
      const double t = kde.centers[pick] + kde.bandwidth * rng.normal();
      cand[d] = finalize(space.dims[d], from_internal(space.dims[d], t));
    }
    double l = 1.0;
    double g = 1.0;
    for (std::size_t d = 0; d < n_dims; ++d) {
      const double t = to_internal(space.dims[d], cand[d]);
      l *= kde_density(lo_kde[d], t);
      g *= kde_density(hi_kde[d], t);
    }
    l = std::max(l, kDensityFloor);
    g = std::max(g, kDensityFloor);
    const double ratio = l / g;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = cand;
    }
  }
  return best;
}

OptimizeResult optimize(const Objective& objective, const SearchSpace& space, int n_trials,
                        std::uint64_t master_seed, const TpeOptions& options) {
  space.validate();
  if (n_trials < 1) throw std::invalid_argument("optimize: n_trials must be >= 1");
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) {
    throw std::invalid_argument("optimize: gamma must be in (0, 1)");
  }
  if (options.n_startup < 1) throw std::invalid_argument("optimize: n_startup must be >= 1");
  if (options.n_candidates < 1) throw std::invalid_argument("optimize: n_candidates must be >= 1");

  OptimizeResult result;
  result.history.options = options;

  for (int t = 0; t < n_trials; ++t) {
    const std::uint64_t trial_seed = master_seed ^ static_cast<std::uint64_t>(t);
    Trial trial;
    trial.trial_index = t;
    trial.seed = trial_seed;
    trial.params = tpe_suggest(result.history, space, trial_seed);
    double y = std::numeric_limits<double>::quiet_NaN();
    try {
      y = objective(trial.params, trial_seed);
    } catch (const std::exception&) {
      y = std::numeric_limits<double>::quiet_NaN();
    }
    if (std::isfinite(y)) {
      trial.objective = y;
    } else {
      trial.objective = std::numeric_limits<double>::infinity();
      trial.failed = true;
    }
    result.history.trials.push_back(std::move(trial));
  }

  const Trial* best = nullptr;
  for (const Trial& t : result.history.trials) {
    if (t.failed) continue;
    if (!best || t.objective < best->objective ||
        (t.objective == best->objective && t.trial_index < best->trial_index)) {
      best = &t;
    }
  }
  if (!best) throw std::runtime_error("optimize: every trial failed");
  result.best = *best;
  return result;
}

void save_history_csv(const std::filesystem::path& path, const TrialHistory& history,
                      const SearchSpace& space) {
  csv::Writer w(path);
  w.field("trial_index");
  for (const Dimension& dim : space.dims) w.field(dim.name);
  w.field("objective").field("seed");
  w.end_row();
  for (const Trial& t : history.trials) {
    w.field(static_cast<long long>(t.trial_index));
    for (double p : t.params) w.field(p);
    if (t.failed) {
      w.field("inf");
    } else {
      w.field(t.objective);
    }
    w.field(static_cast<unsigned long long>(t.seed));
    w.end_row();
  }
}

TrialHistory load_history_csv(const std::filesystem::path& path, const SearchSpace& space,
                              const TpeOptions& options) {
  const csv::Table table = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_idx = table.require_col("trial_index", ctx);
  const int c_obj = table.require_col("objective", ctx);
  const int c_seed = table.require_col("seed", ctx);
  std::vector<int> c_dim;
  for (const Dimension& dim : space.dims) c_dim.push_back(table.require_col(dim.name, ctx));

  TrialHistory history;
  history.options = options;
  for (const auto& row : table.rows) {
    Trial t;
    t.trial_index = static_cast<int>(csv::parse_int(row[static_cast<std::size_t>(c_idx)], ctx));
    for (int c : c_dim) t.params.push_back(csv::parse_double(row[static_cast<std::size_t>(c)], ctx));
    const std::string& obj = row[static_cast<std::size_t>(c_obj)];
    if (obj == "inf") {
      t.objective = std::numeric_limits<double>::infinity();
      t.failed = true;
    } else {
      t.objective = csv::parse_double(obj, ctx);
    }
    t.seed = csv::parse_uint(row[static_cast<std::size_t>(c_seed)], ctx);
    history.trials.push_back(std::move(t));
  }
  return history;
}

}  // namespace topicdiv::hpo
