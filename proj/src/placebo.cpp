#include "topicdiv/placebo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "topicdiv/rng.hpp"
#include "topicdiv/stats.hpp"

namespace topicdiv::est {

KdeCurve kde_curve(std::span<const double> values, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("kde_curve: need at least two grid points");
  if (values.size() < 2) throw std::invalid_argument("kde_curve: need at least two values");
  double lo = values[0];
  double hi = values[0];
  bool distinct = false;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("kde_curve: non-finite value");
    if (v != values[0]) distinct = true;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!distinct) {
    throw std::invalid_argument("kde_curve: all values identical; density is degenerate");
  }

  KdeCurve curve;
  curve.bandwidth = stats::silverman_bandwidth(values, 1e-12);
  const double a = lo - 3.0 * curve.bandwidth;
  const double b = hi + 3.0 * curve.bandwidth;
  curve.x.resize(grid_points);
  curve.density.resize(grid_points);
  const double step = (b - a) / static_cast<double>(grid_points - 1);
  const auto n = static_cast<double>(values.size());
  for (int g = 0; g < grid_points; ++g) {
    const double xg = a + step * g;
    curve.x[g] = xg;
    double acc = 0.0;
    for (double v : values) acc += stats::normal_pdf((xg - v) / curve.bandwidth);
    curve.density[g] = acc / (n * curve.bandwidth);
  }

  // Rescale so the trapezoid integral is exactly one; the +-3h window alone
  // can lose ~0.13% of the mass for very small samples.
  double integral = 0.0;
  for (int g = 1; g < grid_points; ++g) {
    integral += 0.5 * (curve.density[g] + curve.density[g - 1]) * step;
  }
  if (!(integral > 0.0)) throw std::runtime_error("kde_curve: vanishing density");
  curve.density /= integral;
  return curve;
}

Eigen::VectorXd permute_within_groups(const Eigen::VectorXd& values,
                                      const std::vector<int>& group_codes, Rng& rng) {
  if (static_cast<std::size_t>(values.size()) != group_codes.size()) {
    throw std::invalid_argument("permute_within_groups: size mismatch");
  }
  std::map<int, std::vector<Eigen::Index>> by_group;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    by_group[group_codes[static_cast<std::size_t>(i)]].push_back(i);
  }
  Eigen::VectorXd out = values;
  for (const auto& [group, rows] : by_group) {
    std::vector<double> slot;
    slot.reserve(rows.size());
    for (Eigen::Index r : rows) slot.push_back(values[r]);
    rng.shuffle(slot);
    for (std::size_t j = 0; j < rows.size(); ++j) out[rows[j]] = slot[j];
  }
  return out;
}

PlaceboDistribution placebo_run(const DataTable& table, const RegressionSpec& spec,
                                const std::string& treatment, int n_reps,
                                std::uint64_t master_seed, const std::string& year_dim) {
  if (n_reps < 1) throw std::invalid_argument("placebo_run: n_reps must be >= 1");
  if (std::find(spec.regressors.begin(), spec.regressors.end(), treatment) ==
      spec.regressors.end()) {
    throw std::invalid_argument("placebo_run: treatment '" + treatment +
                                "' is not among the regressors");
  }
  if (!table.has_categorical(year_dim)) {
    throw std::invalid_argument("placebo_run: no categorical dimension '" + year_dim + "'");
  }

  PlaceboDistribution dist;
  dist.n_reps = n_reps;

  const RegressionResult baseline = ols_fe(table, spec);
  dist.baseline_coef = baseline.coef_of(treatment);

  const std::vector<int>& year_codes = table.codes(year_dim);
  const Eigen::VectorXd original = table.numeric(treatment);
  DataTable scratch = table;

  for (int rep = 0; rep < n_reps; ++rep) {
    Rng rng(master_seed ^ static_cast<std::uint64_t>(rep));
    scratch.numeric_mut(treatment) = permute_within_groups(original, year_codes, rng);
    try {
      const RegressionResult r = ols_fe(scratch, spec);
      const double coef = r.coef_of(treatment);
      const double p = r.pval_of(treatment);
      if (!std::isfinite(coef) || !std::isfinite(p)) throw std::runtime_error("non-finite");
      dist.coefficients.push_back(coef);
      dist.p_values.push_back(p);
    } catch (const std::exception&) {
      ++dist.failed_reps;
    }
  }

  if (dist.coefficients.size() >= 2) {
    bool distinct = false;
    for (double c : dist.coefficients) distinct = distinct || c != dist.coefficients.front();
    if (distinct) dist.kde = kde_curve(dist.coefficients);
  }
  return dist;
}

}  // namespace topicdiv::est
