#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topicdiv/data_table.hpp"
#include "topicdiv/regression.hpp"
#include "topicdiv/rng.hpp"

namespace topicdiv::est {

struct KdeCurve {
  Eigen::VectorXd x;        // grid over [min - 3h, max + 3h]
  Eigen::VectorXd density;  // trapezoid-normalized
  double bandwidth = 0.0;
};

// Gaussian KDE with Silverman bandwidth; needs at least two distinct values.
KdeCurve kde_curve(std::span<const double> values, int grid_points = 256);

// Shuffles values independently within each group (groups taken in ascending
// code order), preserving every group's multiset of values.
Eigen::VectorXd permute_within_groups(const Eigen::VectorXd& values,
                                      const std::vector<int>& group_codes, Rng& rng);

struct PlaceboDistribution {
  double baseline_coef = 0.0;
  std::vector<double> coefficients;  // successful reps only
  std::vector<double> p_values;
  int n_reps = 0;
  int failed_reps = 0;
  KdeCurve kde;
};

// Permutes the treatment column within each year (preserving annual treated
// counts), refits the spec, and records the treatment coefficient and its
// cluster-robust p-value. Rep r uses seed master_seed ^ r. Failed reps are
// counted and excluded from the density.
PlaceboDistribution placebo_run(const DataTable& table, const RegressionSpec& spec,
                                const std::string& treatment, int n_reps,
                                std::uint64_t master_seed,
                                const std::string& year_dim = "year");

}  // namespace topicdiv::est
