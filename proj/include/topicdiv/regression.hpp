#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topicdiv/data_table.hpp"

namespace topicdiv::est {

struct RegressionSpec {
  std::string outcome;
  std::vector<std::string> regressors;
  // Pairs already materialized into product columns named "a×b".
  std::vector<std::pair<std::string, std::string>> interactions;
  std::vector<std::string> absorb;  // categorical fixed-effect dimensions
  std::string cluster;              // categorical cluster dimension

  void validate() const;
};

// Appends the product column a×b (and the main effects when absent).
// Throws on a name collision with an existing regressor.
RegressionSpec with_interaction(RegressionSpec spec, const std::string& a, const std::string& b);

std::string interaction_name(const std::string& a, const std::string& b);

struct DemeanResult {
  Eigen::MatrixXd data;
  std::vector<int> zeroed_columns;  // constant within every absorbed cell
  int iterations = 0;
};

// Alternating within-group demeaning across the absorb dimensions until the
// largest cell change drops below 1e-10 (at most 100 rounds).
DemeanResult within_demean(const Eigen::MatrixXd& columns,
                           const std::vector<std::vector<int>>& groups);

struct AbsorbedInfo {
  std::string name;
  int levels = 0;
};

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd tstat;
  Eigen::VectorXd pval;  // two-sided, t(G-1)
  Eigen::MatrixXd vcov;
  Eigen::VectorXd residuals;
  Eigen::Index n_obs = 0;
  int n_clusters = 0;
  double adjusted_r2 = 0.0;
  std::vector<AbsorbedInfo> absorbed;
  std::vector<std::string> dropped_collinear;

  int index_of(const std::string& name) const;  // -1 when absent
  double coef_of(const std::string& name) const;
  double se_of(const std::string& name) const;
  double pval_of(const std::string& name) const;
};

// OLS with absorbed fixed effects and cluster-robust (CR1) inference.
// Missing values are dropped listwise; an intercept is added automatically
// when no fixed effects are absorbed.
RegressionResult ols_fe(const DataTable& table, const RegressionSpec& spec);

// CR1 sandwich: (X'X)^-1 [sum_g X_g'u_g u_g'X_g] (X'X)^-1 scaled by
// G/(G-1) * (N-1)/(N-k).
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             std::span<const int> cluster);

// Shared helper: builds the design matrix for a spec on the complete-case
// subsample. Used by ols_fe, tsls and the matching estimators.
struct BuiltDesign {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;                // regressors + interactions, pre-demeaning
  std::vector<std::string> names;   // column names of X
  std::vector<std::vector<int>> absorb_groups;
  std::vector<AbsorbedInfo> absorbed;
  std::vector<int> cluster_codes;
  std::vector<Eigen::Index> rows;   // indices of the retained source rows
};

BuiltDesign build_design(const DataTable& table, const RegressionSpec& spec,
                         const std::vector<std::string>& extra_numeric = {});

}  // namespace topicdiv::est
