#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topicdiv/data_table.hpp"

namespace topicdiv::est {

struct LogitResult {
  std::vector<std::string> names;  // "(intercept)" first
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd pscores;
  int iterations = 0;
};

// Damped Newton logit fit on internally standardized covariates; converges
// when the gradient's max norm falls below 1e-8. Coefficients above 50 in
// absolute value on the standardized scale abort with a separation error
// naming the covariate.
LogitResult logit_fit(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& treated,
                      const std::vector<std::string>& names);

LogitResult logit_propensity(const DataTable& table, const std::string& treatment,
                             const std::vector<std::string>& covariates);

struct MatchPair {
  Eigen::Index treated_row = 0;
  Eigen::Index control_row = 0;
  double pscore_gap = 0.0;
};

struct MatchDiagnostics {
  std::vector<MatchPair> pairs;
  int off_support = 0;  // treated outside the common-support interval
  int unmatched = 0;    // treated with no control inside the caliper
  double support_lo = 0.0;
  double support_hi = 0.0;
};

// 1:1 nearest-neighbor matching on the propensity score, with replacement,
// restricted to common support, treated units processed in descending score
// order. Ties go to the lowest row index.
MatchDiagnostics nn_match(std::span<const double> pscores, std::span<const int> treated,
                          double caliper);

// ATT plus its paired variance with a correction for reused controls.
std::pair<double, double> att(std::span<const MatchPair> pairs,
                              std::span<const double> outcome);

struct BalanceRow {
  std::string covariate;
  double bias_before = 0.0;  // 100 * (mean_T - mean_C) / pooled pre-match sd
  double bias_after = 0.0;   // same denominator, matched means
  double t_after = 0.0;      // Welch t on the matched groups
  double p_after = 0.0;
  bool undefined = false;    // zero pooled variance
};

std::vector<BalanceRow> balance_diagnostics(const DataTable& table,
                                            const std::string& treatment,
                                            const std::vector<std::string>& covariates,
                                            std::span<const MatchPair> pairs);

}  // namespace topicdiv::est
