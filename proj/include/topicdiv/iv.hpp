#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "topicdiv/data_table.hpp"
#include "topicdiv/regression.hpp"

namespace topicdiv::est {

struct KpStats {
  double lm = 0.0;      // Kleibergen-Paap rank LM (underidentification)
  double lm_p = 0.0;    // chi-squared(L) upper tail
  double wald_f = 0.0;  // Kleibergen-Paap rank Wald F (weak identification)
};

// Cluster-robust identification diagnostics for one endogenous regressor.
// endog and instruments arrive already demeaned and partialled of nothing;
// exog columns (possibly empty) are partialled out internally.
KpStats kp_tests(const Eigen::VectorXd& endog, const Eigen::MatrixXd& instruments,
                 const Eigen::MatrixXd& exog, std::span<const int> cluster);

struct TslsResult {
  RegressionResult first_stage;   // endogenous on instruments + exogenous
  RegressionResult second_stage;  // outcome on endogenous (fitted) + exogenous
  KpStats kp;
  double stock_yogo_10pct = 16.38;  // 10% maximal-size critical value, 1 endog / 1 instr
  bool weak_instrument_warning = false;
  std::vector<std::string> instruments;
  std::string endogenous;
};

// Two-stage least squares with absorbed fixed effects and CR1 clustered
// second-stage inference computed from the structural residuals
// y - x*beta - W*delta (actual endogenous values, not fitted ones).
// Exactly one endogenous regressor is supported; more is an error.
TslsResult tsls(const DataTable& table, const RegressionSpec& spec,
                const std::vector<std::string>& endogenous,
                const std::vector<std::string>& instruments);

}  // namespace topicdiv::est
