#include "topicdiv/iv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "topicdiv/stats.hpp"

namespace topicdiv::est {

namespace {

// Least-squares projection residuals of each column of M on the columns of W.
Eigen::MatrixXd partial_out(const Eigen::MatrixXd& M, const Eigen::MatrixXd& W) {
  if (W.cols() == 0) return M;
  const Eigen::MatrixXd coef = W.colPivHouseholderQr().solve(M);
  return M - W * coef;
}

int distinct_codes(std::span<const int> codes) {
  std::set<int> s(codes.begin(), codes.end());
  return static_cast<int>(s.size());
}

// OLS + CR1 inference on a prepared design; shared by both stages.
RegressionResult fit_prepared(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              std::vector<std::string> names,
                              std::span<const int> cluster,
                              std::vector<AbsorbedInfo> absorbed,
                              const Eigen::VectorXd& sst_reference, double extra_dof,
                              const Eigen::VectorXd* inference_residuals) {
  RegressionResult r;
  r.n_obs = X.rows();
  r.absorbed = std::move(absorbed);
  r.names = std::move(names);
  r.coef = X.colPivHouseholderQr().solve(y);
  r.residuals = y - X * r.coef;
  const Eigen::VectorXd& u = inference_residuals ? *inference_residuals : r.residuals;

  r.vcov = cluster_vcov(X, u, cluster);
  r.n_clusters = distinct_codes(cluster);
  const double dof = static_cast<double>(r.n_clusters - 1);
  r.se.resize(X.cols());
  r.tstat.resize(X.cols());
  r.pval.resize(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    r.se[c] = std::sqrt(std::max(r.vcov(c, c), 0.0));
    r.tstat[c] = r.se[c] > 0.0 ? r.coef[c] / r.se[c] : std::nan("");
    r.pval[c] = r.se[c] > 0.0 ? stats::student_t_two_sided_p(r.tstat[c], dof) : std::nan("");
  }

  const double n_d = static_cast<double>(X.rows());
  const double p = static_cast<double>(X.cols()) + extra_dof;
  const double mean = sst_reference.mean();
  const double sst = (sst_reference.array() - mean).square().sum();
  const double ssr = u.squaredNorm();
  r.adjusted_r2 = (sst > 0.0 && n_d - p >= 1.0)
                      ? 1.0 - (ssr / (n_d - p)) / (sst / (n_d - 1.0))
                      : std::nan("");
  return r;
}

}  // namespace

KpStats kp_tests(const Eigen::VectorXd& endog, const Eigen::MatrixXd& instruments,
                 const Eigen::MatrixXd& exog, std::span<const int> cluster) {
  const Eigen::Index n = endog.size();
  const Eigen::Index L = instruments.cols();
  if (L == 0) throw std::invalid_argument("kp_tests: no instruments");
  if (instruments.rows() != n || (exog.cols() > 0 && exog.rows() != n)) {
    throw std::invalid_argument("kp_tests: row mismatch");
  }

  KpStats kp;

  // Wald: instrument block of the full first-stage CR1 covariance.
  Eigen::MatrixXd design(n, L + exog.cols());
  design.leftCols(L) = instruments;
  if (exog.cols() > 0) design.rightCols(exog.cols()) = exog;
  const Eigen::VectorXd pi = design.colPivHouseholderQr().solve(endog);
  const Eigen::VectorXd u = endog - design * pi;
  const Eigen::MatrixXd v = cluster_vcov(design, u, cluster);
  const Eigen::MatrixXd v_zz = v.topLeftCorner(L, L);
  const Eigen::VectorXd pi_z = pi.head(L);
  const Eigen::VectorXd solved = v_zz.ldlt().solve(pi_z);
  const double wald = pi_z.dot(solved);
  kp.wald_f = std::isfinite(wald) && wald >= 0.0
                  ? wald / static_cast<double>(L)
                  : std::numeric_limits<double>::infinity();

  // LM: robust score statistic on exog-partialled data.
  const Eigen::MatrixXd z_t = partial_out(instruments, exog);
  const Eigen::VectorXd x_t = partial_out(endog, exog);
  int max_code = 0;
  for (int c : cluster) max_code = std::max(max_code, c);
  Eigen::MatrixXd cluster_scores = Eigen::MatrixXd::Zero(max_code + 1, L);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(L);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd contrib = x_t[i] * z_t.row(i);
    s += contrib.transpose();
    cluster_scores.row(cluster[static_cast<std::size_t>(i)]) += contrib;
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(L, L);
  for (int g = 0; g <= max_code; ++g) {
    S.noalias() += cluster_scores.row(g).transpose() * cluster_scores.row(g);
  }
  const double lm = s.dot(S.ldlt().solve(s));
  kp.lm = std::isfinite(lm) && lm >= 0.0 ? lm : std::nan("");
  kp.lm_p = std::isfinite(kp.lm)
                ? stats::chi_squared_upper_p(kp.lm, static_cast<double>(L))
                : std::nan("");
  return kp;
}

TslsResult tsls(const DataTable& table, const RegressionSpec& spec,
                const std::vector<std::string>& endogenous,
                const std::vector<std::string>& instruments) {
  if (endogenous.size() != 1) {
    throw std::invalid_argument(
        "tsls: exactly one endogenous regressor is supported; got " +
        std::to_string(endogenous.size()));
  }
  if (instruments.empty()) throw std::invalid_argument("tsls: no instruments");
  const std::string& endog_name = endogenous.front();
  for (const std::string& r : spec.regressors) {
    if (r == endog_name) {
      throw std::invalid_argument("tsls: endogenous regressor '" + endog_name +
                                  "' must not appear among the exogenous regressors");
    }
  }
  std::set<std::string> instrument_set;
  for (const std::string& z : instruments) {
    if (!instrument_set.insert(z).second) {
      throw std::invalid_argument("tsls: duplicate instrument '" + z + "'");
    }
  }

  std::vector<std::string> extra = {endog_name};
  extra.insert(extra.end(), instruments.begin(), instruments.end());
  BuiltDesign design = build_design(table, spec, extra);
  const auto n = static_cast<Eigen::Index>(design.rows.size());
  const auto L0 = static_cast<Eigen::Index>(instruments.size());

  Eigen::VectorXd x(n);
  Eigen::MatrixXd Z(n, L0);
  {
    const Eigen::VectorXd& x_full = table.numeric(endog_name);
    for (Eigen::Index r = 0; r < n; ++r) x[r] = x_full[design.rows[static_cast<std::size_t>(r)]];
    for (Eigen::Index j = 0; j < L0; ++j) {
      const Eigen::VectorXd& z_full = table.numeric(instruments[static_cast<std::size_t>(j)]);
      for (Eigen::Index r = 0; r < n; ++r) {
        Z(r, j) = z_full[design.rows[static_cast<std::size_t>(r)]];
      }
    }
  }

  Eigen::VectorXd y = design.y;
  Eigen::MatrixXd W = design.X;
  std::vector<std::string> w_names = design.names;
  std::vector<std::string> z_names = instruments;
  std::vector<std::string> dropped;

  if (spec.absorb.empty()) {
    W.conservativeResize(Eigen::NoChange, W.cols() + 1);
    W.col(W.cols() - 1).setOnes();
    w_names.emplace_back("(intercept)");
  } else {
    Eigen::MatrixXd joint(n, 2 + L0 + W.cols());
    joint.col(0) = y;
    joint.col(1) = x;
    joint.middleCols(2, L0) = Z;
    if (W.cols() > 0) joint.rightCols(W.cols()) = W;
    DemeanResult dm = within_demean(joint, design.absorb_groups);
    y = dm.data.col(0);
    x = dm.data.col(1);

    const auto zeroed = [&dm](int c) {
      return std::find(dm.zeroed_columns.begin(), dm.zeroed_columns.end(), c) !=
             dm.zeroed_columns.end();
    };
    if (zeroed(1)) {
      throw std::runtime_error("tsls: endogenous regressor '" + endog_name +
                               "' is collinear with the fixed effects");
    }
    std::vector<std::string> kept_z_names;
    std::vector<Eigen::Index> kept_z;
    for (Eigen::Index j = 0; j < L0; ++j) {
      if (zeroed(static_cast<int>(2 + j))) {
        dropped.push_back(z_names[static_cast<std::size_t>(j)]);
      } else {
        kept_z.push_back(j);
        kept_z_names.push_back(z_names[static_cast<std::size_t>(j)]);
      }
    }
    if (kept_z.empty()) {
      throw std::runtime_error("tsls: every instrument is collinear with the fixed effects");
    }
    Eigen::MatrixXd Zk(n, static_cast<Eigen::Index>(kept_z.size()));
    for (std::size_t j = 0; j < kept_z.size(); ++j) {
      Zk.col(static_cast<Eigen::Index>(j)) = dm.data.col(2 + kept_z[j]);
    }
    Z = std::move(Zk);
    z_names = std::move(kept_z_names);

    std::vector<std::string> kept_w_names;
    std::vector<Eigen::Index> kept_w;
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      if (zeroed(static_cast<int>(2 + L0 + c))) {
        dropped.push_back(w_names[static_cast<std::size_t>(c)]);
      } else {
        kept_w.push_back(c);
        kept_w_names.push_back(w_names[static_cast<std::size_t>(c)]);
      }
    }
    Eigen::MatrixXd Wk(n, static_cast<Eigen::Index>(kept_w.size()));
    for (std::size_t c = 0; c < kept_w.size(); ++c) {
      Wk.col(static_cast<Eigen::Index>(c)) = dm.data.col(2 + L0 + kept_w[c]);
    }
    W = std::move(Wk);
    w_names = std::move(kept_w_names);
  }

  const auto L = Z.cols();

  double absorbed_dof = 0.0;
  if (!spec.absorb.empty()) {
    absorbed_dof = 1.0;
    for (const AbsorbedInfo& a : design.absorbed) absorbed_dof += a.levels - 1;
  }

  TslsResult result;
  result.endogenous = endog_name;
  result.instruments = z_names;

  // First stage: endogenous on instruments + exogenous.
  Eigen::MatrixXd first_design(n, L + W.cols());
  first_design.leftCols(L) = Z;
  if (W.cols() > 0) first_design.rightCols(W.cols()) = W;
  std::vector<std::string> first_names = z_names;
  first_names.insert(first_names.end(), w_names.begin(), w_names.end());
  result.first_stage = fit_prepared(first_design, x, first_names, design.cluster_codes,
                                    design.absorbed, x, absorbed_dof, nullptr);
  result.first_stage.dropped_collinear = dropped;

  const Eigen::VectorXd x_hat = first_design * result.first_stage.coef;

  // Second stage on fitted values; inference uses structural residuals.
  Eigen::MatrixXd second_design(n, 1 + W.cols());
  second_design.col(0) = x_hat;
  if (W.cols() > 0) second_design.rightCols(W.cols()) = W;
  const Eigen::VectorXd beta = second_design.colPivHouseholderQr().solve(y);
  Eigen::MatrixXd actual_design = second_design;
  actual_design.col(0) = x;
  const Eigen::VectorXd structural_u = y - actual_design * beta;

  std::vector<std::string> second_names = {endog_name};
  second_names.insert(second_names.end(), w_names.begin(), w_names.end());
  result.second_stage =
      fit_prepared(second_design, y, second_names, design.cluster_codes, design.absorbed,
                   design.y, absorbed_dof, &structural_u);
  result.second_stage.residuals = structural_u;
  result.second_stage.dropped_collinear = dropped;

  result.kp = kp_tests(x, Z, W, design.cluster_codes);
  result.weak_instrument_warning = !(result.kp.wald_f >= 1.0);
  return result;
}

}  // namespace topicdiv::est
