#include "topicdiv/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "topicdiv/stats.hpp"

namespace topicdiv::est {

namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxNewton = 100;
constexpr double kSeparationBound = 50.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
  double ll = 0.0;
  const Eigen::VectorXd eta = X * beta;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    // log sigma(eta) and log(1 - sigma(eta)), numerically stable
    const double e = eta[i];
    const double log1pexp = e > 30.0 ? e : std::log1p(std::exp(e));
    ll += y[i] * e - log1pexp;
  }
  return ll;
}

}  // namespace

LogitResult logit_fit(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& treated,
                      const std::vector<std::string>& names) {
  const Eigen::Index n = covariates.rows();
  const Eigen::Index k = covariates.cols();
  if (static_cast<std::size_t>(k) != names.size()) {
    throw std::invalid_argument("logit_fit: covariate/name arity mismatch");
  }
  if (treated.size() != n) throw std::invalid_argument("logit_fit: row mismatch");
  bool any0 = false;
  bool any1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (treated[i] == 0.0) any0 = true;
    else if (treated[i] == 1.0) any1 = true;
    else throw std::invalid_argument("logit_fit: treatment must be 0/1");
  }
  if (!any0 || !any1) {
    throw std::invalid_argument("logit_fit: treatment must contain both classes");
  }

  // Standardize internally; coefficients are mapped back afterwards.
  Eigen::VectorXd mu(k);
  Eigen::VectorXd sd(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    mu[c] = covariates.col(c).mean();
    const double var =
        (covariates.col(c).array() - mu[c]).square().sum() / std::max<double>(n - 1, 1);
    sd[c] = std::sqrt(var);
    if (!(sd[c] > 0.0)) {
      throw std::invalid_argument("logit_fit: covariate '" + names[c] +
                                  "' is constant; cannot standardize");
    }
  }
  Eigen::MatrixXd X(n, k + 1);
  X.col(0).setOnes();
  for (Eigen::Index c = 0; c < k; ++c) X.col(c + 1) = (covariates.col(c).array() - mu[c]) / sd[c];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  double ll = log_likelihood(X, treated, beta);
  int iterations = 0;
  bool converged = false;

  for (int iter = 0; iter < kMaxNewton; ++iter) {
    iterations = iter + 1;
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd p(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    const Eigen::VectorXd grad = X.transpose() * (treated - p);
    if (grad.cwiseAbs().maxCoeff() < kGradTol) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    if (!step.allFinite()) throw std::runtime_error("logit_fit: singular Hessian");

    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double next_ll = log_likelihood(X, treated, next);
    // Accept within summation noise, which grows with |ll|; an absolute
    // tolerance stalls the iteration on large samples.
    const double ll_tol = 1e-10 * (1.0 + std::fabs(ll));
    for (int h = 0; h < 40 && !(next_ll >= ll - ll_tol); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      next_ll = log_likelihood(X, treated, next);
    }
    beta = next;
    ll = next_ll;

    for (Eigen::Index c = 1; c <= k; ++c) {
      if (std::fabs(beta[c]) > kSeparationBound) {
        throw std::runtime_error(
            "logit_fit: quasi-complete separation detected on covariate '" +
            names[static_cast<std::size_t>(c - 1)] + "' (standardized coefficient " +
            std::to_string(beta[c]) + ")");
      }
    }
  }
  if (!converged) {
    throw std::runtime_error("logit_fit: Newton iterations did not converge");
  }

  LogitResult result;
  result.iterations = iterations;
  result.names.emplace_back("(intercept)");
  for (const std::string& s : names) result.names.push_back(s);

  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = sigmoid(eta[i]);
    w[i] = std::max(p * (1.0 - p), 1e-12);
  }
  const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
  const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(k + 1, k + 1));

  // Undo the standardization: beta_raw_j = beta_std_j / sd_j.
  result.coef.resize(k + 1);
  result.se.resize(k + 1);
  double intercept = beta[0];
  double intercept_var = cov(0, 0);
  for (Eigen::Index c = 0; c < k; ++c) {
    result.coef[c + 1] = beta[c + 1] / sd[c];
    result.se[c + 1] = std::sqrt(std::max(cov(c + 1, c + 1), 0.0)) / sd[c];
    intercept -= beta[c + 1] * mu[c] / sd[c];
  }
  // Delta-method variance for the raw intercept.
  Eigen::VectorXd grad_map = Eigen::VectorXd::Zero(k + 1);
  grad_map[0] = 1.0;
  for (Eigen::Index c = 0; c < k; ++c) grad_map[c + 1] = -mu[c] / sd[c];
  intercept_var = grad_map.transpose() * cov * grad_map;
  result.coef[0] = intercept;
  result.se[0] = std::sqrt(std::max(intercept_var, 0.0));

  result.pscores.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) result.pscores[i] = sigmoid(eta[i]);
  return result;
}

LogitResult logit_propensity(const DataTable& table, const std::string& treatment,
                             const std::vector<std::string>& covariates) {
  if (covariates.empty()) throw std::invalid_argument("logit_propensity: no covariates");
  const Eigen::VectorXd& t = table.numeric(treatment);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    bool ok = std::isfinite(t[i]);
    for (const std::string& c : covariates) ok = ok && std::isfinite(table.numeric(c)[i]);
    if (ok) keep.push_back(i);
  }
  if (keep.empty()) throw std::runtime_error("logit_propensity: no complete-case rows");
  const auto n = static_cast<Eigen::Index>(keep.size());
  if (n != table.rows()) {
    throw std::runtime_error("logit_propensity: missing values in the matching sample; "
                             "filter the panel first");
  }

  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    X.col(static_cast<Eigen::Index>(c)) = table.numeric(covariates[c]);
  }
  return logit_fit(X, t, covariates);
}

MatchDiagnostics nn_match(std::span<const double> pscores, std::span<const int> treated,
                          double caliper) {
  if (pscores.size() != treated.size()) throw std::invalid_argument("nn_match: size mismatch");
  if (!(caliper > 0.0)) throw std::invalid_argument("nn_match: caliper must be positive");

  double min_t = 1.0;
  double max_t = 0.0;
  double min_c = 1.0;
  double max_c = 0.0;
  std::vector<std::pair<double, Eigen::Index>> controls;  // (pscore, row)
  std::vector<std::pair<double, Eigen::Index>> treats;
  for (std::size_t i = 0; i < pscores.size(); ++i) {
    const double p = pscores[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("nn_match: propensity score outside [0,1]");
    }
    if (treated[i] == 1) {
      treats.emplace_back(p, static_cast<Eigen::Index>(i));
      min_t = std::min(min_t, p);
      max_t = std::max(max_t, p);
    } else if (treated[i] == 0) {
      controls.emplace_back(p, static_cast<Eigen::Index>(i));
      min_c = std::min(min_c, p);
      max_c = std::max(max_c, p);
    } else {
      throw std::invalid_argument("nn_match: treatment must be 0/1");
    }
  }
  if (treats.empty()) throw std::invalid_argument("nn_match: no treated units");
  if (controls.empty()) throw std::invalid_argument("nn_match: no control units");

  MatchDiagnostics out;
  out.support_lo = std::max(min_t, min_c);
  out.support_hi = std::min(max_t, max_c);

  // Support restricts which treated units are matched; every control stays
  // eligible as a donor.
  std::vector<std::pair<double, Eigen::Index>> eligible_controls = controls;
  std::sort(eligible_controls.begin(), eligible_controls.end());

  // Descending score, row index breaking ties, so the order is total.
  std::sort(treats.begin(), treats.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  for (const auto& [p, row] : treats) {
    if (p < out.support_lo || p > out.support_hi) {
      ++out.off_support;
      continue;
    }
    if (eligible_controls.empty()) {
      ++out.unmatched;
      continue;
    }
    auto it = std::lower_bound(eligible_controls.begin(), eligible_controls.end(),
                               std::make_pair(p, static_cast<Eigen::Index>(-1)));
    double best_gap = std::numeric_limits<double>::infinity();
    Eigen::Index best_row = -1;
    auto consider = [&](const std::pair<double, Eigen::Index>& c) {
      const double gap = std::fabs(c.first - p);
      if (gap < best_gap || (gap == best_gap && c.second < best_row)) {
        best_gap = gap;
        best_row = c.second;
      }
    };
    // Sorted-by-score neighbors; walk both directions over ties.
    for (auto fwd = it; fwd != eligible_controls.end(); ++fwd) {
      if (best_row >= 0 && fwd->first - p > best_gap) break;
      consider(*fwd);
    }
    for (auto rev = it; rev != eligible_controls.begin();) {
      --rev;
      if (best_row >= 0 && p - rev->first > best_gap) break;
      consider(*rev);
    }
    if (best_row >= 0 && best_gap <= caliper) {
      out.pairs.push_back({row, best_row, best_gap});
    } else {
      ++out.unmatched;
    }
  }
  return out;
}

std::pair<double, double> att(std::span<const MatchPair> pairs,
                              std::span<const double> outcome) {
  if (pairs.size() < 2) throw std::invalid_argument("att: need at least two matched pairs");
  const auto n_t = static_cast<double>(pairs.size());

  double att_hat = 0.0;
  for (const MatchPair& p : pairs) {
    att_hat += outcome[static_cast<std::size_t>(p.treated_row)] -
               outcome[static_cast<std::size_t>(p.control_row)];
  }
  att_hat /= n_t;

  double ss = 0.0;
  std::map<Eigen::Index, int> reuse;
  std::vector<double> control_outcomes;
  for (const MatchPair& p : pairs) {
    const double d = outcome[static_cast<std::size_t>(p.treated_row)] -
                     outcome[static_cast<std::size_t>(p.control_row)];
    ss += (d - att_hat) * (d - att_hat);
    if (reuse.emplace(p.control_row, 1).second) {
      control_outcomes.push_back(outcome[static_cast<std::size_t>(p.control_row)]);
    } else {
      ++reuse[p.control_row];
    }
  }
  const double sigma2_c = stats::variance(control_outcomes);
  double reuse_term = 0.0;
  for (const auto& [row, k] : reuse) {
    reuse_term += static_cast<double>(k) * static_cast<double>(k - 1) * sigma2_c;
  }
  const double var = (ss + reuse_term) / (n_t * n_t);
  return {att_hat, std::sqrt(var)};
}

std::vector<BalanceRow> balance_diagnostics(const DataTable& table,
                                            const std::string& treatment,
                                            const std::vector<std::string>& covariates,
                                            std::span<const MatchPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("balance_diagnostics: no matched pairs");
  const Eigen::VectorXd& t = table.numeric(treatment);

  std::vector<BalanceRow> rows;
  rows.reserve(covariates.size());
  for (const std::string& name : covariates) {
    const Eigen::VectorXd& x = table.numeric(name);
    std::vector<double> pre_t;
    std::vector<double> pre_c;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      if (t[i] == 1.0) pre_t.push_back(x[i]);
      else pre_c.push_back(x[i]);
    }
    std::vector<double> post_t;
    std::vector<double> post_c;
    for (const MatchPair& p : pairs) {
      post_t.push_back(x[p.treated_row]);
      post_c.push_back(x[p.control_row]);
    }

    BalanceRow row;
    row.covariate = name;
    const double denom =
        std::sqrt(0.5 * (stats::variance(pre_t) + stats::variance(pre_c)));
    if (!(denom > 0.0)) {
      const bool equal_before = stats::mean(pre_t) == stats::mean(pre_c);
      const bool equal_after = stats::mean(post_t) == stats::mean(post_c);
      row.undefined = !(equal_before && equal_after);
      row.bias_before = equal_before ? 0.0 : std::nan("");
      row.bias_after = equal_after ? 0.0 : std::nan("");
      row.t_after = std::nan("");
      row.p_after = std::nan("");
      rows.push_back(std::move(row));
      continue;
    }
    row.bias_before = 100.0 * (stats::mean(pre_t) - stats::mean(pre_c)) / denom;
    row.bias_after = 100.0 * (stats::mean(post_t) - stats::mean(post_c)) / denom;

    // Welch t-test on the matched groups (controls with multiplicity).
    const double m1 = stats::mean(post_t);
    const double m2 = stats::mean(post_c);
    const double v1 = stats::variance(post_t);
    const double v2 = stats::variance(post_c);
    const auto n1 = static_cast<double>(post_t.size());
    const auto n2 = static_cast<double>(post_c.size());
    const double se2 = v1 / n1 + v2 / n2;
    if (se2 > 0.0) {
      row.t_after = (m1 - m2) / std::sqrt(se2);
      const double dof = se2 * se2 /
                         (v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v2 * v2 / (n2 * n2 * (n2 - 1.0)));
      row.p_after = stats::student_t_two_sided_p(row.t_after, std::max(dof, 1.0));
    } else {
      row.t_after = m1 == m2 ? 0.0 : std::nan("");
      row.p_after = m1 == m2 ? 1.0 : std::nan("");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace topicdiv::est
