#include "topicdiv/regression.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "topicdiv/stats.hpp"

namespace topicdiv::est {

namespace {

constexpr double kDemeanTol = 1e-10;
constexpr int kDemeanMaxIter = 100;

int count_levels(const std::vector<int>& codes) {
  std::set<int> distinct(codes.begin(), codes.end());
  return static_cast<int>(distinct.size());
}

// Drops columns whose demeaned image is numerically zero, then QR-drops any
// remaining linear dependencies. Returns kept column indices.
std::vector<int> independent_columns(const Eigen::MatrixXd& X) {
  if (X.cols() == 0) return {};
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const auto rank = static_cast<int>(qr.rank());
  std::vector<int> kept;
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < rank; ++i) kept.push_back(perm[i]);
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

std::string interaction_name(const std::string& a, const std::string& b) {
  return a + "\xC3\x97" + b;  // multiplication sign
}

void RegressionSpec::validate() const {
  if (outcome.empty()) throw std::invalid_argument("RegressionSpec: empty outcome");
  std::set<std::string> seen;
  for (const std::string& r : regressors) {
    if (r == outcome) {
      throw std::invalid_argument("RegressionSpec: outcome '" + outcome +
                                  "' also appears among the regressors");
    }
    if (!seen.insert(r).second) {
      throw std::invalid_argument("RegressionSpec: duplicate regressor '" + r + "'");
    }
  }
  if (cluster.empty()) throw std::invalid_argument("RegressionSpec: empty cluster dimension");
}

RegressionSpec with_interaction(RegressionSpec spec, const std::string& a, const std::string& b) {
  const std::string name = interaction_name(a, b);
  for (const std::string& r : spec.regressors) {
    if (r == name) {
      throw std::invalid_argument("with_interaction: column '" + name + "' already present");
    }
  }
  auto ensure = [&spec](const std::string& v) {
    if (std::find(spec.regressors.begin(), spec.regressors.end(), v) == spec.regressors.end()) {
      spec.regressors.push_back(v);
    }
  };
  ensure(a);
  ensure(b);
  spec.regressors.push_back(name);
  spec.interactions.emplace_back(a, b);
  return spec;
}

DemeanResult within_demean(const Eigen::MatrixXd& columns,
                           const std::vector<std::vector<int>>& groups) {
  DemeanResult result;
  result.data = columns;
  const Eigen::Index n = columns.rows();
  for (const auto& g : groups) {
    if (static_cast<Eigen::Index>(g.size()) != n) {
      throw std::invalid_argument("within_demean: group vector length does not match rows");
    }
  }
  if (groups.empty() || n == 0) return result;

  Eigen::VectorXd initial_scale(columns.cols());
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    initial_scale[c] = std::max(1.0, columns.col(c).cwiseAbs().maxCoeff());
  }

  std::vector<int> n_levels(groups.size());
  for (std::size_t d = 0; d < groups.size(); ++d) {
    int max_code = -1;
    for (int c : groups[d]) {
      if (c < 0) throw std::invalid_argument("within_demean: negative group code");
      max_code = std::max(max_code, c);
    }
    n_levels[d] = max_code + 1;
  }

  for (int iter = 0; iter < kDemeanMaxIter; ++iter) {
    double max_change = 0.0;
    for (std::size_t d = 0; d < groups.size(); ++d) {
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_levels[d], result.data.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_levels[d]);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(groups[d][static_cast<std::size_t>(i)]) += result.data.row(i);
        counts[groups[d][static_cast<std::size_t>(i)]] += 1.0;
      }
      for (int g = 0; g < n_levels[d]; ++g) {
        if (counts[g] > 0.0) sums.row(g) /= counts[g];
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto g = groups[d][static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < result.data.cols(); ++c) {
          const double delta = sums(g, c);
          if (std::fabs(delta) > max_change) max_change = std::fabs(delta);
          result.data(i, c) -= delta;
        }
      }
    }
    result.iterations = iter + 1;
    if (max_change < kDemeanTol) break;
    if (iter == kDemeanMaxIter - 1) {
      throw std::runtime_error(
          "within_demean: alternating projections did not converge in " +
          std::to_string(kDemeanMaxIter) + " rounds (last change " +
          std::to_string(max_change) + "); rescale the inputs or check the group structure");
    }
  }

  for (Eigen::Index c = 0; c < result.data.cols(); ++c) {
    const double norm = result.data.col(c).cwiseAbs().maxCoeff();
    if (norm <= 1e-8 * initial_scale[c]) {
      result.zeroed_columns.push_back(static_cast<int>(c));
      result.data.col(c).setZero();
    }
  }
  return result;
}

BuiltDesign build_design(const DataTable& table, const RegressionSpec& spec,
                         const std::vector<std::string>& extra_numeric) {
  spec.validate();
  // Emptiness is a property of the final design: tsls supplies its endogenous
  // and instrument columns through extra_numeric with no exogenous controls.
  if (spec.regressors.empty() && spec.interactions.empty() && extra_numeric.empty()) {
    throw std::invalid_argument("RegressionSpec: no regressors");
  }
  for (const std::string& dim : spec.absorb) {
    if (!table.has_categorical(dim)) {
      throw std::invalid_argument("ols_fe: absorb dimension '" + dim + "' is not categorical");
    }
  }
  if (!table.has_categorical(spec.cluster)) {
    throw std::invalid_argument("ols_fe: cluster dimension '" + spec.cluster +
                                "' is not categorical");
  }

  // Interaction products are computed on the raw columns, before any
  // demeaning, so a x b really is the per-row product.
  std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
  std::set<std::string> interaction_names;
  for (const auto& [a, b] : spec.interactions) {
    interaction_names.insert(interaction_name(a, b));
  }
  for (const std::string& name : spec.regressors) {
    if (interaction_names.count(name)) continue;
    columns.emplace_back(name, table.numeric(name));
  }
  for (const auto& [a, b] : spec.interactions) {
    const Eigen::VectorXd product =
        table.numeric(a).array() * table.numeric(b).array();
    columns.emplace_back(interaction_name(a, b), product);
  }

  const Eigen::VectorXd& y_full = table.numeric(spec.outcome);
  std::vector<Eigen::VectorXd> extra_cols;
  for (const std::string& name : extra_numeric) extra_cols.push_back(table.numeric(name));

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    bool ok = std::isfinite(y_full[i]);
    for (const auto& [name, col] : columns) ok = ok && std::isfinite(col[i]);
    for (const auto& col : extra_cols) ok = ok && std::isfinite(col[i]);
    if (ok) keep.push_back(i);
  }
  if (keep.empty()) throw std::runtime_error("ols_fe: no complete-case observations");

  BuiltDesign design;
  design.rows = keep;
  const auto n = static_cast<Eigen::Index>(keep.size());
  design.y.resize(n);
  design.X.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    design.y[r] = y_full[keep[static_cast<std::size_t>(r)]];
    for (std::size_t c = 0; c < columns.size(); ++c) {
      design.X(r, static_cast<Eigen::Index>(c)) =
          columns[c].second[keep[static_cast<std::size_t>(r)]];
    }
  }
  for (const auto& [name, col] : columns) design.names.push_back(name);

  for (const std::string& dim : spec.absorb) {
    const std::vector<int>& codes = table.codes(dim);
    std::vector<int> sub;
    sub.reserve(keep.size());
    for (Eigen::Index idx : keep) sub.push_back(codes[static_cast<std::size_t>(idx)]);
    design.absorbed.push_back({dim, count_levels(sub)});
    design.absorb_groups.push_back(std::move(sub));
  }

  const std::vector<int>& cluster_codes = table.codes(spec.cluster);
  design.cluster_codes.reserve(keep.size());
  for (Eigen::Index idx : keep) {
    design.cluster_codes.push_back(cluster_codes[static_cast<std::size_t>(idx)]);
  }
  return design;
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             std::span<const int> cluster) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (residuals.size() != n || static_cast<Eigen::Index>(cluster.size()) != n) {
    throw std::invalid_argument("cluster_vcov: size mismatch");
  }
  int max_code = -1;
  for (int c : cluster) {
    if (c < 0) throw std::invalid_argument("cluster_vcov: negative cluster code");
    max_code = std::max(max_code, c);
  }
  std::vector<bool> present(static_cast<std::size_t>(max_code + 1), false);
  for (int c : cluster) present[static_cast<std::size_t>(c)] = true;
  int n_clusters = 0;
  for (bool p : present) n_clusters += p ? 1 : 0;
  if (n_clusters < 2) {
    throw std::invalid_argument("cluster_vcov: need at least two clusters");
  }
  if (n <= k) throw std::invalid_argument("cluster_vcov: fewer observations than regressors");

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(max_code + 1, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores.row(cluster[static_cast<std::size_t>(i)]) += residuals[i] * X.row(i);
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int g = 0; g <= max_code; ++g) {
    if (!present[static_cast<std::size_t>(g)]) continue;
    meat.noalias() += scores.row(g).transpose() * scores.row(g);
  }

  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const double G = n_clusters;
  const double scale = (G / (G - 1.0)) *
                       (static_cast<double>(n - 1) / static_cast<double>(n - k));
  Eigen::MatrixXd v = scale * bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

int RegressionResult::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double RegressionResult::coef_of(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("no coefficient named '" + name + "'");
  return coef[i];
}

double RegressionResult::se_of(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("no coefficient named '" + name + "'");
  return se[i];
}

double RegressionResult::pval_of(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("no coefficient named '" + name + "'");
  return pval[i];
}

RegressionResult ols_fe(const DataTable& table, const RegressionSpec& spec) {
  BuiltDesign design = build_design(table, spec);
  const Eigen::Index n = design.y.size();

  const bool add_intercept = spec.absorb.empty();
  Eigen::MatrixXd X = design.X;
  std::vector<std::string> names = design.names;
  if (add_intercept) {
    X.conservativeResize(Eigen::NoChange, X.cols() + 1);
    X.col(X.cols() - 1).setOnes();
    names.emplace_back("(intercept)");
  }

  Eigen::VectorXd y = design.y;
  RegressionResult result;
  result.n_obs = n;
  result.absorbed = design.absorbed;

  if (!spec.absorb.empty()) {
    Eigen::MatrixXd joint(n, X.cols() + 1);
    joint.col(0) = y;
    joint.rightCols(X.cols()) = X;
    DemeanResult dm = within_demean(joint, design.absorb_groups);
    y = dm.data.col(0);

    std::vector<int> kept_after_zero;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      const bool zeroed = std::find(dm.zeroed_columns.begin(), dm.zeroed_columns.end(),
                                    static_cast<int>(c + 1)) != dm.zeroed_columns.end();
      if (zeroed) {
        result.dropped_collinear.push_back(names[static_cast<std::size_t>(c)]);
      } else {
        kept_after_zero.push_back(static_cast<int>(c));
      }
    }
    Eigen::MatrixXd Xd(n, static_cast<Eigen::Index>(kept_after_zero.size()));
    std::vector<std::string> kept_names;
    for (std::size_t i = 0; i < kept_after_zero.size(); ++i) {
      Xd.col(static_cast<Eigen::Index>(i)) = dm.data.col(kept_after_zero[i] + 1);
      kept_names.push_back(names[static_cast<std::size_t>(kept_after_zero[i])]);
    }
    X = std::move(Xd);
    names = std::move(kept_names);
  }

  const std::vector<int> kept = independent_columns(X);
  if (kept.size() < static_cast<std::size_t>(X.cols())) {
    std::vector<std::string> kept_names;
    Eigen::MatrixXd Xk(n, static_cast<Eigen::Index>(kept.size()));
    std::set<int> kept_set(kept.begin(), kept.end());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (!kept_set.count(static_cast<int>(c))) {
        result.dropped_collinear.push_back(names[static_cast<std::size_t>(c)]);
      }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      Xk.col(static_cast<Eigen::Index>(i)) = X.col(kept[i]);
      kept_names.push_back(names[static_cast<std::size_t>(kept[i])]);
    }
    X = std::move(Xk);
    names = std::move(kept_names);
  }
  if (X.cols() == 0) {
    throw std::runtime_error("ols_fe: all regressors are collinear with the fixed effects");
  }

  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd u = y - X * beta;

  // Model dof: grand intercept + within-absorb dummies + slope columns. The
  // intercept column is already in X when nothing is absorbed.
  double p = static_cast<double>(X.cols());
  if (!spec.absorb.empty()) {
    p += 1.0;
    for (const AbsorbedInfo& a : result.absorbed) p += a.levels - 1;
  }
  const double n_d = static_cast<double>(n);
  if (n_d - p < 1.0) {
    throw std::runtime_error("ols_fe: nonpositive residual degrees of freedom (n=" +
                             std::to_string(n) + ", model dof=" + std::to_string(p) + ")");
  }

  const double y_mean = design.y.mean();
  const double sst = (design.y.array() - y_mean).square().sum();
  const double ssr = u.squaredNorm();
  result.adjusted_r2 =
      sst > 0.0 ? 1.0 - (ssr / (n_d - p)) / (sst / (n_d - 1.0)) : std::nan("");

  result.vcov = cluster_vcov(X, u, design.cluster_codes);
  result.n_clusters = count_levels(design.cluster_codes);
  result.names = names;
  result.coef = beta;
  result.residuals = u;
  result.se.resize(X.cols());
  result.tstat.resize(X.cols());
  result.pval.resize(X.cols());
  const double dof = static_cast<double>(result.n_clusters - 1);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    result.se[c] = std::sqrt(std::max(result.vcov(c, c), 0.0));
    result.tstat[c] = result.se[c] > 0.0 ? beta[c] / result.se[c] : std::nan("");
    result.pval[c] = result.se[c] > 0.0
                         ? stats::student_t_two_sided_p(result.tstat[c], dof)
                         : std::nan("");
  }
  return result;
}

}  // namespace topicdiv::est
