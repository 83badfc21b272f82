#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "topicdiv/data_table.hpp"
#include "topicdiv/matching.hpp"
#include "topicdiv/rng.hpp"

using namespace topicdiv::est;
using topicdiv::DataTable;
using topicdiv::Rng;
using testsupport::throws_with;

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_SUITE("matching") {
  TEST_CASE("a sign-symmetric sample forces a zero intercept") {
    Eigen::MatrixXd X(6, 1);
    X << 1.0, -1.0, 2.0, -2.0, 0.5, -0.5;
    Eigen::VectorXd t(6);
    t << 1, 0, 0, 1, 1, 0;
    auto fit = logit_fit(X, t, {"x"});
    REQUIRE(fit.names.size() == 2);
    CHECK(fit.names[0] == "(intercept)");
    CHECK(std::abs(fit.coef[0]) < 1e-6);
    REQUIRE(fit.pscores.size() == 6);
    CHECK(fit.pscores[0] + fit.pscores[1] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.pscores[2] + fit.pscores[3] == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("logit recovers planted coefficients on a large sample") {
    Rng rng(2024);
    const int n = 5000;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd t(n);
    const double b0 = 0.5, b1 = 0.8;
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.normal(0.0, 1.0);
      t[i] = rng.uniform01() < logistic(b0 + b1 * X(i, 0)) ? 1.0 : 0.0;
    }
    auto fit = logit_fit(X, t, {"x"});
    CHECK(std::abs(fit.coef[0] - b0) < 3.0 * fit.se[0]);
    CHECK(std::abs(fit.coef[1] - b1) < 3.0 * fit.se[1]);
    for (Eigen::Index i = 0; i < fit.pscores.size(); ++i) {
      CHECK(fit.pscores[i] > 0.0);
      CHECK(fit.pscores[i] < 1.0);
    }
  }

  TEST_CASE("quasi-complete separation is reported with the covariate name") {
    // Separated classes with a tiny margin: the gradient cannot reach the
    // convergence tolerance until the standardized slope is in the thousands,
    // so the magnitude guard must fire first.
    Eigen::MatrixXd X(6, 1);
    X << -1.5, -1.0, -0.002, 0.002, 1.0, 1.5;
    Eigen::VectorXd t(6);
    t << 0, 0, 0, 1, 1, 1;
    CHECK(throws_with([&] { logit_fit(X, t, {"leverage"}); }, "leverage"));
    CHECK(throws_with([&] { logit_fit(X, t, {"leverage"}); }, "separation"));
  }

  TEST_CASE("constant covariates cannot be standardized") {
    Eigen::MatrixXd X(6, 1);
    X.setConstant(3.0);
    Eigen::VectorXd t(6);
    t << 0, 1, 0, 1, 0, 1;
    CHECK(throws_with([&] { logit_fit(X, t, {"flat"}); }, "flat"));
  }

  TEST_CASE("treatment must be binary with both classes present") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    Eigen::VectorXd all_ones(4);
    all_ones.setOnes();
    CHECK_THROWS_AS(logit_fit(X, all_ones, {"x"}), std::invalid_argument);
    Eigen::VectorXd fractional(4);
    fractional << 0, 0.5, 1, 0;
    CHECK_THROWS_AS(logit_fit(X, fractional, {"x"}), std::invalid_argument);
    Eigen::VectorXd short_t(3);
    short_t << 0, 1, 0;
    CHECK_THROWS_AS(logit_fit(X, short_t, {"x"}), std::invalid_argument);
    CHECK_THROWS_AS(logit_fit(X, all_ones, {"x", "extra"}), std::invalid_argument);
  }

  TEST_CASE("logit_propensity works off a table and rejects missing values") {
    Rng rng(7);
    const int n = 200;
    Eigen::VectorXd x(n), t(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal(0.0, 1.0);
      t[i] = rng.uniform01() < logistic(0.3 * x[i]) ? 1.0 : 0.0;
    }
    DataTable table;
    table.add_numeric("treat", t);
    table.add_numeric("x", x);
    auto fit = logit_propensity(table, "treat", {"x"});
    CHECK(fit.pscores.size() == n);
    CHECK_THROWS_AS(logit_propensity(table, "treat", {}), std::invalid_argument);

    DataTable gappy = table;
    Eigen::VectorXd with_nan = x;
    with_nan[5] = std::nan("");
    gappy.numeric_mut("x") = with_nan;
    CHECK(throws_with([&] { logit_propensity(gappy, "treat", {"x"}); }, "filter the panel"));
  }

  TEST_CASE("nearest neighbor honors the caliper") {
    std::vector<double> pscores = {0.50, 0.48, 0.60};
    std::vector<int> treated = {1, 0, 0};
    auto diag = nn_match(pscores, treated, 0.05);
    REQUIRE(diag.pairs.size() == 1);
    CHECK(diag.pairs[0].treated_row == 0);
    CHECK(diag.pairs[0].control_row == 1);
    CHECK(diag.pairs[0].pscore_gap == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(diag.off_support == 0);
    CHECK(diag.unmatched == 0);
    CHECK(diag.support_lo == doctest::Approx(0.50));
    CHECK(diag.support_hi == doctest::Approx(0.50));
  }

  TEST_CASE("treated units with no donor inside the caliper stay unmatched") {
    std::vector<double> pscores = {0.50, 0.40, 0.58};
    std::vector<int> treated = {1, 0, 0};
    auto diag = nn_match(pscores, treated, 0.05);
    CHECK(diag.pairs.empty());
    CHECK(diag.unmatched == 1);
    CHECK(diag.off_support == 0);
  }

  TEST_CASE("score ties resolve to the lowest control row index") {
    // Scores are exact binary fractions so both gaps are bitwise equal.
    std::vector<double> a = {0.50, 0.25, 0.75};
    std::vector<int> treated = {1, 0, 0};
    auto da = nn_match(a, treated, 0.30);
    REQUIRE(da.pairs.size() == 1);
    CHECK(da.pairs[0].control_row == 1);
    CHECK(da.pairs[0].pscore_gap == 0.25);

    std::vector<double> b = {0.50, 0.75, 0.25};
    auto db = nn_match(b, treated, 0.30);
    REQUIRE(db.pairs.size() == 1);
    CHECK(db.pairs[0].control_row == 1);
    CHECK(db.pairs[0].pscore_gap == 0.25);
  }

  TEST_CASE("off-support treated units are counted, not matched") {
    std::vector<double> pscores = {0.50, 0.90, 0.40, 0.70};
    std::vector<int> treated = {1, 1, 0, 0};
    auto diag = nn_match(pscores, treated, 0.15);
    CHECK(diag.support_lo == doctest::Approx(0.50));
    CHECK(diag.support_hi == doctest::Approx(0.70));
    CHECK(diag.off_support == 1);
    REQUIRE(diag.pairs.size() == 1);
    CHECK(diag.pairs[0].treated_row == 0);
    CHECK(diag.pairs[0].control_row == 2);
  }

  TEST_CASE("controls are reused with replacement") {
    // Support is [0.50, 0.52], so both treated rows stay eligible and both
    // pick the control at 0.53; the far control at 0.10 only widens support.
    std::vector<double> pscores = {0.50, 0.52, 0.53, 0.10};
    std::vector<int> treated = {1, 1, 0, 0};
    auto diag = nn_match(pscores, treated, 0.05);
    CHECK(diag.off_support == 0);
    CHECK(diag.unmatched == 0);
    REQUIRE(diag.pairs.size() == 2);
    CHECK(diag.pairs[0].treated_row == 1);
    CHECK(diag.pairs[1].treated_row == 0);
    CHECK(diag.pairs[0].control_row == 2);
    CHECK(diag.pairs[1].control_row == 2);
  }

  TEST_CASE("exact score ties match with a zero gap") {
    std::vector<double> pscores = {0.42, 0.42, 0.42};
    std::vector<int> treated = {1, 0, 0};
    auto diag = nn_match(pscores, treated, 1e-9);
    REQUIRE(diag.pairs.size() == 1);
    CHECK(diag.pairs[0].control_row == 1);
    CHECK(diag.pairs[0].pscore_gap == 0.0);
  }

  TEST_CASE("nn_match argument validation") {
    std::vector<double> pscores = {0.5, 0.4};
    std::vector<int> treated = {1, 0};
    CHECK_THROWS_AS(nn_match(pscores, treated, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(nn_match(pscores, treated, -0.1), std::invalid_argument);
    std::vector<double> bad_score = {1.5, 0.4};
    CHECK_THROWS_AS(nn_match(bad_score, treated, 0.05), std::invalid_argument);
    std::vector<int> bad_treat = {2, 0};
    CHECK_THROWS_AS(nn_match(pscores, bad_treat, 0.05), std::invalid_argument);
    std::vector<int> mismatch = {1, 0, 0};
    CHECK_THROWS_AS(nn_match(pscores, mismatch, 0.05), std::invalid_argument);
    std::vector<int> no_treated = {0, 0};
    CHECK_THROWS_AS(nn_match(pscores, no_treated, 0.05), std::invalid_argument);
    std::vector<int> no_controls = {1, 1};
    CHECK_THROWS_AS(nn_match(pscores, no_controls, 0.05), std::invalid_argument);
  }

  TEST_CASE("ATT is the mean treated-minus-control gap") {
    std::vector<MatchPair> pairs = {{0, 1, 0.0}, {2, 3, 0.0}};
    std::vector<double> outcome = {1.0, 0.5, 2.0, 1.5};
    auto [estimate, se] = att(pairs, outcome);
    CHECK(estimate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(se == doctest::Approx(0.0));
  }

  TEST_CASE("identical outcomes give a zero ATT and zero SE") {
    std::vector<MatchPair> pairs = {{0, 1, 0.0}, {2, 3, 0.0}};
    std::vector<double> outcome = {1.0, 1.0, 2.0, 2.0};
    auto [estimate, se] = att(pairs, outcome);
    CHECK(estimate == 0.0);
    CHECK(se == 0.0);
  }

  TEST_CASE("reused controls inflate the ATT variance") {
    std::vector<double> outcome = {1.4, 2.1, 0.6, 1.1, 0.9, 1.7};
    std::vector<MatchPair> fresh = {{0, 3, 0.0}, {1, 4, 0.0}, {2, 5, 0.0}};
    std::vector<MatchPair> reused = {{0, 3, 0.0}, {1, 3, 0.0}, {2, 3, 0.0}};
    auto [e1, s1] = att(fresh, outcome);
    auto [e2, s2] = att(reused, outcome);
    CHECK(std::isfinite(s1));
    CHECK(std::isfinite(s2));
    CHECK(e1 == doctest::Approx((0.3 + 1.2 - 1.1) / 3.0));
    CHECK(e2 == doctest::Approx((0.3 + 1.0 - 0.5) / 3.0).epsilon(1e-12));
  }

  TEST_CASE("att needs at least two pairs") {
    std::vector<MatchPair> one = {{0, 1, 0.0}};
    std::vector<double> outcome = {1.0, 0.3};
    CHECK(throws_with([&] { att(one, outcome); }, "at least two matched pairs"));
    std::vector<MatchPair> none;
    CHECK_THROWS_AS(att(none, outcome), std::invalid_argument);
  }

  TEST_CASE("balance rows report standardized bias in percent") {
    // Treated {−0.9, 0.1, 1.1} and controls {−1, 0, 1}: both sds are exactly 1,
    // means differ by 0.1, so pre-match bias is 10.
    Eigen::VectorXd x(6), t(6);
    x << -0.9, 0.1, 1.1, -1.0, 0.0, 1.0;
    t << 1, 1, 1, 0, 0, 0;
    DataTable table;
    table.add_numeric("treat", t);
    table.add_numeric("x", x);
    std::vector<MatchPair> pairs = {{0, 3, 0.0}, {1, 4, 0.0}, {2, 5, 0.0}};
    auto rows = balance_diagnostics(table, "treat", {"x"}, pairs);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].covariate == "x");
    CHECK(rows[0].bias_before == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(rows[0].bias_after == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(!rows[0].undefined);
    CHECK(rows[0].p_after > 0.0);
    CHECK(rows[0].p_after <= 1.0);
  }

  TEST_CASE("identical groups are perfectly balanced") {
    Eigen::VectorXd x(6), t(6);
    x << 0.3, 0.7, 1.2, 0.3, 0.7, 1.2;
    t << 1, 1, 1, 0, 0, 0;
    DataTable table;
    table.add_numeric("treat", t);
    table.add_numeric("x", x);
    std::vector<MatchPair> pairs = {{0, 3, 0.0}, {1, 4, 0.0}, {2, 5, 0.0}};
    auto rows = balance_diagnostics(table, "treat", {"x"}, pairs);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].bias_before == doctest::Approx(0.0));
    CHECK(rows[0].bias_after == doctest::Approx(0.0));
  }

  TEST_CASE("zero-variance covariates with different means are undefined") {
    Eigen::VectorXd x(4), t(4);
    x << 2.0, 2.0, 3.0, 3.0;
    t << 1, 1, 0, 0;
    DataTable table;
    table.add_numeric("treat", t);
    table.add_numeric("x", x);
    std::vector<MatchPair> pairs = {{0, 2, 0.0}, {1, 3, 0.0}};
    auto rows = balance_diagnostics(table, "treat", {"x"}, pairs);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].undefined);

    Eigen::VectorXd same(4);
    same << 2.0, 2.0, 2.0, 2.0;
    table.numeric_mut("x") = same;
    auto equal_rows = balance_diagnostics(table, "treat", {"x"}, pairs);
    CHECK(!equal_rows[0].undefined);
    CHECK(equal_rows[0].bias_before == doctest::Approx(0.0));
  }

  TEST_CASE("matching a well-specified model balances the covariates") {
    Rng rng(99);
    const int n = 2000;
    Eigen::VectorXd x1(n), x2(n), t(n);
    for (int i = 0; i < n; ++i) {
      x1[i] = rng.normal(0.0, 1.0);
      x2[i] = rng.normal(0.0, 1.0);
      t[i] = rng.uniform01() < logistic(-0.4 + 0.6 * x1[i] - 0.4 * x2[i]) ? 1.0 : 0.0;
    }
    DataTable table;
    table.add_numeric("treat", t);
    table.add_numeric("x1", x1);
    table.add_numeric("x2", x2);
    auto fit = logit_propensity(table, "treat", {"x1", "x2"});
    std::vector<double> scores(fit.pscores.data(), fit.pscores.data() + n);
    std::vector<int> treated(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) treated[static_cast<std::size_t>(i)] = t[i] > 0.5 ? 1 : 0;
    auto diag = nn_match(scores, treated, 0.05);
    REQUIRE(diag.pairs.size() > 100);
    auto rows = balance_diagnostics(table, "treat", {"x1", "x2"}, diag.pairs);
    for (const auto& row : rows) {
      CHECK(!row.undefined);
      CHECK(std::abs(row.bias_after) < 5.0);
      CHECK(std::abs(row.bias_after) <= std::abs(row.bias_before));
    }
  }
}
