#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "topicdiv/diversity.hpp"
#include "topicdiv/placebo.hpp"
#include "topicdiv/regression.hpp"
#include "topicdiv/report.hpp"

using namespace topicdiv::report;
using topicdiv::diversity::AnnualBoxStats;
using topicdiv::est::KdeCurve;
using topicdiv::est::PlaceboDistribution;
using topicdiv::est::RegressionResult;
using testsupport::count_occurrences;
using testsupport::slurp;
using testsupport::TempDir;
using testsupport::xml_well_formed;

namespace {

RegressionResult fake_result() {
  RegressionResult r;
  r.names = {"loss", "size"};
  r.coef = Eigen::VectorXd(2);
  r.coef << -0.0174, 0.2031;
  r.se = Eigen::VectorXd(2);
  r.se << 0.0063, 0.1458;
  r.tstat = Eigen::VectorXd(2);
  r.tstat << -2.7619, 1.3930;
  r.pval = Eigen::VectorXd(2);
  r.pval << 0.006, 0.164;
  r.vcov = Eigen::MatrixXd::Identity(2, 2);
  r.residuals = Eigen::VectorXd::Zero(4);
  r.n_obs = 21288;
  r.n_clusters = 3065;
  r.adjusted_r2 = 0.173;
  r.absorbed = {{"firm", 3065}, {"year", 11}};
  r.dropped_collinear = {"redundant"};
  return r;
}

AnnualBoxStats box(int year, double q1, double med, double q3, double lo, double hi,
                   std::vector<double> outliers = {}) {
  AnnualBoxStats s;
  s.year = year;
  s.q1 = q1;
  s.median = med;
  s.q3 = q3;
  s.whisker_lo = lo;
  s.whisker_hi = hi;
  s.outliers = std::move(outliers);
  s.n = 10;
  return s;
}

PlaceboDistribution fake_distribution(int reps) {
  PlaceboDistribution d;
  d.baseline_coef = -0.0174;
  for (int i = 0; i < reps; ++i) {
    d.coefficients.push_back(-0.01 + 0.002 * i);
    d.p_values.push_back(0.05 + 0.09 * i / std::max(1, reps - 1));
  }
  d.n_reps = reps;
  d.failed_reps = 0;
  if (reps >= 2) d.kde = topicdiv::est::kde_curve(d.coefficients, 128);
  return d;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("significance stars use strict thresholds") {
    CHECK(stars(0.0005) == "***");
    CHECK(stars(0.009999) == "***");
    CHECK(stars(0.01) == "**");
    CHECK(stars(0.03) == "**");
    CHECK(stars(0.049999) == "**");
    CHECK(stars(0.05) == "*");
    CHECK(stars(0.07) == "*");
    CHECK(stars(0.099999) == "*");
    CHECK(stars(0.10) == "");
    CHECK(stars(0.9) == "");
  }

  TEST_CASE("text tables show coefficients, stars and clustered SEs") {
    TempDir tmp;
    auto path = tmp / "table.txt";
    emit_table(fake_result(), TableStyle::text, path, "Baseline");
    auto text = slurp(path);
    CHECK(text.find("Baseline") != std::string::npos);
    CHECK(text.find("-0.0174***") != std::string::npos);
    CHECK(text.find("(0.0063)") != std::string::npos);
    CHECK(text.find("0.2031") != std::string::npos);
    CHECK(text.find("firm FE") != std::string::npos);
    CHECK(text.find("year FE") != std::string::npos);
    CHECK(text.find("YES") != std::string::npos);
    CHECK(text.find("Observations") != std::string::npos);
    CHECK(text.find("21288") != std::string::npos);
    CHECK(text.find("Clusters") != std::string::npos);
    CHECK(text.find("3065") != std::string::npos);
    CHECK(text.find("Adjusted R2") != std::string::npos);
    CHECK(text.find("Dropped (collinear)") != std::string::npos);
    CHECK(text.find("redundant") != std::string::npos);
  }

  TEST_CASE("csv tables round trip the estimates at full precision") {
    TempDir tmp;
    auto path = tmp / "table.csv";
    auto result = fake_result();
    emit_table(result, TableStyle::csv, path, "Baseline");
    auto text = slurp(path);
    CHECK(text.rfind("name,estimate,cluster_se,stars", 0) == 0);
    CHECK(count_occurrences(text, "\n") >= 3);

    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    const auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    CHECK(line.substr(0, c1) == "loss");
    CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == doctest::Approx(-0.0174));
    CHECK(line.substr(line.rfind(',') + 1) == "***");
  }

  TEST_CASE("empty results emit a header-only csv") {
    TempDir tmp;
    RegressionResult empty;
    empty.coef = Eigen::VectorXd(0);
    empty.se = Eigen::VectorXd(0);
    empty.tstat = Eigen::VectorXd(0);
    empty.pval = Eigen::VectorXd(0);
    auto path = tmp / "empty.csv";
    emit_table(empty, TableStyle::csv, path, "none");
    auto text = slurp(path);
    CHECK(text == "name,estimate,cluster_se,stars\n");
  }

  TEST_CASE("table emission is deterministic") {
    TempDir tmp;
    auto p1 = tmp / "a.csv";
    auto p2 = tmp / "b.csv";
    emit_table(fake_result(), TableStyle::csv, p1, "t");
    emit_table(fake_result(), TableStyle::csv, p2, "t");
    CHECK(slurp(p1) == slurp(p2));
  }

  TEST_CASE("boxplot SVG draws one box per year and circles for outliers") {
    TempDir tmp;
    std::vector<AnnualBoxStats> stats = {box(2010, 0.3, 0.45, 0.6, 0.1, 0.8, {0.95, 0.02}),
                                         box(2011, 0.35, 0.5, 0.62, 0.15, 0.82),
                                         box(2012, 0.32, 0.47, 0.58, 0.12, 0.78, {0.99})};
    auto path = tmp / "box.svg";
    emit_boxplot_svg(stats, path, "gini");
    auto svg = slurp(path);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("topicdiv 0.1.0") != std::string::npos);
    CHECK(svg.find("viewBox") != std::string::npos);
    CHECK(xml_well_formed(svg));
    CHECK(count_occurrences(svg, "fill=\"#9ecae1\"") == 3);
    CHECK(count_occurrences(svg, "<circle") == 3);
    CHECK(svg.find("2010") != std::string::npos);
    CHECK(svg.find("2012") != std::string::npos);
    CHECK(svg.find("gini") != std::string::npos);
  }

  TEST_CASE("boxplots without outliers have no circles") {
    TempDir tmp;
    std::vector<AnnualBoxStats> stats = {box(2015, 0.4, 0.5, 0.6, 0.2, 0.75)};
    auto path = tmp / "box.svg";
    emit_boxplot_svg(stats, path, "entropy");
    auto svg = slurp(path);
    CHECK(count_occurrences(svg, "fill=\"#9ecae1\"") == 1);
    CHECK(count_occurrences(svg, "<circle") == 0);
    CHECK(xml_well_formed(svg));
    std::vector<AnnualBoxStats> empty;
    CHECK_THROWS(emit_boxplot_svg(empty, tmp / "bad.svg", "gini"));
  }

  TEST_CASE("boxplot emission is deterministic") {
    TempDir tmp;
    std::vector<AnnualBoxStats> stats = {box(2010, 0.3, 0.45, 0.6, 0.1, 0.8, {0.9})};
    emit_boxplot_svg(stats, tmp / "a.svg", "gini");
    emit_boxplot_svg(stats, tmp / "b.svg", "gini");
    CHECK(slurp(tmp / "a.svg") == slurp(tmp / "b.svg"));
  }

  TEST_CASE("density SVG carries the curve, dots and reference lines") {
    TempDir tmp;
    auto dist = fake_distribution(10);
    auto path = tmp / "density.svg";
    emit_density_svg(dist, path, "Placebo");
    auto svg = slurp(path);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(xml_well_formed(svg));
    CHECK(svg.find("viewBox") != std::string::npos);
    CHECK(count_occurrences(svg, "fill=\"#555555\"") == 10);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("stroke=\"#1f77b4\"") != std::string::npos);
    CHECK(svg.find("stroke=\"#d62728\"") != std::string::npos);
    CHECK(svg.find("stroke-dasharray=\"5,4\"") != std::string::npos);
    CHECK(svg.find("baseline") != std::string::npos);
    CHECK(svg.find("p=0.10") != std::string::npos);
    CHECK(svg.find("Placebo") != std::string::npos);
  }

  TEST_CASE("density emission rejects empty distributions and is deterministic") {
    TempDir tmp;
    PlaceboDistribution empty;
    empty.n_reps = 10;
    empty.failed_reps = 10;
    CHECK_THROWS(emit_density_svg(empty, tmp / "bad.svg", "t"));

    auto dist = fake_distribution(8);
    emit_density_svg(dist, tmp / "a.svg", "t");
    emit_density_svg(dist, tmp / "b.svg", "t");
    CHECK(slurp(tmp / "a.svg") == slurp(tmp / "b.svg"));
  }

  TEST_CASE("titles are XML-escaped") {
    TempDir tmp;
    std::vector<AnnualBoxStats> stats = {box(2010, 0.3, 0.45, 0.6, 0.1, 0.8)};
    auto path = tmp / "esc.svg";
    emit_boxplot_svg(stats, path, "gini & <friends>");
    auto svg = slurp(path);
    CHECK(svg.find("gini &amp; &lt;friends&gt;") != std::string::npos);
    CHECK(xml_well_formed(svg));
  }
}
