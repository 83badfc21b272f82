#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "topicdiv/panel.hpp"

using namespace topicdiv::panel;
using topicdiv::diversity::DiversityRecord;
using testsupport::TempDir;
using testsupport::throws_with;
using testsupport::write_file;

namespace {

FinancialRow base_row(std::string firm = "f1", int year = 2010) {
  FinancialRow r;
  r.firm_id = std::move(firm);
  r.year = year;
  r.net_profit = 50.0;
  r.total_assets = 1000.0;
  r.total_liabilities = 400.0;
  r.op_cashflow = 80.0;
  r.fixed_assets_net = 300.0;
  r.top1_share = 0.35;
  r.board_count = 9.0;
  r.market_value_equity = 900.0;
  r.book_debt = 400.0;
  r.roa = 0.05;
  r.mt_positive = 0.1;
  r.mt_neutral = 0.7;
  r.mt_negative = 0.2;
  r.salary_top3_raw = 120.0;
  r.salary_sum_raw = 300.0;
  r.sshrrat = 0.55;
  return r;
}

PanelObservation obs_from(const FinancialRow& row, double y_gini = 0.5, double y_ent = 1.0) {
  PanelObservation o;
  o.firm_id = row.firm_id;
  o.year = row.year;
  o.y_gini = y_gini;
  o.y_ent = y_ent;
  o.derived = derive_variables(row);
  o.roa = row.roa;
  o.mt_positive = row.mt_positive;
  o.mt_neutral = row.mt_neutral;
  o.mt_negative = row.mt_negative;
  o.sshrrat = row.sshrrat;
  o.certification = row.certification;
  o.st_flag = row.st_flag;
  o.financial_industry = row.financial_industry;
  o.total_assets = row.total_assets;
  return o;
}

constexpr const char* kHeader =
    "firm_id,year,net_profit,total_assets,total_liabilities,op_cashflow,fixed_assets_net,"
    "top1_share,board_count,market_value_equity,book_debt,roa";

std::string csv_line(const std::string& firm, int year, double profit = 50) {
  return firm + "," + std::to_string(year) + "," + std::to_string(profit) +
         ",1000,400,80,300,0.35,9,900,400,0.05";
}

}  // namespace

TEST_SUITE("panel") {
  TEST_CASE("derived variables match their definitions") {
    auto row = base_row();
    auto d = derive_variables(row);
    CHECK(d.loss == 0.0);
    CHECK(d.size == doctest::Approx(std::log(1000.0)).epsilon(1e-14));
    CHECK(d.lev == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(d.cashflow == doctest::Approx(0.08).epsilon(1e-14));
    CHECK(d.fixed == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(d.top1 == doctest::Approx(0.35).epsilon(1e-14));
    CHECK(d.board == doctest::Approx(std::log(9.0)).epsilon(1e-14));
    CHECK(d.tobinq == doctest::Approx(1.3).epsilon(1e-14));
    CHECK(d.salarytop3 == doctest::Approx(std::log(120.0)).epsilon(1e-14));
    CHECK(d.salarysum == doctest::Approx(std::log(300.0)).epsilon(1e-14));

    row.net_profit = -5.0;
    CHECK(derive_variables(row).loss == 1.0);
    row.net_profit = 0.0;
    CHECK(derive_variables(row).loss == 0.0);
  }

  TEST_CASE("zero executive pay maps to zero log pay") {
    auto row = base_row();
    row.salary_top3_raw = 0.0;
    row.salary_sum_raw = 0.0;
    auto d = derive_variables(row);
    CHECK(d.salarytop3 == 0.0);
    CHECK(d.salarysum == 0.0);
    row.salary_top3_raw = -1.0;
    CHECK_THROWS_AS(derive_variables(row), std::invalid_argument);
  }

  TEST_CASE("missing inputs propagate as NaN") {
    auto row = base_row();
    row.net_profit = std::nan("");
    CHECK(std::isnan(derive_variables(row).loss));
    row = base_row();
    row.market_value_equity = std::nan("");
    auto d = derive_variables(row);
    CHECK(std::isnan(d.tobinq));
    CHECK(!std::isnan(d.size));
    row = base_row();
    row.salary_top3_raw = std::nan("");
    CHECK(std::isnan(derive_variables(row).salarytop3));
  }

  TEST_CASE("non-positive denominators on observed rows are errors") {
    auto row = base_row();
    row.total_assets = 0.0;
    CHECK(throws_with([&] { derive_variables(row); }, "must be positive"));
    row = base_row();
    row.total_assets = -10.0;
    CHECK_THROWS_AS(derive_variables(row), std::invalid_argument);
    row = base_row();
    row.board_count = 0.0;
    CHECK_THROWS_AS(derive_variables(row), std::invalid_argument);
  }

  TEST_CASE("join matches diversity at t+1") {
    std::vector<FinancialRow> fin = {base_row("f1", 2010), base_row("f1", 2011),
                                     base_row("f2", 2010)};
    std::vector<DiversityRecord> divs = {{"f1", 2011, 0.6, 1.2}, {"f1", 2012, 0.7, 1.4}};
    auto joined = join_lead_outcome(fin, divs);
    REQUIRE(joined.panel.size() == 2);
    CHECK(joined.dropped_no_lead == 1);
    CHECK(joined.panel[0].firm_id == "f1");
    CHECK(joined.panel[0].year == 2010);
    CHECK(joined.panel[0].y_gini == doctest::Approx(0.6));
    CHECK(joined.panel[0].y_ent == doctest::Approx(1.2));
    CHECK(joined.panel[1].year == 2011);
    CHECK(joined.panel[1].y_gini == doctest::Approx(0.7));
    CHECK(std::isnan(joined.panel[0].iv1));
    CHECK(joined.panel.size() + static_cast<std::size_t>(joined.dropped_no_lead) == fin.size());
  }

  TEST_CASE("duplicate diversity records are rejected") {
    std::vector<FinancialRow> fin = {base_row("f1", 2010)};
    std::vector<DiversityRecord> divs = {{"f1", 2011, 0.6, 1.2}, {"f1", 2011, 0.5, 1.0}};
    CHECK(throws_with([&] { join_lead_outcome(fin, divs); }, "duplicate"));
  }

  TEST_CASE("winsorize clamps at the interpolated percentiles") {
    std::vector<double> values;
    for (int i = 1; i <= 100; ++i) values.push_back(i);
    auto w = winsorize(values, 0.01);
    REQUIRE(w.size() == 100);
    CHECK(w[0] == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(w[99] == doctest::Approx(99.01).epsilon(1e-12));
    for (int i = 2; i <= 99; ++i) CHECK(w[static_cast<std::size_t>(i - 1)] == double(i));
    CHECK(*std::min_element(w.begin(), w.end()) == doctest::Approx(1.99));
    CHECK(*std::max_element(w.begin(), w.end()) == doctest::Approx(99.01));
  }

  TEST_CASE("winsorize leaves constant vectors alone and validates inputs") {
    std::vector<double> constant(10, 3.5);
    auto w = winsorize(constant, 0.05);
    CHECK(w == constant);
    CHECK_THROWS_AS(winsorize(constant, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(winsorize(constant, 0.5), std::invalid_argument);
    std::vector<double> empty;
    CHECK_THROWS_AS(winsorize(empty, 0.01), std::invalid_argument);
    std::vector<double> with_nan = {1.0, std::nan("")};
    CHECK_THROWS_AS(winsorize(with_nan, 0.01), std::invalid_argument);
  }

  TEST_CASE("winsorize preserves order and is idempotent on exact cut points") {
    std::vector<double> values;
    for (int i = 0; i <= 100; ++i) values.push_back(100.0 - i);
    auto once = winsorize(values, 0.01);
    auto twice = winsorize(once, 0.01);
    CHECK(once == twice);
    for (std::size_t i = 0; i + 1 < once.size(); ++i) CHECK(once[i] >= once[i + 1]);
  }

  TEST_CASE("winsorize_panel clamps continuous columns and skips flags") {
    std::vector<PanelObservation> panel;
    for (int i = 0; i < 12; ++i) {
      auto o = obs_from(base_row("f" + std::to_string(i), 2010), 1.0 + i, 2.0);
      o.certification = (i == 0) ? 1.0 : 0.0;
      panel.push_back(o);
    }
    panel[3].y_gini = std::nan("");
    auto before = panel;
    winsorize_panel(panel, 0.1);
    CHECK(panel[0].y_gini > before[0].y_gini);
    CHECK(panel[11].y_gini < before[11].y_gini);
    CHECK(std::isnan(panel[3].y_gini));
    CHECK(panel[0].certification == 1.0);
    CHECK(panel[5].y_gini == before[5].y_gini);
    CHECK_THROWS_AS(winsorize_panel(panel, 0.0), std::invalid_argument);
  }

  TEST_CASE("filter_sample reasons and precedence") {
    std::vector<PanelObservation> panel;
    panel.push_back(obs_from(base_row("clean", 2010)));

    auto missing_outcome = obs_from(base_row("noy", 2010));
    missing_outcome.y_gini = std::nan("");
    panel.push_back(missing_outcome);

    auto missing_cov = obs_from(base_row("nocov", 2010));
    missing_cov.derived.size = std::nan("");
    panel.push_back(missing_cov);

    auto st = obs_from(base_row("st", 2010));
    st.st_flag = 1.0;
    panel.push_back(st);

    auto fin = obs_from(base_row("fin", 2010));
    fin.financial_industry = 1.0;
    panel.push_back(fin);

    auto st_and_missing = obs_from(base_row("stmiss", 2010));
    st_and_missing.st_flag = 1.0;
    st_and_missing.y_ent = std::nan("");
    panel.push_back(st_and_missing);

    SUBCASE("baseline keeps special firms") {
      auto res = filter_sample(panel, SampleMode::baseline);
      CHECK(res.panel.size() == 3);
      CHECK(res.dropped.at("missing_outcome") == 2);
      CHECK(res.dropped.at("missing_covariate") == 1);
      CHECK(res.dropped.count("st_flag") == 0);
      std::vector<std::string> kept;
      for (const auto& o : res.panel) kept.push_back(o.firm_id);
      CHECK(std::find(kept.begin(), kept.end(), "st") != kept.end());
      CHECK(std::find(kept.begin(), kept.end(), "fin") != kept.end());
    }
    SUBCASE("exclude_special drops ST and financial firms first") {
      auto res = filter_sample(panel, SampleMode::exclude_special);
      CHECK(res.panel.size() == 1);
      CHECK(res.panel[0].firm_id == "clean");
      CHECK(res.dropped.at("st_flag") == 2);
      CHECK(res.dropped.at("financial_industry") == 1);
      CHECK(res.dropped.at("missing_outcome") == 1);
      CHECK(res.dropped.at("missing_covariate") == 1);
    }
  }

  TEST_CASE("instrument construction uses t+2 diversity scaled by roa") {
    std::vector<FinancialRow> fin = {base_row("f1", 2010), base_row("f2", 2010)};
    fin[1].roa = 0.0;
    std::vector<DiversityRecord> divs = {{"f1", 2011, 0.6, 1.2}, {"f1", 2012, 0.8, 1.6},
                                         {"f2", 2011, 0.5, 1.0}, {"f2", 2012, 0.4, 0.9}};
    auto joined = join_lead_outcome(fin, divs);
    REQUIRE(joined.panel.size() == 2);
    int missing = construct_ivs(joined.panel, divs);
    CHECK(missing == 0);
    CHECK(joined.panel[0].iv1 == doctest::Approx(0.8 * 0.05).epsilon(1e-14));
    CHECK(joined.panel[0].iv2 == doctest::Approx(1.6 * 0.05).epsilon(1e-14));
    CHECK(joined.panel[0].iv3 ==
          doctest::Approx(joined.panel[0].iv1 + joined.panel[0].iv2).epsilon(1e-12));
    CHECK(joined.panel[1].iv1 == 0.0);
    CHECK(joined.panel[1].iv2 == 0.0);
  }

  TEST_CASE("missing t+2 leads leave NaN instruments and are counted") {
    std::vector<FinancialRow> fin = {base_row("f1", 2010), base_row("f1", 2011)};
    std::vector<DiversityRecord> divs = {{"f1", 2011, 0.6, 1.2}, {"f1", 2012, 0.8, 1.6}};
    auto joined = join_lead_outcome(fin, divs);
    REQUIRE(joined.panel.size() == 2);
    int missing = construct_ivs(joined.panel, divs);
    CHECK(missing == 1);
    CHECK(!std::isnan(joined.panel[0].iv1));
    CHECK(std::isnan(joined.panel[1].iv1));
    CHECK(std::isnan(joined.panel[1].iv3));
  }

  TEST_CASE("largescale flags firms above the annual mean") {
    std::vector<PanelObservation> panel = {obs_from(base_row("a", 2010)),
                                           obs_from(base_row("b", 2010)),
                                           obs_from(base_row("c", 2011)),
                                           obs_from(base_row("d", 2011)),
                                           obs_from(base_row("e", 2011))};
    panel[0].total_assets = 10.0;
    panel[1].total_assets = 30.0;
    panel[2].total_assets = 10.0;
    panel[3].total_assets = 20.0;
    panel[4].total_assets = 30.0;
    derive_largescale(panel);
    CHECK(panel[0].largescale == 0.0);
    CHECK(panel[1].largescale == 1.0);
    CHECK(panel[2].largescale == 0.0);
    CHECK(panel[3].largescale == 0.0);  // exactly at the mean
    CHECK(panel[4].largescale == 1.0);

    std::vector<PanelObservation> equal = {obs_from(base_row("a", 2012)),
                                           obs_from(base_row("b", 2012))};
    equal[0].total_assets = equal[1].total_assets = 42.0;
    derive_largescale(equal);
    CHECK(equal[0].largescale == 0.0);
    CHECK(equal[1].largescale == 0.0);
  }

  TEST_CASE("financial CSV loader applies defaults and validates") {
    TempDir tmp;
    auto path = tmp / "fin.csv";

    SUBCASE("optional columns default, flags to zero") {
      write_file(path, std::string(kHeader) + "\n" + csv_line("f1", 2010) + "\n");
      auto rows = load_financial_csv(path);
      REQUIRE(rows.size() == 1);
      CHECK(rows[0].firm_id == "f1");
      CHECK(rows[0].year == 2010);
      CHECK(rows[0].net_profit == doctest::Approx(50.0));
      CHECK(std::isnan(rows[0].mt_positive));
      CHECK(std::isnan(rows[0].salary_top3_raw));
      CHECK(std::isnan(rows[0].sshrrat));
      CHECK(rows[0].st_flag == 0.0);
      CHECK(rows[0].financial_industry == 0.0);
      CHECK(rows[0].certification == 0.0);
      CHECK(rows[0].high_competition == 0.0);
    }
    SUBCASE("missing required column is named") {
      write_file(path, "firm_id,year,net_profit\nf1,2010,5\n");
      CHECK(throws_with([&] { load_financial_csv(path); }, "total_assets"));
    }
    SUBCASE("duplicate firm-year is rejected") {
      write_file(path, std::string(kHeader) + "\n" + csv_line("f1", 2010) + "\n" +
                           csv_line("f1", 2010) + "\n");
      CHECK(throws_with([&] { load_financial_csv(path); }, "duplicate"));
    }
    SUBCASE("empty firm_id is rejected") {
      write_file(path, std::string(kHeader) + "\n" + csv_line("", 2010) + "\n");
      CHECK(throws_with([&] { load_financial_csv(path); }, "firm_id"));
    }
    SUBCASE("missing numeric cells become NaN") {
      write_file(path, std::string(kHeader) +
                           "\nf1,2010,,1000,400,80,300,0.35,9,900,400,0.05\n");
      auto rows = load_financial_csv(path);
      REQUIRE(rows.size() == 1);
      CHECK(std::isnan(rows[0].net_profit));
    }
  }

  TEST_CASE("competition CSV merges by firm and validates values") {
    TempDir tmp;
    auto fin_path = tmp / "fin.csv";
    write_file(fin_path, std::string(kHeader) + ",high_competition\n" + csv_line("f1", 2010) +
                             ",0\n" + csv_line("f2", 2010) + ",0\n");
    auto rows = load_financial_csv(fin_path);

    auto comp = tmp / "comp.csv";
    write_file(comp, "firm_id,high_competition\nf1,1\nghost,1\n");
    apply_competition_csv(rows, comp);
    CHECK(rows[0].high_competition == 1.0);
    CHECK(rows[1].high_competition == 0.0);

    write_file(comp, "firm_id,high_competition\nf1,2\n");
    CHECK(throws_with([&] { apply_competition_csv(rows, comp); }, "0 or 1"));
    write_file(comp, "firm_id,high_competition\nf1,1\nf1,0\n");
    CHECK(throws_with([&] { apply_competition_csv(rows, comp); }, "duplicate"));
  }

  TEST_CASE("panel CSV round trips preserve missing values") {
    TempDir tmp;
    std::vector<FinancialRow> fin = {base_row("f1", 2010), base_row("f2", 2010)};
    std::vector<DiversityRecord> divs = {{"f1", 2011, 0.6, 1.2}, {"f2", 2011, 0.5, 1.0},
                                         {"f1", 2012, 0.7, 1.3}};
    auto joined = join_lead_outcome(fin, divs);
    construct_ivs(joined.panel, divs);
    derive_largescale(joined.panel);
    joined.panel[1].y_ent = std::nan("");

    auto path = tmp / "panel.csv";
    write_panel_csv(path, joined.panel);
    auto back = read_panel_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].firm_id == "f1");
    CHECK(back[0].y_gini == joined.panel[0].y_gini);
    CHECK(back[0].derived.size == joined.panel[0].derived.size);
    CHECK(back[0].iv1 == joined.panel[0].iv1);
    CHECK(std::isnan(back[1].y_ent));
    CHECK(std::isnan(back[1].iv1));
    CHECK(back[0].largescale == joined.panel[0].largescale);
  }

  TEST_CASE("to_table exposes firm and year dimensions plus numeric columns") {
    std::vector<PanelObservation> panel = {obs_from(base_row("f1", 2010)),
                                           obs_from(base_row("f2", 2010)),
                                           obs_from(base_row("f1", 2011))};
    auto table = to_table(panel);
    CHECK(table.rows() == 3);
    CHECK(table.has_categorical("firm"));
    CHECK(table.has_categorical("year"));
    CHECK(table.has_numeric("y_gini"));
    CHECK(table.has_numeric("y_ent"));
    CHECK(table.has_numeric("loss"));
    CHECK(table.has_numeric("size"));
    CHECK(table.has_numeric("tobinq"));
    CHECK(table.has_numeric("certification"));
    CHECK(table.has_numeric("largescale"));
    CHECK(table.codes("firm")[0] == table.codes("firm")[2]);
    CHECK(table.codes("firm")[0] != table.codes("firm")[1]);
    CHECK(table.numeric("size")[0] == doctest::Approx(std::log(1000.0)));
  }
}
