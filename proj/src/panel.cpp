#include "topicdiv/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "topicdiv/csv.hpp"
#include "topicdiv/stats.hpp"

namespace topicdiv::panel {

namespace {

bool missing(double x) { return std::isnan(x); }

double ln_or_nan(double x, const std::string& what, const std::string& where) {
  if (missing(x)) return x;
  if (!(x > 0.0)) {
    throw std::invalid_argument(where + ": " + what + " must be positive, got " +
                                csv::format_double(x));
  }
  return std::log(x);
}

double ln_salary(double x, const std::string& where) {
  if (missing(x)) return x;
  if (x < 0.0) throw std::invalid_argument(where + ": negative pay value");
  return x == 0.0 ? 0.0 : std::log(x);
}

double ratio_or_nan(double num, double den) {
  if (missing(num) || missing(den)) return std::nan("");
  return num / den;
}

struct ColumnSpec {
  const char* name;
  double PanelObservation::*field;
};

// firm_id and year are handled separately; everything else round-trips
// through these lists so the CSV layout has a single source of truth.
constexpr const char* kDerivedColumns[] = {
    "loss", "size", "lev", "cashflow", "fixed", "top1", "board", "tobinq",
    "salarytop3", "salarysum",
};

double DerivedVariables::*derived_field(std::size_t i) {
  static constexpr double DerivedVariables::*fields[] = {
      &DerivedVariables::loss,     &DerivedVariables::size,       &DerivedVariables::lev,
      &DerivedVariables::cashflow, &DerivedVariables::fixed,      &DerivedVariables::top1,
      &DerivedVariables::board,    &DerivedVariables::tobinq,     &DerivedVariables::salarytop3,
      &DerivedVariables::salarysum,
  };
  return fields[i];
}

constexpr ColumnSpec kFlatColumns[] = {
    {"roa", &PanelObservation::roa},
    {"mt_positive", &PanelObservation::mt_positive},
    {"mt_neutral", &PanelObservation::mt_neutral},
    {"mt_negative", &PanelObservation::mt_negative},
    {"sshrrat", &PanelObservation::sshrrat},
    {"gri", &PanelObservation::gri},
    {"certification", &PanelObservation::certification},
    {"worksafety", &PanelObservation::worksafety},
    {"st_flag", &PanelObservation::st_flag},
    {"financial_industry", &PanelObservation::financial_industry},
    {"high_competition", &PanelObservation::high_competition},
    {"largescale", &PanelObservation::largescale},
    {"total_assets", &PanelObservation::total_assets},
    {"iv1", &PanelObservation::iv1},
    {"iv2", &PanelObservation::iv2},
    {"iv3", &PanelObservation::iv3},
};

// Continuous columns clamped by winsorize_panel. Binary indicators and raw
// levels used only for derivations stay untouched.
constexpr double PanelObservation::*kWinsorTargets[] = {
    &PanelObservation::y_gini,      &PanelObservation::y_ent,
    &PanelObservation::roa,         &PanelObservation::mt_positive,
    &PanelObservation::mt_neutral,  &PanelObservation::mt_negative,
    &PanelObservation::sshrrat,
};

constexpr double DerivedVariables::*kWinsorDerivedTargets[] = {
    &DerivedVariables::size,       &DerivedVariables::lev,
    &DerivedVariables::cashflow,   &DerivedVariables::fixed,
    &DerivedVariables::top1,       &DerivedVariables::board,
    &DerivedVariables::tobinq,     &DerivedVariables::salarytop3,
    &DerivedVariables::salarysum,
};

}  // namespace

std::vector<FinancialRow> load_financial_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();

  const int c_firm = t.require_col("firm_id", ctx);
  const int c_year = t.require_col("year", ctx);

  struct Numeric {
    const char* name;
    double FinancialRow::*field;
    bool required;
  };
  const Numeric numerics[] = {
      {"net_profit", &FinancialRow::net_profit, true},
      {"total_assets", &FinancialRow::total_assets, true},
      {"total_liabilities", &FinancialRow::total_liabilities, true},
      {"op_cashflow", &FinancialRow::op_cashflow, true},
      {"fixed_assets_net", &FinancialRow::fixed_assets_net, true},
      {"top1_share", &FinancialRow::top1_share, true},
      {"board_count", &FinancialRow::board_count, true},
      {"market_value_equity", &FinancialRow::market_value_equity, true},
      {"book_debt", &FinancialRow::book_debt, true},
      {"roa", &FinancialRow::roa, true},
      {"mt_positive", &FinancialRow::mt_positive, false},
      {"mt_neutral", &FinancialRow::mt_neutral, false},
      {"mt_negative", &FinancialRow::mt_negative, false},
      {"salary_top3_raw", &FinancialRow::salary_top3_raw, false},
      {"salary_sum_raw", &FinancialRow::salary_sum_raw, false},
      {"sshrrat", &FinancialRow::sshrrat, false},
      {"gri", &FinancialRow::gri, false},
      {"certification", &FinancialRow::certification, false},
      {"worksafety", &FinancialRow::worksafety, false},
      {"st_flag", &FinancialRow::st_flag, false},
      {"financial_industry", &FinancialRow::financial_industry, false},
      {"high_competition", &FinancialRow::high_competition, false},
  };

  std::vector<int> cols;
  for (const Numeric& n : numerics) {
    cols.push_back(n.required ? t.require_col(n.name, ctx) : t.col(n.name));
  }

  std::set<std::pair<std::string, int>> seen;
  std::vector<FinancialRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    FinancialRow f;
    f.firm_id = row[static_cast<std::size_t>(c_firm)];
    const std::string where = ctx + " row " + std::to_string(r + 1);
    if (f.firm_id.empty()) throw std::runtime_error(where + ": empty firm_id");
    f.year = static_cast<int>(csv::parse_int(row[static_cast<std::size_t>(c_year)], where));
    if (!seen.emplace(f.firm_id, f.year).second) {
      throw std::runtime_error(where + ": duplicate (firm_id=" + f.firm_id +
                               ", year=" + std::to_string(f.year) + ")");
    }
    for (std::size_t i = 0; i < std::size(numerics); ++i) {
      if (cols[i] < 0) {
        f.*(numerics[i].field) = std::nan("");
        continue;
      }
      f.*(numerics[i].field) =
          csv::parse_double_or_nan(row[static_cast<std::size_t>(cols[i])], where);
    }
    if (cols[std::size(numerics) - 1] < 0) f.high_competition = 0.0;  // optional flag defaults off
    for (double FinancialRow::*flag :
         {&FinancialRow::gri, &FinancialRow::certification, &FinancialRow::worksafety,
          &FinancialRow::st_flag, &FinancialRow::financial_industry}) {
      if (missing(f.*flag)) f.*flag = 0.0;
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

void apply_competition_csv(std::vector<FinancialRow>& rows, const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_firm = t.require_col("firm_id", ctx);
  const int c_flag = t.require_col("high_competition", ctx);
  std::map<std::string, double> flags;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = ctx + " row " + std::to_string(r + 1);
    const std::string& firm = t.rows[r][static_cast<std::size_t>(c_firm)];
    const double v = csv::parse_double(t.rows[r][static_cast<std::size_t>(c_flag)], where);
    if (v != 0.0 && v != 1.0) throw std::runtime_error(where + ": high_competition must be 0 or 1");
    if (!flags.emplace(firm, v).second) {
      throw std::runtime_error(where + ": duplicate firm_id " + firm);
    }
  }
  for (FinancialRow& row : rows) {
    const auto it = flags.find(row.firm_id);
    if (it != flags.end()) row.high_competition = it->second;
  }
}

DerivedVariables derive_variables(const FinancialRow& row) {
  const std::string where = "firm " + row.firm_id + " year " + std::to_string(row.year);
  DerivedVariables d;
  d.loss = missing(row.net_profit) ? std::nan("") : (row.net_profit < 0.0 ? 1.0 : 0.0);
  d.size = ln_or_nan(row.total_assets, "total_assets", where);
  d.lev = ratio_or_nan(row.total_liabilities, row.total_assets);
  d.cashflow = ratio_or_nan(row.op_cashflow, row.total_assets);
  d.fixed = ratio_or_nan(row.fixed_assets_net, row.total_assets);
  d.top1 = row.top1_share;
  d.board = ln_or_nan(row.board_count, "board_count", where);
  if (missing(row.market_value_equity) || missing(row.book_debt) || missing(row.total_assets)) {
    d.tobinq = std::nan("");
  } else {
    d.tobinq = (row.market_value_equity + row.book_debt) / row.total_assets;
  }
  d.salarytop3 = ln_salary(row.salary_top3_raw, where);
  d.salarysum = ln_salary(row.salary_sum_raw, where);
  return d;
}

JoinResult join_lead_outcome(std::span<const FinancialRow> financials,
                             std::span<const diversity::DiversityRecord> records) {
  std::map<std::pair<std::string, int>, const diversity::DiversityRecord*> index;
  for (const auto& r : records) {
    if (!index.emplace(std::make_pair(r.firm_id, r.year), &r).second) {
      throw std::runtime_error("join_lead_outcome: duplicate diversity record for firm " +
                               r.firm_id + " year " + std::to_string(r.year));
    }
  }

  JoinResult out;
  out.panel.reserve(financials.size());
  for (const FinancialRow& f : financials) {
    const auto it = index.find(std::make_pair(f.firm_id, f.year + 1));
    if (it == index.end()) {
      ++out.dropped_no_lead;
      continue;
    }
    PanelObservation obs;
    obs.firm_id = f.firm_id;
    obs.year = f.year;
    obs.y_gini = it->second->gini;
    obs.y_ent = it->second->entropy;
    obs.derived = derive_variables(f);
    obs.roa = f.roa;
    obs.mt_positive = f.mt_positive;
    obs.mt_neutral = f.mt_neutral;
    obs.mt_negative = f.mt_negative;
    obs.sshrrat = f.sshrrat;
    obs.gri = f.gri;
    obs.certification = f.certification;
    obs.worksafety = f.worksafety;
    obs.st_flag = f.st_flag;
    obs.financial_industry = f.financial_industry;
    obs.high_competition = f.high_competition;
    obs.total_assets = f.total_assets;
    obs.iv1 = std::nan("");
    obs.iv2 = std::nan("");
    obs.iv3 = std::nan("");
    out.panel.push_back(std::move(obs));
  }
  return out;
}

std::vector<double> winsorize(std::span<const double> values, double tail) {
  if (values.empty()) throw std::invalid_argument("winsorize: empty input");
  if (!(tail > 0.0 && tail < 0.5)) {
    throw std::invalid_argument("winsorize: tail must be in (0, 0.5)");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("winsorize: non-finite input value");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = stats::quantile_sorted(sorted, tail);
  const double hi = stats::quantile_sorted(sorted, 1.0 - tail);
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  return out;
}

void winsorize_panel(std::vector<PanelObservation>& panel, double tail) {
  if (panel.empty()) return;
  auto clamp_column = [&](auto getter) {
    std::vector<double> finite;
    finite.reserve(panel.size());
    for (const PanelObservation& obs : panel) {
      const double v = getter(const_cast<PanelObservation&>(obs));
      if (std::isfinite(v)) finite.push_back(v);
    }
    if (finite.size() < 2) return;
    std::sort(finite.begin(), finite.end());
    const double lo = stats::quantile_sorted(finite, tail);
    const double hi = stats::quantile_sorted(finite, 1.0 - tail);
    for (PanelObservation& obs : panel) {
      double& v = getter(obs);
      if (std::isfinite(v)) v = std::clamp(v, lo, hi);
    }
  };
  if (!(tail > 0.0 && tail < 0.5)) {
    throw std::invalid_argument("winsorize_panel: tail must be in (0, 0.5)");
  }
  for (double PanelObservation::*field : kWinsorTargets) {
    clamp_column([field](PanelObservation& o) -> double& { return o.*field; });
  }
  for (double DerivedVariables::*field : kWinsorDerivedTargets) {
    clamp_column([field](PanelObservation& o) -> double& { return o.derived.*field; });
  }
}

FilterResult filter_sample(std::span<const PanelObservation> panel, SampleMode mode) {
  FilterResult out;
  for (const PanelObservation& obs : panel) {
    if (mode == SampleMode::exclude_special && obs.st_flag != 0.0) {
      ++out.dropped["st_flag"];
      continue;
    }
    if (mode == SampleMode::exclude_special && obs.financial_industry != 0.0) {
      ++out.dropped["financial_industry"];
      continue;
    }
    if (missing(obs.y_gini) || missing(obs.y_ent)) {
      ++out.dropped["missing_outcome"];
      continue;
    }
    const DerivedVariables& d = obs.derived;
    const double required[] = {d.loss, d.size, d.lev,    d.cashflow,
                               d.fixed, d.top1, d.board, d.tobinq};
    bool ok = true;
    for (double v : required) {
      if (missing(v)) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++out.dropped["missing_covariate"];
      continue;
    }
    out.panel.push_back(obs);
  }
  return out;
}

int construct_ivs(std::vector<PanelObservation>& panel,
                  std::span<const diversity::DiversityRecord> records) {
  std::map<std::pair<std::string, int>, const diversity::DiversityRecord*> index;
  for (const auto& r : records) index[std::make_pair(r.firm_id, r.year)] = &r;

  int missing_lead2 = 0;
  for (PanelObservation& obs : panel) {
    const auto it = index.find(std::make_pair(obs.firm_id, obs.year + 2));
    if (it == index.end() || missing(obs.roa)) {
      obs.iv1 = std::nan("");
      obs.iv2 = std::nan("");
      obs.iv3 = std::nan("");
      ++missing_lead2;
      continue;
    }
    obs.iv1 = it->second->gini * obs.roa;
    obs.iv2 = it->second->entropy * obs.roa;
    obs.iv3 = (it->second->gini + it->second->entropy) * obs.roa;
  }
  return missing_lead2;
}

void derive_largescale(std::vector<PanelObservation>& panel) {
  std::map<int, std::vector<double>> by_year;
  for (const PanelObservation& obs : panel) {
    if (!missing(obs.total_assets)) by_year[obs.year].push_back(obs.total_assets);
  }
  std::map<int, double> cutoffs;
  for (auto& [year, values] : by_year) {
    cutoffs[year] = stats::mean(values);
  }
  for (PanelObservation& obs : panel) {
    if (missing(obs.total_assets)) {
      obs.largescale = std::nan("");
      continue;
    }
    obs.largescale = obs.total_assets > cutoffs.at(obs.year) ? 1.0 : 0.0;
  }
}

DataTable to_table(std::span<const PanelObservation> panel) {
  if (panel.empty()) throw std::invalid_argument("to_table: empty panel");
  const auto n = static_cast<Eigen::Index>(panel.size());
  DataTable table;

  std::vector<std::string> firms;
  std::vector<std::string> years;
  firms.reserve(panel.size());
  years.reserve(panel.size());
  for (const PanelObservation& obs : panel) {
    firms.push_back(obs.firm_id);
    years.push_back(std::to_string(obs.year));
  }
  table.add_categorical("firm", firms);
  table.add_categorical("year", years);

  auto add = [&](const std::string& name, auto getter) {
    Eigen::VectorXd col(n);
    for (Eigen::Index i = 0; i < n; ++i) col[i] = getter(panel[static_cast<std::size_t>(i)]);
    table.add_numeric(name, std::move(col));
  };
  add("y_gini", [](const PanelObservation& o) { return o.y_gini; });
  add("y_ent", [](const PanelObservation& o) { return o.y_ent; });
  for (std::size_t i = 0; i < std::size(kDerivedColumns); ++i) {
    const auto field = derived_field(i);
    add(kDerivedColumns[i], [field](const PanelObservation& o) { return o.derived.*field; });
  }
  for (const ColumnSpec& c : kFlatColumns) {
    add(c.name, [&c](const PanelObservation& o) { return o.*(c.field); });
  }
  return table;
}

void write_panel_csv(const std::filesystem::path& path,
                     std::span<const PanelObservation> panel) {
  csv::Writer w(path);
  w.field("firm_id").field("year").field("y_gini").field("y_ent");
  for (const char* name : kDerivedColumns) w.field(name);
  for (const ColumnSpec& c : kFlatColumns) w.field(c.name);
  w.end_row();
  for (const PanelObservation& obs : panel) {
    w.field(obs.firm_id).field(static_cast<long long>(obs.year)).field(obs.y_gini).field(obs.y_ent);
    for (std::size_t i = 0; i < std::size(kDerivedColumns); ++i) {
      w.field(obs.derived.*derived_field(i));
    }
    for (const ColumnSpec& c : kFlatColumns) w.field(obs.*(c.field));
    w.end_row();
  }
}

std::vector<PanelObservation> read_panel_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_firm = t.require_col("firm_id", ctx);
  const int c_year = t.require_col("year", ctx);
  const int c_gini = t.require_col("y_gini", ctx);
  const int c_ent = t.require_col("y_ent", ctx);
  std::vector<int> c_derived;
  for (const char* name : kDerivedColumns) c_derived.push_back(t.require_col(name, ctx));
  std::vector<int> c_flat;
  for (const ColumnSpec& c : kFlatColumns) c_flat.push_back(t.require_col(c.name, ctx));

  std::vector<PanelObservation> panel;
  panel.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    PanelObservation obs;
    obs.firm_id = row[static_cast<std::size_t>(c_firm)];
    obs.year = static_cast<int>(csv::parse_int(row[static_cast<std::size_t>(c_year)], ctx));
    obs.y_gini = csv::parse_double_or_nan(row[static_cast<std::size_t>(c_gini)], ctx);
    obs.y_ent = csv::parse_double_or_nan(row[static_cast<std::size_t>(c_ent)], ctx);
    for (std::size_t i = 0; i < std::size(kDerivedColumns); ++i) {
      obs.derived.*derived_field(i) =
          csv::parse_double_or_nan(row[static_cast<std::size_t>(c_derived[i])], ctx);
    }
    for (std::size_t i = 0; i < std::size(kFlatColumns); ++i) {
      obs.*(kFlatColumns[i].field) =
          csv::parse_double_or_nan(row[static_cast<std::size_t>(c_flat[i])], ctx);
    }
    panel.push_back(std::move(obs));
  }
  return panel;
}

}  // namespace topicdiv::panel
