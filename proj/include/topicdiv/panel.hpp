#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topicdiv/data_table.hpp"
#include "topicdiv/diversity.hpp"

namespace topicdiv::panel {

// One firm-year row of the financial input CSV. NaN marks a missing value.
struct FinancialRow {
  std::string firm_id;
  int year = 0;
  double net_profit = 0.0;
  double total_assets = 0.0;
  double total_liabilities = 0.0;
  double op_cashflow = 0.0;
  double fixed_assets_net = 0.0;
  double top1_share = 0.0;
  double board_count = 0.0;
  double market_value_equity = 0.0;
  double book_debt = 0.0;
  double roa = 0.0;
  double mt_positive = 0.0;
  double mt_neutral = 0.0;
  double mt_negative = 0.0;
  double salary_top3_raw = 0.0;
  double salary_sum_raw = 0.0;
  double sshrrat = 0.0;
  double gri = 0.0;
  double certification = 0.0;
  double worksafety = 0.0;
  double st_flag = 0.0;
  double financial_industry = 0.0;
  double high_competition = 0.0;  // optional column; competition CSV can override
};

std::vector<FinancialRow> load_financial_csv(const std::filesystem::path& path);

// Merge firm-level competition flags (columns firm_id,high_competition).
void apply_competition_csv(std::vector<FinancialRow>& rows, const std::filesystem::path& path);

struct DerivedVariables {
  double loss = 0.0;        // 1 when net profit < 0
  double size = 0.0;        // ln total assets
  double lev = 0.0;         // liabilities / assets
  double cashflow = 0.0;    // operating cash flow / assets
  double fixed = 0.0;       // net fixed assets / assets
  double top1 = 0.0;        // largest-shareholder ownership share
  double board = 0.0;       // ln board count
  double tobinq = 0.0;      // (market value of equity + book debt) / assets
  double salarytop3 = 0.0;  // ln of top-3 executive pay; ln(0) defined as 0
  double salarysum = 0.0;   // ln of total executive pay; same convention
};

// Missing inputs propagate as NaN; non-positive assets or board counts on
// observed rows are errors.
DerivedVariables derive_variables(const FinancialRow& row);

struct PanelObservation {
  std::string firm_id;
  int year = 0;
  double y_gini = 0.0;  // diversity at t+1
  double y_ent = 0.0;
  DerivedVariables derived;
  double roa = 0.0;
  double mt_positive = 0.0;
  double mt_neutral = 0.0;
  double mt_negative = 0.0;
  double sshrrat = 0.0;
  double gri = 0.0;
  double certification = 0.0;
  double worksafety = 0.0;
  double st_flag = 0.0;
  double financial_industry = 0.0;
  double high_competition = 0.0;
  double largescale = 0.0;
  double total_assets = 0.0;
  double iv1 = 0.0;  // gini(t+2) x roa(t)
  double iv2 = 0.0;  // entropy(t+2) x roa(t)
  double iv3 = 0.0;  // (gini + entropy)(t+2) x roa(t)
};

struct JoinResult {
  std::vector<PanelObservation> panel;
  int dropped_no_lead = 0;  // financial rows without a t+1 diversity record
};

JoinResult join_lead_outcome(std::span<const FinancialRow> financials,
                             std::span<const diversity::DiversityRecord> records);

// Two-sided clamp at the (tail, 1-tail) type-7 quantiles; tail in (0, 0.5).
std::vector<double> winsorize(std::span<const double> values, double tail);

// Clamp every continuous panel column in place, skipping missing values.
void winsorize_panel(std::vector<PanelObservation>& panel, double tail);

enum class SampleMode { baseline, exclude_special };

struct FilterResult {
  std::vector<PanelObservation> panel;
  std::map<std::string, int> dropped;  // reason -> count
};

// baseline: drop rows with missing outcome or required covariates.
// exclude_special: additionally drop ST and financial-industry firms.
FilterResult filter_sample(std::span<const PanelObservation> panel, SampleMode mode);

// Fills iv1..iv3 from t+2 diversity; missing leads yield NaN. Returns the
// number of rows without a t+2 record.
int construct_ivs(std::vector<PanelObservation>& panel,
                  std::span<const diversity::DiversityRecord> records);

// largescale = 1 when total assets are strictly above the annual mean.
void derive_largescale(std::vector<PanelObservation>& panel);

DataTable to_table(std::span<const PanelObservation> panel);

void write_panel_csv(const std::filesystem::path& path,
                     std::span<const PanelObservation> panel);
std::vector<PanelObservation> read_panel_csv(const std::filesystem::path& path);

}  // namespace topicdiv::panel
