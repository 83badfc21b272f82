#include "topicdiv/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "topicdiv/csv.hpp"
#include "topicdiv/stats.hpp"

namespace topicdiv::diversity {

namespace {

void check_probability_vector(std::span<const double> theta, const char* who) {
  if (theta.empty()) throw std::invalid_argument(std::string(who) + ": empty distribution");
  double total = 0.0;
  for (double p : theta) {
    if (!(p >= -1e-12) || !std::isfinite(p)) {
      throw std::invalid_argument(std::string(who) + ": negative or non-finite probability");
    }
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(who) + ": probabilities sum to " +
                                csv::format_double(total) + ", not 1");
  }
}

}  // namespace

double gini_simpson(std::span<const double> theta) {
  check_probability_vector(theta, "gini_simpson");
  double ss = 0.0;
  for (double p : theta) ss += p * p;
  return 1.0 - ss;
}

double shannon_entropy(std::span<const double> theta) {
  check_probability_vector(theta, "shannon_entropy");
  double h = 0.0;
  for (double p : theta) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<AnnualBoxStats> annual_box_stats(std::span<const DiversityRecord> records,
                                             Metric metric) {
  if (records.empty()) throw std::invalid_argument("annual_box_stats: no records");
  std::map<int, std::vector<double>> by_year;
  for (const DiversityRecord& r : records) {
    by_year[r.year].push_back(metric == Metric::gini ? r.gini : r.entropy);
  }

  std::vector<AnnualBoxStats> out;
  out.reserve(by_year.size());
  for (auto& [year, values] : by_year) {
    std::sort(values.begin(), values.end());
    AnnualBoxStats s;
    s.year = year;
    s.n = static_cast<int>(values.size());
    s.q1 = stats::quantile_sorted(values, 0.25);
    s.median = stats::quantile_sorted(values, 0.5);
    s.q3 = stats::quantile_sorted(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double fence_lo = s.q1 - 1.5 * iqr;
    const double fence_hi = s.q3 + 1.5 * iqr;
    s.whisker_lo = s.q1;
    s.whisker_hi = s.q3;
    for (double v : values) {
      if (v >= fence_lo) {
        s.whisker_lo = v;  // first in-fence value in ascending order
        break;
      }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
      if (*it <= fence_hi) {
        s.whisker_hi = *it;
        break;
      }
    }
    for (double v : values) {
      if (v < fence_lo || v > fence_hi) s.outliers.push_back(v);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_diversity_csv(const std::filesystem::path& path,
                         std::span<const DiversityRecord> records) {
  csv::Writer w(path);
  w.field("firm_id").field("year").field("gini").field("entropy");
  w.end_row();
  for (const DiversityRecord& r : records) {
    w.field(r.firm_id).field(static_cast<long long>(r.year)).field(r.gini).field(r.entropy);
    w.end_row();
  }
}

std::vector<DiversityRecord> read_diversity_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::string ctx = path.string();
  const int c_firm = t.require_col("firm_id", ctx);
  const int c_year = t.require_col("year", ctx);
  const int c_gini = t.require_col("gini", ctx);
  const int c_ent = t.require_col("entropy", ctx);
  std::vector<DiversityRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    DiversityRecord r;
    r.firm_id = row[static_cast<std::size_t>(c_firm)];
    r.year = static_cast<int>(csv::parse_int(row[static_cast<std::size_t>(c_year)], ctx));
    r.gini = csv::parse_double(row[static_cast<std::size_t>(c_gini)], ctx);
    r.entropy = csv::parse_double(row[static_cast<std::size_t>(c_ent)], ctx);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace topicdiv::diversity
