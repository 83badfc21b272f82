#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace topicdiv::diversity {

struct DiversityRecord {
  std::string firm_id;
  int year = 0;
  double gini = 0.0;
  double entropy = 0.0;
};

// 1 - sum p^2. Requires a probability vector (sum within 1e-6 of 1).
double gini_simpson(std::span<const double> theta);

// -sum p ln p, natural log, 0 ln 0 = 0.
double shannon_entropy(std::span<const double> theta);

enum class Metric { gini, entropy };

struct AnnualBoxStats {
  int year = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
  int n = 0;
};

// Per-year box statistics (type-7 quantiles, 1.5 IQR whiskers clamped to the
// most extreme in-fence observation), years ascending.
std::vector<AnnualBoxStats> annual_box_stats(std::span<const DiversityRecord> records,
                                             Metric metric);

void write_diversity_csv(const std::filesystem::path& path,
                         std::span<const DiversityRecord> records);
std::vector<DiversityRecord> read_diversity_csv(const std::filesystem::path& path);

}  // namespace topicdiv::diversity
