#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "topicdiv/diversity.hpp"
#include "topicdiv/iv.hpp"
#include "topicdiv/placebo.hpp"
#include "topicdiv/regression.hpp"

namespace topicdiv::report {

enum class TableStyle { text, csv };

// p < 0.01 -> ***, p < 0.05 -> **, p < 0.10 -> *.
std::string stars(double p);

// Coefficient table. CSV rows: name,estimate,cluster_se,stars. The text
// style adds observation counts, cluster counts, adjusted R-squared and the
// absorbed fixed-effect dimensions.
void emit_table(const est::RegressionResult& result, TableStyle style,
                const std::filesystem::path& path, const std::string& title);

// Both stages plus the identification diagnostics block.
void emit_iv_table(const est::TslsResult& result, TableStyle style,
                   const std::filesystem::path& path, const std::string& title);

// Annual box-and-whisker figure; stats must be nonempty.
void emit_boxplot_svg(std::span<const diversity::AnnualBoxStats> stats,
                      const std::filesystem::path& path, const std::string& metric_label);

// Placebo density: KDE curve (right axis), per-rep p-value dots (left axis),
// solid vertical line at the baseline coefficient, dashed horizontal line at
// p = 0.10. Errors when no successful reps exist.
void emit_density_svg(const est::PlaceboDistribution& dist,
                      const std::filesystem::path& path, const std::string& title);

}  // namespace topicdiv::report
