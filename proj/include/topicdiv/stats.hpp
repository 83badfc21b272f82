#pragma once

#include <span>
#include <vector>

namespace topicdiv::stats {

double mean(std::span<const double> xs);

// Sample variance with Bessel correction; 0 when fewer than two values.
double variance(std::span<const double> xs);

double stdev(std::span<const double> xs);

// Type-7 quantile (linear interpolation) on an ascending-sorted range.
// p in [0, 1]; throws on empty input or p outside [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

// Convenience: copies, sorts, delegates to quantile_sorted.
double quantile(std::span<const double> xs, double p);

double interquartile_range(std::span<const double> xs);

// 0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at floor_value.
double silverman_bandwidth(std::span<const double> xs, double floor_value);

double normal_pdf(double z);

// Two-sided tail probability of Student t with dof degrees of freedom.
double student_t_two_sided_p(double t, double dof);

// Upper tail probability of chi-squared with k degrees of freedom.
double chi_squared_upper_p(double x, double k);

}  // namespace topicdiv::stats
