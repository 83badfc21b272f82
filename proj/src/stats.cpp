#include "topicdiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace topicdiv::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(n - 1);
}

double stdev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> xs, double p) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

double interquartile_range(std::span<const double> xs) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

double silverman_bandwidth(std::span<const double> xs, double floor_value) {
  if (xs.size() < 2) throw std::invalid_argument("silverman_bandwidth: need at least two values");
  const double sd = stdev(xs);
  const double iqr = interquartile_range(xs);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
  return std::max(h, floor_value);
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_two_sided_p: dof must be positive");
  if (!std::isfinite(t)) return std::isnan(t) ? std::nan("") : 0.0;
  boost::math::students_t_distribution<double> dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double chi_squared_upper_p(double x, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("chi_squared_upper_p: k must be positive");
  if (!std::isfinite(x)) return std::isnan(x) ? std::nan("") : 0.0;
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared_distribution<double> dist(k);
  return boost::math::cdf(boost::math::complement(dist, x));
}

}  // namespace topicdiv::stats
