#pragma once

#include <span>
#include <vector>

namespace hitlbo::stats {

double mean(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks (ties share their mean rank).
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> v);

// Ordinary least squares y = slope * x + intercept.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace hitlbo::stats
