#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace hitlbo::detail {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

// Box-constrained Nelder-Mead minimizer. Trial points are clamped into
// [lower, upper]. The starting point is always evaluated, so the returned
// value never exceeds f(x0).
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, double step,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 int max_evaluations, double ftol = 1e-10) {
  const auto dim = x0.size();
  SimplexResult result;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  auto clamp = [&](Eigen::VectorXd x) { return x.cwiseMax(lower).cwiseMin(upper).eval(); };

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.push_back(clamp(x0));
  vals.push_back(eval(pts[0]));
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd p = pts[0];
    // Step inward when the start sits on the upper bound.
    p[i] = (p[i] + step <= upper[i]) ? p[i] + step : p[i] - step;
    pts.push_back(clamp(p));
    vals.push_back(eval(pts.back()));
  }

  std::vector<std::size_t> order(pts.size());
  while (result.evaluations < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(),
                      second = order[order.size() - 2];
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= ftol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected = clamp(centroid + (centroid - pts[worst]));
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      const Eigen::VectorXd expanded = clamp(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd contracted =
        outside ? clamp(centroid + 0.5 * (reflected - centroid))
                : clamp(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = clamp(pts[best] + 0.5 * (pts[k] - pts[best]));
      vals[k] = eval(pts[k]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  result.x = pts[static_cast<std::size_t>(it - vals.begin())];
  result.value = *it;
  return result;
}

}  // namespace hitlbo::detail
