#include "hitlbo/pareto.hpp"

#include <algorithm>
#include <numeric>

namespace hitlbo::pareto {

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return a.f1 >= b.f1 && a.f2 >= b.f2 && (a.f1 > b.f1 || a.f2 > b.f2);
}

std::vector<std::size_t> nondominated(std::span<const ObjectivePoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].f1 != points[b].f1) return points[a].f1 > points[b].f1;
    return points[a].f2 > points[b].f2;
  });

  std::vector<std::size_t> keep;
  bool have_prev = false;
  double best_f2 = 0.0;  // best f2 among strictly larger f1
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].f1 == points[order[g]].f1) ++end;
    const double group_max = points[order[g]].f2;
    if (!have_prev || best_f2 < group_max) {
      for (std::size_t k = g; k < end && points[order[k]].f2 == group_max; ++k) {
        keep.push_back(order[k]);
      }
    }
    best_f2 = have_prev ? std::max(best_f2, group_max) : group_max;
    have_prev = true;
    g = end;
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::vector<std::size_t>> nondominated_layers(std::span<const ObjectivePoint> points) {
  std::vector<std::vector<std::size_t>> layers;
  std::vector<std::size_t> remaining(points.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  while (!remaining.empty()) {
    std::vector<ObjectivePoint> sub;
    sub.reserve(remaining.size());
    for (auto i : remaining) sub.push_back(points[i]);
    const auto front = nondominated(sub);
    std::vector<std::size_t> layer, rest;
    std::size_t f = 0;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      if (f < front.size() && front[f] == k) {
        layer.push_back(remaining[k]);
        ++f;
      } else {
        rest.push_back(remaining[k]);
      }
    }
    layers.push_back(std::move(layer));
    remaining = std::move(rest);
  }
  return layers;
}

double hypervolume_2d(std::span<const ObjectivePoint> points, const ObjectivePoint& ref) {
  std::vector<ObjectivePoint> pts;
  pts.reserve(points.size());
  for (const auto& p : points) {
    if (p.f1 > ref.f1 && p.f2 > ref.f2) pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.f2 > b.f2;
  });
  // Sweep from the largest f1: each point adds a strip of width (f1 - ref)
  // above the highest f2 seen so far.
  double area = 0.0;
  double top = ref.f2;
  for (const auto& p : pts) {
    if (p.f2 > top) {
      area += (p.f1 - ref.f1) * (p.f2 - top);
      top = p.f2;
    }
  }
  return area;
}

void greedy_extend(std::span<const ObjectivePoint> points, const ObjectivePoint& ref,
                   std::span<const std::size_t> pool, std::size_t count,
                   std::vector<std::size_t>& selected) {
  std::vector<ObjectivePoint> chosen;
  chosen.reserve(selected.size() + count);
  for (auto i : selected) chosen.push_back(points[i]);
  std::vector<char> used(points.size(), 0);
  for (auto i : selected) used[i] = 1;

  std::vector<std::size_t> candidates(pool.begin(), pool.end());
  std::sort(candidates.begin(), candidates.end());

  for (std::size_t step = 0; step < count; ++step) {
    const double base = hypervolume_2d(chosen, ref);
    // Gains equal up to rounding count as ties, which go to the lowest index.
    const double tol = 1e-12 * std::max(1.0, base);
    bool found = false;
    std::size_t best = 0;
    double best_gain = 0.0;
    for (auto i : candidates) {
      if (used[i]) continue;
      chosen.push_back(points[i]);
      const double gain = hypervolume_2d(chosen, ref) - base;
      chosen.pop_back();
      if (!found || gain > best_gain + tol) {
        found = true;
        best = i;
        best_gain = gain;
      }
    }
    if (!found) return;
    used[best] = 1;
    selected.push_back(best);
    chosen.push_back(points[best]);
  }
}

std::vector<std::size_t> greedy_hv_subset(std::span<const ObjectivePoint> points,
                                          const ObjectivePoint& ref, std::size_t q) {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> selected;
  greedy_extend(points, ref, all, std::min(q, points.size()), selected);
  return selected;
}

ParetoFront::ParetoFront(std::span<const ObjectivePoint> points, ObjectivePoint ref) : ref_(ref) {
  for (auto i : nondominated(points)) points_.push_back(points[i]);
  sort();
}

bool ParetoFront::insert(const ObjectivePoint& p) {
  for (const auto& q : points_) {
    if (dominates(q, p)) return false;
  }
  std::erase_if(points_, [&](const ObjectivePoint& q) { return dominates(p, q); });
  points_.push_back(p);
  sort();
  return true;
}

void ParetoFront::sort() {
  std::sort(points_.begin(), points_.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.f1 != b.f1) return a.f1 < b.f1;
    return a.f2 > b.f2;
  });
}

}  // namespace hitlbo::pareto
