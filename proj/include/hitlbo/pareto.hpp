#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hitlbo::pareto {

// Bi-objective value; both components are maximized.
struct ObjectivePoint {
  double f1 = 0.0;  // C-f dispersion ratio
  double f2 = 0.0;  // |log10 leakage|

  friend bool operator==(const ObjectivePoint&, const ObjectivePoint&) = default;
};

// a >= b in both components and > in at least one.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b);

// Indices (ascending) of the maximal elements. Exact duplicates of a maximal
// point are all kept.
std::vector<std::size_t> nondominated(std::span<const ObjectivePoint> points);

// Successive nondominated layers; layer k is the front of what remains
// after removing layers 0..k-1.
std::vector<std::vector<std::size_t>> nondominated_layers(std::span<const ObjectivePoint> points);

// Area dominated by `points` above `ref`. Components at or below the
// reference are clipped, so such points add nothing.
double hypervolume_2d(std::span<const ObjectivePoint> points, const ObjectivePoint& ref);

// Greedy hypervolume-maximizing selection of min(q, |points|) indices.
// Each step takes the largest marginal gain; ties go to the lowest index.
std::vector<std::size_t> greedy_hv_subset(std::span<const ObjectivePoint> points,
                                          const ObjectivePoint& ref, std::size_t q);

// Greedy continuation: extends `selected` with up to `count` indices drawn
// from `pool` (indices into `points`).
void greedy_extend(std::span<const ObjectivePoint> points, const ObjectivePoint& ref,
                   std::span<const std::size_t> pool, std::size_t count,
                   std::vector<std::size_t>& selected);

// Nondominated set with its reference point. Points are kept sorted by
// ascending f1 (hence strictly descending f2 once duplicates are merged).
class ParetoFront {
 public:
  explicit ParetoFront(ObjectivePoint ref = {1.0, 0.0}) : ref_(ref) {}
  ParetoFront(std::span<const ObjectivePoint> points, ObjectivePoint ref);

  const std::vector<ObjectivePoint>& points() const { return points_; }
  const ObjectivePoint& ref() const { return ref_; }
  double hypervolume() const { return hypervolume_2d(points_, ref_); }

  // Adds `p` and drops anything it dominates. Returns false when `p` is
  // itself dominated (front unchanged).
  bool insert(const ObjectivePoint& p);

 private:
  void sort();
  std::vector<ObjectivePoint> points_;
  ObjectivePoint ref_;
};

}  // namespace hitlbo::pareto
