#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hitlbo {

inline constexpr std::size_t kNumParams = 5;

// Point of the normalized input cube [0,1]^5.
using UnitPoint = std::array<double, kNumParams>;

// One photonic-curing setting, in parameter units, ordered as the space.
struct ProcessCondition {
  std::array<double, kNumParams> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const ProcessCondition&, const ProcessCondition&) = default;
};

std::string to_string(const ProcessCondition& c);

struct ParameterSpec {
  std::string name;
  std::string unit;
  double min = 0.0;
  double max = 1.0;
  double step = 1.0;

  // Number of grid values, round((max - min) / step) + 1.
  std::size_t step_count() const;

  // Throws ValidationError unless max > min, step > 0, the range is an
  // integer multiple of the step and there are at least two grid values.
  void validate() const;

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

struct ParameterSpace {
  std::array<ParameterSpec, kNumParams> params;

  void validate() const;

  // Radiant energy, pulse count, pulse length, micropulse count, duty cycle
  // with the LHS ranges and steps used for the initial design.
  static ParameterSpace photonic_curing();

  friend bool operator==(const ParameterSpace&, const ParameterSpace&) = default;
};

// Per-parameter grid step used for candidate enumeration.
using Refinement = std::array<double, kNumParams>;

namespace design {

// Steps of the space itself (the LHS grid).
Refinement native_steps(const ParameterSpace& space);

// Finer acquisition grid: 0.1 J/cm^2, 1 pulse, 1 ms, 1 micropulse, 1 %.
Refinement fine_refinement();

// Product of per-parameter step counts.
std::uint64_t grid_size(const ParameterSpace& space);
std::uint64_t grid_size(const ParameterSpace& space, const Refinement& steps);

// Throws RangeError when a component lies outside its [min, max].
UnitPoint normalize(const ProcessCondition& c, const ParameterSpace& space);
ProcessCondition denormalize(const UnitPoint& u, const ParameterSpace& space);

void check_in_bounds(const ProcessCondition& c, const ParameterSpace& space);

// Nearest grid value per component; exact halves round away from the lower
// bound. Out-of-range values are clamped first.
ProcessCondition snap_to_grid(const ProcessCondition& c, const ParameterSpace& space,
                              const Refinement& steps);
bool is_on_grid(const ProcessCondition& c, const ParameterSpace& space,
                const Refinement& steps);

// Integer key used for set membership of conditions (micro-unit resolution).
using ConditionKey = std::array<std::int64_t, kNumParams>;
ConditionKey key_of(const ProcessCondition& c);
using ConditionSet = std::set<ConditionKey>;

struct LhsDesign {
  std::vector<UnitPoint> unit_points;         // pre-snap, one per stratum row
  std::vector<ProcessCondition> conditions;   // snapped onto the space grid
};

// Latin hypercube design of n points; deterministic per seed. Rows whose
// snapped 5-tuple duplicates an earlier row are redrawn inside their strata.
LhsDesign lhs_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed);
std::vector<ProcessCondition> lhs_sample(const ParameterSpace& space, std::size_t n,
                                         std::uint64_t seed);

// Mixed-radix view of a (possibly refined) grid. Index 0 is the minimum
// corner; the last parameter varies fastest.
class CandidateGrid {
 public:
  CandidateGrid(const ParameterSpace& space, const Refinement& steps);

  std::uint64_t size() const { return size_; }
  ProcessCondition at(std::uint64_t index) const;
  const ParameterSpace& space() const { return space_; }
  const Refinement& steps() const { return steps_; }

 private:
  ParameterSpace space_;
  Refinement steps_;
  std::array<std::uint64_t, kNumParams> counts_{};
  std::uint64_t size_ = 0;
};

// Chunked, stable-order walk over a grid that skips excluded conditions.
class CandidateStream {
 public:
  CandidateStream(CandidateGrid grid, ConditionSet exclude);

  // Up to max_count further candidates; empty once exhausted.
  std::vector<ProcessCondition> next_chunk(std::size_t max_count);
  bool done() const { return cursor_ >= grid_.size(); }

  // Restricts the walk to grid indices [begin, end) for partitioned
  // consumption.
  CandidateStream& restrict_to(std::uint64_t begin, std::uint64_t end);

 private:
  CandidateGrid grid_;
  ConditionSet exclude_;
  std::uint64_t cursor_ = 0;
  std::uint64_t end_ = 0;
};

// Throws ValidationError when a refinement step does not divide its range.
CandidateStream enumerate_candidates(const ParameterSpace& space, const Refinement& steps,
                                     ConditionSet exclude);

// Up to `count` distinct non-excluded grid points, returned in grid-index
// order. When the admissible grid is not larger than `count` every point is
// returned.
std::vector<ProcessCondition> sample_candidates(const CandidateGrid& grid, std::size_t count,
                                                std::uint64_t seed,
                                                const ConditionSet& exclude);

}  // namespace design
}  // namespace hitlbo
