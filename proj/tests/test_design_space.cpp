#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hitlbo/design_space.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/rng.hpp"

using namespace hitlbo;

namespace {

const ParameterSpace kSpace = ParameterSpace::photonic_curing();

ProcessCondition cond(double a, double b, double c, double d, double e) { return {{a, b, c, d, e}}; }

}  // namespace

TEST(ParameterSpace, PhotonicCuringRanges) {
  EXPECT_NO_THROW(kSpace.validate());
  EXPECT_EQ(kSpace.params[0].step_count(), 31u);
  EXPECT_EQ(kSpace.params[4].step_count(), 11u);
  EXPECT_EQ(design::grid_size(kSpace), 4092000u);
  EXPECT_EQ(design::grid_size(kSpace, design::fine_refinement()), 61u * 20 * 20 * 30 * 51);
}

TEST(ParameterSpace, RejectsInconsistentSpecs) {
  ParameterSpec bad{"x", "", 1.0, 1.0, 0.5};
  EXPECT_THROW(bad.validate(), ValidationError);
  ParameterSpec uneven{"x", "", 0.0, 1.0, 0.3};
  EXPECT_THROW(uneven.validate(), ValidationError);
  ParameterSpec zero_step{"x", "", 0.0, 1.0, 0.0};
  EXPECT_THROW(zero_step.validate(), ValidationError);
}

TEST(Normalize, KnownCondition) {
  const auto u = design::normalize(cond(4.5, 16, 7, 23, 70), kSpace);
  EXPECT_NEAR(u[0], 0.583333333333, 1e-9);
  EXPECT_NEAR(u[1], 0.789473684211, 1e-9);
  EXPECT_NEAR(u[2], 0.315789473684, 1e-9);
  EXPECT_NEAR(u[3], 0.758620689655, 1e-9);
  EXPECT_DOUBLE_EQ(u[4], 1.0);
}

TEST(Normalize, OutOfRangeThrows) {
  EXPECT_THROW(design::normalize(cond(7.2, 1, 1, 1, 20), kSpace), RangeError);
  EXPECT_THROW(design::normalize(cond(1, 0, 1, 1, 20), kSpace), RangeError);
  EXPECT_THROW(design::check_in_bounds(cond(1, 1, 1, 1, 71), kSpace), RangeError);
}

TEST(Normalize, RoundTripProperty) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    UnitPoint u;
    for (auto& v : u) v = rng.uniform();
    const auto back = design::normalize(design::denormalize(u, kSpace), kSpace);
    for (std::size_t i = 0; i < kNumParams; ++i) EXPECT_NEAR(back[i], u[i], 1e-12);
  }
}

TEST(SnapToGrid, NearestAndHalfRule) {
  const auto s = design::snap_to_grid(cond(1.29, 2.4, 3.6, 30.0, 22.5), kSpace, design::native_steps(kSpace));
  EXPECT_DOUBLE_EQ(s[0], 1.2);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_DOUBLE_EQ(s[2], 4.0);
  EXPECT_DOUBLE_EQ(s[3], 30.0);
  EXPECT_DOUBLE_EQ(s[4], 25.0);  // exact half goes up
  EXPECT_TRUE(design::is_on_grid(s, kSpace, design::native_steps(kSpace)));
  EXPECT_FALSE(design::is_on_grid(cond(1.3, 2, 4, 30, 25), kSpace, design::native_steps(kSpace)));
  EXPECT_TRUE(design::is_on_grid(cond(1.3, 2, 4, 30, 26), kSpace, design::fine_refinement()));
  const auto clamped = design::snap_to_grid(cond(0.0, 25, -3, 31, 90), kSpace, design::native_steps(kSpace));
  EXPECT_EQ(clamped, cond(1, 20, 1, 30, 70));
}

TEST(Lhs, StratifiedOnGridUniqueAndDeterministic) {
  for (std::size_t n : {2u, 5u, 30u, 64u}) {
    const auto d = design::lhs_design(kSpace, n, 7);
    ASSERT_EQ(d.conditions.size(), n);
    ASSERT_EQ(d.unit_points.size(), n);
    for (std::size_t dim = 0; dim < kNumParams; ++dim) {
      std::vector<int> hits(n, 0);
      for (const auto& u : d.unit_points) {
        const auto s = std::min<std::size_t>(static_cast<std::size_t>(u[dim] * n), n - 1);
        ++hits[s];
      }
      for (int h : hits) EXPECT_EQ(h, 1) << "dimension " << dim << " n " << n;
    }
    std::set<design::ConditionKey> keys;
    for (const auto& c : d.conditions) {
      EXPECT_TRUE(design::is_on_grid(c, kSpace, design::native_steps(kSpace)));
      keys.insert(design::key_of(c));
    }
    EXPECT_EQ(keys.size(), n);
    EXPECT_EQ(design::lhs_sample(kSpace, n, 7), d.conditions);
  }
  EXPECT_NE(design::lhs_sample(kSpace, 30, 7), design::lhs_sample(kSpace, 30, 8));
}

TEST(Lhs, TooManyPointsForTinyGrid) {
  ParameterSpace tiny = kSpace;
  for (auto& p : tiny.params) {
    p.min = 0;
    p.max = 1;
    p.step = 1;
  }
  EXPECT_NO_THROW(design::lhs_sample(tiny, 2, 1));
  EXPECT_THROW(design::lhs_sample(tiny, 40, 1), ValidationError);
}

TEST(CandidateGrid, CornersAndOrder) {
  const design::CandidateGrid grid(kSpace, design::native_steps(kSpace));
  EXPECT_EQ(grid.size(), 4092000u);
  EXPECT_EQ(grid.at(0), cond(1, 1, 1, 1, 20));
  EXPECT_EQ(grid.at(grid.size() - 1), cond(7, 20, 20, 30, 70));
  EXPECT_EQ(grid.at(1), cond(1, 1, 1, 1, 25));  // last parameter fastest
  EXPECT_EQ(grid.at(11), cond(1, 1, 1, 2, 20));
  Refinement bad = design::native_steps(kSpace);
  bad[0] = 0.35;
  EXPECT_THROW(design::CandidateGrid(kSpace, bad), ValidationError);
}

TEST(CandidateStream, ExcludesAndPartitions) {
  ParameterSpace small = kSpace;
  small.params[0] = {"radiant_energy", "J/cm2", 1.0, 2.0, 0.5};
  small.params[1] = {"pulse_count", "count", 1.0, 3.0, 1.0};
  small.params[2] = {"pulse_length", "ms", 1.0, 2.0, 1.0};
  small.params[3] = {"micropulse_count", "count", 1.0, 2.0, 1.0};
  small.params[4] = {"duty_cycle", "%", 20.0, 30.0, 5.0};
  const design::CandidateGrid grid(small, design::native_steps(small));
  ASSERT_EQ(grid.size(), 3u * 3 * 2 * 2 * 3);
  design::ConditionSet exclude{design::key_of(grid.at(0)), design::key_of(grid.at(17))};
  auto stream = design::enumerate_candidates(small, design::native_steps(small), exclude);
  std::vector<ProcessCondition> all;
  while (!stream.done()) {
    auto chunk = stream.next_chunk(7);
    all.insert(all.end(), chunk.begin(), chunk.end());
  }
  EXPECT_EQ(all.size(), grid.size() - 2);
  EXPECT_TRUE(std::none_of(all.begin(), all.end(), [&](const ProcessCondition& c) {
    return exclude.contains(design::key_of(c));
  }));

  std::vector<ProcessCondition> parts;
  for (std::uint64_t b = 0; b < grid.size(); b += 20) {
    design::CandidateStream s(grid, exclude);
    s.restrict_to(b, std::min<std::uint64_t>(b + 20, grid.size()));
    while (!s.done()) {
      auto chunk = s.next_chunk(100);
      parts.insert(parts.end(), chunk.begin(), chunk.end());
    }
  }
  EXPECT_EQ(parts, all);
}

TEST(SampleCandidates, DistinctSortedAndExcluding) {
  const design::CandidateGrid grid(kSpace, design::fine_refinement());
  design::ConditionSet exclude;
  for (const auto& c : design::lhs_sample(kSpace, 30, 3)) exclude.insert(design::key_of(c));
  const auto pool = design::sample_candidates(grid, 2000, 99, exclude);
  ASSERT_EQ(pool.size(), 2000u);
  std::set<design::ConditionKey> keys;
  for (const auto& c : pool) {
    EXPECT_TRUE(design::is_on_grid(c, kSpace, design::fine_refinement()));
    EXPECT_FALSE(exclude.contains(design::key_of(c)));
    keys.insert(design::key_of(c));
  }
  EXPECT_EQ(keys.size(), pool.size());
  EXPECT_EQ(pool, design::sample_candidates(grid, 2000, 99, exclude));
}

TEST(SampleCandidates, SmallGridReturnsEverythingAdmissible) {
  ParameterSpace small = kSpace;
  small.params[0] = {"radiant_energy", "J/cm2", 1.0, 2.0, 1.0};
  small.params[1] = {"pulse_count", "count", 1.0, 2.0, 1.0};
  small.params[2] = {"pulse_length", "ms", 1.0, 2.0, 1.0};
  small.params[3] = {"micropulse_count", "count", 1.0, 2.0, 1.0};
  small.params[4] = {"duty_cycle", "%", 20.0, 25.0, 5.0};
  const design::CandidateGrid grid(small, design::native_steps(small));
  design::ConditionSet exclude{design::key_of(grid.at(3))};
  EXPECT_EQ(design::sample_candidates(grid, 100, 1, exclude).size(), 31u);
  EXPECT_EQ(design::sample_candidates(grid, 10, 1, exclude).size(), 10u);
}
