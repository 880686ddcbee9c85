#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hitlbo/pareto.hpp"
#include "hitlbo/rng.hpp"
#include "oracles.hpp"

using namespace hitlbo;
using pareto::ObjectivePoint;

namespace {

std::vector<ObjectivePoint> random_points(Rng& rng, std::size_t n, bool lattice) {
  std::vector<ObjectivePoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    if (lattice) {
      pts.push_back({static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6))});
    } else {
      pts.push_back({rng.uniform(0.5, 3.5), rng.uniform(-0.5, 6.0)});
    }
  }
  return pts;
}

std::vector<oracle::Pt> to_oracle(const std::vector<ObjectivePoint>& pts) {
  std::vector<oracle::Pt> out;
  for (const auto& p : pts) out.push_back({p.f1, p.f2});
  return out;
}

}  // namespace

TEST(Dominance, Basics) {
  EXPECT_TRUE(pareto::dominates({2, 2}, {1, 2}));
  EXPECT_TRUE(pareto::dominates({2, 3}, {1, 2}));
  EXPECT_FALSE(pareto::dominates({2, 2}, {2, 2}));
  EXPECT_FALSE(pareto::dominates({3, 1}, {1, 3}));
}

TEST(Nondominated, MatchesPairwiseOracle) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const auto pts = random_points(rng, 1 + rng.below(40), t % 2 == 0);
    EXPECT_EQ(pareto::nondominated(pts), oracle::nondominated(to_oracle(pts)));
  }
}

TEST(Nondominated, Edges) {
  EXPECT_TRUE(pareto::nondominated(std::vector<ObjectivePoint>{}).empty());
  const std::vector<ObjectivePoint> dup = {{1, 1}, {1, 1}, {0, 0}};
  EXPECT_EQ(pareto::nondominated(dup), (std::vector<std::size_t>{0, 1}));
}

TEST(Layers, PartitionAndPeel) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto pts = random_points(rng, 1 + rng.below(30), t % 3 == 0);
    const auto layers = pareto::nondominated_layers(pts);
    std::vector<std::size_t> remaining(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) remaining[i] = i;
    std::size_t total = 0;
    for (const auto& layer : layers) {
      std::vector<oracle::Pt> sub;
      for (auto i : remaining) sub.push_back({pts[i].f1, pts[i].f2});
      std::vector<std::size_t> expected;
      for (auto j : oracle::nondominated(sub)) expected.push_back(remaining[j]);
      auto sorted = layer;
      std::sort(sorted.begin(), sorted.end());
      EXPECT_EQ(sorted, expected);
      std::erase_if(remaining, [&](std::size_t i) { return std::find(layer.begin(), layer.end(), i) != layer.end(); });
      total += layer.size();
    }
    EXPECT_EQ(total, pts.size());
  }
}

TEST(Hypervolume, MatchesGridIntegration) {
  Rng rng(3);
  const ObjectivePoint ref{1.0, 0.0};
  for (int t = 0; t < 300; ++t) {
    const auto pts = random_points(rng, rng.below(25), t % 4 == 0);
    const double hv = pareto::hypervolume_2d(pts, ref);
    const double expected = oracle::grid_hypervolume(to_oracle(pts), {ref.f1, ref.f2});
    EXPECT_NEAR(hv, expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Hypervolume, ClippingAndSpotValues) {
  const ObjectivePoint ref{1.0, 0.0};
  EXPECT_DOUBLE_EQ(pareto::hypervolume_2d(std::vector<ObjectivePoint>{}, ref), 0.0);
  EXPECT_DOUBLE_EQ(pareto::hypervolume_2d(std::vector<ObjectivePoint>{{0.5, 3.0}}, ref), 0.0);
  EXPECT_DOUBLE_EQ(pareto::hypervolume_2d(std::vector<ObjectivePoint>{{2.0, 3.0}}, ref), 3.0);
  EXPECT_DOUBLE_EQ(pareto::hypervolume_2d(std::vector<ObjectivePoint>{{2.0, 3.0}, {3.0, 1.0}}, ref), 4.0);
  // A dominated point adds nothing.
  EXPECT_DOUBLE_EQ(pareto::hypervolume_2d(std::vector<ObjectivePoint>{{2.0, 3.0}, {1.5, 2.0}}, ref), 3.0);
}

TEST(Hypervolume, MonotoneUnderAddition) {
  Rng rng(4);
  const ObjectivePoint ref{1.0, 0.0};
  for (int t = 0; t < 100; ++t) {
    std::vector<ObjectivePoint> pts;
    double prev = 0.0;
    for (int k = 0; k < 20; ++k) {
      pts.push_back({rng.uniform(0.0, 4.0), rng.uniform(-1.0, 6.0)});
      const double hv = pareto::hypervolume_2d(pts, ref);
      EXPECT_GE(hv, prev - 1e-12);
      prev = hv;
    }
  }
}

TEST(Greedy, SinglePickIsBestBox) {
  Rng rng(5);
  const ObjectivePoint ref{1.0, 0.0};
  for (int t = 0; t < 100; ++t) {
    const auto pts = random_points(rng, 1 + rng.below(50), false);
    std::size_t best = 0;
    double best_area = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double area = std::max(0.0, pts[i].f1 - ref.f1) * std::max(0.0, pts[i].f2 - ref.f2);
      if (area > best_area) {
        best_area = area;
        best = i;
      }
    }
    const auto pick = pareto::greedy_hv_subset(pts, ref, 1);
    ASSERT_EQ(pick.size(), 1u);
    EXPECT_EQ(pick[0], best);
  }
}

TEST(Greedy, MatchesIndependentGreedy) {
  Rng rng(6);
  const ObjectivePoint ref{1.0, 0.0};
  for (int t = 0; t < 100; ++t) {
    const auto pts = random_points(rng, 1 + rng.below(30), t % 3 == 0);
    const std::size_t q = 1 + rng.below(6);
    std::vector<std::size_t> all(pts.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto expected = oracle::exhaustive_greedy(to_oracle(pts), {ref.f1, ref.f2}, all, std::min(q, pts.size()), {});
    EXPECT_EQ(pareto::greedy_hv_subset(pts, ref, q), expected);
  }
}

TEST(Greedy, NeverWorseThanHalfOfBestSubsetOnSmallSets) {
  Rng rng(7);
  const ObjectivePoint ref{1.0, 0.0};
  for (int t = 0; t < 50; ++t) {
    const auto pts = random_points(rng, 8, false);
    const std::size_t q = 3;
    double best = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b)
        for (std::size_t c = b + 1; c < pts.size(); ++c) {
          const std::vector<ObjectivePoint> s = {pts[a], pts[b], pts[c]};
          best = std::max(best, pareto::hypervolume_2d(s, ref));
        }
    std::vector<ObjectivePoint> chosen;
    for (auto i : pareto::greedy_hv_subset(pts, ref, q)) chosen.push_back(pts[i]);
    // Greedy hypervolume is (1 - 1/e)-optimal for a monotone submodular set function.
    EXPECT_GE(pareto::hypervolume_2d(chosen, ref), (1.0 - 1.0 / std::exp(1.0)) * best - 1e-12);
  }
}

TEST(ParetoFront, InsertKeepsFrontSorted) {
  pareto::ParetoFront front({1.0, 0.0});
  EXPECT_TRUE(front.insert({2.0, 3.0}));
  EXPECT_TRUE(front.insert({3.0, 1.0}));
  EXPECT_FALSE(front.insert({1.5, 2.0}));
  EXPECT_TRUE(front.insert({2.5, 3.5}));  // dominates (2, 3)
  ASSERT_EQ(front.points().size(), 2u);
  EXPECT_EQ(front.points()[0], (ObjectivePoint{2.5, 3.5}));
  EXPECT_EQ(front.points()[1], (ObjectivePoint{3.0, 1.0}));
  EXPECT_DOUBLE_EQ(front.hypervolume(), 1.5 * 3.5 + 0.5 * 1.0);
}
