#include <gtest/gtest.h>

#include <set>

#include "hitlbo/campaign.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/oracle_sim.hpp"

using namespace hitlbo;
using campaign::CampaignConfig;
using campaign::CampaignState;
using campaign::Measurement;
using hitl::ConversionLabel;

namespace {

const ParameterSpace kSpace = ParameterSpace::photonic_curing();

CampaignConfig small_config(std::uint64_t seed = 3) {
  CampaignConfig c;
  c.seed = seed;
  c.pool_size = 512;
  c.gp_restarts = 3;
  return c;
}

// LHS round finished by the synthetic lab.
CampaignState scored_campaign(std::uint64_t seed = 3, std::size_t n_init = 20) {
  auto s = campaign::start_campaign(kSpace, small_config(seed), n_init);
  sim::run_round(s, sim::SyntheticLab{});
  return s;
}

}  // namespace

TEST(Campaign, StartIsDeterministic) {
  const auto a = campaign::start_campaign(kSpace, small_config(), 12);
  const auto b = campaign::start_campaign(kSpace, small_config(), 12);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.rounds.size(), 1u);
  EXPECT_EQ(a.rounds[0].strategy, campaign::RoundStrategy::Lhs);
  EXPECT_EQ(a.rounds[0].status, campaign::RoundStatus::PendingScores);
  EXPECT_EQ(a.observations.size(), 12u);
  EXPECT_NE(a, campaign::start_campaign(kSpace, small_config(4), 12));
}

TEST(Campaign, StartRejectsTinyDesigns) {
  EXPECT_THROW(campaign::start_campaign(kSpace, small_config(), 1), ParameterError);
  auto bad = small_config();
  bad.q = 0;
  EXPECT_THROW(campaign::start_campaign(kSpace, bad, 10), ParameterError);
}

TEST(Campaign, StatusFollowsLabelsAndObjectives) {
  auto s = campaign::start_campaign(kSpace, small_config(), 3);
  const auto ids = s.rounds[0].suggested;
  campaign::score(s, ids[0], ConversionLabel::Burned);
  campaign::score(s, ids[1], ConversionLabel::Unconverted);
  EXPECT_EQ(s.latest_round().status, campaign::RoundStatus::PendingScores);
  campaign::score(s, ids[2], ConversionLabel::Converted);
  EXPECT_EQ(s.latest_round().status, campaign::RoundStatus::PendingObjectives);
  campaign::record_objectives(s, ids[2], {1.5, 0.1}, {4.0, 0.2});
  EXPECT_EQ(s.latest_round().status, campaign::RoundStatus::Complete);
  EXPECT_TRUE(s.observation(ids[2]).functional());
}

TEST(Campaign, UnmeasurableCompletesRound) {
  auto s = campaign::start_campaign(kSpace, small_config(), 2);
  const auto ids = s.rounds[0].suggested;
  campaign::score(s, ids[0], ConversionLabel::PartiallyBurned);
  campaign::score(s, ids[1], ConversionLabel::Burned);
  EXPECT_EQ(s.latest_round().status, campaign::RoundStatus::PendingObjectives);
  campaign::mark_unmeasurable(s, ids[0]);
  EXPECT_EQ(s.latest_round().status, campaign::RoundStatus::Complete);
}

TEST(Campaign, ObjectivesOnFailedFilmRejected) {
  auto s = campaign::start_campaign(kSpace, small_config(), 4);
  const auto id = s.rounds[0].suggested[1];
  campaign::score(s, id, ConversionLabel::Burned);
  const auto before = s;
  EXPECT_THROW(campaign::record_objectives(s, id, {1.5, 0.1}, {4.0, 0.2}), InvariantError);
  EXPECT_EQ(s, before);
  EXPECT_THROW(campaign::score(s, "nope", ConversionLabel::Burned), NotFoundError);
}

TEST(Campaign, RecordResultsIsAllOrNothing) {
  auto s = campaign::start_campaign(kSpace, small_config(), 3);
  const auto ids = s.rounds[0].suggested;
  const auto before = s;
  std::vector<campaign::ResultEntry> entries{
      {ids[0], ConversionLabel::Converted, Measurement{1.4, 0.1}, Measurement{4.1, 0.2}, false},
      {ids[1], ConversionLabel::Burned, Measurement{1.4, 0.1}, Measurement{4.1, 0.2}, false},
  };
  EXPECT_THROW(campaign::record_results(s, 0, entries), InvariantError);
  EXPECT_EQ(s, before);
  entries[1] = {"missing", ConversionLabel::Burned, std::nullopt, std::nullopt, false};
  EXPECT_THROW(campaign::record_results(s, 0, entries), NotFoundError);
  EXPECT_EQ(s, before);
}

TEST(Campaign, ParseMeasurement) {
  EXPECT_EQ(campaign::parse_measurement("1.19±0.08"), (Measurement{1.19, 0.08}));
  EXPECT_EQ(campaign::parse_measurement(" 4.9 +- 0.27 "), (Measurement{4.9, 0.27}));
  EXPECT_EQ(campaign::parse_measurement("2"), (Measurement{2.0, 0.0}));
  EXPECT_THROW(campaign::parse_measurement("abc"), ParseError);
  EXPECT_THROW(campaign::parse_measurement("1±-2"), ParseError);
}

TEST(Campaign, SuggestNeedsCompleteRound) {
  auto s = campaign::start_campaign(kSpace, small_config(), 10);
  EXPECT_THROW(campaign::suggest_round(s), StateError);
}

TEST(Campaign, SuggestNeedsTwoFunctionalPoints) {
  auto s = campaign::start_campaign(kSpace, small_config(), 3);
  for (const auto& id : s.rounds[0].suggested) campaign::score(s, id, ConversionLabel::Burned);
  const auto before = s;
  EXPECT_THROW(campaign::suggest_round(s), StateError);
  EXPECT_EQ(s, before);
}

TEST(Campaign, SuggestRoundShapeAndUniqueness) {
  auto s = scored_campaign();
  const auto& r = campaign::suggest_round(s);
  EXPECT_EQ(r.index, 1u);
  EXPECT_EQ(r.suggested.size(), 5u);
  EXPECT_EQ(r.status, campaign::RoundStatus::PendingScores);
  std::set<design::ConditionKey> keys;
  for (const auto& o : s.observations) keys.insert(design::key_of(o.condition));
  EXPECT_EQ(keys.size(), s.observations.size());
  for (const auto& id : r.suggested) {
    const auto& c = s.observation(id).condition;
    EXPECT_TRUE(design::is_on_grid(c, kSpace, design::fine_refinement()));
  }
  // dispersion, leakage and conversion snapshots for round 1
  std::size_t snaps = 0;
  for (const auto& m : s.model_snapshots) snaps += m.round == 1 ? 1 : 0;
  EXPECT_EQ(snaps, 3u);
  s.validate();
}

TEST(Campaign, SuggestIsDeterministic) {
  auto a = scored_campaign();
  auto b = scored_campaign();
  campaign::suggest_round(a);
  campaign::suggest_round(b);
  EXPECT_EQ(a, b);
}

TEST(Campaign, SuggestOptionsOverride) {
  auto s = scored_campaign();
  campaign::SuggestOptions opt;
  opt.strategy = acq::Strategy::EhviGreedy;
  opt.hitl = false;
  opt.q = 2;
  const auto& r = campaign::suggest_round(s, opt);
  EXPECT_EQ(r.strategy, campaign::RoundStrategy::EhviGreedy);
  EXPECT_FALSE(r.hitl_enabled);
  EXPECT_EQ(r.suggested.size(), 2u);
  std::size_t snaps = 0;
  for (const auto& m : s.model_snapshots) snaps += m.round == 1 ? 1 : 0;
  EXPECT_EQ(snaps, 2u);
  opt.q = 0;
  auto t = scored_campaign();
  EXPECT_THROW(campaign::suggest_round(t, opt), ParameterError);
}

TEST(Campaign, HitlBatchSitsInFeasibleRegion) {
  auto on = scored_campaign(7, 25);
  auto off = on;
  campaign::suggest_round(on, {.strategy = {}, .hitl = true, .q = {}});
  campaign::suggest_round(off, {.strategy = {}, .hitl = false, .q = {}});
  const auto models = campaign::fit_current_models(on);
  ASSERT_TRUE(models.conversion.has_value());
  auto mean_p = [&](const CampaignState& s) {
    std::vector<ProcessCondition> cs;
    for (const auto& id : s.latest_round().suggested) cs.push_back(s.observation(id).condition);
    const auto p = hitl::constraint_map(*models.conversion, cs, 0.2);
    double sum = 0.0;
    for (double v : p) sum += v;
    return sum / static_cast<double>(p.size());
  };
  EXPECT_GT(mean_p(on), mean_p(off));
}

TEST(Campaign, ConvergenceAgainstSnapshots) {
  auto s = scored_campaign();
  campaign::suggest_round(s, {.strategy = {}, .hitl = {}, .q = 2});
  std::vector<gp::SurrogateModel> models;
  for (const auto& m : s.model_snapshots) {
    if (m.round == 1 && m.target != "conversion") models.push_back(campaign::rebuild_snapshot(s, m));
  }
  ASSERT_EQ(models.size(), 2u);
  const auto ids = s.latest_round().suggested;
  std::vector<campaign::ResultEntry> entries;
  for (const auto& id : ids) {
    const auto c = s.observation(id).condition;
    const auto [dm, ds] = models[0].predict(c);
    const auto [lm, ls] = models[1].predict(c);
    entries.push_back({id, ConversionLabel::Converted, Measurement{dm, 0.01}, Measurement{lm, 0.01},
                       false});
  }
  auto exact = s;
  campaign::record_results(exact, 1, entries);
  EXPECT_TRUE(campaign::check_convergence(exact, 1).converged);

  const auto c0 = s.observation(ids[0]).condition;
  const auto [m0, s0] = models[0].predict(c0);
  entries[0].dispersion = Measurement{m0 + 1.5 * s0, 0.01};
  auto off = s;
  campaign::record_results(off, 1, entries);
  const auto report = campaign::check_convergence(off, 1);
  EXPECT_FALSE(report.converged);
  EXPECT_FALSE(report.points[0].within[0]);
  EXPECT_TRUE(report.points[0].within[1]);
  EXPECT_THROW(campaign::check_convergence(off, 0), StateError);
}

TEST(Campaign, StaleRoundRejected) {
  auto s = scored_campaign();
  campaign::suggest_round(s, {.strategy = {}, .hitl = {}, .q = 1});
  const auto id = s.rounds[0].suggested[0];
  std::vector<campaign::ResultEntry> entries{{id, ConversionLabel::Burned, {}, {}, false}};
  EXPECT_THROW(campaign::record_results(s, 0, entries), ConflictError);
}

TEST(Campaign, HypervolumeHistoryIsMonotone) {
  auto s = scored_campaign(11);
  const sim::SyntheticLab lab;
  for (int k = 0; k < 3; ++k) {
    campaign::suggest_round(s, {.strategy = {}, .hitl = {}, .q = 3});
    sim::run_round(s, lab);
  }
  const auto hv = campaign::hypervolume_history(s);
  ASSERT_EQ(hv.size(), 4u);
  for (std::size_t i = 1; i < hv.size(); ++i) EXPECT_GE(hv[i], hv[i - 1]);
  EXPECT_GT(hv.front(), 0.0);
  const auto empty = campaign::create_campaign(kSpace, small_config());
  EXPECT_EQ(campaign::hypervolume_history(empty), std::vector<double>{0.0});
}

TEST(Campaign, MeasuredFrontIsNondominated) {
  const auto s = scored_campaign();
  const auto pts = campaign::measured_points(s);
  const auto front = campaign::measured_front(s);
  std::size_t flagged = 0;
  for (const auto& p : pts) flagged += p.pareto_optimal ? 1 : 0;
  EXPECT_EQ(flagged, front.points().size());
  for (const auto& a : front.points()) {
    for (const auto& b : pts) EXPECT_FALSE(pareto::dominates(b.value, a));
  }
}

TEST(Campaign, ModelFrontSorted) {
  const auto s = scored_campaign();
  const auto models = campaign::fit_current_models(s);
  const auto front = campaign::model_front(s, models, 256);
  ASSERT_FALSE(front.empty());
  for (std::size_t i = 1; i < front.size(); ++i) {
    EXPECT_LE(front[i - 1].mean.f1, front[i].mean.f1);
    EXPECT_GE(front[i - 1].mean.f2, front[i].mean.f2);
  }
}
