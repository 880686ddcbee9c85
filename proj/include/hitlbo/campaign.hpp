#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hitlbo/acquisition.hpp"
#include "hitlbo/design_space.hpp"
#include "hitlbo/gpr.hpp"
#include "hitlbo/hitl.hpp"
#include "hitlbo/pareto.hpp"

namespace hitlbo::campaign {

enum class RoundStrategy { Lhs, EhviGreedy, ParetoUcb };
enum class RoundStatus { PendingScores, PendingObjectives, Complete };

std::string to_string(RoundStrategy s);
RoundStrategy round_strategy_from_string(const std::string& s);
std::string to_string(RoundStatus s);
RoundStatus round_status_from_string(const std::string& s);

struct Measurement {
  double mean = 0.0;
  double std = 0.0;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

// Parses "1.19±0.08", "1.19 +- 0.08" or a bare mean (std 0). The decimal
// point is always '.'.
Measurement parse_measurement(const std::string& text);

struct Observation {
  std::string id;
  ProcessCondition condition;
  std::optional<double> pulse_voltage;  // recorded, never modelled
  std::optional<hitl::ConversionLabel> label;
  std::optional<Measurement> dispersion;  // C100Hz / C1MHz
  std::optional<Measurement> leakage;     // |log10 I_leakage|
  bool unmeasurable = false;
  std::size_t round = 0;
  std::string round_tag;  // source label of ingested rows ("1b", "2'", ...)
  int device_count = 5;

  bool functional() const { return dispersion.has_value() && leakage.has_value(); }
  // Throws InvariantError when a failed label carries objectives, only one
  // objective is present, or a measurement is not finite / has std < 0.
  void validate() const;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Strategy / HITL choice for one active-learning round.
struct ScheduleEntry {
  acq::Strategy strategy = acq::Strategy::ParetoUcb;
  bool hitl = true;

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

struct CampaignConfig {
  acq::Strategy strategy = acq::Strategy::ParetoUcb;
  double beta = 2.0;
  std::size_t q = 5;
  double tau = 0.2;
  bool hitl = true;
  pareto::ObjectivePoint ref{1.0, 0.0};
  std::uint64_t seed = 0;
  Refinement candidate_steps = design::fine_refinement();
  std::size_t pool_size = 8192;
  int gp_restarts = 8;
  bool noise_floor_from_measurements = false;
  // Pins the conversion model's noise variance instead of fitting it.
  std::optional<double> conversion_noise;
  std::vector<ScheduleEntry> schedule;  // entry k drives round k + 1

  void validate(const ParameterSpace& space) const;

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

struct ModelSnapshot {
  std::size_t round = 0;  // the round these models suggested
  std::string target;     // "dispersion", "leakage" or "conversion"
  gp::KernelHyperparams hyperparams;
  gp::Standardization standardization;
  std::vector<std::string> training_ids;
  double jitter = 0.0;

  friend bool operator==(const ModelSnapshot&, const ModelSnapshot&) = default;
};

struct RoundRecord {
  std::size_t index = 0;
  RoundStrategy strategy = RoundStrategy::Lhs;
  bool hitl_enabled = false;
  std::vector<std::string> suggested;
  RoundStatus status = RoundStatus::PendingScores;
  std::string tag;
  bool ingested = false;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct CampaignState {
  ParameterSpace space = ParameterSpace::photonic_curing();
  CampaignConfig config;
  std::vector<Observation> observations;
  std::vector<RoundRecord> rounds;
  std::vector<ModelSnapshot> model_snapshots;
  std::uint64_t rng_counter = 0;  // number of random streams consumed
  std::uint64_t next_id = 1;

  const Observation& observation(const std::string& id) const;
  Observation& observation(const std::string& id);
  bool has_observation(const std::string& id) const;
  const RoundRecord& latest_round() const;

  // Seed of the next independent random stream.
  std::uint64_t next_stream();

  // Checks every type invariant; throws InvariantError.
  void validate() const;

  friend bool operator==(const CampaignState&, const CampaignState&) = default;
};

// Empty campaign (no rounds); used for replays that ingest data.
CampaignState create_campaign(const ParameterSpace& space, const CampaignConfig& config);

// Campaign whose round 0 is an LHS design of n_init conditions awaiting
// scores. Requires n_init >= 2.
CampaignState start_campaign(const ParameterSpace& space, const CampaignConfig& config,
                             std::size_t n_init);

struct SuggestOptions {
  std::optional<acq::Strategy> strategy;
  std::optional<bool> hitl;
  std::optional<std::size_t> q;
};

// Fits the models, picks the next batch and appends it as a new round.
const RoundRecord& suggest_round(CampaignState& state, const SuggestOptions& options = {});

// Per-observation result entry for record_results.
struct ResultEntry {
  std::string id;
  std::optional<hitl::ConversionLabel> label;
  std::optional<Measurement> dispersion;
  std::optional<Measurement> leakage;
  bool unmeasurable = false;
};

void score(CampaignState& state, const std::string& id, hitl::ConversionLabel label);
void record_objectives(CampaignState& state, const std::string& id, const Measurement& dispersion,
                       const Measurement& leakage);
void mark_unmeasurable(CampaignState& state, const std::string& id);
void record_results(CampaignState& state, std::size_t round, std::span<const ResultEntry> entries);

// Recomputes every round status from its observations.
void refresh_statuses(CampaignState& state);

struct PointConvergence {
  std::string id;
  std::array<double, 2> measured{};
  std::array<double, 2> predicted_mean{};
  std::array<double, 2> predicted_std{};
  std::array<bool, 2> within{};
};

struct ConvergenceReport {
  std::size_t round = 0;
  std::vector<PointConvergence> points;
  bool converged = false;
};

// Compares the round's measurements with the snapshot models that
// suggested it: |measured - mean| <= std for both objectives at every
// functional point.
ConvergenceReport check_convergence(const CampaignState& state, std::size_t round);

// Dominated hypervolume of measured nondominated points with round <= k,
// for every k.
std::vector<double> hypervolume_history(const CampaignState& state);

struct MeasuredPoint {
  std::string id;
  pareto::ObjectivePoint value;
  pareto::ObjectivePoint std;
  bool pareto_optimal = false;
};
std::vector<MeasuredPoint> measured_points(const CampaignState& state);
pareto::ParetoFront measured_front(const CampaignState& state);

struct FittedModels {
  std::optional<gp::SurrogateModel> dispersion;
  std::optional<gp::SurrogateModel> leakage;
  std::optional<gp::SurrogateModel> conversion;
};

// Fits models on the current data with seeds derived from the campaign
// seed without consuming random streams. Objective models need >= 2
// functional observations, the conversion model >= 2 scored ones; models
// that lack data stay empty.
FittedModels fit_current_models(const CampaignState& state);

// Rebuilds a snapshot's model from the observations it references.
gp::SurrogateModel rebuild_snapshot(const CampaignState& state, const ModelSnapshot& snapshot);

// Model-predicted Pareto front: nondominated posterior means over a seeded
// sample of the candidate grid, with posterior stds at the same inputs.
struct ModelFrontPoint {
  ProcessCondition condition;
  pareto::ObjectivePoint mean;
  pareto::ObjectivePoint std;
};
std::vector<ModelFrontPoint> model_front(const CampaignState& state, const FittedModels& models,
                                         std::size_t pool_size = 4096);

}  // namespace hitlbo::campaign
