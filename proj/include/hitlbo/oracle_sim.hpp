#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitlbo/campaign.hpp"

namespace hitlbo::sim {

// Deterministic stand-in for curing, scoring and measuring a film. A latent
// dose d = w . normalize(condition) is banded by four thresholds into the
// five labels; measurable films get a dispersion-like objective that falls
// with d and a leakage-like objective that rises with it.
struct SyntheticLab {
  std::array<double, kNumParams> weights{0.50, 0.25, -0.20, 0.10, 0.15};
  std::array<double, 4> thresholds{0.30, 0.35, 0.415, 0.465};

  // f1 = base + span (1 - s)^exponent + tilt * u_k
  // f2 = base + span s^exponent + tilt * u_k
  // with s = clamp((d - t1) / (t4 - t1), 0, 1) and u_k the normalized
  // value of `tilt_param`.
  double dispersion_base = 1.1, dispersion_span = 1.8, dispersion_exponent = 1.5;
  double dispersion_tilt = 0.4;
  double leakage_base = 2.5, leakage_span = 3.5, leakage_exponent = 0.8;
  double leakage_tilt = -0.6;
  std::size_t tilt_param = 2;

  double dispersion_noise = 0.05;
  double leakage_noise = 0.10;
  // Probability that a partially converted / partially burned film still
  // yields working devices. Converted films always do.
  double partial_measurable_probability = 1.0;
  std::uint64_t seed = 0;

  // Throws ValidationError unless thresholds increase strictly, noise >= 0,
  // the probability lies in [0, 1] and tilt_param indexes a parameter.
  void validate() const;

  friend bool operator==(const SyntheticLab&, const SyntheticLab&) = default;
};

nlohmann::ordered_json to_json(const SyntheticLab& lab);
// Missing keys keep the defaults.
SyntheticLab lab_from_json(const nlohmann::json& doc);
SyntheticLab load_lab(const std::string& path);

struct SimOutcome {
  double dose = 0.0;
  hitl::ConversionLabel label = hitl::ConversionLabel::Converted;
  std::optional<campaign::Measurement> dispersion;
  std::optional<campaign::Measurement> leakage;
};

double latent_dose(const SyntheticLab& lab, const ProcessCondition& c, const ParameterSpace& space);
hitl::ConversionLabel band_label(const SyntheticLab& lab, double dose);

// Noise is seeded from the lab seed and the condition itself, so the same
// condition always gives the same outcome.
SimOutcome simulate_condition(const SyntheticLab& lab, const ProcessCondition& c,
                              const ParameterSpace& space = ParameterSpace::photonic_curing());

// Scores and measures every suggestion of the latest round.
void run_round(campaign::CampaignState& state, const SyntheticLab& lab);

struct BenchmarkConfig {
  bool with_hitl = true;
  std::size_t n_init = 30;
  std::size_t rounds = 2;
  std::size_t q = 5;
  std::uint64_t seed = 0;
  acq::Strategy strategy = acq::Strategy::ParetoUcb;
  std::size_t pool_size = 8192;
  int gp_restarts = 8;
};

struct ArmResult {
  bool with_hitl = true;
  std::uint64_t seed = 0;
  std::vector<double> yield;        // index 0 is the LHS round
  std::vector<double> hypervolume;  // after each round
  campaign::CampaignState final_state;
};

ArmResult run_arm(const SyntheticLab& lab, const BenchmarkConfig& config);

struct BenchmarkRow {
  std::string arm;  // "hitl" or "baseline"
  std::uint64_t seed = 0;
  std::size_t round = 0;
  double yield = 0.0;
  double hypervolume = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  // Mean yield over seeds of the post-LHS rounds.
  double hitl_yield = 0.0;
  double baseline_yield = 0.0;
};

// Both arms (or only the configured one unless ab) for seeds
// first_seed .. first_seed + seeds - 1. The campaign and lab noise seeds
// are both derived from the run seed, so the arms share their LHS round.
BenchmarkReport run_benchmark(const SyntheticLab& lab, BenchmarkConfig config, std::size_t seeds,
                              bool ab = true);

std::string to_csv(const BenchmarkReport& report);

}  // namespace hitlbo::sim
