#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hitlbo/design_space.hpp"
#include "hitlbo/gpr.hpp"

namespace hitlbo::explain {

// Vectorized scalar model: one prediction per query condition.
using BatchPredictor = std::function<std::vector<double>(std::span<const ProcessCondition>)>;

// Posterior mean of a fitted surrogate.
BatchPredictor posterior_mean_of(const gp::SurrogateModel& model);

struct AttributionResult {
  double base_value = 0.0;  // mean prediction over the background
  std::array<double, kNumParams> phi{};
  ProcessCondition instance;
  double prediction = 0.0;  // base_value + sum(phi)
};

// Exact interventional Shapley values over the five inputs (all 32
// coalitions). Throws ParameterError on an empty background.
AttributionResult shapley_attributions(const BatchPredictor& model, const ProcessCondition& instance,
                                       std::span<const ProcessCondition> background);
AttributionResult shapley_attributions(const gp::SurrogateModel& model,
                                       const ProcessCondition& instance,
                                       std::span<const ProcessCondition> background);

struct FeatureSummary {
  std::size_t feature = 0;
  std::string name;
  double mean_abs_phi = 0.0;
  std::size_t rank = 0;   // 0 = largest mean |phi|
  double spearman = 0.0;  // rank correlation of feature value vs phi
  std::vector<double> values;             // raw feature value per instance
  std::vector<double> normalized_values;  // in [0, 1]
  std::vector<double> phi;                // attribution per instance
};

struct ShapSummary {
  double base_value = 0.0;
  std::vector<AttributionResult> rows;
  std::array<FeatureSummary, kNumParams> features;
  std::vector<std::size_t> ranking;  // feature indices, largest effect first
};

// Attributions for every dataset row; the background defaults to the
// dataset itself.
ShapSummary shap_summary(const BatchPredictor& model, const ParameterSpace& space,
                         std::span<const ProcessCondition> dataset,
                         std::span<const ProcessCondition> background = {});

}  // namespace hitlbo::explain
