#include "hitlbo/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "hitlbo/error.hpp"
#include "hitlbo/stats.hpp"

namespace hitlbo::explain {

namespace {

constexpr std::size_t kCoalitions = std::size_t{1} << kNumParams;

// |S|! (F - |S| - 1)! / F!
constexpr std::array<double, kNumParams> shapley_weights() {
  std::array<double, kNumParams + 1> fact{};
  fact[0] = 1.0;
  for (std::size_t i = 1; i <= kNumParams; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::array<double, kNumParams> w{};
  for (std::size_t s = 0; s < kNumParams; ++s) {
    w[s] = fact[s] * fact[kNumParams - s - 1] / fact[kNumParams];
  }
  return w;
}

}  // namespace

BatchPredictor posterior_mean_of(const gp::SurrogateModel& model) {
  return [&model](std::span<const ProcessCondition> qs) { return model.posterior(qs).mean; };
}

AttributionResult shapley_attributions(const BatchPredictor& model, const ProcessCondition& instance,
                                       std::span<const ProcessCondition> background) {
  if (background.empty()) throw ParameterError("shapley_attributions: background is empty");

  std::vector<ProcessCondition> hybrids;
  hybrids.reserve(kCoalitions * background.size());
  for (std::size_t mask = 0; mask < kCoalitions; ++mask) {
    for (const auto& b : background) {
      ProcessCondition x = b;
      for (std::size_t d = 0; d < kNumParams; ++d) {
        if (mask & (std::size_t{1} << d)) x[d] = instance[d];
      }
      hybrids.push_back(x);
    }
  }
  const auto preds = model(hybrids);
  if (preds.size() != hybrids.size()) throw ParameterError("predictor returned wrong length");

  std::array<double, kCoalitions> value{};
  for (std::size_t mask = 0; mask < kCoalitions; ++mask) {
    double sum = 0.0;
    for (std::size_t r = 0; r < background.size(); ++r) sum += preds[mask * background.size() + r];
    value[mask] = sum / static_cast<double>(background.size());
  }

  static constexpr auto weights = shapley_weights();
  AttributionResult out;
  out.instance = instance;
  out.base_value = value[0];
  out.prediction = value[kCoalitions - 1];
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < kCoalitions; ++mask) {
      if (mask & bit) continue;
      phi += weights[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.phi[i] = phi;
  }
  return out;
}

AttributionResult shapley_attributions(const gp::SurrogateModel& model,
                                       const ProcessCondition& instance,
                                       std::span<const ProcessCondition> background) {
  return shapley_attributions(posterior_mean_of(model), instance, background);
}

ShapSummary shap_summary(const BatchPredictor& model, const ParameterSpace& space,
                         std::span<const ProcessCondition> dataset,
                         std::span<const ProcessCondition> background) {
  if (dataset.empty()) throw ParameterError("shap_summary: dataset is empty");
  if (background.empty()) background = dataset;

  ShapSummary out;
  out.rows.reserve(dataset.size());
  for (const auto& x : dataset) out.rows.push_back(shapley_attributions(model, x, background));
  out.base_value = out.rows.front().base_value;

  for (std::size_t d = 0; d < kNumParams; ++d) {
    auto& f = out.features[d];
    f.feature = d;
    f.name = space.params[d].name;
    const auto& p = space.params[d];
    double abs_sum = 0.0;
    for (const auto& row : out.rows) {
      f.values.push_back(row.instance[d]);
      f.normalized_values.push_back((row.instance[d] - p.min) / (p.max - p.min));
      f.phi.push_back(row.phi[d]);
      abs_sum += std::abs(row.phi[d]);
    }
    f.mean_abs_phi = abs_sum / static_cast<double>(out.rows.size());
    f.spearman = stats::spearman(f.values, f.phi);
  }

  out.ranking.resize(kNumParams);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
    return out.features[a].mean_abs_phi > out.features[b].mean_abs_phi;
  });
  for (std::size_t r = 0; r < kNumParams; ++r) out.features[out.ranking[r]].rank = r;
  return out;
}

}  // namespace hitlbo::explain
