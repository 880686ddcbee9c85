#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitlbo/campaign.hpp"
#include "hitlbo/explain.hpp"

// JSON views of a campaign shared by the CLI (--json) and the HTTP API, so
// both front ends print identical payloads.
namespace hitlbo::report {

using Json = nlohmann::ordered_json;

Json measurement(const std::optional<campaign::Measurement>& m);
Json observation(const campaign::CampaignState& s, const campaign::Observation& o);
Json round(const campaign::CampaignState& s, const campaign::RoundRecord& r, bool with_observations);

Json campaign_summary(const campaign::CampaignState& s);
Json rounds(const campaign::CampaignState& s);

// Measured points, the measured front and the model front with its std band.
Json pareto(const campaign::CampaignState& s, const campaign::FittedModels& models);
Json hypervolume(const campaign::CampaignState& s);

// Latest COMPLETE round with snapshots unless `round` is given.
Json convergence(const campaign::CampaignState& s, std::optional<std::size_t> round = {});

// target: "dispersion" or "leakage" (or "conversion").
explain::ShapSummary shap(const campaign::CampaignState& s, const campaign::FittedModels& models,
                          const std::string& target);
Json shap_json(const explain::ShapSummary& summary);
std::string shap_csv(const explain::ShapSummary& summary);

struct SliceRequest {
  std::size_t x = 0, y = 1;
  std::optional<std::vector<double>> fixed;  // the three other parameters
};
// Parses "i,j" and "a,b,c".
SliceRequest parse_slice(const std::string& pair, const std::string& fixed);
// Median per parameter of the latest round's conditions (all observations
// when that round is empty).
std::vector<double> default_fixed(const campaign::CampaignState& s, std::size_t x, std::size_t y);

Json acquisition_map(const campaign::CampaignState& s, const campaign::FittedModels& models,
                     const SliceRequest& slice);
Json constraint_map(const campaign::CampaignState& s, const campaign::FittedModels& models,
                    const SliceRequest& slice);

// Per-objective posterior and the constraint probability at one condition.
Json whatif(const campaign::CampaignState& s, const campaign::FittedModels& models,
            const ProcessCondition& c);

}  // namespace hitlbo::report
