#pragma once

#include <string>

#include <json.hpp>

#include "hitlbo/campaign.hpp"

namespace hitlbo::campaign {

inline constexpr const char* kSchemaVersion = "1.0.0";
inline constexpr int kSchemaMajor = 1;

nlohmann::ordered_json to_json(const CampaignState& state);

// Throws VersionError for a different major version, ParseError for schema
// violations and InvariantError when the decoded state is inconsistent.
CampaignState from_json(const nlohmann::json& doc);

// Pretty-printed document followed by a newline; byte-stable for equal states.
std::string dump(const CampaignState& state);
CampaignState parse(const std::string& text);

// Writes to a sibling temporary file and renames it over `path`, so a
// failed save never leaves a truncated campaign behind.
void save(const CampaignState& state, const std::string& path);
CampaignState load(const std::string& path);

nlohmann::ordered_json to_json(const ParameterSpace& space);
ParameterSpace space_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const CampaignConfig& config);
// Missing keys keep their defaults.
CampaignConfig config_from_json(const nlohmann::json& doc, CampaignConfig base = {});

nlohmann::ordered_json to_json(const Observation& o);

}  // namespace hitlbo::campaign
