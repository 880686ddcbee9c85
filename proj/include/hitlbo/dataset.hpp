#pragma once

#include <istream>
#include <string>
#include <vector>

#include "hitlbo/campaign.hpp"

namespace hitlbo::dataset {

// Column names of the dataset CSV, in canonical order. "round" is optional
// and, when present, may appear anywhere.
const std::vector<std::string>& required_columns();
inline constexpr const char* kRoundColumn = "round";

// Parses a dataset CSV. Missing cells are "-" (or empty). Scores are mapped
// to the nearest label. Rows get round 0; the source round label (if any)
// goes to round_tag and condition_id becomes the observation id. Errors
// name the 1-based line and the column. An empty document yields nothing.
std::vector<campaign::Observation> parse_dataset(std::istream& in, const ParameterSpace& space);
std::vector<campaign::Observation> read_dataset(const std::string& path, const ParameterSpace& space);

struct IngestOptions {
  // Keep only rows whose round label is listed (empty = keep all).
  std::vector<std::string> round_tags;
};

struct IngestSummary {
  std::size_t observations = 0;
  std::size_t functional = 0;
  std::vector<std::size_t> rounds;  // indices of the rounds created
};

// Appends the rows as new rounds, one per distinct round label in order of
// first appearance. A campaign without rounds gets its first label as the
// LHS round 0. The latest existing round must be COMPLETE. All-or-nothing:
// on error the state is untouched.
IngestSummary ingest(campaign::CampaignState& state, std::vector<campaign::Observation> rows,
                     const IngestOptions& options = {});

// Writes observations back out in the same CSV layout.
std::string to_csv(const std::vector<campaign::Observation>& observations);

}  // namespace hitlbo::dataset
