#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hitlbo/design_space.hpp"
#include "hitlbo/gpr.hpp"

namespace hitlbo::hitl {

// Five-level human observation of a cured film.
enum class ConversionLabel {
  Unconverted,          // -1.0
  PartiallyConverted,   // -0.5
  Converted,            //  0.0
  PartiallyBurned,      // +0.5
  Burned,               // +1.0
};

double score_to_value(ConversionLabel label);

// Nearest of the five score values; exact midpoints resolve toward 0.
ConversionLabel value_to_nearest_label(double value);

// Lower-case identifiers: "unconverted", "partially_converted", ...
std::string to_string(ConversionLabel label);
// Accepts the identifiers above case-insensitively, with '-' or ' ' in place
// of '_', and numeric scores. Throws ParseError otherwise.
ConversionLabel label_from_string(const std::string& text);

// Labels whose films can carry electrical measurements (|score| <= 0.5).
bool admits_measurement(ConversionLabel label);

struct HitlConfig {
  double tau = 0.2;
  void validate() const;
};

// exp(-1/2 (mu / tau)^2). Throws ParameterError for tau <= 0.
double p_constraint(double mu_conv, double tau);

// GP over scores of every labeled condition, failures included. Scores are
// clamped into [-1, 1] and not standardized.
gp::SurrogateModel fit_conversion_model(const ParameterSpace& space,
                                        std::span<const ProcessCondition> conditions,
                                        std::span<const double> scores, gp::FitConfig config);

// p_constraint of the conversion posterior mean at each candidate.
std::vector<double> constraint_map(const gp::SurrogateModel& conversion,
                                   std::span<const ProcessCondition> candidates, double tau);

}  // namespace hitlbo::hitl
