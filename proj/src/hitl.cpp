#include "hitlbo/hitl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "hitlbo/acquisition.hpp"
#include "hitlbo/error.hpp"

namespace hitlbo::hitl {

namespace {

constexpr std::array<ConversionLabel, 5> kLabels{
    ConversionLabel::Unconverted, ConversionLabel::PartiallyConverted, ConversionLabel::Converted,
    ConversionLabel::PartiallyBurned, ConversionLabel::Burned};

}  // namespace

double score_to_value(ConversionLabel label) {
  switch (label) {
    case ConversionLabel::Unconverted: return -1.0;
    case ConversionLabel::PartiallyConverted: return -0.5;
    case ConversionLabel::Converted: return 0.0;
    case ConversionLabel::PartiallyBurned: return 0.5;
    case ConversionLabel::Burned: return 1.0;
  }
  return 0.0;
}

ConversionLabel value_to_nearest_label(double value) {
  if (!std::isfinite(value)) throw ParameterError("score must be finite");
  ConversionLabel best = ConversionLabel::Converted;
  double best_dist = std::abs(value);
  for (auto label : kLabels) {
    const double s = score_to_value(label);
    const double dist = std::abs(value - s);
    // On a tie keep the candidate closer to zero.
    if (dist < best_dist || (dist == best_dist && std::abs(s) < std::abs(score_to_value(best)))) {
      best = label;
      best_dist = dist;
    }
  }
  return best;
}

std::string to_string(ConversionLabel label) {
  switch (label) {
    case ConversionLabel::Unconverted: return "unconverted";
    case ConversionLabel::PartiallyConverted: return "partially_converted";
    case ConversionLabel::Converted: return "converted";
    case ConversionLabel::PartiallyBurned: return "partially_burned";
    case ConversionLabel::Burned: return "burned";
  }
  return "converted";
}

ConversionLabel label_from_string(const std::string& text) {
  std::string t;
  for (char ch : text) {
    if (ch == '-' && t.empty()) {
      t.push_back(ch);
    } else if (ch == '-' || ch == ' ') {
      t.push_back('_');
    } else {
      t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  for (auto label : kLabels) {
    if (t == to_string(label)) return label;
  }
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (!t.empty() && end == t.c_str() + t.size() && std::isfinite(v)) {
    return value_to_nearest_label(v);
  }
  throw ParseError("unknown conversion label '" + text + "'");
}

bool admits_measurement(ConversionLabel label) {
  return std::abs(score_to_value(label)) <= 0.5;
}

void HitlConfig::validate() const {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
}

double p_constraint(double mu_conv, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const double z = mu_conv / tau;
  return std::exp(-0.5 * z * z);
}

gp::SurrogateModel fit_conversion_model(const ParameterSpace& space,
                                        std::span<const ProcessCondition> conditions,
                                        std::span<const double> scores, gp::FitConfig config) {
  if (conditions.size() < 2) {
    throw StateError("the conversion model needs at least two scored conditions");
  }
  std::vector<double> clamped(scores.begin(), scores.end());
  for (auto& s : clamped) s = std::clamp(s, -1.0, 1.0);
  config.standardize = false;
  return gp::fit(space, conditions, clamped, config);
}

std::vector<double> constraint_map(const gp::SurrogateModel& conversion,
                                   std::span<const ProcessCondition> candidates, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const auto post = acq::posterior_chunked(conversion, candidates);
  std::vector<double> p(post.mean.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = p_constraint(post.mean[i], tau);
  return p;
}

}  // namespace hitlbo::hitl
