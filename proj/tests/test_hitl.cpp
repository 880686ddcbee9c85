#include <gtest/gtest.h>

#include <cmath>

#include "hitlbo/error.hpp"
#include "hitlbo/hitl.hpp"
#include "hitlbo/rng.hpp"

using namespace hitlbo;
using hitl::ConversionLabel;

TEST(Labels, ScoresAndNames) {
  EXPECT_DOUBLE_EQ(hitl::score_to_value(ConversionLabel::Unconverted), -1.0);
  EXPECT_DOUBLE_EQ(hitl::score_to_value(ConversionLabel::PartiallyConverted), -0.5);
  EXPECT_DOUBLE_EQ(hitl::score_to_value(ConversionLabel::Converted), 0.0);
  EXPECT_DOUBLE_EQ(hitl::score_to_value(ConversionLabel::PartiallyBurned), 0.5);
  EXPECT_DOUBLE_EQ(hitl::score_to_value(ConversionLabel::Burned), 1.0);
  for (auto l : {ConversionLabel::Unconverted, ConversionLabel::PartiallyConverted, ConversionLabel::Converted,
                 ConversionLabel::PartiallyBurned, ConversionLabel::Burned}) {
    EXPECT_EQ(hitl::label_from_string(hitl::to_string(l)), l);
    EXPECT_EQ(hitl::value_to_nearest_label(hitl::score_to_value(l)), l);
  }
  EXPECT_EQ(hitl::label_from_string("Partially-Burned"), ConversionLabel::PartiallyBurned);
  EXPECT_EQ(hitl::label_from_string("partially converted"), ConversionLabel::PartiallyConverted);
  EXPECT_EQ(hitl::label_from_string("-0.5"), ConversionLabel::PartiallyConverted);
  EXPECT_EQ(hitl::label_from_string("1.0"), ConversionLabel::Burned);
  EXPECT_THROW(hitl::label_from_string("toasted"), ParseError);
}

TEST(Labels, NearestWithTiesTowardZero) {
  EXPECT_EQ(hitl::value_to_nearest_label(0.25), ConversionLabel::Converted);
  EXPECT_EQ(hitl::value_to_nearest_label(-0.25), ConversionLabel::Converted);
  EXPECT_EQ(hitl::value_to_nearest_label(0.75), ConversionLabel::PartiallyBurned);
  EXPECT_EQ(hitl::value_to_nearest_label(-0.75), ConversionLabel::PartiallyConverted);
  EXPECT_EQ(hitl::value_to_nearest_label(0.9), ConversionLabel::Burned);
  EXPECT_EQ(hitl::value_to_nearest_label(-3.0), ConversionLabel::Unconverted);
}

TEST(Labels, Admission) {
  EXPECT_FALSE(hitl::admits_measurement(ConversionLabel::Unconverted));
  EXPECT_TRUE(hitl::admits_measurement(ConversionLabel::PartiallyConverted));
  EXPECT_TRUE(hitl::admits_measurement(ConversionLabel::Converted));
  EXPECT_TRUE(hitl::admits_measurement(ConversionLabel::PartiallyBurned));
  EXPECT_FALSE(hitl::admits_measurement(ConversionLabel::Burned));
}

TEST(PConstraint, SpotValues) {
  EXPECT_EQ(hitl::p_constraint(0.0, 0.2), 1.0);
  EXPECT_NEAR(hitl::p_constraint(1.0, 0.2), std::exp(-12.5), 1e-9 * std::exp(-12.5));
  EXPECT_NEAR(hitl::p_constraint(-1.0, 0.2), 3.726653172078671e-06, 1e-18);
  EXPECT_NEAR(hitl::p_constraint(0.2, 0.2), std::exp(-0.5), 1e-15);
  EXPECT_THROW(hitl::p_constraint(0.1, 0.0), ParameterError);
  EXPECT_THROW(hitl::p_constraint(0.1, -1.0), ParameterError);
}

TEST(PConstraint, EvenAndMonotone) {
  Rng rng(9);
  for (int t = 0; t < 1000; ++t) {
    const double mu = rng.uniform(-3.0, 3.0);
    const double tau = rng.uniform(0.01, 2.0);
    EXPECT_EQ(hitl::p_constraint(mu, tau), hitl::p_constraint(-mu, tau));
    const double a = std::abs(mu), b = a + rng.uniform(0.0, 1.0);
    EXPECT_GE(hitl::p_constraint(a, tau), hitl::p_constraint(b, tau));
    const double p = hitl::p_constraint(mu, tau);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(ConversionModel, TrainedOnAllScores) {
  const auto space = ParameterSpace::photonic_curing();
  std::vector<ProcessCondition> x;
  std::vector<double> s;
  Rng rng(4);
  for (int i = 0; i < 25; ++i) {
    UnitPoint u;
    for (auto& v : u) v = rng.uniform();
    x.push_back(design::denormalize(u, space));
    s.push_back(std::clamp(2.0 * (u[0] - 0.5), -1.0, 1.0));
  }
  gp::FitConfig cfg;
  cfg.seed = 2;
  const auto model = hitl::fit_conversion_model(space, x, s, cfg);
  EXPECT_EQ(model.size(), 25u);
  EXPECT_EQ(model.standardization(), gp::Standardization::identity());
  const auto p = hitl::constraint_map(model, x, 0.2);
  ASSERT_EQ(p.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(s[i]) < 0.05) EXPECT_GT(p[i], 0.7);
    if (std::abs(s[i]) > 0.9) EXPECT_LT(p[i], 0.05);
  }
  const std::vector<ProcessCondition> one(x.begin(), x.begin() + 1);
  const std::vector<double> one_s(s.begin(), s.begin() + 1);
  EXPECT_THROW(hitl::fit_conversion_model(space, one, one_s, cfg), StateError);
}
