#include "hitlbo/oracle_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hitlbo/campaign_io.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/rng.hpp"

namespace hitlbo::sim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t condition_hash(const ProcessCondition& c) {
  std::uint64_t h = 0x5eed;
  for (auto k : design::key_of(c)) h = mix64(h ^ static_cast<std::uint64_t>(k));
  return h;
}

template <class T>
void read_into(const json& doc, const char* key, T& field) {
  if (!doc.contains(key)) return;
  try {
    field = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("lab field '") + key + "' has the wrong type");
  }
}

std::string format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void SyntheticLab::validate() const {
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    if (!(thresholds[i] < thresholds[i + 1])) {
      throw ValidationError("lab thresholds must be strictly increasing");
    }
  }
  if (!(dispersion_noise >= 0.0) || !(leakage_noise >= 0.0)) {
    throw ValidationError("lab noise levels must be non-negative");
  }
  if (!(partial_measurable_probability >= 0.0 && partial_measurable_probability <= 1.0)) {
    throw ValidationError("partial_measurable_probability must lie in [0, 1]");
  }
  if (tilt_param >= kNumParams) throw ValidationError("tilt_param must be in 0..4");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("lab weights must be finite");
  }
}

ordered_json to_json(const SyntheticLab& lab) {
  return ordered_json{{"weights", lab.weights},
                      {"thresholds", lab.thresholds},
                      {"dispersion_base", lab.dispersion_base},
                      {"dispersion_span", lab.dispersion_span},
                      {"dispersion_exponent", lab.dispersion_exponent},
                      {"dispersion_tilt", lab.dispersion_tilt},
                      {"leakage_base", lab.leakage_base},
                      {"leakage_span", lab.leakage_span},
                      {"leakage_exponent", lab.leakage_exponent},
                      {"leakage_tilt", lab.leakage_tilt},
                      {"tilt_param", lab.tilt_param},
                      {"dispersion_noise", lab.dispersion_noise},
                      {"leakage_noise", lab.leakage_noise},
                      {"partial_measurable_probability", lab.partial_measurable_probability},
                      {"seed", lab.seed}};
}

SyntheticLab lab_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("lab definition must be a JSON object");
  SyntheticLab lab;
  read_into(doc, "weights", lab.weights);
  read_into(doc, "thresholds", lab.thresholds);
  read_into(doc, "dispersion_base", lab.dispersion_base);
  read_into(doc, "dispersion_span", lab.dispersion_span);
  read_into(doc, "dispersion_exponent", lab.dispersion_exponent);
  read_into(doc, "dispersion_tilt", lab.dispersion_tilt);
  read_into(doc, "leakage_base", lab.leakage_base);
  read_into(doc, "leakage_span", lab.leakage_span);
  read_into(doc, "leakage_exponent", lab.leakage_exponent);
  read_into(doc, "leakage_tilt", lab.leakage_tilt);
  read_into(doc, "tilt_param", lab.tilt_param);
  read_into(doc, "dispersion_noise", lab.dispersion_noise);
  read_into(doc, "leakage_noise", lab.leakage_noise);
  read_into(doc, "partial_measurable_probability", lab.partial_measurable_probability);
  read_into(doc, "seed", lab.seed);
  lab.validate();
  return lab;
}

SyntheticLab load_lab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open lab file '" + path + "'");
  try {
    return lab_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("lab file '" + path + "' is not valid JSON: " + e.what());
  }
}

double latent_dose(const SyntheticLab& lab, const ProcessCondition& c, const ParameterSpace& space) {
  const auto u = design::normalize(c, space);
  double d = 0.0;
  for (std::size_t i = 0; i < kNumParams; ++i) d += lab.weights[i] * u[i];
  return d;
}

hitl::ConversionLabel band_label(const SyntheticLab& lab, double dose) {
  using L = hitl::ConversionLabel;
  const auto& t = lab.thresholds;
  if (dose < t[0]) return L::Unconverted;
  if (dose < t[1]) return L::PartiallyConverted;
  if (dose < t[2]) return L::Converted;
  if (dose < t[3]) return L::PartiallyBurned;
  return L::Burned;
}

SimOutcome simulate_condition(const SyntheticLab& lab, const ProcessCondition& c,
                              const ParameterSpace& space) {
  lab.validate();
  SimOutcome out;
  out.dose = latent_dose(lab, c, space);
  out.label = band_label(lab, out.dose);
  if (!hitl::admits_measurement(out.label)) return out;

  Rng rng(derive_seed(lab.seed, condition_hash(c)));
  const double admit_draw = rng.uniform();
  const double e1 = rng.normal();
  const double e2 = rng.normal();
  if (out.label != hitl::ConversionLabel::Converted && admit_draw >= lab.partial_measurable_probability) {
    return out;
  }
  const auto& t = lab.thresholds;
  const double s = std::clamp((out.dose - t[0]) / (t[3] - t[0]), 0.0, 1.0);
  const double tilt = design::normalize(c, space)[lab.tilt_param];
  const double f1 = lab.dispersion_base + lab.dispersion_span * std::pow(1.0 - s, lab.dispersion_exponent) +
                    lab.dispersion_tilt * tilt;
  const double f2 = lab.leakage_base + lab.leakage_span * std::pow(s, lab.leakage_exponent) +
                    lab.leakage_tilt * tilt;
  out.dispersion = campaign::Measurement{f1 + lab.dispersion_noise * e1, lab.dispersion_noise};
  out.leakage = campaign::Measurement{f2 + lab.leakage_noise * e2, lab.leakage_noise};
  return out;
}

void run_round(campaign::CampaignState& state, const SyntheticLab& lab) {
  const auto& round = state.latest_round();
  std::vector<campaign::ResultEntry> entries;
  for (const auto& id : round.suggested) {
    const auto outcome = simulate_condition(lab, state.observation(id).condition, state.space);
    campaign::ResultEntry e;
    e.id = id;
    e.label = outcome.label;
    e.dispersion = outcome.dispersion;
    e.leakage = outcome.leakage;
    e.unmeasurable = hitl::admits_measurement(outcome.label) && !outcome.dispersion;
    entries.push_back(std::move(e));
  }
  campaign::record_results(state, round.index, entries);
}

namespace {

double round_yield(const campaign::CampaignState& state, std::size_t round) {
  const auto& r = state.rounds.at(round);
  if (r.suggested.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& id : r.suggested) {
    const auto& o = state.observation(id);
    if (o.label && hitl::admits_measurement(*o.label)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(r.suggested.size());
}

}  // namespace

ArmResult run_arm(const SyntheticLab& base_lab, const BenchmarkConfig& config) {
  SyntheticLab lab = base_lab;
  lab.seed = derive_seed(base_lab.seed, config.seed);
  campaign::CampaignConfig cc;
  cc.strategy = config.strategy;
  cc.q = config.q;
  cc.hitl = config.with_hitl;
  cc.seed = config.seed;
  cc.pool_size = config.pool_size;
  cc.gp_restarts = config.gp_restarts;
  auto state = campaign::start_campaign(ParameterSpace::photonic_curing(), cc, config.n_init);
  run_round(state, lab);
  for (std::size_t r = 0; r < config.rounds; ++r) {
    campaign::suggest_round(state);
    run_round(state, lab);
  }
  ArmResult result;
  result.with_hitl = config.with_hitl;
  result.seed = config.seed;
  for (std::size_t k = 0; k < state.rounds.size(); ++k) result.yield.push_back(round_yield(state, k));
  result.hypervolume = campaign::hypervolume_history(state);
  result.final_state = std::move(state);
  return result;
}

BenchmarkReport run_benchmark(const SyntheticLab& lab, BenchmarkConfig config, std::size_t seeds,
                              bool ab) {
  lab.validate();
  BenchmarkReport report;
  const std::uint64_t first = config.seed;
  std::vector<bool> arms = ab ? std::vector<bool>{true, false} : std::vector<bool>{config.with_hitl};
  double sums[2] = {0.0, 0.0};
  std::size_t counts[2] = {0, 0};
  for (std::size_t s = 0; s < seeds; ++s) {
    for (bool hitl_arm : arms) {
      config.seed = first + s;
      config.with_hitl = hitl_arm;
      const auto arm = run_arm(lab, config);
      for (std::size_t k = 0; k < arm.yield.size(); ++k) {
        report.rows.push_back({hitl_arm ? "hitl" : "baseline", config.seed, k, arm.yield[k],
                               arm.hypervolume[k]});
        if (k > 0) {
          sums[hitl_arm ? 0 : 1] += arm.yield[k];
          ++counts[hitl_arm ? 0 : 1];
        }
      }
    }
  }
  report.hitl_yield = counts[0] ? sums[0] / static_cast<double>(counts[0]) : 0.0;
  report.baseline_yield = counts[1] ? sums[1] / static_cast<double>(counts[1]) : 0.0;
  return report;
}

std::string to_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "arm,seed,round,yield,hypervolume\n";
  for (const auto& r : report.rows) {
    out << r.arm << ',' << r.seed << ',' << r.round << ',' << format(r.yield) << ','
        << format(r.hypervolume) << '\n';
  }
  return out.str();
}

}  // namespace hitlbo::sim
