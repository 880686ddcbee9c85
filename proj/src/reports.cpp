#include "hitlbo/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hitlbo/campaign_io.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/stats.hpp"

namespace hitlbo::report {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(what + ": '" + s + "' is not a number");
  }
  return v;
}

Json grid(const std::vector<double>& flat, std::size_t nx) {
  auto rows = Json::array();
  for (std::size_t i = 0; i < flat.size(); i += nx) {
    rows.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i),
                                       flat.begin() + static_cast<std::ptrdiff_t>(i + nx)));
  }
  return rows;
}

std::vector<double> axis(const ParameterSpace& space, std::size_t d, double step) {
  const auto& p = space.params[d];
  const auto n = static_cast<std::size_t>(std::llround((p.max - p.min) / step)) + 1;
  std::vector<double> v;
  for (std::size_t k = 0; k < n; ++k) {
    ProcessCondition c = design::denormalize(UnitPoint{}, space);
    c[d] = p.min + static_cast<double>(k) * step;
    Refinement steps = design::fine_refinement();
    steps[d] = step;
    v.push_back(design::snap_to_grid(c, space, steps)[d]);
  }
  return v;
}

Json slice_header(const campaign::CampaignState& s, const SliceRequest& slice,
                  const std::vector<double>& fixed) {
  Json fixed_json = Json::object();
  for (std::size_t d = 0, f = 0; d < kNumParams; ++d) {
    if (d == slice.x || d == slice.y) continue;
    fixed_json[s.space.params[d].name] = fixed[f++];
  }
  return Json{{"pair", {slice.x, slice.y}},
              {"names", {s.space.params[slice.x].name, s.space.params[slice.y].name}},
              {"fixed", fixed_json}};
}

const gp::SurrogateModel& require(const std::optional<gp::SurrogateModel>& m, const char* what) {
  if (!m) {
    throw StateError(std::string("no ") + what +
                     " model yet: it needs at least 2 suitable observations");
  }
  return *m;
}

}  // namespace

Json measurement(const std::optional<campaign::Measurement>& m) {
  if (!m) return nullptr;
  return Json{{"mean", m->mean}, {"std", m->std}};
}

Json observation(const campaign::CampaignState& s, const campaign::Observation& o) {
  Json c = Json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) c[s.space.params[i].name] = o.condition[i];
  return Json{{"id", o.id},
              {"condition", c},
              {"pulse_voltage", o.pulse_voltage ? Json(*o.pulse_voltage) : Json(nullptr)},
              {"label", o.label ? Json(hitl::to_string(*o.label)) : Json(nullptr)},
              {"score", o.label ? Json(hitl::score_to_value(*o.label)) : Json(nullptr)},
              {"dispersion", measurement(o.dispersion)},
              {"leakage", measurement(o.leakage)},
              {"unmeasurable", o.unmeasurable},
              {"functional", o.functional()},
              {"round", o.round},
              {"round_tag", o.round_tag}};
}

Json round(const campaign::CampaignState& s, const campaign::RoundRecord& r, bool with_observations) {
  Json j{{"index", r.index},
         {"strategy", campaign::to_string(r.strategy)},
         {"hitl_enabled", r.hitl_enabled},
         {"status", campaign::to_string(r.status)},
         {"tag", r.tag},
         {"ingested", r.ingested},
         {"suggested", r.suggested}};
  if (with_observations) {
    auto obs = Json::array();
    for (const auto& id : r.suggested) obs.push_back(observation(s, s.observation(id)));
    j["observations"] = obs;
  }
  return j;
}

Json campaign_summary(const campaign::CampaignState& s) {
  std::size_t scored = 0, functional = 0, pending = 0;
  for (const auto& o : s.observations) {
    scored += o.label ? 1 : 0;
    functional += o.functional() ? 1 : 0;
  }
  if (!s.rounds.empty()) {
    for (const auto& id : s.rounds.back().suggested) {
      const auto& o = s.observation(id);
      const bool open = !o.label || (hitl::admits_measurement(*o.label) && !o.functional() && !o.unmeasurable);
      pending += open ? 1 : 0;
    }
  }
  Json j{{"version", campaign::kSchemaVersion},
         {"space", campaign::to_json(s.space)},
         {"config", campaign::to_json(s.config)},
         {"observation_count", s.observations.size()},
         {"scored_count", scored},
         {"functional_count", functional},
         {"round_count", s.rounds.size()},
         {"pending_count", pending}};
  j["latest_round"] = s.rounds.empty() ? Json(nullptr) : round(s, s.rounds.back(), true);
  j["hypervolume"] = campaign::hypervolume_history(s);
  j["ready_to_suggest"] = !s.rounds.empty() && s.rounds.back().status == campaign::RoundStatus::Complete;
  return j;
}

Json rounds(const campaign::CampaignState& s) {
  auto arr = Json::array();
  for (const auto& r : s.rounds) arr.push_back(round(s, r, false));
  return Json{{"rounds", arr}};
}

Json pareto(const campaign::CampaignState& s, const campaign::FittedModels& models) {
  auto measured = Json::array();
  for (const auto& p : campaign::measured_points(s)) {
    measured.push_back(Json{{"id", p.id},
                            {"dispersion", {{"mean", p.value.f1}, {"std", p.std.f1}}},
                            {"leakage", {{"mean", p.value.f2}, {"std", p.std.f2}}},
                            {"pareto_optimal", p.pareto_optimal}});
  }
  auto front = Json::array();
  for (const auto& p : campaign::measured_front(s).points()) front.push_back({p.f1, p.f2});
  auto model = Json::array();
  if (models.dispersion && models.leakage) {
    for (const auto& p : campaign::model_front(s, models)) {
      Json c = Json::object();
      for (std::size_t i = 0; i < kNumParams; ++i) c[s.space.params[i].name] = p.condition[i];
      model.push_back(Json{{"condition", c},
                           {"mean", {p.mean.f1, p.mean.f2}},
                           {"std", {p.std.f1, p.std.f2}}});
    }
  }
  return Json{{"ref", {s.config.ref.f1, s.config.ref.f2}},
              {"measured", measured},
              {"measured_front", front},
              {"model_front", model}};
}

Json hypervolume(const campaign::CampaignState& s) {
  return Json{{"ref", {s.config.ref.f1, s.config.ref.f2}},
              {"history", campaign::hypervolume_history(s)}};
}

Json convergence(const campaign::CampaignState& s, std::optional<std::size_t> round_index) {
  if (!round_index) {
    for (std::size_t k = s.rounds.size(); k-- > 0;) {
      const bool snap = std::any_of(s.model_snapshots.begin(), s.model_snapshots.end(),
                                    [&](const campaign::ModelSnapshot& m) { return m.round == k; });
      if (snap && s.rounds[k].status == campaign::RoundStatus::Complete) {
        round_index = k;
        break;
      }
    }
    if (!round_index) throw StateError("no completed model-suggested round to check yet");
  }
  const auto rep = campaign::check_convergence(s, *round_index);
  auto points = Json::array();
  for (const auto& p : rep.points) {
    points.push_back(Json{{"id", p.id},
                          {"measured", p.measured},
                          {"predicted_mean", p.predicted_mean},
                          {"predicted_std", p.predicted_std},
                          {"within", p.within}});
  }
  return Json{{"round", rep.round}, {"converged", rep.converged}, {"points", points}};
}

explain::ShapSummary shap(const campaign::CampaignState& s, const campaign::FittedModels& models,
                          const std::string& target) {
  const gp::SurrogateModel* model = nullptr;
  if (target == "dispersion") model = &require(models.dispersion, "dispersion");
  else if (target == "leakage") model = &require(models.leakage, "leakage");
  else if (target == "conversion") model = &require(models.conversion, "conversion");
  else throw ParameterError("target must be dispersion, leakage or conversion, not '" + target + "'");
  const auto& inputs = model->inputs();
  return explain::shap_summary(explain::posterior_mean_of(*model), s.space, inputs);
}

Json shap_json(const explain::ShapSummary& summary) {
  auto features = Json::array();
  for (const auto& f : summary.features) {
    features.push_back(Json{{"feature", f.feature},
                            {"name", f.name},
                            {"mean_abs_phi", f.mean_abs_phi},
                            {"rank", f.rank},
                            {"spearman", f.spearman},
                            {"values", f.values},
                            {"normalized_values", f.normalized_values},
                            {"phi", f.phi}});
  }
  return Json{{"base_value", summary.base_value},
              {"ranking", summary.ranking},
              {"features", features}};
}

std::string shap_csv(const explain::ShapSummary& summary) {
  std::ostringstream out;
  out.precision(17);
  out << "row,feature,value,normalized_value,phi,prediction,base_value\n";
  for (std::size_t r = 0; r < summary.rows.size(); ++r) {
    for (const auto& f : summary.features) {
      out << r << ',' << f.name << ',' << f.values[r] << ',' << f.normalized_values[r] << ','
          << f.phi[r] << ',' << summary.rows[r].prediction << ',' << summary.base_value << '\n';
    }
  }
  return out.str();
}

SliceRequest parse_slice(const std::string& pair, const std::string& fixed) {
  SliceRequest r;
  if (!pair.empty()) {
    const auto parts = split(pair, ',');
    if (parts.size() != 2) throw ParameterError("pair must look like 'i,j'");
    const double x = parse_number(parts[0], "pair");
    const double y = parse_number(parts[1], "pair");
    if (x < 0 || y < 0 || x != std::floor(x) || y != std::floor(y) || x >= kNumParams ||
        y >= kNumParams || x == y) {
      throw ParameterError("pair must name two distinct parameter indices in 0..4");
    }
    r.x = static_cast<std::size_t>(x);
    r.y = static_cast<std::size_t>(y);
  }
  if (!fixed.empty()) {
    const auto parts = split(fixed, ',');
    if (parts.size() != kNumParams - 2) throw ParameterError("fixed must hold three values");
    std::vector<double> v;
    for (const auto& p : parts) v.push_back(parse_number(p, "fixed"));
    r.fixed = v;
  }
  return r;
}

std::vector<double> default_fixed(const campaign::CampaignState& s, std::size_t x, std::size_t y) {
  std::vector<ProcessCondition> pts;
  if (!s.rounds.empty()) {
    for (const auto& id : s.rounds.back().suggested) pts.push_back(s.observation(id).condition);
  }
  if (pts.empty()) {
    for (const auto& o : s.observations) pts.push_back(o.condition);
  }
  std::vector<double> fixed;
  for (std::size_t d = 0; d < kNumParams; ++d) {
    if (d == x || d == y) continue;
    if (pts.empty()) {
      fixed.push_back(0.5 * (s.space.params[d].min + s.space.params[d].max));
      continue;
    }
    std::vector<double> v;
    for (const auto& c : pts) v.push_back(c[d]);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    fixed.push_back(n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  }
  return fixed;
}

Json acquisition_map(const campaign::CampaignState& s, const campaign::FittedModels& models,
                     const SliceRequest& slice) {
  const auto fixed = slice.fixed.value_or(default_fixed(s, slice.x, slice.y));
  const acq::ObjectiveModels om{require(models.dispersion, "dispersion"),
                                require(models.leakage, "leakage")};
  const auto map = acq::acquisition_map(om, s.space, fixed, slice.x, slice.y, s.config.candidate_steps,
                                        s.config.beta,
                                        models.conversion ? &*models.conversion : nullptr, s.config.tau);
  const std::size_t nx = map.xs.size();
  Json j = slice_header(s, slice, fixed);
  j["xs"] = map.xs;
  j["ys"] = map.ys;
  j["beta"] = s.config.beta;
  j["constrained_available"] = models.conversion.has_value();
  const char* names[2] = {"dispersion", "leakage"};
  for (std::size_t o = 0; o < 2; ++o) {
    j["mean"][names[o]] = grid(map.mean[o], nx);
    j["std"][names[o]] = grid(map.std[o], nx);
    j["raw"][names[o]] = grid(map.raw[o], nx);
    j["constrained"][names[o]] = grid(map.constrained[o], nx);
  }
  j["p_constraint"] = grid(map.p, nx);
  return j;
}

Json constraint_map(const campaign::CampaignState& s, const campaign::FittedModels& models,
                    const SliceRequest& slice) {
  const auto& conv = require(models.conversion, "conversion");
  const auto fixed = slice.fixed.value_or(default_fixed(s, slice.x, slice.y));
  if (fixed.size() != kNumParams - 2) throw ParameterError("fixed must hold three values");
  const auto xs = axis(s.space, slice.x, s.config.candidate_steps[slice.x]);
  const auto ys = axis(s.space, slice.y, s.config.candidate_steps[slice.y]);
  ProcessCondition base;
  for (std::size_t d = 0, f = 0; d < kNumParams; ++d) {
    if (d != slice.x && d != slice.y) base[d] = fixed[f++];
  }
  std::vector<ProcessCondition> pts;
  for (double y : ys) {
    for (double x : xs) {
      ProcessCondition c = base;
      c[slice.x] = x;
      c[slice.y] = y;
      design::check_in_bounds(c, s.space);
      pts.push_back(c);
    }
  }
  const auto post = conv.posterior(pts);
  std::vector<double> p(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) p[i] = hitl::p_constraint(post.mean[i], s.config.tau);
  Json j = slice_header(s, slice, fixed);
  j["xs"] = xs;
  j["ys"] = ys;
  j["tau"] = s.config.tau;
  j["conversion_mean"] = grid(post.mean, xs.size());
  j["conversion_std"] = grid(post.std, xs.size());
  j["p_constraint"] = grid(p, xs.size());
  return j;
}

Json whatif(const campaign::CampaignState& s, const campaign::FittedModels& models,
            const ProcessCondition& c) {
  design::check_in_bounds(c, s.space);
  Json j = Json::object();
  Json cond = Json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) cond[s.space.params[i].name] = c[i];
  j["condition"] = cond;
  const auto& d = require(models.dispersion, "dispersion");
  const auto& l = require(models.leakage, "leakage");
  const auto [m1, s1] = d.predict(c);
  const auto [m2, s2] = l.predict(c);
  j["dispersion"] = {{"mean", m1}, {"std", s1}};
  j["leakage"] = {{"mean", m2}, {"std", s2}};
  if (models.conversion) {
    const auto [mc, sc] = models.conversion->predict(c);
    j["conversion"] = {{"mean", mc}, {"std", sc}};
    j["p_constraint"] = hitl::p_constraint(mc, s.config.tau);
  } else {
    j["conversion"] = nullptr;
    j["p_constraint"] = nullptr;
  }
  return j;
}

}  // namespace hitlbo::report
