#include "hitlbo/campaign.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "hitlbo/error.hpp"
#include "hitlbo/rng.hpp"

namespace hitlbo::campaign {

namespace {

// Stream tags for read-only model fits (never consume rng_counter).
constexpr std::uint64_t kReadOnlyDispersion = 0xD15;
constexpr std::uint64_t kReadOnlyLeakage = 0x1EA;
constexpr std::uint64_t kReadOnlyConversion = 0xC0;
constexpr std::uint64_t kReadOnlyPool = 0x9001;

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

struct TrainingSet {
  std::vector<std::string> ids;
  std::vector<ProcessCondition> inputs;
  std::vector<double> targets;
  std::vector<double> reported_std;
};

TrainingSet objective_data(const CampaignState& state, const std::string& target) {
  TrainingSet t;
  for (const auto& o : state.observations) {
    if (!o.functional()) continue;
    const auto& m = target == "dispersion" ? *o.dispersion : *o.leakage;
    t.ids.push_back(o.id);
    t.inputs.push_back(o.condition);
    t.targets.push_back(m.mean);
    t.reported_std.push_back(m.std);
  }
  return t;
}

TrainingSet conversion_data(const CampaignState& state) {
  TrainingSet t;
  for (const auto& o : state.observations) {
    if (!o.label) continue;
    t.ids.push_back(o.id);
    t.inputs.push_back(o.condition);
    t.targets.push_back(hitl::score_to_value(*o.label));
  }
  return t;
}

gp::FitConfig objective_fit_config(const CampaignState& state, const TrainingSet& data,
                                   std::uint64_t seed) {
  gp::FitConfig fc;
  fc.restarts = state.config.gp_restarts;
  fc.seed = seed;
  if (state.config.noise_floor_from_measurements && !data.reported_std.empty()) {
    const auto stdz = gp::Standardization::of(data.targets);
    double mean_var = 0.0;
    for (double s : data.reported_std) mean_var += s * s;
    mean_var /= static_cast<double>(data.reported_std.size());
    fc.noise_floor = mean_var / (stdz.scale * stdz.scale);
  }
  return fc;
}

gp::SurrogateModel fit_objective(const CampaignState& state, const TrainingSet& data,
                                 std::uint64_t seed) {
  return gp::fit(state.space, data.inputs, data.targets, objective_fit_config(state, data, seed));
}

gp::SurrogateModel fit_conversion(const CampaignState& state, const TrainingSet& data,
                                  std::uint64_t seed) {
  gp::FitConfig fc;
  fc.restarts = state.config.gp_restarts;
  fc.seed = seed;
  fc.pinned_noise = state.config.conversion_noise;
  return hitl::fit_conversion_model(state.space, data.inputs, data.targets, fc);
}

ModelSnapshot snapshot_of(std::size_t round, const std::string& target,
                          const gp::SurrogateModel& model, const TrainingSet& data) {
  ModelSnapshot s;
  s.round = round;
  s.target = target;
  s.hyperparams = model.hyperparams();
  s.standardization = model.standardization();
  s.training_ids = data.ids;
  s.jitter = model.jitter();
  return s;
}

design::ConditionSet tested_conditions(const CampaignState& state) {
  design::ConditionSet set;
  for (const auto& o : state.observations) set.insert(design::key_of(o.condition));
  return set;
}

std::string allocate_id(CampaignState& state) {
  for (;;) {
    std::string id = std::to_string(state.next_id++);
    if (!state.has_observation(id)) return id;
  }
}

RoundStatus derive_status(const CampaignState& state, const RoundRecord& round) {
  bool pending_objectives = false;
  for (const auto& id : round.suggested) {
    const auto& o = state.observation(id);
    if (!o.label) return RoundStatus::PendingScores;
    if (hitl::admits_measurement(*o.label) && !o.functional() && !o.unmeasurable) {
      pending_objectives = true;
    }
  }
  return pending_objectives ? RoundStatus::PendingObjectives : RoundStatus::Complete;
}

Observation& latest_round_observation(CampaignState& state, const std::string& id) {
  auto& o = state.observation(id);
  if (state.rounds.empty() || o.round != state.rounds.back().index) {
    throw ConflictError("observation '" + id + "' belongs to round " + std::to_string(o.round) +
                        ", which is no longer the latest round");
  }
  return o;
}

}  // namespace

std::string to_string(RoundStrategy s) {
  switch (s) {
    case RoundStrategy::Lhs: return "LHS";
    case RoundStrategy::EhviGreedy: return "EHVI_GREEDY";
    case RoundStrategy::ParetoUcb: return "PARETO_UCB";
  }
  return "LHS";
}

RoundStrategy round_strategy_from_string(const std::string& s) {
  const auto u = upper(s);
  if (u == "LHS") return RoundStrategy::Lhs;
  if (u == "EHVI_GREEDY") return RoundStrategy::EhviGreedy;
  if (u == "PARETO_UCB") return RoundStrategy::ParetoUcb;
  throw ParseError("unknown round strategy '" + s + "'");
}

std::string to_string(RoundStatus s) {
  switch (s) {
    case RoundStatus::PendingScores: return "PENDING_SCORES";
    case RoundStatus::PendingObjectives: return "PENDING_OBJECTIVES";
    case RoundStatus::Complete: return "COMPLETE";
  }
  return "PENDING_SCORES";
}

RoundStatus round_status_from_string(const std::string& s) {
  const auto u = upper(s);
  if (u == "PENDING_SCORES") return RoundStatus::PendingScores;
  if (u == "PENDING_OBJECTIVES") return RoundStatus::PendingObjectives;
  if (u == "COMPLETE") return RoundStatus::Complete;
  throw ParseError("unknown round status '" + s + "'");
}

Measurement parse_measurement(const std::string& text) {
  std::string t;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
  }
  static const std::string kPlusMinus = "\xC2\xB1";  // UTF-8 '±'
  std::string mean_part = t, std_part;
  if (auto pos = t.find(kPlusMinus); pos != std::string::npos) {
    mean_part = t.substr(0, pos);
    std_part = t.substr(pos + kPlusMinus.size());
  } else if (auto pos2 = t.find("+-"); pos2 != std::string::npos) {
    mean_part = t.substr(0, pos2);
    std_part = t.substr(pos2 + 2);
  }
  auto number = [&](const std::string& s) {
    // strtod honours the C locale, which the library never changes.
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
      throw ParseError("cannot parse measurement '" + text + "' (expected mean±std)");
    }
    return v;
  };
  Measurement m;
  m.mean = number(mean_part);
  m.std = std_part.empty() ? 0.0 : number(std_part);
  if (m.std < 0.0) throw ParseError("measurement std must be non-negative in '" + text + "'");
  return m;
}

void Observation::validate() const {
  if (id.empty()) throw InvariantError("observation id must not be empty");
  if (dispersion.has_value() != leakage.has_value()) {
    throw InvariantError("observation '" + id + "': both objectives must be present or absent");
  }
  if (label && !hitl::admits_measurement(*label) && functional()) {
    throw InvariantError("observation '" + id + "': a " + hitl::to_string(*label) +
                         " film cannot carry objective measurements");
  }
  if (unmeasurable && functional()) {
    throw InvariantError("observation '" + id + "': marked unmeasurable but has objectives");
  }
  for (const auto* m : {&dispersion, &leakage}) {
    if (*m && (!std::isfinite((*m)->mean) || !std::isfinite((*m)->std) || (*m)->std < 0.0)) {
      throw InvariantError("observation '" + id + "': measurements must be finite with std >= 0");
    }
  }
  if (device_count < 1) throw InvariantError("observation '" + id + "': device_count must be >= 1");
}

void CampaignConfig::validate(const ParameterSpace& space) const {
  if (q < 1) throw ParameterError("batch size q must be at least 1");
  if (!(beta >= 0.0)) throw ParameterError("beta must be non-negative");
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (pool_size < 1) throw ParameterError("pool_size must be at least 1");
  if (gp_restarts < 1) throw ParameterError("gp_restarts must be at least 1");
  if (conversion_noise && !(*conversion_noise >= 0.0)) {
    throw ParameterError("conversion_noise must be non-negative");
  }
  design::CandidateGrid(space, candidate_steps);
}

const Observation& CampaignState::observation(const std::string& id) const {
  for (const auto& o : observations) {
    if (o.id == id) return o;
  }
  throw NotFoundError("no observation with id '" + id + "'");
}

Observation& CampaignState::observation(const std::string& id) {
  for (auto& o : observations) {
    if (o.id == id) return o;
  }
  throw NotFoundError("no observation with id '" + id + "'");
}

bool CampaignState::has_observation(const std::string& id) const {
  return std::any_of(observations.begin(), observations.end(),
                     [&](const Observation& o) { return o.id == id; });
}

const RoundRecord& CampaignState::latest_round() const {
  if (rounds.empty()) throw StateError("the campaign has no rounds yet");
  return rounds.back();
}

std::uint64_t CampaignState::next_stream() { return derive_seed(config.seed, rng_counter++); }

void CampaignState::validate() const {
  space.validate();
  config.validate(space);
  std::set<std::string> ids;
  design::ConditionSet conditions;
  for (const auto& o : observations) {
    o.validate();
    design::check_in_bounds(o.condition, space);
    if (!ids.insert(o.id).second) throw InvariantError("duplicate observation id '" + o.id + "'");
    if (!conditions.insert(design::key_of(o.condition)).second) {
      throw InvariantError("duplicate condition " + to_string(o.condition) + " (id '" + o.id + "')");
    }
  }
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    const auto& r = rounds[k];
    if (r.index != k) throw InvariantError("round indices must be consecutive from 0");
    if (k == 0 && r.strategy != RoundStrategy::Lhs) {
      throw InvariantError("round 0 must be an LHS round");
    }
    for (const auto& id : r.suggested) {
      if (!ids.contains(id)) throw InvariantError("round " + std::to_string(k) + " references unknown id '" + id + "'");
      if (observation(id).round != k) {
        throw InvariantError("observation '" + id + "' is listed in round " + std::to_string(k) +
                             " but records round " + std::to_string(observation(id).round));
      }
    }
    if (derive_status(*this, r) != r.status) {
      throw InvariantError("round " + std::to_string(k) + " status is stale");
    }
  }
  for (const auto& s : model_snapshots) {
    for (const auto& id : s.training_ids) {
      if (!ids.contains(id)) throw InvariantError("snapshot references unknown id '" + id + "'");
    }
  }
}

CampaignState create_campaign(const ParameterSpace& space, const CampaignConfig& config) {
  space.validate();
  config.validate(space);
  CampaignState s;
  s.space = space;
  s.config = config;
  return s;
}

CampaignState start_campaign(const ParameterSpace& space, const CampaignConfig& config,
                             std::size_t n_init) {
  if (n_init < 2) throw ParameterError("n_init must be at least 2");
  CampaignState s = create_campaign(space, config);
  const auto design = design::lhs_sample(space, n_init, s.next_stream());
  RoundRecord round;
  round.index = 0;
  round.strategy = RoundStrategy::Lhs;
  round.hitl_enabled = false;
  for (const auto& c : design) {
    Observation o;
    o.id = allocate_id(s);
    o.condition = c;
    o.round = 0;
    round.suggested.push_back(o.id);
    s.observations.push_back(std::move(o));
  }
  round.status = RoundStatus::PendingScores;
  s.rounds.push_back(std::move(round));
  s.validate();
  return s;
}

const RoundRecord& suggest_round(CampaignState& state, const SuggestOptions& options) {
  if (state.rounds.empty()) {
    throw StateError("no data yet: start the campaign with an LHS design or ingest a dataset");
  }
  if (state.rounds.back().status != RoundStatus::Complete) {
    throw StateError("round " + std::to_string(state.rounds.back().index) + " is " +
                     to_string(state.rounds.back().status) + "; finish it before suggesting");
  }
  const std::size_t k = state.rounds.size();
  ScheduleEntry plan{state.config.strategy, state.config.hitl};
  if (k - 1 < state.config.schedule.size()) plan = state.config.schedule[k - 1];
  if (options.strategy) plan.strategy = *options.strategy;
  if (options.hitl) plan.hitl = *options.hitl;
  const std::size_t q = options.q.value_or(state.config.q);
  if (q < 1) throw ParameterError("batch size q must be at least 1");

  const auto disp_data = objective_data(state, "dispersion");
  const auto leak_data = objective_data(state, "leakage");
  if (disp_data.ids.size() < 2) {
    throw StateError("only " + std::to_string(disp_data.ids.size()) +
                     " functional observation(s); the objective models need at least 2. "
                     "Sample more initial conditions (larger --n-init) before suggesting.");
  }

  // Work on a copy so that a failure leaves the state untouched.
  CampaignState next = state;
  const auto disp_model = fit_objective(next, disp_data, next.next_stream());
  const auto leak_model = fit_objective(next, leak_data, next.next_stream());

  std::optional<gp::SurrogateModel> conv_model;
  TrainingSet conv_data;
  if (plan.hitl) {
    conv_data = conversion_data(next);
    if (conv_data.ids.size() < 2) {
      throw StateError("HITL needs at least 2 scored observations for the conversion model");
    }
    conv_model = fit_conversion(next, conv_data, next.next_stream());
  }

  const design::CandidateGrid grid(next.space, next.config.candidate_steps);
  const auto exclude = tested_conditions(next);
  const auto pool =
      design::sample_candidates(grid, next.config.pool_size, next.next_stream(), exclude);
  if (pool.empty()) throw ExhaustionError("every candidate condition has already been tested");

  std::vector<double> p;
  if (conv_model) p = hitl::constraint_map(*conv_model, pool, next.config.tau);
  std::optional<std::span<const double>> p_span;
  if (conv_model) p_span = std::span<const double>(p);

  acq::AcquisitionConfig ac;
  ac.strategy = plan.strategy;
  ac.beta = next.config.beta;
  ac.q = q;
  ac.ref = next.config.ref;
  ac.constraint_enabled = plan.hitl;
  const acq::ObjectiveModels models{disp_model, leak_model};
  const auto picks =
      plan.strategy == acq::Strategy::EhviGreedy
          ? acq::ehvi_greedy_batch(models, pool, measured_front(next), ac, p_span, exclude)
          : acq::pareto_ucb_batch(models, pool, ac, p_span, exclude);

  RoundRecord round;
  round.index = k;
  round.strategy = plan.strategy == acq::Strategy::EhviGreedy ? RoundStrategy::EhviGreedy
                                                              : RoundStrategy::ParetoUcb;
  round.hitl_enabled = plan.hitl;
  for (const auto& pick : picks) {
    Observation o;
    o.id = allocate_id(next);
    o.condition = pool[pick.candidate];
    o.round = k;
    round.suggested.push_back(o.id);
    next.observations.push_back(std::move(o));
  }
  round.status = RoundStatus::PendingScores;
  next.rounds.push_back(std::move(round));
  next.model_snapshots.push_back(snapshot_of(k, "dispersion", disp_model, disp_data));
  next.model_snapshots.push_back(snapshot_of(k, "leakage", leak_model, leak_data));
  if (conv_model) next.model_snapshots.push_back(snapshot_of(k, "conversion", *conv_model, conv_data));
  next.validate();
  state = std::move(next);
  return state.rounds.back();
}

void refresh_statuses(CampaignState& state) {
  for (auto& r : state.rounds) r.status = derive_status(state, r);
}

void score(CampaignState& state, const std::string& id, hitl::ConversionLabel label) {
  auto& o = latest_round_observation(state, id);
  Observation updated = o;
  updated.label = label;
  updated.validate();
  o = std::move(updated);
  refresh_statuses(state);
}

void record_objectives(CampaignState& state, const std::string& id, const Measurement& dispersion,
                       const Measurement& leakage) {
  auto& o = latest_round_observation(state, id);
  Observation updated = o;
  updated.dispersion = dispersion;
  updated.leakage = leakage;
  updated.unmeasurable = false;
  updated.validate();
  o = std::move(updated);
  refresh_statuses(state);
}

void mark_unmeasurable(CampaignState& state, const std::string& id) {
  auto& o = latest_round_observation(state, id);
  Observation updated = o;
  updated.dispersion.reset();
  updated.leakage.reset();
  updated.unmeasurable = true;
  updated.validate();
  o = std::move(updated);
  refresh_statuses(state);
}

void record_results(CampaignState& state, std::size_t round, std::span<const ResultEntry> entries) {
  if (state.rounds.empty() || round != state.rounds.back().index) {
    throw ConflictError("round " + std::to_string(round) + " is not the latest round");
  }
  const auto& suggested = state.rounds.back().suggested;
  CampaignState next = state;
  for (const auto& e : entries) {
    if (std::find(suggested.begin(), suggested.end(), e.id) == suggested.end()) {
      throw NotFoundError("id '" + e.id + "' was not suggested in round " + std::to_string(round));
    }
    if (e.label) score(next, e.id, *e.label);
    if (e.unmeasurable) {
      mark_unmeasurable(next, e.id);
    } else if (e.dispersion || e.leakage) {
      if (!e.dispersion || !e.leakage) {
        throw InvariantError("id '" + e.id + "': both objectives must be supplied together");
      }
      record_objectives(next, e.id, *e.dispersion, *e.leakage);
    }
  }
  state = std::move(next);
}

ConvergenceReport check_convergence(const CampaignState& state, std::size_t round) {
  if (round >= state.rounds.size()) throw NotFoundError("no round " + std::to_string(round));
  const auto& r = state.rounds[round];
  if (r.status != RoundStatus::Complete) {
    throw StateError("round " + std::to_string(round) + " is not complete");
  }
  const ModelSnapshot* snaps[2] = {nullptr, nullptr};
  for (const auto& s : state.model_snapshots) {
    if (s.round != round) continue;
    if (s.target == "dispersion") snaps[0] = &s;
    if (s.target == "leakage") snaps[1] = &s;
  }
  if (!snaps[0] || !snaps[1]) {
    throw StateError("round " + std::to_string(round) +
                     " has no model snapshot (it was not suggested by the models)");
  }
  const auto m1 = rebuild_snapshot(state, *snaps[0]);
  const auto m2 = rebuild_snapshot(state, *snaps[1]);

  ConvergenceReport report;
  report.round = round;
  for (const auto& id : r.suggested) {
    const auto& o = state.observation(id);
    if (!o.functional()) continue;
    PointConvergence pc;
    pc.id = id;
    pc.measured = {o.dispersion->mean, o.leakage->mean};
    const auto [mu1, sd1] = m1.predict(o.condition);
    const auto [mu2, sd2] = m2.predict(o.condition);
    pc.predicted_mean = {mu1, mu2};
    pc.predicted_std = {sd1, sd2};
    for (std::size_t j = 0; j < 2; ++j) {
      pc.within[j] = std::abs(pc.measured[j] - pc.predicted_mean[j]) <= pc.predicted_std[j];
    }
    report.points.push_back(pc);
  }
  if (report.points.empty()) {
    throw StateError("round " + std::to_string(round) + " has no functional results to compare");
  }
  report.converged = std::all_of(report.points.begin(), report.points.end(),
                                 [](const PointConvergence& p) { return p.within[0] && p.within[1]; });
  return report;
}

std::vector<double> hypervolume_history(const CampaignState& state) {
  std::vector<double> history;
  std::size_t last_round = state.rounds.empty() ? 0 : state.rounds.size() - 1;
  for (const auto& o : state.observations) last_round = std::max(last_round, o.round);
  if (state.rounds.empty() && state.observations.empty()) return {0.0};
  for (std::size_t k = 0; k <= last_round; ++k) {
    std::vector<pareto::ObjectivePoint> pts;
    for (const auto& o : state.observations) {
      if (o.round <= k && o.functional()) pts.push_back({o.dispersion->mean, o.leakage->mean});
    }
    history.push_back(pareto::hypervolume_2d(pts, state.config.ref));
  }
  return history;
}

std::vector<MeasuredPoint> measured_points(const CampaignState& state) {
  std::vector<MeasuredPoint> out;
  std::vector<pareto::ObjectivePoint> values;
  for (const auto& o : state.observations) {
    if (!o.functional()) continue;
    out.push_back({o.id, {o.dispersion->mean, o.leakage->mean}, {o.dispersion->std, o.leakage->std}, false});
    values.push_back(out.back().value);
  }
  for (auto i : pareto::nondominated(values)) out[i].pareto_optimal = true;
  return out;
}

pareto::ParetoFront measured_front(const CampaignState& state) {
  std::vector<pareto::ObjectivePoint> values;
  for (const auto& o : state.observations) {
    if (o.functional()) values.push_back({o.dispersion->mean, o.leakage->mean});
  }
  return pareto::ParetoFront(values, state.config.ref);
}

FittedModels fit_current_models(const CampaignState& state) {
  FittedModels m;
  const auto disp = objective_data(state, "dispersion");
  if (disp.ids.size() >= 2) {
    m.dispersion = fit_objective(state, disp, derive_seed(state.config.seed, kReadOnlyDispersion));
    m.leakage = fit_objective(state, objective_data(state, "leakage"),
                              derive_seed(state.config.seed, kReadOnlyLeakage));
  }
  const auto conv = conversion_data(state);
  if (conv.ids.size() >= 2) {
    m.conversion = fit_conversion(state, conv, derive_seed(state.config.seed, kReadOnlyConversion));
  }
  return m;
}

gp::SurrogateModel rebuild_snapshot(const CampaignState& state, const ModelSnapshot& snapshot) {
  std::vector<ProcessCondition> inputs;
  std::vector<double> targets;
  for (const auto& id : snapshot.training_ids) {
    const auto& o = state.observation(id);
    inputs.push_back(o.condition);
    if (snapshot.target == "conversion") {
      if (!o.label) throw StateError("snapshot references unscored observation '" + id + "'");
      targets.push_back(std::clamp(hitl::score_to_value(*o.label), -1.0, 1.0));
    } else {
      if (!o.functional()) throw StateError("snapshot references non-functional observation '" + id + "'");
      targets.push_back(snapshot.target == "dispersion" ? o.dispersion->mean : o.leakage->mean);
    }
  }
  return gp::SurrogateModel::build(state.space, std::move(inputs), std::move(targets),
                                   snapshot.hyperparams, snapshot.standardization);
}

std::vector<ModelFrontPoint> model_front(const CampaignState& state, const FittedModels& models,
                                         std::size_t pool_size) {
  if (!models.dispersion || !models.leakage) {
    throw StateError("the objective models need at least 2 functional observations");
  }
  const design::CandidateGrid grid(state.space, state.config.candidate_steps);
  auto pool = design::sample_candidates(grid, pool_size, derive_seed(state.config.seed, kReadOnlyPool), {});
  for (const auto& o : state.observations) pool.push_back(o.condition);
  const auto p1 = acq::posterior_chunked(*models.dispersion, pool);
  const auto p2 = acq::posterior_chunked(*models.leakage, pool);
  std::vector<pareto::ObjectivePoint> means(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) means[i] = {p1.mean[i], p2.mean[i]};
  std::vector<ModelFrontPoint> out;
  for (auto i : pareto::nondominated(means)) {
    out.push_back({pool[i], means[i], {p1.std[i], p2.std[i]}});
  }
  std::sort(out.begin(), out.end(),
            [](const ModelFrontPoint& a, const ModelFrontPoint& b) { return a.mean.f1 < b.mean.f1; });
  return out;
}

}  // namespace hitlbo::campaign
