#include "hitlbo/campaign_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "hitlbo/error.hpp"

namespace hitlbo::campaign {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class T>
T get(const json& doc, const char* key, const std::string& ctx) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ParseError(ctx + ": missing field '" + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& doc, const char* key, T fallback, const std::string& ctx) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  return get<T>(doc, key, ctx);
}

ordered_json measurement_json(const std::optional<Measurement>& m) {
  if (!m) return nullptr;
  return ordered_json{{"mean", m->mean}, {"std", m->std}};
}

std::optional<Measurement> measurement_from(const json& doc, const char* key, const std::string& ctx) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  const auto& m = doc.at(key);
  return Measurement{get<double>(m, "mean", ctx + "." + key), get<double>(m, "std", ctx + "." + key)};
}

ordered_json condition_json(const ProcessCondition& c) {
  auto arr = ordered_json::array();
  for (double v : c.values) arr.push_back(v);
  return arr;
}

ProcessCondition condition_from(const json& doc, const std::string& ctx) {
  if (!doc.is_array() || doc.size() != kNumParams) {
    throw ParseError(ctx + ": condition must be an array of " + std::to_string(kNumParams) + " numbers");
  }
  ProcessCondition c;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!doc[i].is_number()) throw ParseError(ctx + ": condition entries must be numbers");
    c.values[i] = doc[i].get<double>();
  }
  return c;
}

Observation observation_from(const json& doc, std::size_t i) {
  const std::string ctx = "observations[" + std::to_string(i) + "]";
  Observation o;
  o.id = get<std::string>(doc, "id", ctx);
  o.condition = condition_from(doc.contains("condition") ? doc.at("condition") : json(), ctx);
  if (doc.contains("pulse_voltage") && !doc.at("pulse_voltage").is_null()) {
    o.pulse_voltage = get<double>(doc, "pulse_voltage", ctx);
  }
  if (doc.contains("label") && !doc.at("label").is_null()) {
    o.label = hitl::label_from_string(get<std::string>(doc, "label", ctx));
  }
  o.dispersion = measurement_from(doc, "dispersion", ctx);
  o.leakage = measurement_from(doc, "leakage", ctx);
  o.unmeasurable = get_or<bool>(doc, "unmeasurable", false, ctx);
  o.round = get<std::size_t>(doc, "round", ctx);
  o.round_tag = get_or<std::string>(doc, "round_tag", "", ctx);
  o.device_count = get_or<int>(doc, "device_count", 5, ctx);
  return o;
}

ordered_json hyperparams_json(const gp::KernelHyperparams& hp) {
  return ordered_json{{"lengthscales", hp.lengthscales},
                      {"signal_variance", hp.signal_variance},
                      {"noise_variance", hp.noise_variance}};
}

gp::KernelHyperparams hyperparams_from(const json& doc, const std::string& ctx) {
  gp::KernelHyperparams hp;
  const auto ls = get<std::vector<double>>(doc, "lengthscales", ctx);
  if (ls.size() != kNumParams) throw ParseError(ctx + ": expected 5 lengthscales");
  std::copy(ls.begin(), ls.end(), hp.lengthscales.begin());
  hp.signal_variance = get<double>(doc, "signal_variance", ctx);
  hp.noise_variance = get<double>(doc, "noise_variance", ctx);
  return hp;
}

}  // namespace

ordered_json to_json(const ParameterSpace& space) {
  auto params = ordered_json::array();
  for (const auto& p : space.params) {
    params.push_back(ordered_json{
        {"name", p.name}, {"unit", p.unit}, {"min", p.min}, {"max", p.max}, {"step", p.step}});
  }
  return ordered_json{{"parameters", params}};
}

ParameterSpace space_from_json(const json& doc) {
  const std::string ctx = "space";
  if (!doc.is_object() || !doc.contains("parameters") || !doc.at("parameters").is_array() ||
      doc.at("parameters").size() != kNumParams) {
    throw ParseError(ctx + ": expected 'parameters' with " + std::to_string(kNumParams) + " entries");
  }
  ParameterSpace space;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = doc.at("parameters")[i];
    const auto pctx = ctx + ".parameters[" + std::to_string(i) + "]";
    space.params[i].name = get<std::string>(p, "name", pctx);
    space.params[i].unit = get_or<std::string>(p, "unit", "", pctx);
    space.params[i].min = get<double>(p, "min", pctx);
    space.params[i].max = get<double>(p, "max", pctx);
    space.params[i].step = get<double>(p, "step", pctx);
  }
  space.validate();
  return space;
}

ordered_json to_json(const CampaignConfig& c) {
  auto schedule = ordered_json::array();
  for (const auto& s : c.schedule) {
    schedule.push_back(ordered_json{{"strategy", acq::to_string(s.strategy)}, {"hitl", s.hitl}});
  }
  return ordered_json{{"strategy", acq::to_string(c.strategy)},
                      {"beta", c.beta},
                      {"q", c.q},
                      {"tau", c.tau},
                      {"hitl", c.hitl},
                      {"ref", {c.ref.f1, c.ref.f2}},
                      {"seed", c.seed},
                      {"candidate_steps", c.candidate_steps},
                      {"pool_size", c.pool_size},
                      {"gp_restarts", c.gp_restarts},
                      {"noise_floor_from_measurements", c.noise_floor_from_measurements},
                      {"conversion_noise", c.conversion_noise ? ordered_json(*c.conversion_noise)
                                                              : ordered_json(nullptr)},
                      {"schedule", schedule}};
}

CampaignConfig config_from_json(const json& doc, CampaignConfig c) {
  const std::string ctx = "config";
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  if (doc.contains("strategy")) c.strategy = acq::strategy_from_string(get<std::string>(doc, "strategy", ctx));
  c.beta = get_or<double>(doc, "beta", c.beta, ctx);
  c.q = get_or<std::size_t>(doc, "q", c.q, ctx);
  c.tau = get_or<double>(doc, "tau", c.tau, ctx);
  c.hitl = get_or<bool>(doc, "hitl", c.hitl, ctx);
  if (doc.contains("ref")) {
    const auto ref = get<std::vector<double>>(doc, "ref", ctx);
    if (ref.size() != 2) throw ParseError("config.ref must have two numbers");
    c.ref = {ref[0], ref[1]};
  }
  c.seed = get_or<std::uint64_t>(doc, "seed", c.seed, ctx);
  if (doc.contains("candidate_steps")) {
    const auto steps = get<std::vector<double>>(doc, "candidate_steps", ctx);
    if (steps.size() != kNumParams) throw ParseError("config.candidate_steps must have 5 numbers");
    std::copy(steps.begin(), steps.end(), c.candidate_steps.begin());
  }
  c.pool_size = get_or<std::size_t>(doc, "pool_size", c.pool_size, ctx);
  c.gp_restarts = get_or<int>(doc, "gp_restarts", c.gp_restarts, ctx);
  c.noise_floor_from_measurements =
      get_or<bool>(doc, "noise_floor_from_measurements", c.noise_floor_from_measurements, ctx);
  if (doc.contains("conversion_noise")) {
    const auto& v = doc.at("conversion_noise");
    if (v.is_null()) {
      c.conversion_noise.reset();
    } else {
      c.conversion_noise = get<double>(doc, "conversion_noise", ctx);
    }
  }
  if (doc.contains("schedule")) {
    c.schedule.clear();
    for (const auto& s : doc.at("schedule")) {
      ScheduleEntry e;
      e.strategy = acq::strategy_from_string(get<std::string>(s, "strategy", "config.schedule"));
      e.hitl = get_or<bool>(s, "hitl", true, "config.schedule");
      c.schedule.push_back(e);
    }
  }
  return c;
}

ordered_json to_json(const Observation& o) {
  ordered_json j{{"id", o.id}, {"condition", condition_json(o.condition)}};
  j["pulse_voltage"] = o.pulse_voltage ? ordered_json(*o.pulse_voltage) : ordered_json(nullptr);
  j["label"] = o.label ? ordered_json(hitl::to_string(*o.label)) : ordered_json(nullptr);
  j["dispersion"] = measurement_json(o.dispersion);
  j["leakage"] = measurement_json(o.leakage);
  j["unmeasurable"] = o.unmeasurable;
  j["round"] = o.round;
  j["round_tag"] = o.round_tag;
  j["device_count"] = o.device_count;
  return j;
}

ordered_json to_json(const CampaignState& s) {
  ordered_json doc;
  doc["version"] = kSchemaVersion;
  doc["space"] = to_json(s.space);
  doc["config"] = to_json(s.config);
  doc["rng_counter"] = s.rng_counter;
  doc["next_id"] = s.next_id;
  auto obs = ordered_json::array();
  for (const auto& o : s.observations) obs.push_back(to_json(o));
  doc["observations"] = obs;
  auto rounds = ordered_json::array();
  for (const auto& r : s.rounds) {
    rounds.push_back(ordered_json{{"index", r.index},
                                  {"strategy", to_string(r.strategy)},
                                  {"hitl_enabled", r.hitl_enabled},
                                  {"suggested", r.suggested},
                                  {"status", to_string(r.status)},
                                  {"tag", r.tag},
                                  {"ingested", r.ingested}});
  }
  doc["rounds"] = rounds;
  auto snaps = ordered_json::array();
  for (const auto& m : s.model_snapshots) {
    snaps.push_back(ordered_json{
        {"round", m.round},
        {"target", m.target},
        {"hyperparams", hyperparams_json(m.hyperparams)},
        {"standardization", {{"mean", m.standardization.mean}, {"scale", m.standardization.scale}}},
        {"training_ids", m.training_ids},
        {"jitter", m.jitter}});
  }
  doc["model_snapshots"] = snaps;
  return doc;
}

static const json& array_field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError("campaign: missing field '" + std::string(key) + "'");
  const auto& a = doc.at(key);
  if (!a.is_array()) throw ParseError("campaign: field '" + std::string(key) + "' must be an array");
  return a;
}

CampaignState from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("campaign file must hold a JSON object");
  const auto version = get<std::string>(doc, "version", "campaign");
  int major = -1;
  try {
    major = std::stoi(version.substr(0, version.find('.')));
  } catch (const std::exception&) {
    throw ParseError("campaign version '" + version + "' is not a semantic version");
  }
  if (major != kSchemaMajor) {
    throw VersionError("campaign file has schema version " + version + " but this build reads " +
                       std::to_string(kSchemaMajor) + ".x; refusing to load");
  }
  CampaignState s;
  s.space = space_from_json(doc.contains("space") ? doc.at("space") : json());
  s.config = config_from_json(doc.contains("config") ? doc.at("config") : json());
  s.rng_counter = get<std::uint64_t>(doc, "rng_counter", "campaign");
  s.next_id = get<std::uint64_t>(doc, "next_id", "campaign");
  const auto& obs = array_field(doc, "observations");
  for (std::size_t i = 0; i < obs.size(); ++i) s.observations.push_back(observation_from(obs[i], i));
  const auto& rounds = array_field(doc, "rounds");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const auto& r = rounds[i];
    const std::string ctx = "rounds[" + std::to_string(i) + "]";
    RoundRecord rec;
    rec.index = get<std::size_t>(r, "index", ctx);
    rec.strategy = round_strategy_from_string(get<std::string>(r, "strategy", ctx));
    rec.hitl_enabled = get<bool>(r, "hitl_enabled", ctx);
    rec.suggested = get<std::vector<std::string>>(r, "suggested", ctx);
    rec.status = round_status_from_string(get<std::string>(r, "status", ctx));
    rec.tag = get_or<std::string>(r, "tag", "", ctx);
    rec.ingested = get_or<bool>(r, "ingested", false, ctx);
    s.rounds.push_back(std::move(rec));
  }
  const auto& snaps = array_field(doc, "model_snapshots");
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& m = snaps[i];
    const std::string ctx = "model_snapshots[" + std::to_string(i) + "]";
    ModelSnapshot snap;
    snap.round = get<std::size_t>(m, "round", ctx);
    snap.target = get<std::string>(m, "target", ctx);
    snap.hyperparams = hyperparams_from(m.contains("hyperparams") ? m.at("hyperparams") : json(), ctx);
    const auto& st = m.contains("standardization") ? m.at("standardization") : json();
    snap.standardization.mean = get<double>(st, "mean", ctx + ".standardization");
    snap.standardization.scale = get<double>(st, "scale", ctx + ".standardization");
    snap.training_ids = get<std::vector<std::string>>(m, "training_ids", ctx);
    snap.jitter = get<double>(m, "jitter", ctx);
    s.model_snapshots.push_back(std::move(snap));
  }
  s.validate();
  return s;
}

std::string dump(const CampaignState& state) { return to_json(state).dump(2) + "\n"; }

CampaignState parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("campaign file is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

void save(const CampaignState& state, const std::string& path) {
  const std::string text = dump(state);
  const std::filesystem::path target(path);
  auto tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw ParseError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ParseError("cannot replace '" + path + "': " + ec.message());
  }
}

CampaignState load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open campaign file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace hitlbo::campaign
