#include "hitlbo/server_api.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>

#include <httplib.h>

#include "hitlbo/campaign_io.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/reports.hpp"

namespace hitlbo::api {

using nlohmann::json;
using Json = nlohmann::ordered_json;

namespace {

ApiResponse json_response(int status, const Json& body) {
  return ApiResponse{status, body.dump(), "application/json"};
}

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    auto doc = json::parse(body);
    if (!doc.is_object()) throw ParseError("request body must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  const auto& v = body.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError(std::string("field '") + key + "' must be a string");
}

hitl::ConversionLabel label_field(const json& body) {
  if (!body.contains("label")) throw ParseError("missing field 'label'");
  const auto& v = body.at("label");
  if (v.is_number()) {
    const double x = v.get<double>();
    if (!(x >= -1.0 && x <= 1.0)) throw ParseError("score must lie in [-1, 1]");
    return hitl::value_to_nearest_label(x);
  }
  if (v.is_string()) return hitl::label_from_string(v.get<std::string>());
  throw ParseError("field 'label' must be a label name or a score");
}

campaign::Measurement measurement_field(const json& body, const char* key) {
  if (!body.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  const auto& v = body.at(key);
  if (v.is_string()) return campaign::parse_measurement(v.get<std::string>());
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_object() && v.contains("mean") && v.at("mean").is_number()) {
    campaign::Measurement m{v.at("mean").get<double>(), 0.0};
    if (v.contains("std")) {
      if (!v.at("std").is_number()) throw ParseError(std::string(key) + ".std must be a number");
      m.std = v.at("std").get<double>();
    }
    return m;
  }
  throw ParseError(std::string("field '") + key + "' must be \"mean±std\" or {mean, std}");
}

ProcessCondition condition_field(const campaign::CampaignState& s, const json& body) {
  if (!body.contains("condition")) throw ParseError("missing field 'condition'");
  const auto& v = body.at("condition");
  ProcessCondition c;
  if (v.is_array() && v.size() == kNumParams) {
    for (std::size_t i = 0; i < kNumParams; ++i) {
      if (!v[i].is_number()) throw ParseError("condition entries must be numbers");
      c[i] = v[i].get<double>();
    }
    return c;
  }
  if (v.is_object()) {
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const auto& name = s.space.params[i].name;
      if (!v.contains(name) || !v.at(name).is_number()) {
        throw ParseError("condition is missing numeric '" + name + "'");
      }
      c[i] = v.at(name).get<double>();
    }
    return c;
  }
  throw ParseError("condition must be an array of 5 numbers or an object keyed by parameter name");
}

std::optional<std::string> idempotency_key(const ApiRequest& req, const json& body) {
  if (auto it = req.headers.find("idempotency-key"); it != req.headers.end() && !it->second.empty()) {
    return req.method + " " + req.path + " " + it->second;
  }
  if (body.contains("client_token") && body.at("client_token").is_string()) {
    return req.method + " " + req.path + " " + body.at("client_token").get<std::string>();
  }
  return std::nullopt;
}

std::string query(const ApiRequest& req, const char* key, std::string fallback = {}) {
  const auto it = req.query.find(key);
  return it == req.query.end() ? fallback : it->second;
}

bool truthy(const std::string& s) { return s == "1" || s == "true" || s == "yes"; }

}  // namespace

int status_for(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const StateError*>(&e)) return 409;
  if (dynamic_cast<const ExhaustionError*>(&e)) return 409;
  if (dynamic_cast<const ParseError*>(&e)) return 400;
  if (dynamic_cast<const InvariantError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const RangeError*>(&e)) {
    return 422;
  }
  return 500;
}

std::string code_for(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return "not_found";
  if (dynamic_cast<const ConflictError*>(&e)) return "stale_round";
  if (dynamic_cast<const StateError*>(&e)) return "state_conflict";
  if (dynamic_cast<const ExhaustionError*>(&e)) return "exhausted";
  if (dynamic_cast<const ParseError*>(&e)) return "bad_request";
  if (dynamic_cast<const InvariantError*>(&e)) return "invariant_violation";
  if (dynamic_cast<const ValidationError*>(&e)) return "invalid_config";
  if (dynamic_cast<const ParameterError*>(&e)) return "invalid_parameter";
  if (dynamic_cast<const RangeError*>(&e)) return "out_of_range";
  if (dynamic_cast<const FittingError*>(&e)) return "fitting_failed";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical_failure";
  return "internal_error";
}

ApiResponse error_response(const std::exception& e) {
  const int status = status_for(e);
  return json_response(status, Json{{"error", {{"status", status}, {"code", code_for(e)}, {"message", e.what()}}}});
}

struct CampaignService::Models {
  campaign::FittedModels fitted;
};

CampaignService::CampaignService(campaign::CampaignState state, std::string path)
    : path_(std::move(path)),
      state_(std::make_shared<const campaign::CampaignState>(std::move(state))) {}

std::unique_ptr<CampaignService> CampaignService::open(const std::string& path) {
  return std::make_unique<CampaignService>(campaign::load(path), path);
}

CampaignService::~CampaignService() {
  if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const campaign::CampaignState> CampaignService::snapshot() const {
  std::lock_guard lock(state_mutex_);
  return state_;
}

void CampaignService::wait_idle() {
  std::unique_lock lock(writer_mutex_);
  idle_cv_.wait(lock, [&] { return !computing_; });
}

void CampaignService::publish(campaign::CampaignState next) {
  if (!path_.empty()) campaign::save(next, path_);
  auto ptr = std::make_shared<const campaign::CampaignState>(std::move(next));
  std::lock_guard lock(state_mutex_);
  state_ = std::move(ptr);
}

std::shared_ptr<const CampaignService::Models> CampaignService::models_for(
    const std::shared_ptr<const campaign::CampaignState>& s) {
  std::lock_guard lock(models_mutex_);
  if (models_key_ != s) {
    auto m = std::make_shared<Models>();
    m->fitted = campaign::fit_current_models(*s);
    models_ = std::move(m);
    models_key_ = s;
  }
  return models_;
}

ApiResponse CampaignService::handle(const ApiRequest& request) {
  try {
    return route(request);
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

ApiResponse CampaignService::mutate(const ApiRequest& request,
                                    const std::function<Json(campaign::CampaignState&)>& op) {
  const auto body = parse_body(request.body);
  const auto key = idempotency_key(request, body);
  if (key) {
    std::lock_guard lock(idempotency_mutex_);
    if (auto it = idempotency_.find(*key); it != idempotency_.end()) return it->second;
  }
  ApiResponse response;
  {
    std::lock_guard lock(writer_mutex_);
    if (computing_) {
      throw StateError("a suggestion for round " + std::to_string(computing_round_) +
                       " is being computed; retry when it has finished");
    }
    campaign::CampaignState next = *snapshot();
    try {
      response = json_response(200, op(next));
    } catch (const std::exception& e) {
      response = error_response(e);
    }
    if (response.status == 200) publish(std::move(next));
  }
  if (key) {
    std::lock_guard lock(idempotency_mutex_);
    idempotency_.emplace(*key, response);
  }
  return response;
}

ApiResponse CampaignService::start_suggestion(const ApiRequest& request) {
  const auto body = parse_body(request.body);
  const auto key = idempotency_key(request, body);
  if (key) {
    std::lock_guard lock(idempotency_mutex_);
    if (auto it = idempotency_.find(*key); it != idempotency_.end()) return it->second;
  }
  campaign::SuggestOptions options;
  if (body.contains("strategy")) options.strategy = acq::strategy_from_string(string_field(body, "strategy"));
  if (body.contains("hitl")) {
    if (!body.at("hitl").is_boolean()) throw ParseError("field 'hitl' must be a boolean");
    options.hitl = body.at("hitl").get<bool>();
  }
  if (body.contains("q")) {
    if (!body.at("q").is_number_integer() || body.at("q").get<long long>() < 1) {
      throw ParameterError("q must be a positive integer");
    }
    options.q = body.at("q").get<std::size_t>();
  }
  const bool wait = truthy(query(request, "wait"));

  std::size_t k = 0;
  {
    std::lock_guard lock(writer_mutex_);
    if (computing_) {
      throw StateError("round " + std::to_string(computing_round_) + " is already being computed");
    }
    const auto current = snapshot();
    if (current->rounds.empty()) throw StateError("the campaign has no data yet");
    if (current->rounds.back().status != campaign::RoundStatus::Complete) {
      throw StateError("round " + std::to_string(current->rounds.back().index) + " is " +
                       campaign::to_string(current->rounds.back().status) +
                       "; finish it before suggesting");
    }
    k = current->rounds.size();
    computing_ = true;
    computing_round_ = k;
    failed_suggestion_.reset();
    if (worker_.joinable()) worker_.join();
    worker_ = std::jthread([this, current, options, k] {
      std::optional<ApiResponse> failure;
      campaign::CampaignState next = *current;
      try {
        campaign::suggest_round(next, options);
      } catch (const std::exception& e) {
        failure = error_response(e);
      }
      std::lock_guard guard(writer_mutex_);
      if (!failure) {
        try {
          publish(std::move(next));
        } catch (const std::exception& e) {
          failure = error_response(e);
        }
      }
      if (failure) {
        failed_suggestion_ = failure;
        failed_round_ = k;
      }
      computing_ = false;
      idle_cv_.notify_all();
    });
  }

  ApiResponse response;
  if (wait) {
    wait_idle();
    response = get_round(k);
    if (response.status == 200) response.status = 201;
  } else {
    response = json_response(
        202, Json{{"round", k}, {"status", "COMPUTING"}, {"poll", "/rounds/" + std::to_string(k)}});
  }
  if (key) {
    std::lock_guard lock(idempotency_mutex_);
    idempotency_.emplace(*key, response);
  }
  return response;
}

ApiResponse CampaignService::get_round(std::size_t k) {
  {
    std::lock_guard lock(writer_mutex_);
    if (computing_ && k == computing_round_) {
      return json_response(200, Json{{"index", k}, {"status", "COMPUTING"}});
    }
    if (failed_suggestion_ && k == failed_round_) {
      auto r = *failed_suggestion_;
      auto body = json::parse(r.body);
      body["index"] = k;
      body["status"] = "FAILED";
      r.body = body.dump();
      return r;
    }
  }
  const auto s = snapshot();
  if (k >= s->rounds.size()) throw NotFoundError("no round " + std::to_string(k));
  return json_response(200, report::round(*s, s->rounds[k], true));
}

ApiResponse CampaignService::route(const ApiRequest& req) {
  const auto seg = segments(req.path);
  const auto& m = req.method;
  if (m == "OPTIONS") return ApiResponse{204, "", "text/plain"};

  if (m == "GET") {
    if (seg.size() == 1 && seg[0] == "spec") return json_response(200, openapi_document());
    const auto s = snapshot();
    if (seg.size() == 1 && seg[0] == "campaign") return json_response(200, report::campaign_summary(*s));
    if (seg.size() == 1 && seg[0] == "rounds") return json_response(200, report::rounds(*s));
    if (seg.size() == 2 && seg[0] == "rounds") {
      const auto& t = seg[1];
      if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        throw NotFoundError("no round '" + t + "'");
      }
      return get_round(std::stoul(t));
    }
    if (seg.size() == 1 && seg[0] == "hypervolume") return json_response(200, report::hypervolume(*s));
    if (seg.size() == 1 && seg[0] == "pareto") {
      return json_response(200, report::pareto(*s, models_for(s)->fitted));
    }
    if (seg.size() == 1 && seg[0] == "convergence") {
      std::optional<std::size_t> round;
      if (const auto r = query(req, "round"); !r.empty()) {
        try {
          round = std::stoul(r);
        } catch (const std::exception&) {
          throw ParseError("round must be a non-negative integer");
        }
      }
      return json_response(200, report::convergence(*s, round));
    }
    if (seg.size() == 1 && seg[0] == "shap") {
      const auto summary = report::shap(*s, models_for(s)->fitted, query(req, "target", "leakage"));
      return json_response(200, report::shap_json(summary));
    }
    if (seg.size() == 1 && (seg[0] == "acq-map" || seg[0] == "constraint-map")) {
      const auto slice = report::parse_slice(query(req, "pair"), query(req, "fixed"));
      const auto& models = models_for(s)->fitted;
      return json_response(200, seg[0] == "acq-map" ? report::acquisition_map(*s, models, slice)
                                                    : report::constraint_map(*s, models, slice));
    }
    throw NotFoundError("no resource GET " + req.path);
  }

  if (m == "POST") {
    if (seg.size() == 2 && seg[0] == "rounds" && seg[1] == "next") return start_suggestion(req);
    if (seg.size() == 1 && seg[0] == "scores") {
      return mutate(req, [&](campaign::CampaignState& st) {
        const auto body = parse_body(req.body);
        const auto id = string_field(body, "id");
        campaign::score(st, id, label_field(body));
        return report::observation(st, st.observation(id));
      });
    }
    if (seg.size() == 1 && seg[0] == "observations") {
      return mutate(req, [&](campaign::CampaignState& st) {
        const auto body = parse_body(req.body);
        const auto id = string_field(body, "id");
        const bool unmeasurable = body.contains("unmeasurable") && body.at("unmeasurable").is_boolean() &&
                                  body.at("unmeasurable").get<bool>();
        if (unmeasurable) {
          campaign::mark_unmeasurable(st, id);
        } else {
          campaign::record_objectives(st, id, measurement_field(body, "dispersion"),
                                      measurement_field(body, "leakage"));
        }
        return report::observation(st, st.observation(id));
      });
    }
    if (seg.size() == 1 && seg[0] == "whatif") {
      const auto s = snapshot();
      const auto body = parse_body(req.body);
      return json_response(200, report::whatif(*s, models_for(s)->fitted, condition_field(*s, body)));
    }
    throw NotFoundError("no resource POST " + req.path);
  }
  throw NotFoundError("unsupported method " + m);
}

Json openapi_document() {
  auto op = [](const char* summary, std::initializer_list<int> codes) {
    Json responses = Json::object();
    for (int c : codes) responses[std::to_string(c)] = {{"description", c < 300 ? "success" : "error"}};
    return Json{{"summary", summary}, {"responses", responses}};
  };
  Json paths = Json::object();
  paths["/campaign"]["get"] = op("Campaign summary with the latest round", {200});
  paths["/rounds"]["get"] = op("All rounds", {200});
  paths["/rounds/{k}"]["get"] = op("One round with its observations; status COMPUTING while a suggestion runs", {200, 404});
  paths["/rounds/next"]["post"] = op("Start the next suggestion; body {strategy?, hitl?, q?, client_token?}; ?wait=true blocks", {201, 202, 409, 422});
  paths["/scores"]["post"] = op("Score a film; body {id, label}", {200, 400, 404, 409, 422});
  paths["/observations"]["post"] = op("Record objectives; body {id, dispersion, leakage} or {id, unmeasurable: true}", {200, 400, 404, 409, 422});
  paths["/pareto"]["get"] = op("Measured points, measured front and model front with std band", {200});
  paths["/hypervolume"]["get"] = op("Dominated hypervolume after each round", {200});
  paths["/convergence"]["get"] = op("Convergence check of a completed round (?round=k)", {200, 404, 409});
  paths["/shap"]["get"] = op("Shapley summary (?target=dispersion|leakage|conversion)", {200, 409, 422});
  paths["/acq-map"]["get"] = op("Raw and constrained acquisition grids (?pair=i,j&fixed=a,b,c)", {200, 409, 422});
  paths["/constraint-map"]["get"] = op("Constraint probability grid (?pair=i,j&fixed=a,b,c)", {200, 409, 422});
  paths["/whatif"]["post"] = op("Posterior and constraint probability at {condition}", {200, 400, 409, 422});
  paths["/spec"]["get"] = op("This document", {200});
  return Json{{"openapi", "3.0.3"},
              {"info", {{"title", "hitlbo campaign API"}, {"version", campaign::kSchemaVersion}}},
              {"paths", paths}};
}

bool serve(CampaignService& service, const ServeOptions& options) {
  httplib::Server server;
  if (!options.static_dir.empty()) server.set_mount_point("/ui", options.static_dir);
  auto adapt = [&](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    for (const auto& [k, v] : req.headers) {
      std::string name = k;
      std::transform(name.begin(), name.end(), name.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      r.headers[name] = v;
    }
    r.body = req.body;
    const auto out = service.handle(r);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
    if (!out.body.empty()) res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/.*)", adapt);
  server.Post(R"(/.*)", adapt);
  server.Options(R"(/.*)", adapt);
  const int port = options.port == 0 ? server.bind_to_any_port(options.host)
                                     : (server.bind_to_port(options.host, options.port) ? options.port : -1);
  if (port < 0) return false;
  if (options.on_bound) options.on_bound(port);
  std::atomic<bool> finished = false;
  std::jthread watcher;
  if (options.stop.stop_possible()) {
    // stop() is ignored until the accept loop runs, so keep asking.
    watcher = std::jthread([&, stop = options.stop] {
      std::mutex m;
      std::condition_variable_any cv;
      std::unique_lock lock(m);
      cv.wait(lock, stop, [] { return false; });
      while (!finished) {
        server.stop();
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    });
  }
  const bool ok = server.listen_after_bind();
  finished = true;
  return ok;
}

}  // namespace hitlbo::api
