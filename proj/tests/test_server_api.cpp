#include <gtest/gtest.h>

#include <future>
#include <stop_token>
#include <thread>

#include "hitlbo/campaign.hpp"
#include "hitlbo/dataset.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/oracle_sim.hpp"
#include "hitlbo/server_api.hpp"

// After the Eigen headers: resolv.h defines a macro that clashes with them.
#include <httplib.h>

using namespace hitlbo;
using nlohmann::json;

namespace {

campaign::CampaignConfig small_config() {
  campaign::CampaignConfig c;
  c.seed = 6;
  c.pool_size = 512;
  c.gp_restarts = 3;
  return c;
}

campaign::CampaignState replay() {
  auto s = campaign::create_campaign(ParameterSpace::photonic_curing(), small_config());
  dataset::ingest(s, dataset::read_dataset(std::string(HITLBO_DATA_DIR) + "/curing_dataset.csv", s.space));
  return s;
}

api::ApiResponse get(api::CampaignService& svc, const std::string& path,
                     std::map<std::string, std::string> query = {}) {
  return svc.handle({"GET", path, std::move(query), {}, ""});
}

api::ApiResponse post(api::CampaignService& svc, const std::string& path, const json& body,
                      std::map<std::string, std::string> headers = {},
                      std::map<std::string, std::string> query = {}) {
  return svc.handle({"POST", path, std::move(query), std::move(headers), body.dump()});
}

std::string error_code(const api::ApiResponse& r) { return json::parse(r.body).at("error").at("code"); }

}  // namespace

TEST(ServerApi, StatusMapping) {
  EXPECT_EQ(api::status_for(NotFoundError("x")), 404);
  EXPECT_EQ(api::status_for(ConflictError("x")), 409);
  EXPECT_EQ(api::status_for(StateError("x")), 409);
  EXPECT_EQ(api::status_for(ParseError("x")), 400);
  EXPECT_EQ(api::status_for(InvariantError("x")), 422);
  EXPECT_EQ(api::status_for(RangeError("x")), 422);
  EXPECT_EQ(api::status_for(std::runtime_error("x")), 500);
  const auto r = api::error_response(NotFoundError("no such id"));
  const auto doc = json::parse(r.body);
  EXPECT_EQ(doc.at("error").at("status"), 404);
  EXPECT_EQ(doc.at("error").at("message"), "no such id");
}

TEST(ServerApi, ReadsOnReplay) {
  api::CampaignService svc(replay());
  auto r = get(svc, "/campaign");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto summary = json::parse(r.body);
  EXPECT_EQ(summary.at("ready_to_suggest"), true);
  EXPECT_EQ(json::parse(get(svc, "/rounds").body).at("rounds").size(), 6u);
  EXPECT_EQ(get(svc, "/rounds/2").status, 200);
  EXPECT_EQ(get(svc, "/rounds/17").status, 404);
  EXPECT_EQ(get(svc, "/rounds/abc").status, 404);
  EXPECT_EQ(json::parse(get(svc, "/hypervolume").body).at("history").size(), 6u);
  r = get(svc, "/pareto");
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_FALSE(json::parse(r.body).at("model_front").empty());
  r = get(svc, "/shap", {{"target", "dispersion"}});
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(get(svc, "/shap", {{"target", "voltage"}}).status / 100, 4);
  r = get(svc, "/acq-map", {{"pair", "0,1"}});
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_TRUE(json::parse(r.body).contains("constrained"));
  EXPECT_EQ(get(svc, "/constraint-map", {{"pair", "0,0"}}).status / 100, 4);
  EXPECT_EQ(get(svc, "/nowhere").status, 404);
  EXPECT_EQ(svc.handle({"OPTIONS", "/scores", {}, {}, ""}).status, 204);
  r = get(svc, "/spec");
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(json::parse(r.body).at("paths").contains("/rounds/next"));
}

TEST(ServerApi, MutationErrors) {
  auto start = campaign::start_campaign(ParameterSpace::photonic_curing(), small_config(), 6);
  api::CampaignService svc(start);
  const auto id = start.rounds[0].suggested[0];
  auto r = post(svc, "/scores", {{"id", "nope"}, {"label", "burned"}});
  EXPECT_EQ(r.status, 404);
  r = post(svc, "/scores", {{"id", id}, {"label", "burned"}});
  ASSERT_EQ(r.status, 200) << r.body;
  r = post(svc, "/observations", {{"id", id}, {"dispersion", "1.5±0.1"}, {"leakage", "4.0±0.2"}});
  EXPECT_EQ(r.status, 422) << r.body;
  EXPECT_FALSE(svc.snapshot()->observation(id).dispersion.has_value());
  r = svc.handle({"POST", "/scores", {}, {}, "{not json"});
  EXPECT_EQ(r.status, 400);
  r = post(svc, "/scores", {{"id", id}, {"label", "charred"}});
  EXPECT_EQ(r.status, 400);
  r = post(svc, "/rounds/next", json::object());
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(error_code(r), "state_conflict");
}

TEST(ServerApi, IdempotentRetries) {
  auto start = campaign::start_campaign(ParameterSpace::photonic_curing(), small_config(), 6);
  api::CampaignService svc(start);
  const auto id = start.rounds[0].suggested[2];
  const auto first = post(svc, "/scores", {{"id", id}, {"label", 0.5}}, {{"idempotency-key", "k1"}});
  ASSERT_EQ(first.status, 200);
  const auto after = svc.snapshot();
  const auto again = post(svc, "/scores", {{"id", id}, {"label", 0.5}}, {{"idempotency-key", "k1"}});
  EXPECT_EQ(again.body, first.body);
  EXPECT_EQ(svc.snapshot(), after);
  const auto token = post(svc, "/scores", {{"id", id}, {"label", "converted"}, {"client_token", "t"}});
  ASSERT_EQ(token.status, 200);
  const auto replayed = post(svc, "/scores", {{"id", id}, {"label", "burned"}, {"client_token", "t"}});
  EXPECT_EQ(replayed.body, token.body);
  EXPECT_EQ(*svc.snapshot()->observation(id).label, hitl::ConversionLabel::Converted);
}

TEST(ServerApi, AsyncSuggestAndStaleRound) {
  auto start = campaign::start_campaign(ParameterSpace::photonic_curing(), small_config(), 16);
  sim::run_round(start, sim::SyntheticLab{});
  api::CampaignService svc(start);
  auto r = post(svc, "/rounds/next", {{"q", 2}});
  ASSERT_EQ(r.status, 202) << r.body;
  EXPECT_EQ(json::parse(r.body).at("poll"), "/rounds/1");
  svc.wait_idle();
  r = get(svc, "/rounds/1");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto round = json::parse(r.body);
  EXPECT_EQ(round.at("observations").size(), 2u);

  const auto old_id = start.rounds[0].suggested[0];
  r = post(svc, "/scores", {{"id", old_id}, {"label", "burned"}});
  EXPECT_EQ(r.status, 409) << r.body;
  EXPECT_EQ(error_code(r), "stale_round");
  r = post(svc, "/rounds/next", json::object(), {}, {{"wait", "true"}});
  EXPECT_EQ(r.status, 409);
}

TEST(ServerApi, SuggestFailureIsReported) {
  auto start = campaign::start_campaign(ParameterSpace::photonic_curing(), small_config(), 3);
  for (const auto& id : start.rounds[0].suggested) campaign::score(start, id, hitl::ConversionLabel::Burned);
  api::CampaignService svc(start);
  auto r = post(svc, "/rounds/next", json::object(), {}, {{"wait", "true"}});
  EXPECT_EQ(r.status, 409) << r.body;
  r = get(svc, "/rounds/1");
  EXPECT_EQ(json::parse(r.body).at("status"), "FAILED");
  EXPECT_EQ(svc.snapshot()->rounds.size(), 1u);
}

TEST(ServerApi, WhatIfAtConvertedTrainingPoint) {
  auto s = replay();
  s.config.conversion_noise = 1e-8;
  api::CampaignService svc(s);
  // Condition 33 of round 1a was scored converted.
  const auto& o = s.observation("33");
  ASSERT_EQ(o.label, hitl::ConversionLabel::Converted);
  json cond = json::array();
  for (double v : o.condition.values) cond.push_back(v);
  const auto r = post(svc, "/whatif", {{"condition", cond}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = json::parse(r.body);
  EXPECT_NEAR(doc.at("p_constraint").get<double>(), 1.0, 1e-3);
  EXPECT_LT(doc.at("conversion").at("std").get<double>(), 1e-3);
  EXPECT_LT(doc.at("dispersion").at("std").get<double>(), 0.5);
  EXPECT_EQ(post(svc, "/whatif", {{"condition", json::array({9.9, 14, 8, 21, 70})}}).status, 422);
}

TEST(ServerApi, HttpRoundTrip) {
  api::CampaignService svc(replay());
  std::promise<int> bound;
  std::stop_source stop;
  api::ServeOptions opt;
  opt.port = 0;
  opt.on_bound = [&](int port) { bound.set_value(port); };
  opt.stop = stop.get_token();
  std::thread server([&] { api::serve(svc, opt); });
  const int port = bound.get_future().get();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/campaign");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  auto bad = client.Post("/scores", R"({"id":"zzz","label":"burned"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 404);
  auto pre = client.Options("/scores");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  stop.request_stop();
  server.join();
}
