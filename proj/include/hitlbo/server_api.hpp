#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <stop_token>
#include <thread>

#include <json.hpp>

#include "hitlbo/campaign.hpp"

namespace hitlbo::api {

struct ApiRequest {
  std::string method;  // "GET", "POST", "OPTIONS"
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// {"error": {"status", "code", "message"}} for a library exception.
ApiResponse error_response(const std::exception& e);
int status_for(const std::exception& e);
std::string code_for(const std::exception& e);

nlohmann::ordered_json openapi_document();

// Owns one campaign. Reads work on immutable snapshots; every mutation runs
// on a private copy under the writer lock, is persisted, then published by
// swapping the snapshot pointer. POST /rounds/next computes on a worker
// thread; GET /rounds/{k} reports COMPUTING until it lands.
class CampaignService {
 public:
  // An empty path keeps the campaign in memory only.
  explicit CampaignService(campaign::CampaignState state, std::string path = {});
  static std::unique_ptr<CampaignService> open(const std::string& path);
  ~CampaignService();

  CampaignService(const CampaignService&) = delete;
  CampaignService& operator=(const CampaignService&) = delete;

  ApiResponse handle(const ApiRequest& request);

  std::shared_ptr<const campaign::CampaignState> snapshot() const;
  // Blocks until no suggestion is being computed.
  void wait_idle();

 private:
  struct Models;

  ApiResponse route(const ApiRequest& request);
  ApiResponse mutate(const ApiRequest& request,
                     const std::function<nlohmann::ordered_json(campaign::CampaignState&)>& op);
  ApiResponse start_suggestion(const ApiRequest& request);
  ApiResponse get_round(std::size_t k);
  std::shared_ptr<const Models> models_for(const std::shared_ptr<const campaign::CampaignState>& s);
  void publish(campaign::CampaignState next);

  std::string path_;
  mutable std::mutex state_mutex_;
  std::shared_ptr<const campaign::CampaignState> state_;

  std::mutex writer_mutex_;
  std::condition_variable idle_cv_;
  bool computing_ = false;
  std::size_t computing_round_ = 0;
  std::optional<ApiResponse> failed_suggestion_;
  std::size_t failed_round_ = 0;
  std::jthread worker_;

  std::mutex idempotency_mutex_;
  std::map<std::string, ApiResponse> idempotency_;

  std::mutex models_mutex_;
  std::shared_ptr<const campaign::CampaignState> models_key_;
  std::shared_ptr<const Models> models_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::string static_dir;  // served under /ui when set
  // Port 0 picks a free port; on_bound receives the bound port.
  std::function<void(int)> on_bound;
  // Requesting a stop shuts the server down.
  std::stop_token stop;
};

// Blocks until the server stops. Returns false when the socket could not
// be bound.
bool serve(CampaignService& service, const ServeOptions& options);

}  // namespace hitlbo::api
