#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "hitlbo/campaign_io.hpp"
#include "hitlbo/cli.hpp"
#include "hitlbo/oracle_sim.hpp"
#include "hitlbo/server_api.hpp"

using namespace hitlbo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hitlbo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("hitlbo_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    file_ = (dir_ / "campaign.json").string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string file_;
};

}  // namespace

TEST_F(CliTest, InitThenStatus) {
  const auto init = invoke({"init", "-c", file_, "--seed", "2"});
  ASSERT_EQ(init.code, 0) << init.err;
  const auto status = invoke({"status", "-c", file_, "--json"});
  ASSERT_EQ(status.code, 0) << status.err;
  const auto doc = nlohmann::json::parse(status.out);
  EXPECT_EQ(doc.at("pending_count").get<int>(), 30);
  EXPECT_EQ(invoke({"init", "-c", file_}).code, cli::kDomain);
  EXPECT_EQ(invoke({"init", "-c", file_, "--force"}).code, 0);
}

TEST_F(CliTest, ObjectivesOnBurnedFilmRejected) {
  ASSERT_EQ(invoke({"init", "-c", file_, "--seed", "2"}).code, 0);
  const auto before = read_file(file_);
  ASSERT_EQ(invoke({"score", "-c", file_, "12", "burned"}).code, 0);
  const auto scored = read_file(file_);
  EXPECT_NE(scored, before);
  const auto rec = invoke({"record", "-c", file_, "12", "1.5±0.1", "4.0±0.2"});
  EXPECT_EQ(rec.code, cli::kDomain);
  EXPECT_FALSE(rec.err.empty());
  EXPECT_EQ(read_file(file_), scored);
  EXPECT_EQ(invoke({"score", "-c", file_, "999", "burned"}).code, cli::kDomain);
  EXPECT_EQ(invoke({"score", "-c", file_, "12", "toasted"}).code, cli::kIo);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"status", "--bogus"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"--help"}).code, 0);
  for (const char* verb : {"init", "ingest", "suggest", "score", "record", "status", "pareto", "hypervolume",
                           "converged", "shap", "acq-map", "whatif", "simulate", "benchmark", "serve",
                           "export"}) {
    const auto r = invoke({verb, "--help"});
    EXPECT_EQ(r.code, 0) << verb;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << verb;
  }
}

TEST_F(CliTest, MissingAndCorruptCampaign) {
  EXPECT_EQ(invoke({"status", "-c", file_}).code, cli::kIo);
  { std::ofstream(file_) << "{\"version\": \"1.0.0\", "; }
  EXPECT_EQ(invoke({"status", "-c", file_}).code, cli::kIo);
}

TEST_F(CliTest, SuggestBeforeScoresIsDomainError) {
  ASSERT_EQ(invoke({"init", "-c", file_, "--n-init", "8"}).code, 0);
  EXPECT_EQ(invoke({"suggest", "-c", file_}).code, cli::kDomain);
}

TEST_F(CliTest, IngestReplayAndReports) {
  ASSERT_EQ(invoke({"init", "-c", file_, "--empty"}).code, 0);
  const auto ing = invoke({"ingest", "-c", file_, std::string(HITLBO_DATA_DIR) + "/curing_dataset.csv"});
  ASSERT_EQ(ing.code, 0) << ing.err;
  const auto hv = invoke({"hypervolume", "-c", file_, "--json"});
  ASSERT_EQ(hv.code, 0) << hv.err;
  EXPECT_EQ(nlohmann::json::parse(hv.out).at("history").size(), 6u);
  EXPECT_EQ(invoke({"pareto", "-c", file_, "--json"}).code, 0);
  const auto w = invoke({"whatif", "-c", file_, "4.0", "14", "8", "21", "70", "--json"});
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_TRUE(nlohmann::json::parse(w.out).contains("p_constraint"));
  const auto shap = invoke({"shap", "-c", file_, "--target", "leakage", "--json"});
  ASSERT_EQ(shap.code, 0) << shap.err;
  const auto exp = invoke({"export", "-c", file_, "--dir", (dir_ / "fig").string()});
  ASSERT_EQ(exp.code, 0) << exp.err;
  for (const char* f : {"observations.csv", "hypervolume.csv", "pareto_measured.csv", "model_front.csv",
                        "shap_dispersion.csv", "shap_leakage.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "fig" / f)) << f;
  }
  EXPECT_EQ(invoke({"whatif", "-c", file_, "9.0", "14", "8", "21", "70"}).code, cli::kDomain);
}

TEST_F(CliTest, BenchmarkCsv) {
  const auto r = invoke({"benchmark", "--ab", "--seeds", "2", "--n-init", "16", "--q", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "arm,seed,round,yield,hypervolume");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 12u);
  EXPECT_NE(r.err.find("hitl"), std::string::npos);
}

TEST_F(CliTest, TwoRunsGiveIdenticalFiles) {
  const auto other = (dir_ / "again.json").string();
  for (const auto& f : {file_, other}) {
    ASSERT_EQ(invoke({"init", "-c", f, "--seed", "21", "--n-init", "14"}).code, 0);
    ASSERT_EQ(invoke({"simulate", "-c", f, "--cycles", "1"}).code, 0);
  }
  EXPECT_EQ(read_file(file_), read_file(other));
}

TEST_F(CliTest, CliAndApiWriteIdenticalCampaigns) {
  ASSERT_EQ(invoke({"init", "-c", file_, "--seed", "8", "--n-init", "14"}).code, 0);
  const auto start = campaign::load(file_);

  const auto api_file = (dir_ / "api.json").string();
  api::CampaignService service(start, api_file);
  const sim::SyntheticLab lab;
  for (const auto& id : start.rounds[0].suggested) {
    const auto out = sim::simulate_condition(lab, start.observation(id).condition);
    const std::string label = hitl::to_string(out.label);
    ASSERT_EQ(invoke({"score", "-c", file_, id, label}).code, 0);
    auto resp = service.handle({"POST", "/scores", {}, {},
                                nlohmann::json{{"id", id}, {"label", label}}.dump()});
    ASSERT_EQ(resp.status, 200) << resp.body;
    if (out.dispersion) {
      auto pm = [](const campaign::Measurement& m) {
        std::ostringstream s;
        s.precision(17);
        s << m.mean << "+-" << m.std;
        return s.str();
      };
      ASSERT_EQ(invoke({"record", "-c", file_, id, pm(*out.dispersion), pm(*out.leakage)}).code, 0);
      nlohmann::json body{{"id", id},
                          {"dispersion", {{"mean", out.dispersion->mean}, {"std", out.dispersion->std}}},
                          {"leakage", {{"mean", out.leakage->mean}, {"std", out.leakage->std}}}};
      resp = service.handle({"POST", "/observations", {}, {}, body.dump()});
      ASSERT_EQ(resp.status, 200) << resp.body;
    } else if (hitl::admits_measurement(out.label)) {
      ASSERT_EQ(invoke({"record", "-c", file_, id, "--unmeasurable"}).code, 0);
      resp = service.handle({"POST", "/observations", {}, {}, R"({"id":")" + id + R"(","unmeasurable":true})"});
      ASSERT_EQ(resp.status, 200) << resp.body;
    }
  }
  EXPECT_EQ(read_file(file_), read_file(api_file));
  ASSERT_EQ(invoke({"suggest", "-c", file_}).code, 0);
  const auto resp = service.handle({"POST", "/rounds/next", {{"wait", "true"}}, {}, ""});
  ASSERT_EQ(resp.status, 201) << resp.body;
  EXPECT_EQ(read_file(file_), read_file(api_file));
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = HITLBO_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  auto code = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + quiet).c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(code("--help"), 0);
  EXPECT_EQ(code("nonsense"), cli::kUsage);
  EXPECT_EQ(code("status -c " + file_), cli::kIo);
  EXPECT_EQ(code("init -c " + file_ + " --n-init 6"), 0);
  EXPECT_EQ(code("suggest -c " + file_), cli::kDomain);
  const std::string env = "HITLBO_CAMPAIGN=" + file_ + " ";
  EXPECT_EQ(std::system((env + bin + " status" + quiet).c_str()), 0);
}
