#include "hitlbo/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "hitlbo/campaign.hpp"
#include "hitlbo/campaign_io.hpp"
#include "hitlbo/dataset.hpp"
#include "hitlbo/error.hpp"
#include "hitlbo/oracle_sim.hpp"
#include "hitlbo/reports.hpp"
#include "hitlbo/server_api.hpp"

namespace hitlbo::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string fixed(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string pm(const std::optional<campaign::Measurement>& m) {
  return m ? fixed(m->mean, 3) + "+-" + fixed(m->std, 3) : "-";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ParseError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ParseError("failed writing '" + path + "'");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string csv_grid(const Json& map, const std::vector<std::pair<std::string, const Json*>>& layers) {
  std::ostringstream out;
  out.precision(17);
  const auto names = map.at("names");
  out << names[0].get<std::string>() << ',' << names[1].get<std::string>();
  for (const auto& [name, _] : layers) out << ',' << name;
  out << '\n';
  const auto& xs = map.at("xs");
  const auto& ys = map.at("ys");
  for (std::size_t r = 0; r < ys.size(); ++r) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      out << xs[c].get<double>() << ',' << ys[r].get<double>();
      for (const auto& [_, grid] : layers) out << ',' << (*grid)[r][c].get<double>();
      out << '\n';
    }
  }
  return out.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const VersionError*>(&e)) return kIo;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const FittingError*>(&e)) return kInternal;
  if (dynamic_cast<const Error*>(&e)) return kDomain;
  return kInternal;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string campaign_path;

  campaign::CampaignState load() const { return campaign::load(campaign_path); }
  void save(const campaign::CampaignState& s) const { campaign::save(s, campaign_path); }
};

void print_round(std::ostream& out, const campaign::CampaignState& s, const campaign::RoundRecord& r) {
  out << "round " << r.index << (r.tag.empty() ? "" : " [" + r.tag + "]") << "  "
      << campaign::to_string(r.strategy) << (r.hitl_enabled ? " +HITL" : "") << "  "
      << campaign::to_string(r.status) << "\n";
  for (const auto& id : r.suggested) {
    const auto& o = s.observation(id);
    out << "  " << std::setw(5) << id << "  " << to_string(o.condition) << "  "
        << (o.label ? hitl::to_string(*o.label) : std::string("(unscored)"));
    if (o.functional()) out << "  dispersion " << pm(o.dispersion) << "  leakage " << pm(o.leakage);
    if (o.unmeasurable) out << "  unmeasurable";
    out << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-objective Bayesian optimization of photonic curing with human feasibility scores"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every verb");

  Context ctx{out, err, {}};
  const char* env = std::getenv(kCampaignEnv);
  ctx.campaign_path = env && *env ? env : "campaign.json";
  app.add_option("-c,--campaign", ctx.campaign_path,
                 std::string("Campaign file (default $") + kCampaignEnv + " or campaign.json)");

  bool json = false;
  auto json_flag = [&](CLI::App* sub) { sub->add_flag("--json", json, "Machine-readable JSON output"); };

  app.fallthrough();  // -c may follow the verb

  // init
  auto* init = app.add_subcommand("init", "Create a campaign and its initial LHS round");
  std::string space_file, config_file, strategy_name;
  std::size_t n_init = 30;
  std::uint64_t seed = 0;
  std::optional<std::size_t> q_opt;
  std::optional<double> beta_opt, tau_opt;
  bool no_hitl = false, empty = false, force = false;
  init->add_option("--space", space_file, "Parameter space JSON");
  init->add_option("--config", config_file, "Campaign config JSON");
  init->add_option("--n-init", n_init, "Number of initial LHS conditions")->check(CLI::Range(2, 100000));
  init->add_option("--seed", seed, "Campaign seed");
  init->add_option("--strategy", strategy_name, "EHVI_GREEDY or PARETO_UCB");
  init->add_option("--q", q_opt, "Batch size")->check(CLI::PositiveNumber);
  init->add_option("--beta", beta_opt, "UCB exploration weight");
  init->add_option("--tau", tau_opt, "Constraint width");
  init->add_flag("--no-hitl", no_hitl, "Disable the human-in-the-loop constraint");
  init->add_flag("--empty", empty, "No LHS round (for ingesting existing data)");
  init->add_flag("--force", force, "Overwrite an existing campaign file");

  auto* ingest = app.add_subcommand("ingest", "Append rows of a dataset CSV as completed rounds");
  std::string csv_path;
  std::vector<std::string> round_tags;
  ingest->add_option("csv", csv_path, "Dataset CSV")->required();
  ingest->add_option("--rounds", round_tags, "Only these round labels (e.g. 0,1a)")->delimiter(',');

  auto* suggest = app.add_subcommand("suggest", "Fit the models and suggest the next batch");
  std::string hitl_mode;
  suggest->add_option("--strategy", strategy_name, "Override: EHVI_GREEDY or PARETO_UCB");
  suggest->add_option("--hitl", hitl_mode, "Override: on or off")->check(CLI::IsMember({"on", "off"}));
  suggest->add_option("--q", q_opt, "Override batch size")->check(CLI::PositiveNumber);
  json_flag(suggest);

  auto* score = app.add_subcommand("score", "Record the conversion score of a film");
  std::string id, label_text;
  score->add_option("id", id, "Condition id")->required();
  score->add_option("label", label_text, "unconverted|partially_converted|converted|partially_burned|burned or -1..1")
      ->required();

  auto* record = app.add_subcommand("record", "Record measured objectives (mean+-std)");
  std::string disp_text, leak_text;
  bool unmeasurable = false;
  record->add_option("id", id, "Condition id")->required();
  record->add_option("dispersion", disp_text, "C100Hz/C1MHz as mean+-std");
  record->add_option("leakage", leak_text, "|log10 I| as mean+-std");
  record->add_flag("--unmeasurable", unmeasurable, "The film yielded no working devices");

  auto* status = app.add_subcommand("status", "Summary and the latest round");
  json_flag(status);

  auto* pareto = app.add_subcommand("pareto", "Measured and model Pareto fronts");
  std::string csv_out;
  pareto->add_option("--csv", csv_out, "Write measured points to this CSV");
  json_flag(pareto);

  auto* hv = app.add_subcommand("hypervolume", "Dominated hypervolume after each round");
  json_flag(hv);

  auto* converged = app.add_subcommand("converged", "Check a round against the models that suggested it");
  std::optional<std::size_t> round_opt;
  converged->add_option("--round", round_opt, "Round index (default: latest checkable)");
  json_flag(converged);

  auto* shap = app.add_subcommand("shap", "Shapley attributions of a model over its training inputs");
  std::string target = "leakage";
  shap->add_option("--target", target, "dispersion, leakage or conversion")
      ->check(CLI::IsMember({"dispersion", "leakage", "conversion"}));
  shap->add_option("--out", csv_out, "Write per-row attributions to this CSV");
  json_flag(shap);

  auto* acqmap = app.add_subcommand("acq-map", "Acquisition and constraint grids over two parameters");
  std::string pair = "0,1", fixed_values;
  acqmap->add_option("--pair", pair, "Swept parameter indices i,j");
  acqmap->add_option("--fixed", fixed_values, "Values of the other three parameters a,b,c");
  acqmap->add_option("--out", csv_out, "Write the grid as CSV");
  json_flag(acqmap);

  auto* whatif = app.add_subcommand("whatif", "Posterior and constraint probability at one condition");
  std::vector<double> condition;
  whatif->add_option("condition", condition, "Five parameter values")->expected(5)->required();
  json_flag(whatif);

  auto* simulate = app.add_subcommand("simulate", "Score and measure the latest round with a synthetic lab");
  std::string lab_file;
  std::size_t cycles = 0;
  simulate->add_option("lab", lab_file, "Lab JSON (omit for the default lab)");
  simulate->add_option("--cycles", cycles, "Then run this many suggest + simulate cycles");

  auto* bench = app.add_subcommand("benchmark", "Yield benchmark with and without the HITL constraint");
  bool ab = false;
  std::size_t seeds = 20, rounds = 2, bench_q = 5, bench_n_init = 30;
  bool bench_no_hitl = false;
  bench->add_option("--lab", lab_file, "Lab JSON (default lab when omitted)");
  bench->add_flag("--ab", ab, "Run both arms");
  bench->add_flag("--no-hitl", bench_no_hitl, "Single arm without the constraint");
  bench->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "First seed");
  bench->add_option("--rounds", rounds, "Rounds after LHS");
  bench->add_option("--q", bench_q, "Batch size")->check(CLI::PositiveNumber);
  bench->add_option("--n-init", bench_n_init, "LHS size")->check(CLI::Range(2, 100000));
  bench->add_option("--out", csv_out, "Write the CSV here instead of stdout");

  auto* serve = app.add_subcommand("serve", "Serve the campaign over HTTP");
  api::ServeOptions serve_options;
  serve->add_option("--port", serve_options.port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", serve_options.host, "Bind address");
  serve->add_option("--static", serve_options.static_dir, "Directory served under /ui");
  serve->add_option("--cors-origin", serve_options.cors_origin, "Access-Control-Allow-Origin value");

  auto* exp = app.add_subcommand("export", "Write figure data as CSV files");
  std::string dir = "export";
  exp->add_option("--dir", dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*init) {
      if (!force && std::filesystem::exists(ctx.campaign_path)) {
        throw StateError("'" + ctx.campaign_path + "' exists; pass --force to overwrite");
      }
      const auto space = space_file.empty() ? ParameterSpace::photonic_curing()
                                            : campaign::space_from_json(read_json_file(space_file));
      auto config = config_file.empty() ? campaign::CampaignConfig{}
                                        : campaign::config_from_json(read_json_file(config_file));
      if (init->count("--seed")) config.seed = seed;
      if (!strategy_name.empty()) config.strategy = acq::strategy_from_string(strategy_name);
      if (q_opt) config.q = *q_opt;
      if (beta_opt) config.beta = *beta_opt;
      if (tau_opt) config.tau = *tau_opt;
      if (no_hitl) config.hitl = false;
      const auto state = empty ? campaign::create_campaign(space, config)
                               : campaign::start_campaign(space, config, n_init);
      ctx.save(state);
      out << "created " << ctx.campaign_path << " with "
          << (empty ? std::string("no rounds") : std::to_string(n_init) + " pending conditions")
          << " (seed " << config.seed << ")\n";
      return kOk;
    }
    if (*ingest) {
      auto state = ctx.load();
      dataset::IngestOptions options;
      options.round_tags = round_tags;
      const auto summary = dataset::ingest(state, dataset::read_dataset(csv_path, state.space), options);
      ctx.save(state);
      out << "ingested " << summary.observations << " observations (" << summary.functional
          << " functional) into " << summary.rounds.size() << " round(s)\n";
      return kOk;
    }
    if (*suggest) {
      auto state = ctx.load();
      campaign::SuggestOptions options;
      if (!strategy_name.empty()) options.strategy = acq::strategy_from_string(strategy_name);
      if (!hitl_mode.empty()) options.hitl = hitl_mode == "on";
      options.q = q_opt;
      const auto& r = campaign::suggest_round(state, options);
      ctx.save(state);
      if (json) out << report::round(state, r, true).dump(2) << "\n";
      else print_round(out, state, r);
      return kOk;
    }
    if (*score) {
      auto state = ctx.load();
      campaign::score(state, id, hitl::label_from_string(label_text));
      ctx.save(state);
      out << id << ": " << hitl::to_string(*state.observation(id).label) << "; round "
          << state.latest_round().index << " " << campaign::to_string(state.latest_round().status) << "\n";
      return kOk;
    }
    if (*record) {
      auto state = ctx.load();
      if (unmeasurable) {
        if (!disp_text.empty() || !leak_text.empty()) {
          throw ParameterError("--unmeasurable takes no measurements");
        }
        campaign::mark_unmeasurable(state, id);
      } else {
        if (disp_text.empty() || leak_text.empty()) {
          throw ParameterError("record needs both dispersion and leakage (or --unmeasurable)");
        }
        campaign::record_objectives(state, id, campaign::parse_measurement(disp_text),
                                    campaign::parse_measurement(leak_text));
      }
      ctx.save(state);
      out << id << ": recorded; round " << state.latest_round().index << " "
          << campaign::to_string(state.latest_round().status) << "\n";
      return kOk;
    }
    if (*status) {
      const auto state = ctx.load();
      const auto summary = report::campaign_summary(state);
      if (json) {
        out << summary.dump(2) << "\n";
        return kOk;
      }
      out << "observations " << state.observations.size() << ", functional "
          << summary.at("functional_count").get<std::size_t>() << ", rounds " << state.rounds.size()
          << ", pending " << summary.at("pending_count").get<std::size_t>() << "\n";
      if (!state.rounds.empty()) print_round(out, state, state.rounds.back());
      return kOk;
    }
    if (*pareto) {
      const auto state = ctx.load();
      const auto models = campaign::fit_current_models(state);
      const auto rep = report::pareto(state, models);
      if (!csv_out.empty()) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "id,dispersion_mean,dispersion_std,leakage_mean,leakage_std,pareto_optimal\n";
        for (const auto& p : campaign::measured_points(state)) {
          csv << p.id << ',' << p.value.f1 << ',' << p.std.f1 << ',' << p.value.f2 << ',' << p.std.f2
              << ',' << (p.pareto_optimal ? 1 : 0) << '\n';
        }
        write_file(csv_out, csv.str());
      }
      if (json) {
        out << rep.dump(2) << "\n";
        return kOk;
      }
      out << "measured Pareto front (ref " << state.config.ref.f1 << ", " << state.config.ref.f2 << "):\n";
      for (const auto& p : campaign::measured_points(state)) {
        if (p.pareto_optimal) {
          out << "  " << std::setw(5) << p.id << "  dispersion " << fixed(p.value.f1, 3) << "  leakage "
              << fixed(p.value.f2, 3) << "\n";
        }
      }
      out << "model front: " << rep.at("model_front").size() << " points\n";
      return kOk;
    }
    if (*hv) {
      const auto state = ctx.load();
      const auto rep = report::hypervolume(state);
      if (json) {
        out << rep.dump(2) << "\n";
        return kOk;
      }
      const auto history = campaign::hypervolume_history(state);
      for (std::size_t k = 0; k < history.size(); ++k) out << "round " << k << "  " << fixed(history[k], 6) << "\n";
      return kOk;
    }
    if (*converged) {
      const auto state = ctx.load();
      const auto rep = report::convergence(state, round_opt);
      if (json) {
        out << rep.dump(2) << "\n";
        return kOk;
      }
      out << "round " << rep.at("round").get<std::size_t>() << ": "
          << (rep.at("converged").get<bool>() ? "converged" : "not converged") << "\n";
      for (const auto& p : rep.at("points")) {
        out << "  " << std::setw(5) << p.at("id").get<std::string>();
        for (std::size_t j = 0; j < 2; ++j) {
          out << "  " << (j == 0 ? "dispersion " : "leakage ") << fixed(p.at("measured")[j].get<double>(), 3)
              << " vs " << fixed(p.at("predicted_mean")[j].get<double>(), 3) << "+-"
              << fixed(p.at("predicted_std")[j].get<double>(), 3)
              << (p.at("within")[j].get<bool>() ? " ok" : " OUT");
        }
        out << "\n";
      }
      return kOk;
    }
    if (*shap) {
      const auto state = ctx.load();
      const auto summary = report::shap(state, campaign::fit_current_models(state), target);
      if (!csv_out.empty()) write_file(csv_out, report::shap_csv(summary));
      if (json) {
        out << report::shap_json(summary).dump(2) << "\n";
        return kOk;
      }
      out << target << " model, base value " << fixed(summary.base_value) << "\n";
      for (auto f : summary.ranking) {
        const auto& fs = summary.features[f];
        out << "  " << std::left << std::setw(18) << fs.name << std::right << " mean|phi| "
            << fixed(fs.mean_abs_phi) << "  spearman(value, phi) " << fixed(fs.spearman, 3) << "\n";
      }
      return kOk;
    }
    if (*acqmap) {
      const auto state = ctx.load();
      const auto models = campaign::fit_current_models(state);
      const auto rep = report::acquisition_map(state, models, report::parse_slice(pair, fixed_values));
      if (!csv_out.empty()) {
        write_file(csv_out, csv_grid(rep, {{"ucb_dispersion", &rep.at("raw").at("dispersion")},
                                           {"ucb_leakage", &rep.at("raw").at("leakage")},
                                           {"constrained_dispersion", &rep.at("constrained").at("dispersion")},
                                           {"constrained_leakage", &rep.at("constrained").at("leakage")},
                                           {"p_constraint", &rep.at("p_constraint")}}));
      }
      if (json) {
        out << rep.dump(2) << "\n";
        return kOk;
      }
      out << rep.at("ys").size() << " x " << rep.at("xs").size() << " grid over "
          << rep.at("names")[0].get<std::string>() << " x " << rep.at("names")[1].get<std::string>()
          << (csv_out.empty() ? "" : ", written to " + csv_out) << "\n";
      return kOk;
    }
    if (*whatif) {
      const auto state = ctx.load();
      ProcessCondition c;
      std::copy(condition.begin(), condition.end(), c.values.begin());
      const auto rep = report::whatif(state, campaign::fit_current_models(state), c);
      if (json) {
        out << rep.dump(2) << "\n";
        return kOk;
      }
      out << to_string(c) << "\n  dispersion " << fixed(rep["dispersion"]["mean"].get<double>()) << " +- "
          << fixed(rep["dispersion"]["std"].get<double>()) << "\n  leakage    "
          << fixed(rep["leakage"]["mean"].get<double>()) << " +- " << fixed(rep["leakage"]["std"].get<double>())
          << "\n  p_constraint "
          << (rep["p_constraint"].is_null() ? std::string("n/a") : fixed(rep["p_constraint"].get<double>()))
          << "\n";
      return kOk;
    }
    if (*simulate) {
      auto state = ctx.load();
      const auto lab = lab_file.empty() ? sim::SyntheticLab{} : sim::load_lab(lab_file);
      sim::run_round(state, lab);
      for (std::size_t i = 0; i < cycles; ++i) {
        campaign::suggest_round(state);
        sim::run_round(state, lab);
      }
      ctx.save(state);
      out << "simulated through round " << state.latest_round().index << "; "
          << campaign::to_string(state.latest_round().status) << "\n";
      return kOk;
    }
    if (*bench) {
      const auto lab = lab_file.empty() ? sim::SyntheticLab{} : sim::load_lab(lab_file);
      sim::BenchmarkConfig config;
      config.rounds = rounds;
      config.q = bench_q;
      config.n_init = bench_n_init;
      config.seed = seed;
      config.with_hitl = !bench_no_hitl;
      const auto rep = sim::run_benchmark(lab, config, seeds, ab);
      const auto csv = sim::to_csv(rep);
      if (csv_out.empty()) out << csv;
      else write_file(csv_out, csv);
      err << "mean post-LHS yield: hitl " << fixed(rep.hitl_yield, 3) << ", baseline "
          << fixed(rep.baseline_yield, 3) << "\n";
      return kOk;
    }
    if (*serve) {
      auto service = api::CampaignService::open(ctx.campaign_path);
      out << "serving " << ctx.campaign_path << " on http://" << serve_options.host << ":"
          << serve_options.port << "\n" << std::flush;
      if (!api::serve(*service, serve_options)) {
        throw ParseError("cannot listen on " + serve_options.host + ":" + std::to_string(serve_options.port));
      }
      return kOk;
    }
    if (*exp) {
      const auto state = ctx.load();
      std::filesystem::create_directories(dir);
      const auto base = std::filesystem::path(dir);
      write_file((base / "observations.csv").string(), dataset::to_csv(state.observations));
      {
        std::ostringstream csv;
        csv.precision(17);
        csv << "round,hypervolume\n";
        const auto history = campaign::hypervolume_history(state);
        for (std::size_t k = 0; k < history.size(); ++k) csv << k << ',' << history[k] << '\n';
        write_file((base / "hypervolume.csv").string(), csv.str());
      }
      {
        std::ostringstream csv;
        csv.precision(17);
        csv << "id,dispersion_mean,dispersion_std,leakage_mean,leakage_std,pareto_optimal\n";
        for (const auto& p : campaign::measured_points(state)) {
          csv << p.id << ',' << p.value.f1 << ',' << p.std.f1 << ',' << p.value.f2 << ',' << p.std.f2 << ','
              << (p.pareto_optimal ? 1 : 0) << '\n';
        }
        write_file((base / "pareto_measured.csv").string(), csv.str());
      }
      std::size_t files = 3;
      const auto models = campaign::fit_current_models(state);
      if (models.dispersion && models.leakage) {
        std::ostringstream csv;
        csv.precision(17);
        csv << "radiant_energy,pulse_count,pulse_length,micropulse_count,duty_cycle,"
               "dispersion_mean,dispersion_std,leakage_mean,leakage_std\n";
        for (const auto& p : campaign::model_front(state, models)) {
          for (double v : p.condition.values) csv << v << ',';
          csv << p.mean.f1 << ',' << p.std.f1 << ',' << p.mean.f2 << ',' << p.std.f2 << '\n';
        }
        write_file((base / "model_front.csv").string(), csv.str());
        for (const char* t : {"dispersion", "leakage"}) {
          write_file((base / (std::string("shap_") + t + ".csv")).string(),
                     report::shap_csv(report::shap(state, models, t)));
        }
        files += 3;
      }
      out << "wrote " << files << " files to " << dir << "\n";
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}

}  // namespace hitlbo::cli
