#include "combidose/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "combidose/harness.hpp"
#include "combidose/io.hpp"
#include "combidose/service.hpp"

namespace combidose {

namespace {

int parse_threads(const char* env) {
  const std::string s(env);
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || n < 1) throw UsageError("COMBIDOSE_THREADS must be a positive integer, got '" + s + "'");
  return n;
}

void add_simulation_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--scenario", cfg.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", cfg.output_dir, "Output directory for reports");
  sub->add_option("--seed", cfg.master_seed, "Master seed");
  sub->add_option("--threads", cfg.parallelism, "Worker threads (default: COMBIDOSE_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--replicates", cfg.replicates, "Number of replicate trials")->check(CLI::PositiveNumber);
  sub->add_option("--delta-u", cfg.delta_u, "Efficacy threshold")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--delta-0", cfg.delta_0, "Futility threshold")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--accrual-rate", cfg.accrual_rate, "Patients per month")->check(CLI::PositiveNumber);
  sub->add_option("--null-report", cfg.null_report, "Null-scenario JSON report to pair type-I errors with")
      ->check(CLI::ExistingFile);
  sub->add_option("--trajectory", cfg.trajectories, "Replicate index whose patient records are exported as CSV")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

std::optional<RunConfig> parse_cli(const std::vector<std::string>& argv, std::ostream& out,
                                   const char* threads_env) {
  RunConfig cfg;
  CLI::App app{"Two-stage drug-combination dose finding: simulation and trial conduct", "combidose"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::vector<CLI::App*> sims;
  for (const char* name : {"simulate-stage1", "simulate-stage2", "simulate-trial"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("Operating characteristics, ") +
                                                 (std::string(name) == "simulate-stage1"   ? "stage 1 only"
                                                  : std::string(name) == "simulate-stage2" ? "stage 2 on the true curve"
                                                                                           : "both stages"));
    add_simulation_options(sub, cfg);
    sims.push_back(sub);
  }

  CLI::App* prior = app.add_subcommand("prior-report", "Induced prior median TTP along the curve");
  prior->add_option("--draws", cfg.draws, "Prior draws")->check(CLI::PositiveNumber);
  prior->add_option("--sigma2", cfg.sigma2, "Prior variance of the spline coefficients")
      ->check(CLI::PositiveNumber);
  prior->add_option("--seed", cfg.master_seed, "Seed");

  CLI::App* calib = app.add_subcommand("calibrate-prior", "Solve the stage-1 prior for a target mean DLT rate");
  calib->add_option("--theta", cfg.theta, "Target prior mean DLT probability")->check(CLI::Range(0.0, 1.0));
  calib->add_option("--raw-x", cfg.raw_x, "Agent A dose, mg/m^2");
  calib->add_option("--raw-y", cfg.raw_y, "Agent B dose, mg/m^2");
  calib->add_option("--corner-b", cfg.corner_b, "Beta b of both single-agent corners")->check(CLI::PositiveNumber);
  calib->add_option("--ratio-a", cfg.ratio.a, "Beta a of rho00 / min(rho01, rho10)")->check(CLI::PositiveNumber);
  calib->add_option("--ratio-b", cfg.ratio.b, "Beta b of rho00 / min(rho01, rho10)")->check(CLI::PositiveNumber);
  calib->add_option("--eta-shape", cfg.eta3.shape, "Gamma shape of eta3")->check(CLI::PositiveNumber);
  calib->add_option("--eta-rate", cfg.eta3.rate, "Gamma rate of eta3")->check(CLI::PositiveNumber);
  calib->add_option("--draws", cfg.draws, "Monte Carlo draws per evaluation")->check(CLI::PositiveNumber);
  calib->add_option("--seed", cfg.master_seed, "Seed");

  CLI::App* serve = app.add_subcommand("serve", "Run the trial-conduct HTTP service");
  serve->add_option("--host", cfg.host, "Bind address");
  serve->add_option("--port", cfg.port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--data-dir", cfg.data_dir, "Directory for trial event logs");
  serve->add_option("--cors-origin", cfg.cors_origin, "Allowed CORS origin");

  if (argv.size() <= 1) throw UsageError("no command given\n" + app.help());
  const std::string& first = argv[1];
  if (!first.starts_with("-") &&
      app.get_subcommands([&](CLI::App* s) { return s->get_name() == first; }).empty()) {
    throw UsageError("unknown command '" + first + "'\n" + app.help());
  }
  std::vector<std::string> args(argv.rbegin(), argv.rend() - 1);  // CLI11 consumes from the back
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    std::string help;
    for (const CLI::App* sub : app.get_subcommands()) help = sub->help();
    throw UsageError(std::string(e.what()) + "\n" + (help.empty() ? app.help() : help));
  }

  cfg.command = app.get_subcommands().front()->get_name();
  const bool threads_given =
      std::any_of(sims.begin(), sims.end(), [](CLI::App* s) { return s->count("--threads") > 0; });
  if (!threads_given) {
    cfg.parallelism = threads_env ? parse_threads(threads_env)
                                  : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }
  if (cfg.command == "calibrate-prior" && cfg.draws == RunConfig{}.draws) cfg.draws = 20000;
  if (cfg.delta_u && !(*cfg.delta_u > 0.0 && *cfg.delta_u < 1.0)) {
    throw UsageError("--delta-u must lie strictly between 0 and 1");
  }
  return cfg;
}

std::vector<PriorReportRow> prior_predictive_report(const TTPPriorConfig& prior, int n_draws,
                                                    std::uint64_t seed) {
  prior.validate();
  if (n_draws < 1) throw DomainError("need at least one prior draw");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const double sd = std::sqrt(prior.sigma2);
  std::vector<PriorReportRow> rows;
  std::vector<std::vector<double>> log_medians(11, std::vector<double>(static_cast<std::size_t>(n_draws)));
  for (int i = 0; i < n_draws; ++i) {
    TTPParams p;
    for (std::size_t b = 0; b < kSplineCoefficients; ++b) p.beta[b] = prior.mu[b] + sd * normal(rng);
    const double u = unif(rng), v = unif(rng);
    p.phi4 = std::min(u, v);
    p.phi5 = std::max(u, v);
    p.k = prior.k_lo + (prior.k_hi - prior.k_lo) * unif(rng);
    for (int g = 0; g <= 10; ++g) {
      // Log scale: the induced medians span hundreds of orders of magnitude.
      log_medians[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)] =
          log_lambda_spline(p, g / 10.0) + std::log(std::log(2.0)) / p.k;
    }
  }
  for (int g = 0; g <= 10; ++g) {
    std::vector<double>& lm = log_medians[static_cast<std::size_t>(g)];
    rows.push_back({g / 10.0, std::exp(empirical_quantile(lm, 0.05)), std::exp(empirical_quantile(lm, 0.5)),
                    std::exp(empirical_quantile(lm, 0.95))});
  }
  return rows;
}

namespace {

CampaignMode mode_of(const std::string& command) {
  if (command == "simulate-stage1") return CampaignMode::Stage1;
  if (command == "simulate-stage2") return CampaignMode::Stage2;
  return CampaignMode::Trial;
}

Scenario configured_scenario(const RunConfig& cfg) {
  Scenario s;
  try {
    s = load_scenario(cfg.scenario);
  } catch (const std::exception& e) {
    throw UsageError(std::string("scenario file: ") + e.what());
  }
  if (cfg.replicates) s.replicates = *cfg.replicates;
  if (cfg.delta_u) s.stage2.delta_u = *cfg.delta_u;
  if (cfg.delta_0) s.stage2.delta_0 = *cfg.delta_0;
  if (cfg.accrual_rate) s.accrual_rate = *cfg.accrual_rate;
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw UsageError(std::string("invalid override: ") + e.what());
  }
  return s;
}

int simulate(const RunConfig& cfg, std::ostream& out) {
  const Scenario scenario = configured_scenario(cfg);
  const CampaignMode mode = mode_of(cfg.command);
  CampaignOptions options;
  if (cfg.delta_u) options.delta_u = {*cfg.delta_u};
  OperatingCharacteristics oc = run_campaign(scenario, mode, cfg.parallelism, cfg.master_seed, options);
  if (cfg.null_report) {
    const OperatingCharacteristics null_oc = read_json_file(*cfg.null_report).get<OperatingCharacteristics>();
    oc = pair_errors(null_oc, oc);
  }
  for (const std::filesystem::path& p : emit_reports(oc, cfg.output_dir)) out << p.string() << '\n';

  for (int index : cfg.trajectories) {
    const ReplicateTrajectory t = replay_replicate(scenario, mode, index, cfg.master_seed);
    const std::string stem = report_stem(oc) + "_replicate" + std::to_string(index);
    if (t.stage1) {
      std::ostringstream csv;
      write_stage1_csv(csv, t.stage1->records);
      write_text_file(cfg.output_dir / (stem + "_stage1.csv"), csv.str());
      out << (cfg.output_dir / (stem + "_stage1.csv")).string() << '\n';
    }
    if (t.stage2) {
      std::ostringstream csv;
      write_stage2_csv(csv, t.stage2->records);
      write_text_file(cfg.output_dir / (stem + "_stage2.csv"), csv.str());
      out << (cfg.output_dir / (stem + "_stage2.csv")).string() << '\n';
    }
  }
  return kExitOk;
}

int prior_report(const RunConfig& cfg, std::ostream& out) {
  TTPPriorConfig prior;
  if (cfg.sigma2) prior.sigma2 = *cfg.sigma2;
  out << "z,q05,q50,q95\n";
  for (const PriorReportRow& r : prior_predictive_report(prior, cfg.draws, cfg.master_seed)) {
    out << format_number(r.z) << ',' << format_number(r.q05) << ',' << format_number(r.q50) << ','
        << format_number(r.q95) << '\n';
  }
  return kExitOk;
}

int calibrate(const RunConfig& cfg, std::ostream& out) {
  ToxPriorConfig base;
  base.rho01 = {1.0, cfg.corner_b};
  base.rho10 = {1.0, cfg.corner_b};
  base.rho00_ratio = cfg.ratio;
  base.eta3 = cfg.eta3;
  const DoseCombination dose = DoseCombination::from_raw(cfg.raw_x, cfg.raw_y, DoseRanges{});
  if (dose.x < 0.0 || dose.x > 1.0 || dose.y < 0.0 || dose.y > 1.0) {
    throw UsageError("--raw-x/--raw-y outside the dose ranges");
  }
  ToxPriorConfig prior;
  try {
    prior = calibrate_prior(base, dose, cfg.theta, cfg.draws, cfg.master_seed);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  Json j = prior;
  j["prior_mean_prob_dlt"] = prior_mean_prob_dlt(prior, dose, cfg.draws, cfg.master_seed);
  out << dump(j);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  try {
    const std::optional<RunConfig> cfg = parse_cli(argv, out, std::getenv("COMBIDOSE_THREADS"));
    if (!cfg) return kExitOk;
    if (cfg->command == "prior-report") return prior_report(*cfg, out);
    if (cfg->command == "calibrate-prior") return calibrate(*cfg, out);
    if (cfg->command == "serve") {
      ServiceOptions options;
      options.data_dir = cfg->data_dir;
      options.cors_origin = cfg->cors_origin;
      TrialService service(options);
      return serve(service, cfg->host, cfg->port, err);
    }
    return simulate(*cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace combidose
