// Acceptance report: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every failing line is a documented known deviation,
// 1 otherwise. With --strict any failing line gives 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "CLI11.hpp"
#include "httplib.h"

#include "combidose/cli.hpp"
#include "combidose/harness.hpp"
#include "combidose/io.hpp"
#include "combidose/service.hpp"

using namespace combidose;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

Scenario find_scenario(const std::string& name) {
  for (const Scenario& s : scenario_pack()) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("no scenario " + name);
}

ToxParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ToxParams p;
  p.rho10 = 0.05 + 0.9 * u(rng);
  p.rho01 = 0.05 + 0.9 * u(rng);
  p.rho00 = std::min(p.rho10, p.rho01) * (0.02 + 0.96 * u(rng));
  p.eta3 = 0.01 + 20.0 * u(rng);
  return p;
}

PosteriorChain tox_chain(const std::vector<ToxParams>& draws) {
  std::vector<std::vector<double>> rows;
  for (const ToxParams& p : draws) rows.push_back({p.rho00, p.rho10, p.rho01, p.eta3});
  return PosteriorChain::from_rows({"rho00", "rho10", "rho01", "eta3"}, rows);
}

double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double t = (sn + 0.12 + 0.11 / sn) * d;
  if (t < 0.2) return 1.0;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::pow(-1.0, j - 1) * std::exp(-2.0 * j * j * t * t);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

Outcome mtd_round_trip() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  int curves = 0, skipped = 0;
  double worst = 0.0;
  for (double theta : {0.2, 0.33, 0.5}) {
    for (int i = 0; i < 1000; ++i) {
      const ToxParams p = random_params(rng);
      try {
        const MTDCurve curve(p, theta);
        ++curves;
        for (const auto& pt : curve.points(101)) worst = std::max(worst, std::abs(prob_dlt(p, pt[0], pt[1]) - theta));
      } catch (const NoCurveError&) {
        ++skipped;
      }
    }
  }
  const double t = seconds_since(start);
  o.require(worst < 1e-9, "max |p - theta| < 1e-9");
  o.require(t < 5.0, "runtime < 5 s");
  o.detail << curves << " curves (" << skipped << " draws without a contour), max |p - theta| = " << fmt(worst, 3)
           << ", " << fmt(t, 3) << " s";
  return o;
}

Outcome analytic_fixtures() {
  Outcome o;
  const ToxParams fixture{0.05, 0.3, 0.3, 10.0};
  const double p = prob_dlt(fixture, 0.5, 0.5);
  const double y = MTDCurve(fixture, 0.3).y_at(0.5);
  TTPParams w;
  w.beta[0] = std::log(6.0);
  w.k = 2.0;
  const double med = weibull_median(w, 0.5);
  std::vector<CurvePoint> line;
  for (int i = 0; i <= 2000; ++i) line.push_back({0.9 * i / 2000.0, 0.9 - 0.9 * i / 2000.0});
  const double d = signed_distance(0.5, 0.5, line, 0.4);
  o.require(std::abs(p - 0.8393) < 1e-3, "prob_dlt");
  o.require(std::abs(y - 0.1478) < 1e-3, "y*");
  o.require(std::abs(med - 4.9953) < 1e-3, "weibull median");
  o.require(std::abs(d + 0.0707) < 1e-3, "signed distance");
  o.detail << "prob_dlt = " << fmt(p) << ", y*(0.5) = " << fmt(y) << ", median = " << fmt(med, 5)
           << ", distance = " << fmt(d, 3);
  return o;
}

Outcome sampler_calibration() {
  Outcome o;
  // Conjugate Beta-Bernoulli: 13 of 40 under Beta(2, 2).
  const double a = 15.0, b = 29.0;
  MCMCConfig cfg;
  cfg.keep = 20000;
  cfg.seed = 5;
  const std::vector<ParamSpec> specs{{"p", 0.0, 1.0, 0.5, 1.0}};
  const auto chain = sample(
      [&](std::span<const double> v) { return (a - 1.0) * std::log(v[0]) + (b - 1.0) * std::log1p(-v[0]); }, specs,
      cfg);
  const auto xs = chain.column(0);
  std::vector<double> means;
  const std::size_t len = xs.size() / 50;
  for (std::size_t k = 0; k < 50; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += xs[k * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  double m = 0.0, v = 0.0;
  for (double x : means) m += x / 50.0;
  for (double x : means) v += (x - m) * (x - m) / 49.0;
  const double se = std::sqrt(v / 50.0);
  const double err = std::abs(m - a / (a + b));
  o.require(err < 3.0 * se, "conjugate mean within 3 MC SE");

  // Stage-1 recovery at n = 2000.
  const ToxParams truth{0.06, 0.35, 0.25, 3.0};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ToxRecord> data;
  // Corners and centre, so each corner probability is observed directly.
  const double design[5][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5}};
  for (int i = 0; i < 2000; ++i) {
    const double x = design[i % 5][0], y = design[i % 5][1];
    data.push_back({x, y, u(rng) < prob_dlt(truth, x, y) ? 1 : 0});
  }
  MCMCConfig mcmc;
  mcmc.seed = 2;
  const ToxParams med = posterior_medians(fit_stage1(data, default_tox_prior(), mcmc));
  const double rec = std::max({std::abs(med.rho00 - truth.rho00), std::abs(med.rho10 - truth.rho10),
                               std::abs(med.rho01 - truth.rho01)});
  o.require(rec <= 0.05, "stage-1 medians within 0.05");

  // Central differences on both log posteriors.
  double worst = 0.0;
  const ToxPriorConfig prior = default_tox_prior();
  for (int t = 0; t < 20; ++t) {
    ToxParams p = random_params(rng);
    if (std::abs(p.rho10 - p.rho01) < 0.05) continue;
    const auto g = log_posterior_stage1_gradient(p, data, prior);
    double* fields[4] = {&p.rho00, &p.rho10, &p.rho01, &p.eta3};
    for (std::size_t j = 0; j < 4; ++j) {
      const double val = *fields[j];
      const double h = 1e-6 * std::max(1e-3, std::abs(val));
      *fields[j] = val + h;
      const double up = log_posterior_stage1(p, data, prior);
      *fields[j] = val - h;
      const double down = log_posterior_stage1(p, data, prior);
      *fields[j] = val;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  std::vector<TTPRecord> ttp;
  for (int i = 0; i < 30; ++i) ttp.push_back({u(rng), 0.2 + 8.0 * u(rng), u(rng) < 0.7 ? 1 : 0});
  const TTPPriorConfig tprior;
  for (int t = 0; t < 20; ++t) {
    std::normal_distribution<double> n(0.0, 0.5);
    TTPParams q;
    for (auto& c : q.beta) c = n(rng);
    q.beta[0] += 1.2;
    q.phi4 = 0.05 + 0.4 * u(rng);
    q.phi5 = q.phi4 + 0.05 + 0.45 * u(rng);
    q.k = 0.5 + 2.0 * u(rng);
    const auto g = log_posterior_stage2_gradient(q, ttp, tprior);
    for (std::size_t j = 0; j < 9; ++j) {
      auto field = [&](TTPParams& s) -> double& {
        if (j < 6) return s.beta[j];
        if (j == 6) return s.phi4;
        if (j == 7) return s.phi5;
        return s.k;
      };
      TTPParams up = q, down = q;
      const double h = 1e-6;
      field(up) += h;
      field(down) -= h;
      const double fd = (log_posterior_stage2(up, ttp, tprior) - log_posterior_stage2(down, ttp, tprior)) / (2.0 * h);
      worst = std::max(worst, std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  o.require(worst <= 1e-5, "gradient relative error <= 1e-5");
  o.detail << "conjugate |error| = " << fmt(err, 3) << " (3 SE = " << fmt(3.0 * se, 3) << "), recovery max |error| = "
           << fmt(rec, 3) << ", gradient relative error = " << fmt(worst, 3);
  return o;
}

double brute_force_mtd_x(const ToxParams& p, double y, double theta) {
  if (prob_dlt(p, 0.0, y) >= theta) return 0.0;
  if (prob_dlt(p, 1.0, y) <= theta) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (prob_dlt(p, mid, y) < theta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Outcome ewoc_oracle() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<ToxParams> draws;
    const double c10 = 0.15 + 0.5 * u(rng), c01 = 0.15 + 0.5 * u(rng);
    for (int i = 0; i < 400; ++i) {
      ToxParams p;
      p.rho10 = std::clamp(c10 + 0.1 * (u(rng) - 0.5), 0.02, 0.98);
      p.rho01 = std::clamp(c01 + 0.1 * (u(rng) - 0.5), 0.02, 0.98);
      p.rho00 = std::min(p.rho10, p.rho01) * (0.05 + 0.9 * u(rng));
      p.eta3 = 0.1 + 5.0 * u(rng);
      draws.push_back(p);
    }
    const double y = u(rng), alpha = 0.25 + 0.25 * u(rng);
    std::vector<double> roots;
    for (const auto& p : draws) roots.push_back(brute_force_mtd_x(p, y, 0.33));
    const double oracle = empirical_quantile(roots, alpha);
    worst = std::max(worst, std::abs(next_dose_x_given_y(tox_chain(draws), y, alpha, 0.33) - oracle));
  }
  o.require(worst < 0.02, "max difference < 0.02");
  o.detail << "50 posteriors, max |difference| = " << fmt(worst, 3);
  return o;
}

Outcome rejection_sampler() {
  Outcome o;
  std::mt19937_64 rng(77);
  const int n = 5000;
  const std::vector<double> flat(1001, 3.0);
  std::vector<double> linear(1001);
  for (std::size_t i = 0; i < linear.size(); ++i) linear[i] = static_cast<double>(i) / 1000.0;

  const auto a = rejection_sample(flat, n, rng);
  const double pa = ks_pvalue(ks_statistic(a.z, [](double z) { return z; }), n);
  const auto b = rejection_sample(linear, n, rng);
  const double pb = ks_pvalue(ks_statistic(b.z, [](double z) { return z * z; }), n);
  o.require(pa > 0.01, "KS constant");
  o.require(pb > 0.01, "KS linear");

  // Acceptance rate equals target mean over envelope height.
  auto rate_ok = [&](const RejectionDraws& d, double expected, double& z) {
    const double proposals = static_cast<double>(d.proposals);
    z = (n / proposals - expected) / std::sqrt(expected * (1.0 - expected) / proposals);
    return std::abs(z) < 3.0;
  };
  double za = 0.0, zb = 0.0;
  o.require(rate_ok(a, 1.0 / 1.01, za), "acceptance rate constant");
  o.require(rate_ok(b, 0.5 / 1.01, zb), "acceptance rate linear");
  o.detail << "KS p = " << fmt(pa, 3) << " / " << fmt(pb, 3) << ", acceptance-rate z = " << fmt(za, 3) << " / "
           << fmt(zb, 3);
  return o;
}

Outcome stage1_characteristics(int threads, std::uint64_t seed) {
  Outcome o;
  const auto start = Clock::now();
  Scenario sc = find_scenario("s1-through-calibrated");
  sc.replicates = 200;
  const auto oc = run_campaign(sc, CampaignMode::Stage1, threads, seed);
  const double t = seconds_since(start);
  const auto& s1 = *oc.stage1;
  const double theta = sc.stage1.theta;
  const auto good = std::count_if(s1.selection_p20.begin(), s1.selection_p20.end(), [](double v) { return v >= 0.70; });
  const double frac = static_cast<double>(good) / static_cast<double>(s1.selection_p20.size());
  o.require(std::abs(s1.mean_dlt_rate - theta) <= 0.10, "mean DLT proportion");
  o.require(s1.pct_trials_dlt_above <= 0.20, "trials above theta + 0.1");
  o.require(frac >= 0.90, "selection at p = 0.2");
  o.require(t < 15 * 60, "runtime");
  o.detail << "m = 200, mean DLT = " << fmt(s1.mean_dlt_rate) << ", above theta+0.1 = " << fmt(s1.pct_trials_dlt_above)
           << ", selection(0.2) >= 0.7 on " << fmt(100.0 * frac) << "% of grid, " << fmt(t, 3) << " s on " << threads
           << " threads";
  return o;
}

Outcome stage2_trends(int threads, std::uint64_t seed) {
  Outcome o;
  const auto start = Clock::now();
  CampaignOptions opts;
  opts.delta_u = {0.8, 0.9};
  opts.delta_0 = {0.10, 0.15, 0.20};
  auto run = [&](const std::string& name, double accrual) {
    Scenario sc = find_scenario(name);
    sc.replicates = 200;
    sc.accrual_rate = accrual;
    return *run_campaign(sc, CampaignMode::Stage2, threads, seed, opts).stage2;
  };
  const Stage2Summary null = run("s2-flat-null", 1.0);
  const Stage2Summary e15 = run("s2-mid-peak-e1.5", 1.0);
  const Stage2Summary e2 = run("s2-mid-peak-e2", 1.0);
  const Stage2Summary e2_fast = run("s2-mid-peak-e2", 2.0);
  const double t = seconds_since(start);

  const bool a = null.reject_prob[1] < null.reject_prob[0] && null.reject_prob[1] <= 0.25;
  const bool b = e2.reject_prob[0] > e15.reject_prob[0];
  const bool c = e2.reject_prob[0] >= e2_fast.reject_prob[0];
  const bool d = e2.reject_prob[0] >= 0.6;
  const auto& rows = null.early_stop_by_delta0;
  bool e = rows.size() == 3;
  for (std::size_t i = 1; e && i < rows.size(); ++i) e = rows[i].early_stop_prob > rows[i - 1].early_stop_prob;
  o.require(a, "(a)");
  o.require(b, "(b)");
  o.require(c, "(c)");
  o.require(d, "(d)");
  o.require(e, "(e)");
  o.require(t < 30 * 60, "runtime");
  o.detail << "(a) type-I " << fmt(null.reject_prob[0]) << " at 0.8, " << fmt(null.reject_prob[1]) << " at 0.9; "
           << "(b) power " << fmt(e15.reject_prob[0]) << " at effect 1.5, " << fmt(e2.reject_prob[0]) << " at 2; "
           << "(c) power " << fmt(e2.reject_prob[0]) << " at accrual 1, " << fmt(e2_fast.reject_prob[0]) << " at 2; "
           << "(e) early stop";
  for (const auto& r : rows) o.detail << " " << fmt(r.early_stop_prob);
  o.detail << "; m = 200, " << fmt(t, 3) << " s";
  return o;
}

Outcome prior_predictive() {
  Outcome o;
  const auto rows = prior_predictive_report(TTPPriorConfig{}, 100000, 1);
  const auto& r = rows.front();
  o.require(r.q50 >= 0.3 && r.q50 <= 1.5, "50% quantile in [0.3, 1.5]");
  o.require(r.q05 < 1e-10 && r.q95 > 1e10, "5%/95% quantiles beyond 1e-10 / 1e10");
  o.detail << "z = 0 quantiles: 5% " << fmt(r.q05, 3) << ", 50% " << fmt(r.q50, 3) << ", 95% " << fmt(r.q95, 3);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::filesystem::path& work, std::uint64_t seed) {
  Outcome o;
  int compared = 0;
  for (const auto& [name, mode] : {std::pair{std::string("s1-through-calibrated"), CampaignMode::Stage1},
                                   std::pair{std::string("s2-mid-peak-e2"), CampaignMode::Stage2},
                                   std::pair{std::string("s2-flat-null"), CampaignMode::Trial}}) {
    Scenario sc = find_scenario(name);
    sc.replicates = 8;
    std::vector<std::string> bytes;
    for (int threads : {1, 3, 8, 1}) {
      const auto dir = work / ("det_" + name + "_" + std::to_string(threads) + "_" + std::to_string(bytes.size()));
      std::filesystem::create_directories(dir);
      std::string all;
      for (const auto& p : emit_reports(run_campaign(sc, mode, threads, seed), dir)) all += slurp(p);
      bytes.push_back(all);
    }
    for (const auto& b : bytes) o.require(b == bytes.front(), name + " reports differ");
    ++compared;
  }
  o.detail << compared << " campaigns, 4 runs each at parallelism 1, 3, 8, 1: reports byte-identical";
  return o;
}

std::string stage1_body(const Json& doses, const std::vector<int>& dlts) {
  Json list = Json::array();
  for (std::size_t i = 0; i < dlts.size(); ++i)
    list.push_back({{"x", doses.at(i).at("x")}, {"y", doses.at(i).at("y")}, {"dlt", dlts[i]}});
  return Json{{"outcomes", list}}.dump();
}

Outcome conduct_service(const std::filesystem::path& work) {
  Outcome o;
  ServiceOptions opts;

  // Crash replay: a restarted service reports the same state.
  opts.data_dir = work / "replay";
  std::string id;
  Json before;
  {
    TrialService service(opts);
    id = service.create_trial(R"({"seed": 41})").body.at("id");
    Json doses = service.get_state(id).body.at("stage1").at("recommendation").at("next_doses");
    for (int c = 0; c < 4; ++c) doses = service.submit_stage1(id, stage1_body(doses, {0, c % 2})).body.at("next_doses");
    const auto fin = service.finalize_stage1(id);
    Json list = Json::array();
    for (const Json& d : fin.body.at("next_doses")) list.push_back({{"z", d.at("z")}, {"time", 3.0}, {"event", 1}, {"dlt", 0}});
    service.submit_stage2(id, Json{{"outcomes", list}}.dump());
    before = service.get_state(id).body;
  }
  {
    std::ofstream log(opts.data_dir / (id + ".jsonl"), std::ios::app);
    log << R"({"seq": 99, "type": "stage2_out)";
  }
  TrialService restarted(opts);
  const bool replay_ok = restarted.get_state(id).body.dump() == before.dump();
  o.require(replay_ok, "crash replay");

  // Two services fed identical outcomes give identical recommendations.
  ServiceOptions oa = opts, ob = opts;
  oa.data_dir = work / "det_a";
  ob.data_dir = work / "det_b";
  TrialService sa(oa), sb(ob);
  const std::string ia = sa.create_trial(R"({"seed": 77})").body.at("id");
  const std::string ib = sb.create_trial(R"({"seed": 77})").body.at("id");
  Json da = sa.get_state(ia).body.at("stage1").at("recommendation").at("next_doses"), db = da;
  bool same = true;
  for (int c = 0; c < 5; ++c) {
    const auto ra = sa.submit_stage1(ia, stage1_body(da, {c == 3, 0}));
    const auto rb = sb.submit_stage1(ib, stage1_body(db, {c == 3, 0}));
    same = same && ra.body == rb.body;
    da = ra.body.at("next_doses");
    db = rb.body.at("next_doses");
  }
  o.require(same, "fixed-seed determinism");

  // Full request cycle over HTTP.
  const auto start = Clock::now();
  opts.data_dir = work / "cycle";
  TrialService service(opts);
  HttpFrontend http(service);
  const int port = http.bind("127.0.0.1", 0);
  if (port <= 0) {
    o.require(false, "bind");
    return o;
  }
  std::thread runner([&] { http.run(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);
  auto post = [&](const std::string& path, const Json& body) {
    const auto res = client.Post(path.c_str(), body.dump(), "application/json");
    if (!res) throw std::runtime_error("no response from " + path);
    return std::make_pair(res->status, Json::parse(res->body));
  };
  int cohorts = 0, submissions = 0;
  std::string stop = "none";
  try {
    const auto [cs, created] = post("/v1/trials", {{"seed", 2024}});
    if (cs != 201) throw std::runtime_error("create returned " + std::to_string(cs));
    const std::string base = "/v1/trials/" + created.at("id").get<std::string>();
    const ToxParams truth{0.06, 0.35, 0.25, 3.0};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Json doses = created.at("recommendation").at("next_doses");
    for (int c = 0; c < 15; ++c) {
      Json list = Json::array();
      for (const Json& d : doses) {
        const double x = d.at("x"), y = d.at("y");
        list.push_back({{"x", x}, {"y", y}, {"dlt", u(rng) < prob_dlt(truth, x, y) ? 1 : 0}});
      }
      const auto [status, rec] = post(base + "/stage1/outcomes", {{"outcomes", list}});
      if (status != 200) throw std::runtime_error("stage-1 submission returned " + std::to_string(status));
      ++cohorts;
      if (rec.at("safety_stop")) throw std::runtime_error("safety stop");
      doses = rec.at("next_doses");
    }
    const auto [fs, fin] = post(base + "/stage1/finalize", Json::object());
    if (fs != 200) throw std::runtime_error("finalize returned " + std::to_string(fs));
    std::weibull_distribution<double> tte(1.5, 4.0 / std::pow(std::log(2.0), 1.0 / 1.5));
    doses = fin.at("next_doses");
    while (!doses.empty() && submissions < 10) {
      Json list = Json::array();
      for (const Json& d : doses) {
        list.push_back({{"z", d.at("z")}, {"time", tte(rng)}, {"event", 1},
                        {"dlt", u(rng) < prob_dlt(truth, d.at("x"), d.at("y")) ? 1 : 0}});
      }
      const auto [status, rec] = post(base + "/stage2/outcomes", {{"outcomes", list}});
      if (status != 200) throw std::runtime_error("stage-2 submission returned " + std::to_string(status));
      ++submissions;
      if (rec.at("complete")) stop = "complete";
      if (rec.at("futility_stop")) stop = "futility";
      if (rec.at("toxicity_stop")) stop = "toxicity";
      doses = rec.at("next_doses");
    }
  } catch (const std::exception& e) {
    o.require(false, e.what());
  }
  http.stop();
  runner.join();
  const double t = seconds_since(start);
  o.require(cohorts == 15, "15 stage-1 cohorts");
  o.require(stop != "none", "stage 2 reached a stop");
  o.require(t < 60.0, "cycle < 60 s");
  o.detail << "replay " << (replay_ok ? "identical" : "differs") << ", determinism " << (same ? "holds" : "broken")
           << ", cycle: " << cohorts << " cohorts, " << submissions << " stage-2 submissions, stop = " << stop << ", "
           << fmt(t, 3) << " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance report"};
  bool strict = false;
  int threads = 0;
  std::uint64_t seed = 20240601;
  std::vector<int> only;
  app.add_flag("--strict", strict, "Fail on any FAIL line, known deviation or not");
  app.add_option("--threads", threads, "Worker threads for the campaigns")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Master seed of the campaigns");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (threads == 0) {
    const char* env = std::getenv("COMBIDOSE_THREADS");
    threads = env ? std::max(1, std::atoi(env)) : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  const auto work = std::filesystem::temp_directory_path() / ("combidose_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  // Failures whose cause is understood and documented in the README.
  const std::map<int, std::string> known{
      {7, "null type-I and early-stop trend, see README"},
      {8, "prior tails short of the 1e-10 / 1e10 extremity, see README"},
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"MTD round trip", mtd_round_trip},
      {"analytic fixtures", analytic_fixtures},
      {"sampler calibration", sampler_calibration},
      {"EWOC quantile oracle", ewoc_oracle},
      {"rejection sampler", rejection_sampler},
      {"stage-1 operating characteristics", [&] { return stage1_characteristics(threads, seed); }},
      {"stage-2 trends", [&] { return stage2_trends(threads, seed); }},
      {"prior predictive", prior_predictive},
      {"determinism", [&] { return determinism(work, seed); }},
      {"conduct service", [&] { return conduct_service(work); }},
  };

  int unexpected = 0, failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "[error: " << e.what() << "]";
    }
    std::cout << "criterion " << id << " (" << criteria[i].first << "): ";
    if (out.pass) {
      std::cout << "PASS";
    } else if (known.count(id)) {
      std::cout << "FAIL (known deviation: " << known.at(id) << ")";
      ++failures;
    } else {
      std::cout << "FAIL";
      ++failures;
      ++unexpected;
    }
    std::cout << " | " << out.detail.str() << std::endl;
  }
  std::filesystem::remove_all(work);
  return (strict ? failures : unexpected) > 0 ? 1 : 0;
}
