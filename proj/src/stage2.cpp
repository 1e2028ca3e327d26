#include "combidose/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "combidose/rng.hpp"

namespace combidose {

void Stage2Config::validate() const {
  if (n1 < 2 || n2 < 1 || n_max < n1) throw DomainError("need n1 >= 2, n2 >= 1, n_max >= n1");
  if (!(delta_0 > 0.0 && delta_0 < delta_u && delta_u < 1.0)) {
    throw DomainError("need 0 < delta_0 < delta_u < 1");
  }
  if (!(med0 > 0.0)) throw DomainError("med0 must be positive");
  if (!(accrual_rate > 0.0)) throw DomainError("accrual rate must be positive");
  if (!(followup_cap > 0.0)) throw DomainError("follow-up cap must be positive");
  if (!(tox_target > 0.0 && tox_target + tox_margin < 1.0 && tox_margin >= 0.0)) {
    throw DomainError("invalid toxicity monitoring bound");
  }
  if (!(tox_monitor_threshold > 0.0 && tox_monitor_threshold < 1.0)) {
    throw DomainError("toxicity monitoring threshold must lie in (0,1)");
  }
  if (prob_grid_size < 2 || envelope_grid_size < 2) throw DomainError("grids need at least 2 points");
  prior.validate();
  mcmc.validate();
}

double ProbCurve::max() const {
  if (probs.empty()) return 0.0;
  return *std::max_element(probs.begin(), probs.end());
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Completed: return "completed";
    case StopReason::Futility: return "futility";
    case StopReason::Toxicity: return "toxicity";
  }
  return "completed";
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "completed") return StopReason::Completed;
  if (s == "futility") return StopReason::Futility;
  if (s == "toxicity") return StopReason::Toxicity;
  throw std::invalid_argument("unknown stop reason: " + s);
}

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw std::invalid_argument("grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return g;
}

PosteriorChain fit_stage2(std::span<const TTPRecord> data, const TTPPriorConfig& prior,
                          const MCMCConfig& mcmc) {
  double mean_time = 0.0;
  for (const TTPRecord& r : data) mean_time += r.time;
  mean_time = data.empty() ? 1.0 : mean_time / static_cast<double>(data.size());

  const double inf = std::numeric_limits<double>::infinity();
  // Knots are sampled as (phi4, b) with phi5 = phi4 + (1 - phi4) b.
  std::vector<ParamSpec> specs{
      {"beta0", -inf, inf, std::log(mean_time), 0.3},
      {"beta1", -inf, inf, 0.0, 1.0},
      {"beta2", -inf, inf, 0.0, 1.0},
      {"beta3", -inf, inf, 0.0, 1.0},
      {"beta4", -inf, inf, 0.0, 1.0},
      {"beta5", -inf, inf, 0.0, 1.0},
      {"phi4", 0.0, 1.0, 1.0 / 3.0, 1.0},
      {"knot_gap", 0.0, 1.0, 0.5, 1.0},
      {"k", prior.k_lo, prior.k_hi, std::clamp(1.0, prior.k_lo * 2.0, prior.k_hi / 2.0), 0.5},
  };
  auto natural = [](std::span<const double> u) {
    TTPParams p;
    std::copy(u.begin(), u.begin() + kSplineCoefficients, p.beta.begin());
    p.phi4 = u[6];
    p.phi5 = u[6] + (1.0 - u[6]) * u[7];
    p.k = u[8];
    return p;
  };
  LogDensity target = [&](std::span<const double> u) {
    return log_posterior_stage2(natural(u), data, prior) + std::log1p(-u[6]);
  };
  NaturalMap to_natural = [&](std::span<const double> u, std::span<double> out) {
    const TTPParams p = natural(u);
    std::copy(p.beta.begin(), p.beta.end(), out.begin());
    out[6] = p.phi4;
    out[7] = p.phi5;
    out[8] = p.k;
  };
  return sample(target, specs, mcmc, to_natural,
                {"beta0", "beta1", "beta2", "beta3", "beta4", "beta5", "phi4", "phi5", "k"});
}

TTPParams ttp_params_at(const PosteriorChain& chain, std::size_t draw) {
  TTPParams p;
  for (std::size_t j = 0; j < kSplineCoefficients; ++j) p.beta[j] = chain.at(draw, j);
  p.phi4 = chain.at(draw, 6);
  p.phi5 = chain.at(draw, 7);
  p.k = chain.at(draw, 8);
  return p;
}

namespace {

double log_median(const TTPParams& p, double z) {
  return log_lambda_spline(p, z) + std::log(std::numbers::ln2) / p.k;
}

}  // namespace

ProbCurve prob_exceed_curve(const PosteriorChain& chain, double med0, std::span<const double> grid) {
  if (chain.empty()) throw std::invalid_argument("empty posterior chain");
  ProbCurve out{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size(), 0.0)};
  const double log_med0 = std::log(med0);
  std::vector<long> count(grid.size(), 0);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const TTPParams p = ttp_params_at(chain, i);
    for (std::size_t g = 0; g < grid.size(); ++g) count[g] += log_median(p, grid[g]) > log_med0;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.probs[g] = static_cast<double>(count[g]) / static_cast<double>(chain.size());
  }
  return out;
}

double optimal_dose(const ProbCurve& curve) {
  if (curve.probs.empty()) throw std::invalid_argument("empty probability curve");
  // max_element returns the first maximum, i.e. the smallest z.
  const auto it = std::max_element(curve.probs.begin(), curve.probs.end());
  return curve.grid[static_cast<std::size_t>(it - curve.probs.begin())];
}

std::vector<double> posterior_mean_median(const PosteriorChain& chain, std::span<const double> grid) {
  if (chain.empty()) throw std::invalid_argument("empty posterior chain");
  std::vector<double> sum(grid.size(), 0.0);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const TTPParams p = ttp_params_at(chain, i);
    for (std::size_t g = 0; g < grid.size(); ++g) sum[g] += std::exp(log_median(p, grid[g]));
  }
  for (double& s : sum) s /= static_cast<double>(chain.size());
  return sum;
}

std::vector<double> posterior_median_median(const PosteriorChain& chain, std::span<const double> grid) {
  if (chain.empty()) throw std::invalid_argument("empty posterior chain");
  std::vector<double> out(grid.size());
  std::vector<double> values(chain.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t i = 0; i < chain.size(); ++i) values[i] = log_median(ttp_params_at(chain, i), grid[g]);
    out[g] = std::exp(empirical_quantile(values, 0.5));
  }
  return out;
}

RejectionDraws rejection_sample(std::span<const double> values, int n, std::mt19937_64& rng) {
  if (values.size() < 2) throw std::invalid_argument("target needs at least 2 grid values");
  double top = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("rejection target must be finite and non-negative");
    top = std::max(top, v);
  }
  if (!(top > 0.0)) throw DomainError("rejection target is identically zero");
  const double envelope = 1.01 * top;
  const double cells = static_cast<double>(values.size() - 1);
  std::uniform_real_distribution<double> unif;

  RejectionDraws out;
  out.z.reserve(static_cast<std::size_t>(std::max(n, 0)));
  while (static_cast<int>(out.z.size()) < n) {
    const double z = unif(rng);
    const double u = unif(rng);
    ++out.proposals;
    const double pos = z * cells;
    const auto cell = std::min(static_cast<std::size_t>(pos), values.size() - 2);
    const double frac = pos - static_cast<double>(cell);
    const double target = values[cell] + frac * (values[cell + 1] - values[cell]);
    if (u * envelope < target) out.z.push_back(z);
  }
  return out;
}

std::vector<double> rejection_sample_doses(const PosteriorChain& chain, int n, std::mt19937_64& rng,
                                           int envelope_grid_size) {
  const std::vector<double> grid = uniform_grid(envelope_grid_size);
  const std::vector<double> target = posterior_mean_median(chain, grid);
  return rejection_sample(target, n, rng).z;
}

bool futility_stop(const ProbCurve& curve, double delta_0) { return curve.max() < delta_0; }

double prob_dlt_rate_above(int n, int dlts, double bound) {
  if (n < 0 || dlts < 0 || dlts > n) throw DomainError("invalid DLT counts");
  return boost::math::ibetac(1.0 + dlts, 1.0 + (n - dlts), bound);
}

bool toxicity_monitor(int n, int dlts, double tox_target, double tox_margin, double threshold) {
  return prob_dlt_rate_above(n, dlts, tox_target + tox_margin) > threshold;
}

bool toxicity_monitor(std::span<const Stage2Patient> records, double tox_target, double tox_margin,
                      double threshold) {
  int dlts = 0;
  for (const Stage2Patient& p : records) dlts += p.dlt;
  return toxicity_monitor(static_cast<int>(records.size()), dlts, tox_target, tox_margin, threshold);
}

std::vector<TTPRecord> observe(std::span<const Stage2Patient> patients,
                               std::span<const double> latent_times, double now, double followup_cap) {
  std::vector<TTPRecord> out;
  out.reserve(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const double followup = std::min(now - patients[i].enroll_time, followup_cap);
    // Compare resolution times directly so that a patient whose event
    // defines `now` is not censored by rounding in now - enroll_time.
    if (latent_times[i] <= followup_cap && patients[i].enroll_time + latent_times[i] <= now) {
      out.push_back({patients[i].z, latent_times[i], 1});
    } else {
      out.push_back({patients[i].z, followup, 0});
    }
  }
  return out;
}

Stage2Result run_stage2(const MTDCurve& curve, const Stage2Truth& truth, const Stage2Config& config,
                        std::uint64_t seed, const DoseRanges& ranges) {
  config.validate();
  if (!truth.ttp.valid()) throw DomainError("invalid generative TTP parameters");

  std::mt19937_64 accrual_rng(derive_seed(seed, 1));
  std::exponential_distribution<double> gap(config.accrual_rate);
  std::uniform_real_distribution<double> unif;

  Stage2Result result;
  std::vector<double> latent;
  const std::vector<double> prob_grid = uniform_grid(config.prob_grid_size);

  auto enroll = [&](const std::vector<double>& zs, double start, int cohort) {
    double t = start;
    for (std::size_t j = 0; j < zs.size(); ++j) {
      if (j > 0) t += config.poisson_accrual ? gap(accrual_rng) : 1.0 / config.accrual_rate;
      const int id = result.n_enrolled() + 1;
      std::mt19937_64 patient_rng(derive_seed(seed, 10000 + static_cast<std::uint64_t>(id)));
      const double u_ttp = unif(patient_rng);
      const double u_dlt = unif(patient_rng);
      const double z = zs[j];
      latent.push_back(weibull_quantile(u_ttp, lambda_spline(truth.ttp, z), truth.ttp.k));
      Stage2Patient p;
      p.patient_id = id;
      p.cohort = cohort;
      p.z = z;
      p.dose = curve.dose_at_z(z, ranges);
      p.enroll_time = t;
      const double p_dlt = truth.tox ? prob_dlt(*truth.tox, p.dose.x, p.dose.y) : truth.dlt_rate;
      p.dlt = u_dlt < p_dlt ? 1 : 0;
      result.records.push_back(p);
    }
  };

  std::vector<double> first(static_cast<std::size_t>(config.n1));
  for (int i = 0; i < config.n1; ++i) first[static_cast<std::size_t>(i)] = static_cast<double>(i) / (config.n1 - 1);
  enroll(first, 0.0, 1);
  int cohort = 1;
  std::size_t cohort_begin = 0;

  while (true) {
    // The interim waits until every patient of the current cohort has
    // progressed or reached the follow-up cap.
    double now = 0.0;
    for (std::size_t i = cohort_begin; i < result.records.size(); ++i) {
      now = std::max(now, result.records[i].enroll_time + std::min(latent[i], config.followup_cap));
    }
    result.calendar_time = now;
    ++result.interims;
    const std::vector<TTPRecord> data = observe(result.records, latent, now, config.followup_cap);
    for (std::size_t i = 0; i < data.size(); ++i) {
      result.records[i].time = data[i].time;
      result.records[i].event = data[i].event;
    }

    Stage2Interim interim{result.n_enrolled(), now, 0.0, false, result.n_enrolled() >= config.n_max};
    if (toxicity_monitor(result.records, config.tox_target, config.tox_margin,
                         config.tox_monitor_threshold)) {
      interim.toxicity_stop = true;
      result.interim_log.push_back(interim);
      result.stop_reason = StopReason::Toxicity;
      break;
    }

    MCMCConfig mcmc = config.mcmc;
    mcmc.seed = derive_seed(seed, 2000 + static_cast<std::uint64_t>(result.interims));
    const PosteriorChain chain = fit_stage2(data, config.prior, mcmc);
    result.final_curve = prob_exceed_curve(chain, config.med0, prob_grid);
    result.max_prob = result.final_curve.max();
    result.z_opt = optimal_dose(result.final_curve);
    interim.max_prob = result.max_prob;
    result.interim_log.push_back(interim);

    if (result.n_enrolled() >= config.n_max) break;
    if (futility_stop(result.final_curve, config.delta_0)) {
      result.stop_reason = StopReason::Futility;
      break;
    }

    const int next = std::min(config.n2, config.n_max - result.n_enrolled());
    std::mt19937_64 alloc_rng(derive_seed(seed, 3000 + static_cast<std::uint64_t>(result.interims)));
    const std::vector<double> zs = rejection_sample_doses(chain, next, alloc_rng, config.envelope_grid_size);
    cohort_begin = result.records.size();
    enroll(zs, now, ++cohort);
  }

  result.reject_h0 = result.stop_reason != StopReason::Toxicity && result.max_prob > config.delta_u;
  return result;
}

void write_stage2_csv(std::ostream& out, std::span<const Stage2Patient> records) {
  const auto old_precision = out.precision(17);
  out << "patient_id,cohort,z,raw_x,raw_y,enroll_time,time,event,dlt\n";
  for (const Stage2Patient& p : records) {
    out << p.patient_id << ',' << p.cohort << ',' << p.z << ',' << p.dose.raw_x << ','
        << p.dose.raw_y << ',' << p.enroll_time << ',' << p.time << ',' << p.event << ',' << p.dlt
        << '\n';
  }
  out.precision(old_precision);
}

}  // namespace combidose
