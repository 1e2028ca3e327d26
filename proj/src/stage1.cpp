#include "combidose/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "combidose/rng.hpp"

namespace combidose {

ToxPriorConfig default_tox_prior() {
  ToxPriorConfig prior;
  // calibrate_prior() output for theta = 0.33 at 15/75 mg/m^2, starting from
  // Beta(1, 2) corners, Beta(0.5, 0.5) ratio and Gamma(3, 1) interaction.
  prior.rho01 = {0.992, 2.0};
  prior.rho10 = {0.992, 2.0};
  prior.rho00_ratio = {0.5, 0.5};
  prior.eta3 = {3.0, 1.0};
  return prior;
}

void Stage1Config::validate() const {
  if (n_max <= 0 || n_max % 2 != 0) throw DomainError("stage-1 n_max must be a positive even number");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  if (!(alpha_start > 0.0 && alpha_start <= alpha_cap && alpha_cap <= 0.5)) {
    throw DomainError("need 0 < alpha_start <= alpha_cap <= 0.5");
  }
  if (!(safety_threshold > 0.0 && safety_threshold < 1.0)) {
    throw DomainError("safety threshold must lie in (0,1)");
  }
  if (start_dose.x < 0.0 || start_dose.x > 1.0 || start_dose.y < 0.0 || start_dose.y > 1.0) {
    throw DomainError("start dose outside the standardized range");
  }
  prior.validate();
  mcmc.validate();
}

int Stage1Result::dlt_count() const {
  int n = 0;
  for (const Stage1Patient& p : records) n += p.dlt;
  return n;
}

double Stage1Result::dlt_rate() const {
  return records.empty() ? 0.0 : static_cast<double>(dlt_count()) / static_cast<double>(records.size());
}

double alpha_schedule(int n_enrolled, const Stage1Config& config) {
  if (n_enrolled < 0 || n_enrolled > config.n_max) throw DomainError("n_enrolled out of range");
  const double half = static_cast<double>(config.n_max) / 2.0;
  return std::min(config.alpha_cap, config.alpha_start + (config.alpha_cap - config.alpha_start) *
                                                            static_cast<double>(n_enrolled) / half);
}

PosteriorChain fit_stage1(std::span<const ToxRecord> data, const ToxPriorConfig& prior,
                          const MCMCConfig& mcmc) {
  auto mean = [](const BetaPrior& b) { return b.a / (b.a + b.b); };
  // Sampler coordinates: (rho00 / min(rho01, rho10), rho10, rho01, eta3).
  const std::vector<ParamSpec> specs{
      {"rho00_ratio", 0.0, 1.0, std::clamp(mean(prior.rho00_ratio), 0.05, 0.95), 1.0},
      {"rho10", 0.0, 1.0, std::clamp(mean(prior.rho10), 0.05, 0.95), 1.0},
      {"rho01", 0.0, 1.0, std::clamp(mean(prior.rho01), 0.05, 0.95), 1.0},
      {"eta3", 0.0, std::numeric_limits<double>::infinity(), prior.eta3.shape / prior.eta3.rate, 1.0},
  };
  auto natural = [](std::span<const double> u) {
    const double m = std::min(u[1], u[2]);
    return ToxParams{u[0] * m, u[1], u[2], u[3]};
  };
  LogDensity target = [&](std::span<const double> u) {
    const ToxParams p = natural(u);
    return log_posterior_stage1(p, data, prior) + std::log(std::min(u[1], u[2]));
  };
  NaturalMap to_natural = [&](std::span<const double> u, std::span<double> out) {
    const ToxParams p = natural(u);
    out[0] = p.rho00;
    out[1] = p.rho10;
    out[2] = p.rho01;
    out[3] = p.eta3;
  };
  return sample(target, specs, mcmc, to_natural, {"rho00", "rho10", "rho01", "eta3"});
}

ToxParams tox_params_at(const PosteriorChain& chain, std::size_t draw) {
  return {chain.at(draw, 0), chain.at(draw, 1), chain.at(draw, 2), chain.at(draw, 3)};
}

ToxParams posterior_medians(const PosteriorChain& chain) {
  return {median(chain, 0), median(chain, 1), median(chain, 2), median(chain, 3)};
}

namespace {

template <typename Solve>
double ewoc_quantile(const PosteriorChain& chain, double alpha, Solve solve) {
  if (chain.empty()) throw std::invalid_argument("empty posterior chain");
  std::vector<double> mtds(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) mtds[i] = solve(tox_params_at(chain, i));
  return empirical_quantile(std::move(mtds), alpha);
}

}  // namespace

double next_dose_x_given_y(const PosteriorChain& chain, double y, double alpha, double theta) {
  return ewoc_quantile(chain, alpha,
                       [&](const ToxParams& p) { return conditional_mtd_x(p, y, theta); });
}

double next_dose_y_given_x(const PosteriorChain& chain, double x, double alpha, double theta) {
  return ewoc_quantile(chain, alpha,
                       [&](const ToxParams& p) { return conditional_mtd_y(p, x, theta); });
}

double prob_rho00_above(const PosteriorChain& chain, double theta) {
  if (chain.empty()) throw std::invalid_argument("empty posterior chain");
  std::size_t above = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) above += chain.at(i, 0) > theta;
  return static_cast<double>(above) / static_cast<double>(chain.size());
}

bool safety_stop(const PosteriorChain& chain, double theta, const Stage1Config& config) {
  return prob_rho00_above(chain, theta) > config.safety_threshold;
}

std::pair<DoseCombination, DoseCombination> next_cohort_doses(const PosteriorChain& chain,
                                                              const DoseCombination& prev_first,
                                                              const DoseCombination& prev_second,
                                                              double alpha,
                                                              const Stage1Config& config) {
  const double y_fixed = prev_second.y;
  const double x_fixed = prev_first.x;
  const double x_new = next_dose_x_given_y(chain, y_fixed, alpha, config.theta);
  const double y_new = next_dose_y_given_x(chain, x_fixed, alpha, config.theta);
  return {DoseCombination::from_standardized(x_new, y_fixed, config.ranges),
          DoseCombination::from_standardized(x_fixed, y_new, config.ranges)};
}

std::vector<ToxRecord> tox_records(std::span<const Stage1Patient> patients) {
  std::vector<ToxRecord> out;
  out.reserve(patients.size());
  for (const Stage1Patient& p : patients) out.push_back({p.dose.x, p.dose.y, p.dlt});
  return out;
}

std::optional<MTDCurve> estimate_curve(const ToxParams& medians, double theta) {
  if (!medians.valid()) return std::nullopt;
  try {
    return MTDCurve(medians, theta);
  } catch (const NoCurveError&) {
    return std::nullopt;
  }
}

Stage1Result run_stage1(const ToxParams& truth, const Stage1Config& config, std::uint64_t seed) {
  truth.validate();
  config.validate();
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unif;

  Stage1State state;
  std::optional<PosteriorChain> chain;
  DoseCombination first = config.start_dose;
  DoseCombination second = config.start_dose;
  int patient_id = 0;

  while (static_cast<int>(state.records.size()) < config.n_max) {
    state.alpha = alpha_schedule(static_cast<int>(state.records.size()), config);
    if (chain) std::tie(first, second) = next_cohort_doses(*chain, first, second, state.alpha, config);
    for (const DoseCombination& dose : {first, second}) {
      const int dlt = unif(rng) < prob_dlt(truth, dose.x, dose.y) ? 1 : 0;
      state.records.push_back({++patient_id, state.cohort_index + 1, dose, dlt, state.alpha});
    }
    ++state.cohort_index;

    MCMCConfig mcmc = config.mcmc;
    mcmc.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(state.cohort_index));
    const std::vector<ToxRecord> data = tox_records(state.records);
    chain = fit_stage1(data, config.prior, mcmc);
    if (safety_stop(*chain, config.theta, config)) {
      state.stopped_for_safety = true;
      break;
    }
  }

  Stage1Result result;
  result.records = std::move(state.records);
  result.stopped_for_safety = state.stopped_for_safety;
  result.posterior_medians = posterior_medians(*chain);
  if (!result.stopped_for_safety) {
    result.estimated_curve = estimate_curve(*result.posterior_medians, config.theta);
  }
  return result;
}

void write_stage1_csv(std::ostream& out, std::span<const Stage1Patient> records) {
  const auto old_precision = out.precision(17);
  out << "patient_id,cohort,x,y,raw_x,raw_y,dlt,alpha\n";
  for (const Stage1Patient& p : records) {
    out << p.patient_id << ',' << p.cohort << ',' << p.dose.x << ',' << p.dose.y << ','
        << p.dose.raw_x << ',' << p.dose.raw_y << ',' << p.dlt << ',' << p.alpha << '\n';
  }
  out.precision(old_precision);
}

double prior_mean_prob_dlt(const ToxPriorConfig& prior, const DoseCombination& dose, int n_draws,
                           std::uint64_t seed) {
  prior.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(1e-12, 1.0 - 1e-12);
  double sum = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    const double rho01 = boost::math::ibeta_inv(prior.rho01.a, prior.rho01.b, unif(rng));
    const double rho10 = boost::math::ibeta_inv(prior.rho10.a, prior.rho10.b, unif(rng));
    const double ratio = boost::math::ibeta_inv(prior.rho00_ratio.a, prior.rho00_ratio.b, unif(rng));
    const double eta3 = boost::math::gamma_p_inv(prior.eta3.shape, unif(rng)) / prior.eta3.rate;
    const ToxParams p{ratio * std::min(rho01, rho10), rho10, rho01, eta3};
    if (!p.valid()) continue;  // measure-zero ties
    sum += prob_dlt(p, dose.x, dose.y);
  }
  return sum / n_draws;
}

ToxPriorConfig calibrate_prior(const ToxPriorConfig& base, const DoseCombination& dose, double theta,
                               int n_draws, std::uint64_t seed) {
  ToxPriorConfig prior = base;
  auto mean_at = [&](double a) {
    prior.rho01.a = a;
    prior.rho10.a = a;
    prior.rho10.b = base.rho01.b;
    return prior_mean_prob_dlt(prior, dose, n_draws, seed);
  };
  double lo = 0.05, hi = 50.0;
  if (mean_at(lo) > theta || mean_at(hi) < theta) {
    throw DomainError("target prior mean is not reachable by varying the beta shape");
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = std::sqrt(lo * hi);
    (mean_at(mid) < theta ? lo : hi) = mid;
  }
  mean_at(std::sqrt(lo * hi));
  return prior;
}

}  // namespace combidose
