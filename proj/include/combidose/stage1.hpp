#pragma once

// Stage 1: conditional escalation with overdose control for two agents,
// enrolling cohorts of two until the sample size is exhausted or the
// minimum combination is judged too toxic.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "combidose/mcmc.hpp"
#include "combidose/model.hpp"

namespace combidose {

// Informative prior centred on the cisplatin-cabazitaxel setting: the prior
// mean DLT probability at the start combination is close to 0.33.
ToxPriorConfig default_tox_prior();

struct Stage1Config {
  int n_max = 30;
  double theta = 0.33;
  DoseRanges ranges{};
  DoseCombination start_dose = DoseCombination::from_raw(15.0, 75.0, DoseRanges{});
  double alpha_start = 0.25;
  double alpha_cap = 0.5;
  ToxPriorConfig prior = default_tox_prior();
  double safety_threshold = 0.8;
  MCMCConfig mcmc{};

  void validate() const;
  friend bool operator==(const Stage1Config&, const Stage1Config&) = default;
};

struct Stage1Patient {
  int patient_id = 0;
  int cohort = 0;
  DoseCombination dose{};
  int dlt = 0;
  double alpha = 0.0;
  friend bool operator==(const Stage1Patient&, const Stage1Patient&) = default;
};

struct Stage1State {
  std::vector<Stage1Patient> records;
  int cohort_index = 0;
  double alpha = 0.25;
  bool stopped_for_safety = false;
};

struct Stage1Result {
  std::vector<Stage1Patient> records;
  std::optional<ToxParams> posterior_medians;
  std::optional<MTDCurve> estimated_curve;
  bool stopped_for_safety = false;

  int dlt_count() const;
  double dlt_rate() const;
};

// Feasibility bound after `n_enrolled` patients; rises linearly and reaches
// the cap once half of the stage-1 sample is enrolled.
double alpha_schedule(int n_enrolled, const Stage1Config& config);

// Posterior draws in natural order (rho00, rho10, rho01, eta3).
PosteriorChain fit_stage1(std::span<const ToxRecord> data, const ToxPriorConfig& prior,
                          const MCMCConfig& mcmc);
ToxParams tox_params_at(const PosteriorChain& chain, std::size_t draw);
ToxParams posterior_medians(const PosteriorChain& chain);

double next_dose_x_given_y(const PosteriorChain& chain, double y, double alpha, double theta);
double next_dose_y_given_x(const PosteriorChain& chain, double x, double alpha, double theta);

double prob_rho00_above(const PosteriorChain& chain, double theta);
bool safety_stop(const PosteriorChain& chain, double theta, const Stage1Config& config);

// Next cohort given the two doses of the previous cohort: patient 1 moves
// agent A at the y just set for patient 2, patient 2 moves agent B at the x
// just set for patient 1.
std::pair<DoseCombination, DoseCombination> next_cohort_doses(const PosteriorChain& chain,
                                                              const DoseCombination& prev_first,
                                                              const DoseCombination& prev_second,
                                                              double alpha,
                                                              const Stage1Config& config);

std::vector<ToxRecord> tox_records(std::span<const Stage1Patient> patients);

// Curve from posterior medians; nullopt when the medians give no contour in
// the unit square.
std::optional<MTDCurve> estimate_curve(const ToxParams& medians, double theta);

Stage1Result run_stage1(const ToxParams& truth, const Stage1Config& config, std::uint64_t seed);

void write_stage1_csv(std::ostream& out, std::span<const Stage1Patient> records);

// Solves for the shared beta shape `a` of rho01 and rho10 (with their `b`
// fixed) so that the prior mean DLT probability at `dose` equals `theta`.
ToxPriorConfig calibrate_prior(const ToxPriorConfig& base, const DoseCombination& dose, double theta,
                               int n_draws = 20000, std::uint64_t seed = 20240601);
double prior_mean_prob_dlt(const ToxPriorConfig& prior, const DoseCombination& dose, int n_draws,
                           std::uint64_t seed);

}  // namespace combidose
