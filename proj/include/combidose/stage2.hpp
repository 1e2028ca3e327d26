#pragma once

// Stage 2: adaptive randomization along a fixed MTD curve toward
// combinations with long median time to progression.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "combidose/mcmc.hpp"
#include "combidose/model.hpp"

namespace combidose {

struct Stage2Config {
  int n_max = 30;
  int n1 = 10;
  int n2 = 5;
  double med0 = 4.0;
  double delta_u = 0.8;
  double delta_0 = 0.10;
  double accrual_rate = 1.0;  // patients per month
  bool poisson_accrual = false;
  double followup_cap = 6.0;  // months
  double tox_target = 0.33;
  double tox_margin = 0.1;
  double tox_monitor_threshold = 0.8;
  int prob_grid_size = 101;
  int envelope_grid_size = 1001;
  TTPPriorConfig prior{};
  MCMCConfig mcmc{};

  void validate() const;
  friend bool operator==(const Stage2Config&, const Stage2Config&) = default;
};

struct Stage2Patient {
  int patient_id = 0;
  int cohort = 0;
  double z = 0.0;
  DoseCombination dose{};
  double enroll_time = 0.0;
  double time = 0.0;  // observed TTP or follow-up, months
  int event = 0;
  int dlt = 0;
  friend bool operator==(const Stage2Patient&, const Stage2Patient&) = default;
};

struct ProbCurve {
  std::vector<double> grid;
  std::vector<double> probs;

  double max() const;
  friend bool operator==(const ProbCurve&, const ProbCurve&) = default;
};

enum class StopReason { Completed, Futility, Toxicity };
std::string to_string(StopReason reason);
StopReason stop_reason_from_string(const std::string& s);

// Generative truth along z: the TTP model plus either a constant DLT rate
// or, when `tox` is set, the DLT probability at the assigned combination.
struct Stage2Truth {
  TTPParams ttp;
  double dlt_rate = 0.33;
  std::optional<ToxParams> tox;
};

struct Stage2Interim {
  int n_enrolled = 0;
  double calendar_time = 0.0;
  double max_prob = 0.0;  // 0 when the toxicity monitor stopped before the fit
  bool toxicity_stop = false;
  bool final = false;
  friend bool operator==(const Stage2Interim&, const Stage2Interim&) = default;
};

struct Stage2Result {
  std::vector<Stage2Patient> records;
  ProbCurve final_curve;
  double z_opt = 0.0;
  double max_prob = 0.0;
  bool reject_h0 = false;
  StopReason stop_reason = StopReason::Completed;
  double calendar_time = 0.0;
  int interims = 0;
  std::vector<Stage2Interim> interim_log;

  int n_enrolled() const { return static_cast<int>(records.size()); }
  bool stopped_early() const { return stop_reason != StopReason::Completed; }
};

std::vector<double> uniform_grid(int n);

// Draws in natural order (beta0..beta5, phi4, phi5, k).
PosteriorChain fit_stage2(std::span<const TTPRecord> data, const TTPPriorConfig& prior,
                          const MCMCConfig& mcmc);
TTPParams ttp_params_at(const PosteriorChain& chain, std::size_t draw);

ProbCurve prob_exceed_curve(const PosteriorChain& chain, double med0, std::span<const double> grid);
double optimal_dose(const ProbCurve& curve);

// Posterior mean of the median TTP at each grid point.
std::vector<double> posterior_mean_median(const PosteriorChain& chain, std::span<const double> grid);
// Posterior median of the median TTP at each grid point.
std::vector<double> posterior_median_median(const PosteriorChain& chain, std::span<const double> grid);

// Draws n points on [0,1] with density proportional to the piecewise-linear
// interpolant of `values` on an equally spaced grid, by rejection from a
// uniform proposal under the envelope 1.01 * max(values).
struct RejectionDraws {
  std::vector<double> z;
  long proposals = 0;
};
RejectionDraws rejection_sample(std::span<const double> values, int n, std::mt19937_64& rng);

std::vector<double> rejection_sample_doses(const PosteriorChain& chain, int n, std::mt19937_64& rng,
                                           int envelope_grid_size = 1001);

bool futility_stop(const ProbCurve& curve, double delta_0);

// Beta(1,1) prior on the DLT rate; true when P(rate > target + margin) > threshold.
double prob_dlt_rate_above(int n, int dlts, double bound);
bool toxicity_monitor(int n, int dlts, double tox_target, double tox_margin, double threshold);
bool toxicity_monitor(std::span<const Stage2Patient> records, double tox_target, double tox_margin,
                      double threshold);

// Observation of each enrolled patient as seen at calendar time `now`.
std::vector<TTPRecord> observe(std::span<const Stage2Patient> patients,
                               std::span<const double> latent_times, double now, double followup_cap);

Stage2Result run_stage2(const MTDCurve& curve, const Stage2Truth& truth, const Stage2Config& config,
                        std::uint64_t seed, const DoseRanges& ranges = {});

void write_stage2_csv(std::ostream& out, std::span<const Stage2Patient> records);

}  // namespace combidose
