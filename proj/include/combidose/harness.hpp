#pragma once

// Monte Carlo operating characteristics over replicate trials.
//
// Replicate i of a campaign runs with seed derive_seed(master_seed, i).
// Every replicate is a pure function of its seed and the scenario, and the
// aggregate is computed from outcomes sorted by replicate index, so the
// result does not depend on the number of worker threads.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "combidose/model.hpp"
#include "combidose/stage1.hpp"
#include "combidose/stage2.hpp"

namespace combidose {

enum class CampaignMode { Stage1, Stage2, Trial };
std::string to_string(CampaignMode mode);
CampaignMode campaign_mode_from_string(const std::string& s);

struct Scenario {
  std::string name;
  std::string note;
  ToxParams true_tox{};
  std::optional<TTPParams> true_ttp;  // nullopt: flat median equal to med0
  double null_shape = 1.5;            // Weibull shape of the flat null
  double effect_size = 2.0;           // months
  double accrual_rate = 1.0;          // overrides stage2.accrual_rate
  double stage2_dlt_rate = 0.33;      // DLT rate along the curve in stage-2-only runs
  Stage1Config stage1{};
  Stage2Config stage2{};
  int replicates = 200;

  bool is_null() const { return !true_ttp.has_value(); }
  TTPParams ttp_truth() const;
  Stage2Config effective_stage2() const;
  void validate() const;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Median-TTP shapes along z used by the shipped stage-2 scenarios. The
// low end of every non-flat shape sits one month below med0.
enum class MedianShape { FlatNull, Increasing, Decreasing, MidPeak, EdgePeak, AboveNull };
std::string to_string(MedianShape shape);
TTPParams median_shape(MedianShape shape, double med0, double effect, double weibull_shape = 1.5);

// Truth with prob_dlt(start) = p_start, solving for eta3 given the corners.
ToxParams tox_truth_through(double rho00, double rho10, double rho01, double p_start,
                            const DoseCombination& start);

// 12 stage-1 truths followed by the stage-2 shapes at effects 1.5 and 2.
std::vector<Scenario> scenario_pack();

using CurvePoint = std::array<double, 2>;

// Signed distance from (x, y) on the true curve to an estimated curve given
// by its discretization and its (unclipped) ordinate at x.
double signed_distance(double x, double y, std::span<const CurvePoint> est_points, double est_y_at_x);
double signed_distance(const MTDCurve& est, double x, double y, std::size_t resolution = 2001);

// Grid of points on the true curve, equally spaced in x.
std::vector<CurvePoint> curve_grid(const MTDCurve& truth, std::size_t n = 101);

// distances[r][g]: replicate r at grid point g; NaN marks a replicate
// without an estimated curve.
std::vector<double> pointwise_bias(std::span<const std::vector<double>> distances);
std::vector<double> percent_selection(std::span<const CurvePoint> grid,
                                      std::span<const std::vector<double>> distances, double p);

double estimate_power(std::span<const double> max_probs, double delta_u);

struct ReplicateOutcome {
  int index = 0;
  std::uint64_t seed = 0;

  bool has_stage1 = false;
  int stage1_n = 0;
  int stage1_dlts = 0;
  bool safety_stop = false;
  bool curve_estimated = false;
  std::vector<double> distances;  // per grid point

  bool has_stage2 = false;
  bool stage2_skipped = false;  // trial mode, no curve to continue on
  int stage2_n = 0;
  StopReason stop_reason = StopReason::Completed;
  double max_prob = 0.0;
  double z_opt = 0.0;
  std::vector<double> final_probs;
  std::vector<double> allocated_z;  // after the first n1
  std::vector<Stage2Interim> interims;
};

struct Stage1Summary {
  std::vector<CurvePoint> grid;
  std::vector<double> pointwise_bias;
  std::vector<double> selection_p10;
  std::vector<double> selection_p20;
  double mean_dlt_rate = 0.0;
  double sd_dlt_rate = 0.0;
  double pct_trials_dlt_above = 0.0;
  double safety_stop_prob = 0.0;
  double curve_rate = 0.0;
  double avg_sample_size = 0.0;
  friend bool operator==(const Stage1Summary&, const Stage1Summary&) = default;
};

struct EarlyStopRow {
  double delta_0 = 0.0;
  double early_stop_prob = 0.0;
  double avg_sample_size = 0.0;
  friend bool operator==(const EarlyStopRow&, const EarlyStopRow&) = default;
};

struct Stage2Summary {
  bool null_hypothesis = false;
  std::vector<double> delta_u;
  std::vector<double> reject_prob;       // power, or type-I error under the null
  std::vector<double> type1_plus_type2;  // filled by pair_errors
  double early_stop_prob = 0.0;
  double futility_stop_prob = 0.0;
  double toxicity_stop_prob = 0.0;
  double avg_sample_size = 0.0;
  std::vector<EarlyStopRow> early_stop_by_delta0;
  std::vector<double> allocation_edges;
  std::vector<double> allocation_histogram;
  double mean_z_opt = 0.0;
  std::vector<double> prob_grid;
  std::vector<double> median_prob_curve;
  friend bool operator==(const Stage2Summary&, const Stage2Summary&) = default;
};

struct OperatingCharacteristics {
  std::string scenario;
  CampaignMode mode = CampaignMode::Stage1;
  double effect_size = 0.0;
  double accrual_rate = 0.0;
  int replicates = 0;
  std::uint64_t master_seed = 0;
  std::optional<Stage1Summary> stage1;
  std::optional<Stage2Summary> stage2;
  friend bool operator==(const OperatingCharacteristics&, const OperatingCharacteristics&) = default;
};

struct CampaignOptions {
  std::vector<double> delta_u{0.8, 0.9};
  std::vector<double> delta_0{0.10, 0.15, 0.20};
  int histogram_bins = 10;
};

// Full trajectories of replicate `index`; stage2 is absent in stage-1 mode
// and when a trial has no curve to continue on.
struct ReplicateTrajectory {
  std::optional<Stage1Result> stage1;
  std::optional<Stage2Result> stage2;
};
ReplicateTrajectory replay_replicate(const Scenario& scenario, CampaignMode mode, int index,
                                     std::uint64_t master_seed);

ReplicateOutcome run_replicate(const Scenario& scenario, CampaignMode mode, int index,
                               std::uint64_t master_seed);

// Outcomes may arrive in any order.
OperatingCharacteristics aggregate(const Scenario& scenario, CampaignMode mode,
                                   std::vector<ReplicateOutcome> outcomes, std::uint64_t master_seed,
                                   const CampaignOptions& options = {});

OperatingCharacteristics run_campaign(const Scenario& scenario, CampaignMode mode, int parallelism,
                                      std::uint64_t master_seed, const CampaignOptions& options = {});

// Sum of the null's type-I error and the alternative's type-II error at
// each delta_u; stored in the returned copy of `alternative`.
OperatingCharacteristics pair_errors(const OperatingCharacteristics& null_oc,
                                     const OperatingCharacteristics& alternative);

}  // namespace combidose
