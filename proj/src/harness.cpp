#include "combidose/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "combidose/rng.hpp"

namespace combidose {

std::string to_string(CampaignMode mode) {
  switch (mode) {
    case CampaignMode::Stage1: return "stage1";
    case CampaignMode::Stage2: return "stage2";
    case CampaignMode::Trial: return "trial";
  }
  return "stage1";
}

CampaignMode campaign_mode_from_string(const std::string& s) {
  if (s == "stage1") return CampaignMode::Stage1;
  if (s == "stage2") return CampaignMode::Stage2;
  if (s == "trial") return CampaignMode::Trial;
  throw std::invalid_argument("unknown campaign mode: " + s);
}

TTPParams Scenario::ttp_truth() const {
  return true_ttp ? *true_ttp : TTPParams::flat(stage2.med0, null_shape);
}

Stage2Config Scenario::effective_stage2() const {
  Stage2Config c = stage2;
  c.accrual_rate = accrual_rate;
  return c;
}

void Scenario::validate() const {
  if (name.empty()) throw DomainError("scenario needs a name");
  if (replicates < 1) throw DomainError("scenario needs at least one replicate");
  if (!(effect_size >= 0.0)) throw DomainError("effect size must be non-negative");
  if (!(stage2_dlt_rate >= 0.0 && stage2_dlt_rate <= 1.0)) throw DomainError("DLT rate outside [0,1]");
  if (!(null_shape > 0.0)) throw DomainError("null Weibull shape must be positive");
  true_tox.validate();
  if (true_ttp && !true_ttp->valid()) throw DomainError("invalid TTP truth");
  stage1.validate();
  effective_stage2().validate();
  MTDCurve(true_tox, stage1.theta);  // throws NoCurveError when the truth has no contour
}

double signed_distance(double x, double y, std::span<const CurvePoint> est_points, double est_y_at_x) {
  if (est_points.empty()) throw std::invalid_argument("empty estimated curve");
  double best = std::numeric_limits<double>::infinity();
  for (const CurvePoint& p : est_points) best = std::min(best, std::hypot(p[0] - x, p[1] - y));
  return est_y_at_x < y ? -best : best;
}

double signed_distance(const MTDCurve& est, double x, double y, std::size_t resolution) {
  const std::vector<CurvePoint> pts = est.points(resolution);
  return signed_distance(x, y, pts, est.y_at(x));
}

std::vector<CurvePoint> curve_grid(const MTDCurve& truth, std::size_t n) { return truth.points(n); }

std::vector<double> pointwise_bias(std::span<const std::vector<double>> distances) {
  if (distances.empty()) return {};
  const std::size_t g = distances.front().size();
  std::vector<double> sum(g, 0.0);
  std::vector<int> count(g, 0);
  for (const std::vector<double>& d : distances) {
    if (d.size() != g) throw std::invalid_argument("ragged distance table");
    for (std::size_t j = 0; j < g; ++j) {
      if (std::isnan(d[j])) continue;
      sum[j] += d[j];
      ++count[j];
    }
  }
  for (std::size_t j = 0; j < g; ++j) {
    sum[j] = count[j] > 0 ? sum[j] / count[j] : std::numeric_limits<double>::quiet_NaN();
  }
  return sum;
}

std::vector<double> percent_selection(std::span<const CurvePoint> grid,
                                      std::span<const std::vector<double>> distances, double p) {
  std::vector<double> hits(grid.size(), 0.0);
  if (distances.empty()) return hits;
  for (const std::vector<double>& d : distances) {
    if (d.size() != grid.size()) throw std::invalid_argument("distance table does not match grid");
    for (std::size_t j = 0; j < grid.size(); ++j) {
      // NaN (no estimated curve) compares false and counts as a miss.
      hits[j] += std::abs(d[j]) <= p * std::hypot(grid[j][0], grid[j][1]) ? 1.0 : 0.0;
    }
  }
  for (double& h : hits) h /= static_cast<double>(distances.size());
  return hits;
}

double estimate_power(std::span<const double> max_probs, double delta_u) {
  if (max_probs.empty()) return 0.0;
  std::size_t n = 0;
  for (double m : max_probs) n += m > delta_u;
  return static_cast<double>(n) / static_cast<double>(max_probs.size());
}

namespace {

void record_stage2(ReplicateOutcome& out, const Stage2Result& r, int n1) {
  out.has_stage2 = true;
  out.stage2_n = r.n_enrolled();
  out.stop_reason = r.stop_reason;
  out.max_prob = r.max_prob;
  out.z_opt = r.z_opt;
  out.final_probs = r.final_curve.probs;
  out.interims = r.interim_log;
  for (std::size_t i = static_cast<std::size_t>(n1); i < r.records.size(); ++i) {
    out.allocated_z.push_back(r.records[i].z);
  }
}

}  // namespace

ReplicateTrajectory replay_replicate(const Scenario& scenario, CampaignMode mode, int index,
                                     std::uint64_t master_seed) {
  const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(index));
  ReplicateTrajectory out;
  std::optional<MTDCurve> curve;
  if (mode == CampaignMode::Stage2) {
    curve = MTDCurve(scenario.true_tox, scenario.stage1.theta);
  } else {
    out.stage1 = run_stage1(scenario.true_tox, scenario.stage1, derive_seed(seed, 1));
    curve = out.stage1->estimated_curve;
  }
  if (mode == CampaignMode::Stage1 || !curve) return out;
  Stage2Truth truth;
  truth.ttp = scenario.ttp_truth();
  truth.dlt_rate = scenario.stage2_dlt_rate;
  if (mode == CampaignMode::Trial) truth.tox = scenario.true_tox;
  out.stage2 = run_stage2(*curve, truth, scenario.effective_stage2(), derive_seed(seed, 2), scenario.stage1.ranges);
  return out;
}

ReplicateOutcome run_replicate(const Scenario& scenario, CampaignMode mode, int index,
                               std::uint64_t master_seed) {
  ReplicateOutcome out;
  out.index = index;
  out.seed = derive_seed(master_seed, static_cast<std::uint64_t>(index));
  const ReplicateTrajectory t = replay_replicate(scenario, mode, index, master_seed);

  if (t.stage1) {
    const Stage1Result& r = *t.stage1;
    out.has_stage1 = true;
    out.stage1_n = static_cast<int>(r.records.size());
    out.stage1_dlts = r.dlt_count();
    out.safety_stop = r.stopped_for_safety;
    out.curve_estimated = r.estimated_curve.has_value();
    const std::vector<CurvePoint> grid = curve_grid(MTDCurve(scenario.true_tox, scenario.stage1.theta));
    out.distances.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    if (r.estimated_curve) {
      const std::vector<CurvePoint> est = r.estimated_curve->points(2001);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        out.distances[j] = signed_distance(grid[j][0], grid[j][1], est, r.estimated_curve->y_at(grid[j][0]));
      }
    }
  }
  if (mode == CampaignMode::Stage1) return out;
  if (!t.stage2) {
    out.has_stage2 = true;
    out.stage2_skipped = true;
    return out;
  }
  record_stage2(out, *t.stage2, scenario.effective_stage2().n1);
  return out;
}

namespace {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Stage1Summary summarize_stage1(const Scenario& scenario, std::span<const ReplicateOutcome> outcomes) {
  Stage1Summary s;
  const MTDCurve true_curve(scenario.true_tox, scenario.stage1.theta);
  s.grid = curve_grid(true_curve);
  std::vector<std::vector<double>> distances;
  std::vector<double> rates, sizes;
  double stops = 0.0, curves = 0.0, above = 0.0;
  for (const ReplicateOutcome& o : outcomes) {
    distances.push_back(o.distances);
    const double rate = o.stage1_n > 0 ? static_cast<double>(o.stage1_dlts) / o.stage1_n : 0.0;
    rates.push_back(rate);
    sizes.push_back(o.stage1_n);
    stops += o.safety_stop;
    curves += o.curve_estimated;
    above += rate > scenario.stage1.theta + 0.1;
  }
  const double m = static_cast<double>(outcomes.size());
  s.pointwise_bias = pointwise_bias(distances);
  s.selection_p10 = percent_selection(s.grid, distances, 0.1);
  s.selection_p20 = percent_selection(s.grid, distances, 0.2);
  s.mean_dlt_rate = mean(rates);
  double ss = 0.0;
  for (double r : rates) ss += (r - s.mean_dlt_rate) * (r - s.mean_dlt_rate);
  s.sd_dlt_rate = rates.size() > 1 ? std::sqrt(ss / static_cast<double>(rates.size() - 1)) : 0.0;
  s.pct_trials_dlt_above = above / m;
  s.safety_stop_prob = stops / m;
  s.curve_rate = curves / m;
  s.avg_sample_size = mean(sizes);
  return s;
}

// Stopping point of one replicate had futility been checked at `delta_0`.
// Interims coincide across thresholds until the first stop, so this is
// exact for any threshold at least as large as the one the trial ran with.
std::pair<bool, int> stop_under(const ReplicateOutcome& o, double delta_0) {
  if (o.stage2_skipped) return {true, 0};
  for (const Stage2Interim& it : o.interims) {
    if (it.toxicity_stop) return {true, it.n_enrolled};
    if (it.final) return {false, it.n_enrolled};
    if (it.max_prob < delta_0) return {true, it.n_enrolled};
  }
  return {o.stop_reason != StopReason::Completed, o.stage2_n};
}

Stage2Summary summarize_stage2(const Scenario& scenario, std::span<const ReplicateOutcome> outcomes,
                               const CampaignOptions& options) {
  Stage2Summary s;
  const Stage2Config cfg = scenario.effective_stage2();
  const double m = static_cast<double>(outcomes.size());
  s.null_hypothesis = scenario.is_null();
  s.delta_u = options.delta_u;

  std::vector<double> max_probs, sizes, z_opts;
  double early = 0.0, fut = 0.0, tox = 0.0;
  for (const ReplicateOutcome& o : outcomes) {
    // Trials stopped for toxicity never reject; futility stops sit below delta_u anyway.
    const bool can_reject = !o.stage2_skipped && o.stop_reason != StopReason::Toxicity;
    max_probs.push_back(can_reject ? o.max_prob : 0.0);
    sizes.push_back(o.stage2_n);
    early += o.stage2_skipped || o.stop_reason != StopReason::Completed;
    fut += !o.stage2_skipped && o.stop_reason == StopReason::Futility;
    tox += !o.stage2_skipped && o.stop_reason == StopReason::Toxicity;
    if (!o.stage2_skipped && !o.final_probs.empty()) z_opts.push_back(o.z_opt);
  }
  for (double du : options.delta_u) s.reject_prob.push_back(estimate_power(max_probs, du));
  s.early_stop_prob = early / m;
  s.futility_stop_prob = fut / m;
  s.toxicity_stop_prob = tox / m;
  s.avg_sample_size = mean(sizes);
  s.mean_z_opt = mean(z_opts);

  for (double d0 : options.delta_0) {
    if (d0 < cfg.delta_0 - 1e-12) continue;
    EarlyStopRow row{d0, 0.0, 0.0};
    for (const ReplicateOutcome& o : outcomes) {
      const auto [stopped, n] = stop_under(o, d0);
      row.early_stop_prob += stopped;
      row.avg_sample_size += n;
    }
    row.early_stop_prob /= m;
    row.avg_sample_size /= m;
    s.early_stop_by_delta0.push_back(row);
  }

  const int bins = std::max(1, options.histogram_bins);
  for (int b = 0; b <= bins; ++b) s.allocation_edges.push_back(static_cast<double>(b) / bins);
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  double total = 0.0;
  for (const ReplicateOutcome& o : outcomes) {
    for (double z : o.allocated_z) {
      counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(z * bins)))] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& c : counts) c /= total;
    s.allocation_histogram = std::move(counts);
  }

  s.prob_grid = uniform_grid(cfg.prob_grid_size);
  std::vector<std::vector<double>> curves;
  for (const ReplicateOutcome& o : outcomes) {
    if (o.final_probs.size() == s.prob_grid.size()) curves.push_back(o.final_probs);
  }
  if (!curves.empty()) {
    std::vector<double> column(curves.size());
    for (std::size_t g = 0; g < s.prob_grid.size(); ++g) {
      for (std::size_t r = 0; r < curves.size(); ++r) column[r] = curves[r][g];
      s.median_prob_curve.push_back(empirical_quantile(column, 0.5));
    }
  }
  return s;
}

}  // namespace

OperatingCharacteristics aggregate(const Scenario& scenario, CampaignMode mode,
                                   std::vector<ReplicateOutcome> outcomes, std::uint64_t master_seed,
                                   const CampaignOptions& options) {
  if (outcomes.empty()) throw std::invalid_argument("no replicate outcomes to aggregate");
  std::sort(outcomes.begin(), outcomes.end(),
            [](const ReplicateOutcome& a, const ReplicateOutcome& b) { return a.index < b.index; });
  OperatingCharacteristics oc;
  oc.scenario = scenario.name;
  oc.mode = mode;
  oc.effect_size = scenario.effect_size;
  oc.accrual_rate = scenario.accrual_rate;
  oc.replicates = static_cast<int>(outcomes.size());
  oc.master_seed = master_seed;
  if (mode != CampaignMode::Stage2) oc.stage1 = summarize_stage1(scenario, outcomes);
  if (mode != CampaignMode::Stage1) oc.stage2 = summarize_stage2(scenario, outcomes, options);
  return oc;
}

OperatingCharacteristics run_campaign(const Scenario& scenario, CampaignMode mode, int parallelism,
                                      std::uint64_t master_seed, const CampaignOptions& options) {
  scenario.validate();
  const int m = scenario.replicates;
  const int workers = std::clamp(parallelism, 1, m);
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(m));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (int i = next++; i < m; i = next++) {
      try {
        outcomes[static_cast<std::size_t>(i)] = run_replicate(scenario, mode, i, master_seed);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = m;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate(scenario, mode, std::move(outcomes), master_seed, options);
}

OperatingCharacteristics pair_errors(const OperatingCharacteristics& null_oc,
                                     const OperatingCharacteristics& alternative) {
  if (!null_oc.stage2 || !alternative.stage2) throw std::invalid_argument("pairing needs stage-2 results");
  const Stage2Summary& n = *null_oc.stage2;
  OperatingCharacteristics out = alternative;
  Stage2Summary& a = *out.stage2;
  if (n.delta_u != a.delta_u) throw std::invalid_argument("delta_u grids differ");
  a.type1_plus_type2.clear();
  for (std::size_t i = 0; i < a.delta_u.size(); ++i) {
    a.type1_plus_type2.push_back(n.reject_prob[i] + (1.0 - a.reject_prob[i]));
  }
  return out;
}

}  // namespace combidose
