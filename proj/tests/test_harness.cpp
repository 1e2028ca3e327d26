#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "combidose/harness.hpp"
#include "combidose/io.hpp"
#include "combidose/rng.hpp"

using namespace combidose;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Points of the segment y = c - x inside the unit square.
std::vector<CurvePoint> line_points(double c, int n = 2001) {
  std::vector<CurvePoint> pts;
  for (int i = 0; i < n; ++i) {
    const double x = c * i / (n - 1.0);
    pts.push_back({x, c - x});
  }
  return pts;
}

Scenario find_scenario(const std::string& name) {
  for (const Scenario& s : scenario_pack()) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("no scenario " + name);
}

ReplicateOutcome fixture_outcome(int index, double max_prob, StopReason reason, int n,
                                 std::vector<double> allocated) {
  ReplicateOutcome o;
  o.index = index;
  o.has_stage2 = true;
  o.max_prob = max_prob;
  o.stop_reason = reason;
  o.stage2_n = n;
  o.z_opt = 0.1 * index;
  o.allocated_z = std::move(allocated);
  o.final_probs.assign(101, max_prob);
  Stage2Interim first{10, 12.0, reason == StopReason::Futility ? 0.05 : 0.5, false, false};
  o.interims.push_back(first);
  if (reason == StopReason::Completed) o.interims.push_back({30, 40.0, max_prob, false, true});
  return o;
}

}  // namespace

TEST_CASE("signed distance to an estimated curve") {
  // True curve y = 1 - x, estimate y = 0.9 - x, at (0.5, 0.5).
  const auto est = line_points(0.9);
  CHECK(std::abs(signed_distance(0.5, 0.5, est, 0.4) - (-0.0707)) < 1e-3);
  CHECK(signed_distance(0.5, 0.5, est, 0.4) == doctest::Approx(-0.1 / std::sqrt(2.0)).epsilon(1e-6));
  const auto up = line_points(1.0);
  CHECK(signed_distance(0.5, 0.4, up, 0.5) > 0.0);
  CHECK(signed_distance(0.3, 0.7, up, 0.7) == doctest::Approx(0.0).scale(1.0));

  const MTDCurve truth(ToxParams{0.06, 0.35, 0.25, 3.0}, 0.33);
  for (const auto& pt : curve_grid(truth, 11)) CHECK(std::abs(signed_distance(truth, pt[0], pt[1])) < 1e-6);
  const MTDCurve higher(ToxParams{0.04, 0.3, 0.2, 3.0}, 0.33);
  CHECK(signed_distance(higher, 0.5, truth.y_at(0.5)) > 0.0);
}

TEST_CASE("true-curve grid is equally spaced in x") {
  const MTDCurve truth(ToxParams{0.06, 0.35, 0.25, 3.0}, 0.33);
  const auto grid = curve_grid(truth);
  REQUIRE(grid.size() == 101);
  CHECK(grid.front()[0] == doctest::Approx(truth.x_lo()));
  CHECK(grid.back()[0] == doctest::Approx(truth.x_hi()));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i][0] - grid[i - 1][0] == doctest::Approx((truth.x_hi() - truth.x_lo()) / 100.0));
  }
}

TEST_CASE("pointwise bias") {
  const std::vector<std::vector<double>> zero(3, std::vector<double>(4, 0.0));
  for (double b : pointwise_bias(zero)) CHECK(b == 0.0);
  const std::vector<std::vector<double>> sym{{0.1, -0.2}, {-0.1, 0.2}};
  for (double b : pointwise_bias(sym)) CHECK(b == doctest::Approx(0.0).scale(1.0));
  const std::vector<std::vector<double>> single{{0.03, -0.07}};
  CHECK(pointwise_bias(single) == single[0]);
  const std::vector<std::vector<double>> gaps{{0.2, kNaN}, {0.4, kNaN}};
  const auto b = pointwise_bias(gaps);
  CHECK(b[0] == doctest::Approx(0.3));
  CHECK(std::isnan(b[1]));
}

TEST_CASE("percent selection") {
  // True curve y = 1 - x on x in [0.1, 0.9]; estimate shifted down by 0.1.
  std::vector<CurvePoint> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back({0.1 + 0.1 * i, 0.9 - 0.1 * i});
  const double d = -0.1 / std::sqrt(2.0);
  const std::vector<std::vector<double>> shifted(5, std::vector<double>(grid.size(), d));
  const auto sel = percent_selection(grid, shifted, 0.09);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double delta = std::hypot(grid[g][0], grid[g][1]);
    CHECK(sel[g] == (std::abs(d) <= 0.09 * delta ? 1.0 : 0.0));
  }
  CHECK(sel[0] == 1.0);
  CHECK(sel[4] == 0.0);

  const std::vector<std::vector<double>> exact(5, std::vector<double>(grid.size(), 0.0));
  for (double s : percent_selection(grid, exact, 0.1)) CHECK(s == 1.0);

  std::vector<std::vector<double>> just_above(3, std::vector<double>(grid.size()));
  for (auto& row : just_above) {
    for (std::size_t g = 0; g < grid.size(); ++g) row[g] = std::nextafter(0.2 * std::hypot(grid[g][0], grid[g][1]), 1.0);
  }
  for (double s : percent_selection(grid, just_above, 0.2)) CHECK(s == 0.0);

  const std::vector<std::vector<double>> missing{std::vector<double>(grid.size(), kNaN), std::vector<double>(grid.size(), 0.0)};
  for (double s : percent_selection(grid, missing, 0.2)) CHECK(s == 0.5);
}

TEST_CASE("power estimate uses a strict threshold") {
  const std::vector<double> probs{0.95, 0.7, 0.85, 0.9};
  CHECK(estimate_power(probs, 0.8) == 0.75);
  CHECK(estimate_power(probs, 0.9) == 0.25);
  CHECK(estimate_power(std::vector<double>{0.1, 0.2}, 0.8) == 0.0);
}

TEST_CASE("aggregation of injected replicate results") {
  Scenario sc = find_scenario("s2-mid-peak-e2");
  std::vector<ReplicateOutcome> outcomes{
      fixture_outcome(0, 0.95, StopReason::Completed, 30, {0.05, 0.15, 0.95}),
      fixture_outcome(1, 0.7, StopReason::Completed, 30, {0.55}),
      fixture_outcome(2, 0.05, StopReason::Futility, 10, {}),
      fixture_outcome(3, 0.9, StopReason::Completed, 30, {0.99, 1.0, 0.12, 0.5}),
  };
  outcomes[2].final_probs.assign(101, 0.05);
  CampaignOptions opts;
  opts.delta_0 = {0.1, 0.15, 0.2};
  const auto oc = aggregate(sc, CampaignMode::Stage2, outcomes, 7, opts);
  REQUIRE(oc.stage2);
  const Stage2Summary& s = *oc.stage2;
  CHECK(oc.replicates == 4);
  CHECK_FALSE(s.null_hypothesis);
  CHECK(s.reject_prob == std::vector<double>{0.5, 0.25});
  CHECK(s.early_stop_prob == 0.25);
  CHECK(s.futility_stop_prob == 0.25);
  CHECK(s.toxicity_stop_prob == 0.0);
  CHECK(s.avg_sample_size == 25.0);
  CHECK(s.mean_z_opt == doctest::Approx((0.0 + 0.1 + 0.2 + 0.3) / 4.0));
  REQUIRE(s.allocation_histogram.size() == 10);
  // Eight allocations: bins 0, 1 (two), 5 (two), 9 (three).
  CHECK(s.allocation_histogram[0] == doctest::Approx(1.0 / 8.0));
  CHECK(s.allocation_histogram[1] == doctest::Approx(2.0 / 8.0));
  CHECK(s.allocation_histogram[5] == doctest::Approx(2.0 / 8.0));
  CHECK(s.allocation_histogram[9] == doctest::Approx(3.0 / 8.0));
  REQUIRE(s.early_stop_by_delta0.size() == 3);
  for (const auto& row : s.early_stop_by_delta0) {
    CHECK(row.early_stop_prob == 0.25);
    CHECK(row.avg_sample_size == 25.0);
  }
  CHECK(s.median_prob_curve.size() == 101);
  CHECK(s.median_prob_curve[0] == doctest::Approx((0.7 + 0.9) / 2.0));

  // Replicate order does not matter.
  std::vector<ReplicateOutcome> reversed(outcomes.rbegin(), outcomes.rend());
  CHECK(aggregate(sc, CampaignMode::Stage2, reversed, 7, opts) == oc);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(reversed.begin(), reversed.end(), rng);
    CHECK(aggregate(sc, CampaignMode::Stage2, reversed, 7, opts) == oc);
  }
}

TEST_CASE("pairing null and alternative errors") {
  OperatingCharacteristics null_oc, alt;
  null_oc.stage2 = Stage2Summary{};
  null_oc.stage2->delta_u = {0.8, 0.9};
  null_oc.stage2->reject_prob = {0.3, 0.1};
  alt.stage2 = Stage2Summary{};
  alt.stage2->delta_u = {0.8, 0.9};
  alt.stage2->reject_prob = {0.9, 0.7};
  const auto paired = pair_errors(null_oc, alt);
  CHECK(paired.stage2->type1_plus_type2[0] == doctest::Approx(0.3 + 0.1));
  CHECK(paired.stage2->type1_plus_type2[1] == doctest::Approx(0.1 + 0.3));
  alt.stage2->delta_u = {0.8};
  CHECK_THROWS(pair_errors(null_oc, alt));
}

TEST_CASE("scenario pack") {
  const auto pack = scenario_pack();
  CHECK(pack.size() == 23);
  int null_count = 0;
  for (const Scenario& s : pack) {
    CHECK_NOTHROW(s.validate());
    CHECK_FALSE(s.note.empty());
    null_count += s.is_null();
    // Every truth has a contour inside the unit square.
    CHECK_NOTHROW(MTDCurve(s.true_tox, s.stage1.theta));
  }
  CHECK(null_count == 13);

  const Scenario calibrated = find_scenario("s1-through-calibrated");
  CHECK(prob_dlt(calibrated.true_tox, calibrated.stage1.start_dose.x, calibrated.stage1.start_dose.y) ==
        doctest::Approx(0.33));
  const Scenario below = find_scenario("s1-below");
  CHECK(prob_dlt(below.true_tox, 1.0 / 3.0, 0.5) > 0.33);
  const Scenario above = find_scenario("s1-above");
  CHECK(prob_dlt(above.true_tox, 1.0 / 3.0, 0.5) < 0.33);

  // Stage-2 shapes against the null median.
  const double med0 = 4.0;
  auto med = [](const TTPParams& p, double z) { return weibull_median(p, z); };
  const TTPParams inc = median_shape(MedianShape::Increasing, med0, 2.0);
  CHECK(med(inc, 0.0) == doctest::Approx(med0 - 1.0));
  CHECK(med(inc, 1.0) == doctest::Approx(med0 + 2.0));
  const TTPParams dec = median_shape(MedianShape::Decreasing, med0, 2.0);
  CHECK(med(dec, 0.0) == doctest::Approx(med0 + 2.0));
  const TTPParams mid = median_shape(MedianShape::MidPeak, med0, 1.5);
  CHECK(med(mid, 0.5) == doctest::Approx(med0 + 1.5));
  CHECK(med(mid, 0.0) == doctest::Approx(med0 - 1.0));
  CHECK(med(mid, 1.0) == doctest::Approx(med0 - 1.0));
  const TTPParams edge = median_shape(MedianShape::EdgePeak, med0, 2.0);
  CHECK(med(edge, 0.8) == doctest::Approx(med0 + 2.0));
  CHECK(med(edge, 0.8) > med(edge, 0.7));
  CHECK(med(edge, 0.8) > med(edge, 0.9));
  const TTPParams aboveNull = median_shape(MedianShape::AboveNull, med0, 1.5);
  for (double z : {0.0, 0.5, 1.0}) CHECK(med(aboveNull, z) == doctest::Approx(med0 + 1.5));
  const TTPParams flat = median_shape(MedianShape::FlatNull, med0, 0.0);
  for (double z : {0.0, 0.5, 1.0}) CHECK(med(flat, z) == doctest::Approx(med0));

  const ToxParams solved = tox_truth_through(0.05, 0.3, 0.3, 0.33, calibrated.stage1.start_dose);
  CHECK(prob_dlt(solved, 1.0 / 3.0, 0.5) == doctest::Approx(0.33));
}

TEST_CASE("replicate seeds follow the documented split") {
  Scenario sc = find_scenario("s1-through-calibrated");
  sc.replicates = 2;
  const auto o = run_replicate(sc, CampaignMode::Stage1, 1, 99);
  CHECK(o.seed == derive_seed(99, 1));
  const auto t = replay_replicate(sc, CampaignMode::Stage1, 1, 99);
  REQUIRE(t.stage1);
  CHECK(t.stage1->records == run_stage1(sc.true_tox, sc.stage1, derive_seed(derive_seed(99, 1), 1)).records);
}

TEST_CASE("campaign results do not depend on the number of threads") {
  Scenario sc = find_scenario("s1-through-calibrated");
  sc.replicates = 4;
  const auto serial = run_campaign(sc, CampaignMode::Stage1, 1, 5);
  const auto parallel = run_campaign(sc, CampaignMode::Stage1, 4, 5);
  CHECK(serial == parallel);
  CHECK(dump(Json(serial)) == dump(Json(parallel)));
  CHECK_FALSE(run_campaign(sc, CampaignMode::Stage1, 2, 6) == serial);
}

TEST_CASE("early stop by futility threshold matches direct runs") {
  Scenario sc = find_scenario("s2-flat-null");
  sc.true_ttp = TTPParams::flat(2.5, 1.5);
  sc.replicates = 6;
  CampaignOptions opts;
  opts.delta_0 = {0.10, 0.20, 0.35};
  const auto base = run_campaign(sc, CampaignMode::Stage2, 1, 3, opts);
  REQUIRE(base.stage2);
  const auto& rows = base.stage2->early_stop_by_delta0;
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].early_stop_prob == base.stage2->early_stop_prob);
  CHECK(rows[0].avg_sample_size == base.stage2->avg_sample_size);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].early_stop_prob >= rows[i - 1].early_stop_prob);
    Scenario direct = sc;
    direct.stage2.delta_0 = rows[i].delta_0;
    const auto oc = run_campaign(direct, CampaignMode::Stage2, 1, 3, opts);
    CHECK(oc.stage2->early_stop_prob == doctest::Approx(rows[i].early_stop_prob));
    CHECK(oc.stage2->avg_sample_size == doctest::Approx(rows[i].avg_sample_size));
  }
}
