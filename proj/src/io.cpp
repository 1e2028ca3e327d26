#include "combidose/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace combidose {

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double get_num(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw FormatError("expected a number, got " + j.dump());
  return j.get<double>();
}

Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> get_nums(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& x : j) out.push_back(get_num(x));
  return out;
}

void require_object(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw FormatError(std::string(what) + ": unknown field '" + key + "'");
  }
}

// Reads `key` into `out` when present; absent keys keep the default.
template <typename T>
void read(const Json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      out = get_num(*it);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      out = get_nums(*it);
    } else {
      out = it->template get<T>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  T out{};
  read(j, key, out);
  return out;
}

}  // namespace

void to_json(Json& j, const DoseRange& v) { j = {{"min", v.min}, {"max", v.max}}; }
void from_json(const Json& j, DoseRange& v) {
  require_object(j, {"min", "max"}, "dose range");
  read(j, "min", v.min);
  read(j, "max", v.max);
}

void to_json(Json& j, const DoseRanges& v) { j = {{"agent_a", v.a}, {"agent_b", v.b}}; }
void from_json(const Json& j, DoseRanges& v) {
  require_object(j, {"agent_a", "agent_b"}, "dose ranges");
  read(j, "agent_a", v.a);
  read(j, "agent_b", v.b);
}

void to_json(Json& j, const DoseCombination& v) {
  j = {{"x", v.x}, {"y", v.y}, {"raw_x", v.raw_x}, {"raw_y", v.raw_y}};
}
void from_json(const Json& j, DoseCombination& v) {
  require_object(j, {"x", "y", "raw_x", "raw_y"}, "dose combination");
  read(j, "x", v.x);
  read(j, "y", v.y);
  read(j, "raw_x", v.raw_x);
  read(j, "raw_y", v.raw_y);
}

void to_json(Json& j, const ToxParams& v) {
  j = {{"rho00", v.rho00}, {"rho10", v.rho10}, {"rho01", v.rho01}, {"eta3", v.eta3}};
}
void from_json(const Json& j, ToxParams& v) {
  require_object(j, {"rho00", "rho10", "rho01", "eta3"}, "toxicity parameters");
  v.rho00 = required<double>(j, "rho00");
  v.rho10 = required<double>(j, "rho10");
  v.rho01 = required<double>(j, "rho01");
  v.eta3 = required<double>(j, "eta3");
}

void to_json(Json& j, const BetaPrior& v) { j = {{"a", v.a}, {"b", v.b}}; }
void from_json(const Json& j, BetaPrior& v) {
  require_object(j, {"a", "b"}, "beta prior");
  read(j, "a", v.a);
  read(j, "b", v.b);
}

void to_json(Json& j, const GammaPrior& v) { j = {{"shape", v.shape}, {"rate", v.rate}}; }
void from_json(const Json& j, GammaPrior& v) {
  require_object(j, {"shape", "rate"}, "gamma prior");
  read(j, "shape", v.shape);
  read(j, "rate", v.rate);
}

void to_json(Json& j, const ToxPriorConfig& v) {
  j = {{"rho01", v.rho01}, {"rho10", v.rho10}, {"rho00_ratio", v.rho00_ratio}, {"eta3", v.eta3}};
}
void from_json(const Json& j, ToxPriorConfig& v) {
  require_object(j, {"rho01", "rho10", "rho00_ratio", "eta3"}, "toxicity prior");
  read(j, "rho01", v.rho01);
  read(j, "rho10", v.rho10);
  read(j, "rho00_ratio", v.rho00_ratio);
  read(j, "eta3", v.eta3);
}

void to_json(Json& j, const TTPParams& v) {
  j = {{"beta", v.beta}, {"phi4", v.phi4}, {"phi5", v.phi5}, {"k", v.k}};
}
void from_json(const Json& j, TTPParams& v) {
  require_object(j, {"beta", "phi4", "phi5", "k"}, "TTP parameters");
  const std::vector<double> beta = required<std::vector<double>>(j, "beta");
  if (beta.size() != kSplineCoefficients) throw FormatError("beta must have 6 coefficients");
  std::copy(beta.begin(), beta.end(), v.beta.begin());
  read(j, "phi4", v.phi4);
  read(j, "phi5", v.phi5);
  v.k = required<double>(j, "k");
}

void to_json(Json& j, const TTPPriorConfig& v) {
  j = {{"mu", v.mu}, {"sigma2", v.sigma2}, {"k_lo", v.k_lo}, {"k_hi", v.k_hi}};
}
void from_json(const Json& j, TTPPriorConfig& v) {
  require_object(j, {"mu", "sigma2", "k_lo", "k_hi"}, "TTP prior");
  if (j.contains("mu")) {
    const std::vector<double> mu = get_nums(j.at("mu"));
    if (mu.size() != kSplineCoefficients) throw FormatError("mu must have 6 entries");
    std::copy(mu.begin(), mu.end(), v.mu.begin());
  }
  read(j, "sigma2", v.sigma2);
  read(j, "k_lo", v.k_lo);
  read(j, "k_hi", v.k_hi);
}

void to_json(Json& j, const MCMCConfig& v) {
  j = {{"burn_in", v.burn_in},   {"keep", v.keep},           {"thin", v.thin},
       {"adapt_target", v.adapt_target}, {"seed", v.seed}, {"initial_step_sizes", v.initial_step_sizes}};
}
void from_json(const Json& j, MCMCConfig& v) {
  require_object(j, {"burn_in", "keep", "thin", "adapt_target", "seed", "initial_step_sizes"}, "mcmc");
  read(j, "burn_in", v.burn_in);
  read(j, "keep", v.keep);
  read(j, "thin", v.thin);
  read(j, "adapt_target", v.adapt_target);
  read(j, "seed", v.seed);
  read(j, "initial_step_sizes", v.initial_step_sizes);
}

void to_json(Json& j, const Stage1Config& v) {
  j = {{"n_max", v.n_max},
       {"theta", v.theta},
       {"ranges", v.ranges},
       {"start_dose", {{"raw_x", v.start_dose.raw_x}, {"raw_y", v.start_dose.raw_y}}},
       {"alpha_start", v.alpha_start},
       {"alpha_cap", v.alpha_cap},
       {"prior", v.prior},
       {"safety_threshold", v.safety_threshold},
       {"mcmc", v.mcmc}};
}
void from_json(const Json& j, Stage1Config& v) {
  require_object(j, {"n_max", "theta", "ranges", "start_dose", "alpha_start", "alpha_cap", "prior",
                     "safety_threshold", "mcmc"},
                 "stage1 config");
  read(j, "n_max", v.n_max);
  read(j, "theta", v.theta);
  read(j, "ranges", v.ranges);
  if (j.contains("start_dose")) {
    const Json& s = j.at("start_dose");
    require_object(s, {"raw_x", "raw_y"}, "start dose");
    v.start_dose = DoseCombination::from_raw(required<double>(s, "raw_x"), required<double>(s, "raw_y"), v.ranges);
  } else {
    v.start_dose = DoseCombination::from_raw(v.start_dose.raw_x, v.start_dose.raw_y, v.ranges);
  }
  read(j, "alpha_start", v.alpha_start);
  read(j, "alpha_cap", v.alpha_cap);
  read(j, "prior", v.prior);
  read(j, "safety_threshold", v.safety_threshold);
  read(j, "mcmc", v.mcmc);
}

void to_json(Json& j, const Stage2Config& v) {
  j = {{"n_max", v.n_max},
       {"n1", v.n1},
       {"n2", v.n2},
       {"med0", v.med0},
       {"delta_u", v.delta_u},
       {"delta_0", v.delta_0},
       {"accrual_rate", v.accrual_rate},
       {"poisson_accrual", v.poisson_accrual},
       {"followup_cap", v.followup_cap},
       {"tox_target", v.tox_target},
       {"tox_margin", v.tox_margin},
       {"tox_monitor_threshold", v.tox_monitor_threshold},
       {"prob_grid_size", v.prob_grid_size},
       {"envelope_grid_size", v.envelope_grid_size},
       {"prior", v.prior},
       {"mcmc", v.mcmc}};
}
void from_json(const Json& j, Stage2Config& v) {
  require_object(j, {"n_max", "n1", "n2", "med0", "delta_u", "delta_0", "accrual_rate", "poisson_accrual",
                     "followup_cap", "tox_target", "tox_margin", "tox_monitor_threshold", "prob_grid_size",
                     "envelope_grid_size", "prior", "mcmc"},
                 "stage2 config");
  read(j, "n_max", v.n_max);
  read(j, "n1", v.n1);
  read(j, "n2", v.n2);
  read(j, "med0", v.med0);
  read(j, "delta_u", v.delta_u);
  read(j, "delta_0", v.delta_0);
  read(j, "accrual_rate", v.accrual_rate);
  read(j, "poisson_accrual", v.poisson_accrual);
  read(j, "followup_cap", v.followup_cap);
  read(j, "tox_target", v.tox_target);
  read(j, "tox_margin", v.tox_margin);
  read(j, "tox_monitor_threshold", v.tox_monitor_threshold);
  read(j, "prob_grid_size", v.prob_grid_size);
  read(j, "envelope_grid_size", v.envelope_grid_size);
  read(j, "prior", v.prior);
  read(j, "mcmc", v.mcmc);
}

void to_json(Json& j, const Stage1Patient& v) {
  j = {{"patient_id", v.patient_id}, {"cohort", v.cohort}, {"dose", v.dose}, {"dlt", v.dlt}, {"alpha", v.alpha}};
}
void from_json(const Json& j, Stage1Patient& v) {
  require_object(j, {"patient_id", "cohort", "dose", "dlt", "alpha"}, "stage1 patient");
  read(j, "patient_id", v.patient_id);
  read(j, "cohort", v.cohort);
  read(j, "dose", v.dose);
  read(j, "dlt", v.dlt);
  read(j, "alpha", v.alpha);
}

void to_json(Json& j, const Stage2Patient& v) {
  j = {{"patient_id", v.patient_id}, {"cohort", v.cohort}, {"z", v.z},       {"dose", v.dose},
       {"enroll_time", v.enroll_time}, {"time", v.time},   {"event", v.event}, {"dlt", v.dlt}};
}
void from_json(const Json& j, Stage2Patient& v) {
  require_object(j, {"patient_id", "cohort", "z", "dose", "enroll_time", "time", "event", "dlt"},
                 "stage2 patient");
  read(j, "patient_id", v.patient_id);
  read(j, "cohort", v.cohort);
  read(j, "z", v.z);
  read(j, "dose", v.dose);
  read(j, "enroll_time", v.enroll_time);
  read(j, "time", v.time);
  read(j, "event", v.event);
  read(j, "dlt", v.dlt);
}

void to_json(Json& j, const ProbCurve& v) { j = {{"grid", nums(v.grid)}, {"probs", nums(v.probs)}}; }
void from_json(const Json& j, ProbCurve& v) {
  require_object(j, {"grid", "probs"}, "probability curve");
  read(j, "grid", v.grid);
  read(j, "probs", v.probs);
  if (v.grid.size() != v.probs.size()) throw FormatError("probability curve: grid and probs differ in length");
}

void to_json(Json& j, const Stage2Interim& v) {
  j = {{"n_enrolled", v.n_enrolled},
       {"calendar_time", v.calendar_time},
       {"max_prob", v.max_prob},
       {"toxicity_stop", v.toxicity_stop},
       {"final", v.final}};
}
void from_json(const Json& j, Stage2Interim& v) {
  require_object(j, {"n_enrolled", "calendar_time", "max_prob", "toxicity_stop", "final"}, "interim");
  read(j, "n_enrolled", v.n_enrolled);
  read(j, "calendar_time", v.calendar_time);
  read(j, "max_prob", v.max_prob);
  read(j, "toxicity_stop", v.toxicity_stop);
  read(j, "final", v.final);
}

void to_json(Json& j, const Scenario& v) {
  j = {{"schema_version", kSchemaVersion},
       {"name", v.name},
       {"note", v.note},
       {"true_tox", v.true_tox},
       {"true_ttp", v.true_ttp ? Json(*v.true_ttp) : Json("null")},
       {"null_shape", v.null_shape},
       {"effect_size", v.effect_size},
       {"accrual_rate", v.accrual_rate},
       {"stage2_dlt_rate", v.stage2_dlt_rate},
       {"stage1", v.stage1},
       {"stage2", v.stage2},
       {"replicates", v.replicates}};
}
void from_json(const Json& j, Scenario& v) {
  require_object(j, {"schema_version", "name", "note", "true_tox", "true_ttp", "null_shape", "effect_size",
                     "accrual_rate", "stage2_dlt_rate", "stage1", "stage2", "replicates"},
                 "scenario");
  const int version = required<int>(j, "schema_version");
  if (version != kSchemaVersion) throw FormatError("unsupported schema_version " + std::to_string(version));
  v.name = required<std::string>(j, "name");
  read(j, "note", v.note);
  v.true_tox = required<ToxParams>(j, "true_tox");
  v.true_ttp.reset();
  if (j.contains("true_ttp")) {
    const Json& t = j.at("true_ttp");
    if (!(t.is_string() && t.get<std::string>() == "null") && !t.is_null()) v.true_ttp = t.get<TTPParams>();
  }
  read(j, "null_shape", v.null_shape);
  read(j, "effect_size", v.effect_size);
  read(j, "accrual_rate", v.accrual_rate);
  read(j, "stage2_dlt_rate", v.stage2_dlt_rate);
  read(j, "stage1", v.stage1);
  read(j, "stage2", v.stage2);
  read(j, "replicates", v.replicates);
}

void to_json(Json& j, const Stage1Summary& v) {
  Json grid = Json::array();
  for (const CurvePoint& p : v.grid) grid.push_back({num(p[0]), num(p[1])});
  j = {{"grid", grid},
       {"pointwise_bias", nums(v.pointwise_bias)},
       {"selection_p10", nums(v.selection_p10)},
       {"selection_p20", nums(v.selection_p20)},
       {"mean_dlt_rate", num(v.mean_dlt_rate)},
       {"sd_dlt_rate", num(v.sd_dlt_rate)},
       {"pct_trials_dlt_above", num(v.pct_trials_dlt_above)},
       {"safety_stop_prob", num(v.safety_stop_prob)},
       {"curve_rate", num(v.curve_rate)},
       {"avg_sample_size", num(v.avg_sample_size)}};
}
void from_json(const Json& j, Stage1Summary& v) {
  require_object(j, {"grid", "pointwise_bias", "selection_p10", "selection_p20", "mean_dlt_rate", "sd_dlt_rate",
                     "pct_trials_dlt_above", "safety_stop_prob", "curve_rate", "avg_sample_size"},
                 "stage1 summary");
  v.grid.clear();
  for (const Json& p : j.at("grid")) {
    if (!p.is_array() || p.size() != 2) throw FormatError("grid points must be [x, y]");
    v.grid.push_back({get_num(p[0]), get_num(p[1])});
  }
  read(j, "pointwise_bias", v.pointwise_bias);
  read(j, "selection_p10", v.selection_p10);
  read(j, "selection_p20", v.selection_p20);
  read(j, "mean_dlt_rate", v.mean_dlt_rate);
  read(j, "sd_dlt_rate", v.sd_dlt_rate);
  read(j, "pct_trials_dlt_above", v.pct_trials_dlt_above);
  read(j, "safety_stop_prob", v.safety_stop_prob);
  read(j, "curve_rate", v.curve_rate);
  read(j, "avg_sample_size", v.avg_sample_size);
}

void to_json(Json& j, const EarlyStopRow& v) {
  j = {{"delta_0", num(v.delta_0)}, {"early_stop_prob", num(v.early_stop_prob)},
       {"avg_sample_size", num(v.avg_sample_size)}};
}
void from_json(const Json& j, EarlyStopRow& v) {
  require_object(j, {"delta_0", "early_stop_prob", "avg_sample_size"}, "early stop row");
  read(j, "delta_0", v.delta_0);
  read(j, "early_stop_prob", v.early_stop_prob);
  read(j, "avg_sample_size", v.avg_sample_size);
}

void to_json(Json& j, const Stage2Summary& v) {
  j = {{"hypothesis", v.null_hypothesis ? "null" : "alternative"},
       {"delta_u", nums(v.delta_u)},
       {"reject_prob", nums(v.reject_prob)},
       {"type1_plus_type2", nums(v.type1_plus_type2)},
       {"early_stop_prob", num(v.early_stop_prob)},
       {"futility_stop_prob", num(v.futility_stop_prob)},
       {"toxicity_stop_prob", num(v.toxicity_stop_prob)},
       {"avg_sample_size", num(v.avg_sample_size)},
       {"early_stop_by_delta0", v.early_stop_by_delta0},
       {"allocation_edges", nums(v.allocation_edges)},
       {"allocation_histogram", nums(v.allocation_histogram)},
       {"mean_z_opt", num(v.mean_z_opt)},
       {"prob_grid", nums(v.prob_grid)},
       {"median_prob_curve", nums(v.median_prob_curve)}};
}
void from_json(const Json& j, Stage2Summary& v) {
  require_object(j, {"hypothesis", "delta_u", "reject_prob", "type1_plus_type2", "early_stop_prob",
                     "futility_stop_prob", "toxicity_stop_prob", "avg_sample_size", "early_stop_by_delta0",
                     "allocation_edges", "allocation_histogram", "mean_z_opt", "prob_grid", "median_prob_curve"},
                 "stage2 summary");
  const std::string h = required<std::string>(j, "hypothesis");
  if (h != "null" && h != "alternative") throw FormatError("hypothesis must be 'null' or 'alternative'");
  v.null_hypothesis = h == "null";
  read(j, "delta_u", v.delta_u);
  read(j, "reject_prob", v.reject_prob);
  read(j, "type1_plus_type2", v.type1_plus_type2);
  read(j, "early_stop_prob", v.early_stop_prob);
  read(j, "futility_stop_prob", v.futility_stop_prob);
  read(j, "toxicity_stop_prob", v.toxicity_stop_prob);
  read(j, "avg_sample_size", v.avg_sample_size);
  read(j, "early_stop_by_delta0", v.early_stop_by_delta0);
  read(j, "allocation_edges", v.allocation_edges);
  read(j, "allocation_histogram", v.allocation_histogram);
  read(j, "mean_z_opt", v.mean_z_opt);
  read(j, "prob_grid", v.prob_grid);
  read(j, "median_prob_curve", v.median_prob_curve);
}

void to_json(Json& j, const OperatingCharacteristics& v) {
  j = {{"schema_version", kSchemaVersion},
       {"scenario", v.scenario},
       {"mode", to_string(v.mode)},
       {"effect_size", v.effect_size},
       {"accrual_rate", v.accrual_rate},
       {"replicates", v.replicates},
       {"master_seed", v.master_seed}};
  if (v.stage1) j["stage1"] = *v.stage1;
  if (v.stage2) j["stage2"] = *v.stage2;
}
void from_json(const Json& j, OperatingCharacteristics& v) {
  require_object(j, {"schema_version", "scenario", "mode", "effect_size", "accrual_rate", "replicates",
                     "master_seed", "stage1", "stage2"},
                 "operating characteristics");
  const int version = required<int>(j, "schema_version");
  if (version != kSchemaVersion) throw FormatError("unsupported schema_version " + std::to_string(version));
  v.scenario = required<std::string>(j, "scenario");
  v.mode = campaign_mode_from_string(required<std::string>(j, "mode"));
  read(j, "effect_size", v.effect_size);
  read(j, "accrual_rate", v.accrual_rate);
  read(j, "replicates", v.replicates);
  read(j, "master_seed", v.master_seed);
  v.stage1.reset();
  v.stage2.reset();
  if (j.contains("stage1")) v.stage1 = j.at("stage1").get<Stage1Summary>();
  if (j.contains("stage2")) v.stage2 = j.at("stage2").get<Stage2Summary>();
}

Json curve_summary(const MTDCurve& curve) {
  return {{"params", curve.params()}, {"theta", curve.theta()}, {"x_lo", curve.x_lo()}, {"x_hi", curve.x_hi()}};
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  try {
    Scenario s = read_json_file(path).get<Scenario>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_text_file(path, dump(Json(scenario)));
}

std::string report_stem(const OperatingCharacteristics& oc) {
  return oc.scenario + "_" + format_number(oc.effect_size) + "_" + format_number(oc.accrual_rate);
}

std::string report_csv(const OperatingCharacteristics& oc) {
  std::ostringstream out;
  out << "metric,index,x,y,value\n";
  auto scalar = [&](const std::string& name, double v) { out << name << ",,,," << format_number(v) << '\n'; };
  auto series = [&](const std::string& name, const std::vector<double>& xs, const std::vector<double>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i) {
      out << name << ',' << i << ',' << (i < xs.size() ? format_number(xs[i]) : "") << ",,"
          << format_number(vs[i]) << '\n';
    }
  };
  if (oc.stage1) {
    const Stage1Summary& s = *oc.stage1;
    auto on_grid = [&](const std::string& name, const std::vector<double>& vs) {
      for (std::size_t i = 0; i < vs.size(); ++i) {
        out << name << ',' << i << ',' << format_number(s.grid[i][0]) << ',' << format_number(s.grid[i][1])
            << ',' << format_number(vs[i]) << '\n';
      }
    };
    on_grid("pointwise_bias", s.pointwise_bias);
    on_grid("selection_p10", s.selection_p10);
    on_grid("selection_p20", s.selection_p20);
    scalar("mean_dlt_rate", s.mean_dlt_rate);
    scalar("sd_dlt_rate", s.sd_dlt_rate);
    scalar("pct_trials_dlt_above", s.pct_trials_dlt_above);
    scalar("safety_stop_prob", s.safety_stop_prob);
    scalar("curve_rate", s.curve_rate);
    scalar("stage1_avg_sample_size", s.avg_sample_size);
  }
  if (oc.stage2) {
    const Stage2Summary& s = *oc.stage2;
    series(s.null_hypothesis ? "type1" : "power", s.delta_u, s.reject_prob);
    series("type1_plus_type2", s.delta_u, s.type1_plus_type2);
    scalar("early_stop_prob", s.early_stop_prob);
    scalar("futility_stop_prob", s.futility_stop_prob);
    scalar("toxicity_stop_prob", s.toxicity_stop_prob);
    scalar("stage2_avg_sample_size", s.avg_sample_size);
    std::vector<double> d0, stop, size;
    for (const EarlyStopRow& r : s.early_stop_by_delta0) {
      d0.push_back(r.delta_0);
      stop.push_back(r.early_stop_prob);
      size.push_back(r.avg_sample_size);
    }
    series("early_stop_by_delta0", d0, stop);
    series("avg_sample_size_by_delta0", d0, size);
    series("allocation_histogram", s.allocation_edges, s.allocation_histogram);
    scalar("mean_z_opt", s.mean_z_opt);
    series("median_prob_curve", s.prob_grid, s.median_prob_curve);
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_reports(const OperatingCharacteristics& oc,
                                                const std::filesystem::path& dir) {
  if (!oc.stage1 && !oc.stage2) throw std::invalid_argument("operating characteristics contain no metrics");
  std::filesystem::create_directories(dir);
  const std::string stem = report_stem(oc);
  const std::filesystem::path json_path = dir / (stem + ".json");
  const std::filesystem::path csv_path = dir / (stem + ".csv");
  write_text_file(json_path, dump(Json(oc)));
  write_text_file(csv_path, report_csv(oc));
  return {json_path, csv_path};
}

}  // namespace combidose
