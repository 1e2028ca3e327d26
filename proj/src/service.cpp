#include "combidose/service.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include "httplib.h"

#include "combidose/rng.hpp"

namespace combidose {

namespace {

struct ApiError {
  int status;
  std::string message;
};

Json error_body(const std::string& message) { return {{"error", message}}; }

enum class Status { Active, SafetyStopped, FutilityStopped, ToxicityStopped, Completed };

const char* status_name(Status s) {
  switch (s) {
    case Status::Active: return "active";
    case Status::SafetyStopped: return "safety_stopped";
    case Status::FutilityStopped: return "futility_stopped";
    case Status::ToxicityStopped: return "toxicity_stopped";
    case Status::Completed: return "completed";
  }
  return "active";
}

struct TrialState {
  std::string id;
  std::uint64_t seed = 0;
  Stage1Config stage1_config;
  Stage2Config stage2_config;
  int stage = 1;
  Status status = Status::Active;

  std::vector<Stage1Patient> stage1_records;
  int cohorts = 0;
  std::vector<DoseCombination> stage1_next;
  double alpha = 0.0;
  std::optional<ToxParams> posterior_medians;
  double prob_rho00_above = 0.0;
  std::optional<MTDCurve> curve;

  std::vector<Stage2Patient> stage2_records;
  int stage2_submissions = 0;
  std::vector<double> stage2_next;
  std::optional<ProbCurve> prob_curve;
  std::vector<double> median_ttp;
  double z_opt = 0.0;
  double max_prob = 0.0;
  bool reject_h0 = false;

  std::vector<Json> events;
};

}  // namespace

struct Trial {
  std::mutex mutex;
  TrialState state;
};

namespace {

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

Json parse_body(const std::string& body, int status_on_error) {
  if (body.empty()) return Json::object();
  try {
    return Json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ApiError{status_on_error, std::string("request body is not valid JSON: ") + e.what()};
  }
}

Json dose_json(const DoseCombination& d) { return d; }

Json stage1_recommendation(const TrialState& s) {
  Json next = Json::array();
  for (const DoseCombination& d : s.stage1_next) next.push_back(dose_json(d));
  return {{"cohort", s.cohorts},
          {"n_enrolled", s.stage1_records.size()},
          {"alpha", s.alpha},
          {"next_doses", next},
          {"safety_stop", s.status == Status::SafetyStopped},
          {"prob_rho00_above_theta", s.prob_rho00_above},
          {"stage1_complete", static_cast<int>(s.stage1_records.size()) >= s.stage1_config.n_max}};
}

Json stage2_next_json(const TrialState& s) {
  Json next = Json::array();
  for (double z : s.stage2_next) {
    Json d = dose_json(s.curve->dose_at_z(z, s.stage1_config.ranges));
    d["z"] = z;
    next.push_back(d);
  }
  return next;
}

Json stage2_recommendation(const TrialState& s) {
  Json r = {{"n_enrolled", s.stage2_records.size()},
            {"next_doses", stage2_next_json(s)},
            {"futility_stop", s.status == Status::FutilityStopped},
            {"toxicity_stop", s.status == Status::ToxicityStopped},
            {"complete", s.status == Status::Completed}};
  if (s.prob_curve) {
    r["prob_curve"] = *s.prob_curve;
    r["z_opt"] = s.z_opt;
    r["max_prob"] = s.max_prob;
  } else {
    r["prob_curve"] = nullptr;
    r["z_opt"] = nullptr;
    r["max_prob"] = nullptr;
  }
  r["reject_h0"] = s.status == Status::Completed ? Json(s.reject_h0) : Json(nullptr);
  return r;
}

Json finalize_response(const TrialState& s) {
  Json c = curve_summary(*s.curve);
  c["n_enrolled"] = s.stage1_records.size();
  c["points"] = Json::array();
  for (const auto& p : s.curve->points(101)) c["points"].push_back({p[0], p[1]});
  return {{"curve", c}, {"stage", 2}, {"next_doses", stage2_next_json(s)}};
}

Json state_json(const TrialState& s) {
  Json stage1 = {{"records", s.stage1_records},
                 {"recommendation", stage1_recommendation(s)},
                 {"posterior_medians", s.posterior_medians ? Json(*s.posterior_medians) : Json(nullptr)}};
  Json stage2 = {{"records", s.stage2_records}, {"recommendation", stage2_recommendation(s)}};
  return {{"id", s.id},
          {"seed", s.seed},
          {"stage", s.stage},
          {"status", status_name(s.status)},
          {"config", {{"stage1", s.stage1_config}, {"stage2", s.stage2_config}}},
          {"stage1", stage1},
          {"curve", s.curve ? curve_summary(*s.curve) : Json(nullptr)},
          {"stage2", stage2},
          {"events", s.events}};
}

// ---- state transitions; each validates fully before touching `s` ----

void apply_create(TrialState& s, const Json& request) {
  if (!request.is_object()) throw ApiError{400, "trial configuration must be a JSON object"};
  for (const auto& [key, value] : request.items()) {
    if (key != "stage1" && key != "stage2" && key != "seed") throw ApiError{400, "unknown field '" + key + "'"};
  }
  try {
    if (request.contains("stage1")) s.stage1_config = request.at("stage1").get<Stage1Config>();
    if (request.contains("stage2")) s.stage2_config = request.at("stage2").get<Stage2Config>();
    s.stage1_config.validate();
    s.stage2_config.validate();
  } catch (const std::exception& e) {
    throw ApiError{400, std::string("invalid configuration: ") + e.what()};
  }
  s.alpha = alpha_schedule(0, s.stage1_config);
  s.stage1_next = {s.stage1_config.start_dose, s.stage1_config.start_dose};
}

int get_flag(const Json& o, const char* key) {
  if (!o.contains(key) || !o.at(key).is_number_integer()) {
    throw ApiError{422, std::string("outcome field '") + key + "' must be 0 or 1"};
  }
  const int v = o.at(key).get<int>();
  if (v != 0 && v != 1) throw ApiError{422, std::string("outcome field '") + key + "' must be 0 or 1"};
  return v;
}

double get_real(const Json& o, const char* key) {
  if (!o.contains(key) || !o.at(key).is_number()) {
    throw ApiError{422, std::string("outcome field '") + key + "' must be a number"};
  }
  const double v = o.at(key).get<double>();
  if (!std::isfinite(v)) throw ApiError{422, std::string("outcome field '") + key + "' must be finite"};
  return v;
}

const Json& outcome_list(const Json& request) {
  if (!request.is_object() || !request.contains("outcomes") || !request.at("outcomes").is_array() ||
      request.at("outcomes").empty()) {
    throw ApiError{422, "body must be {\"outcomes\": [...]} with at least one outcome"};
  }
  for (const Json& o : request.at("outcomes")) {
    if (!o.is_object()) throw ApiError{422, "each outcome must be an object"};
  }
  return request.at("outcomes");
}

Json apply_stage1(TrialState& s, const Json& request) {
  if (s.stage != 1) throw ApiError{409, "trial is not in stage 1"};
  if (s.status != Status::Active) throw ApiError{409, std::string("trial is ") + status_name(s.status)};
  const int n_max = s.stage1_config.n_max;
  if (static_cast<int>(s.stage1_records.size()) >= n_max) throw ApiError{409, "stage 1 sample size reached"};
  const Json& list = outcome_list(request);
  std::vector<Stage1Patient> cohort;
  for (const Json& o : list) {
    for (const auto& [key, value] : o.items()) {
      if (key != "x" && key != "y" && key != "dlt") throw ApiError{422, "unknown outcome field '" + key + "'"};
    }
    const double x = get_real(o, "x"), y = get_real(o, "y");
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) throw ApiError{422, "doses must be standardized to [0,1]"};
    Stage1Patient p;
    p.dose = DoseCombination::from_standardized(x, y, s.stage1_config.ranges);
    p.dlt = get_flag(o, "dlt");
    cohort.push_back(p);
  }
  if (static_cast<int>(s.stage1_records.size() + cohort.size()) > n_max) {
    throw ApiError{422, "outcomes exceed the stage-1 sample size"};
  }

  ++s.cohorts;
  for (Stage1Patient& p : cohort) {
    p.patient_id = static_cast<int>(s.stage1_records.size()) + 1;
    p.cohort = s.cohorts;
    p.alpha = s.alpha;
    s.stage1_records.push_back(p);
  }
  MCMCConfig mcmc = s.stage1_config.mcmc;
  mcmc.seed = derive_seed(s.seed, 1000 + static_cast<std::uint64_t>(s.cohorts));
  const PosteriorChain chain = fit_stage1(tox_records(s.stage1_records), s.stage1_config.prior, mcmc);
  s.posterior_medians = posterior_medians(chain);
  s.prob_rho00_above = prob_rho00_above(chain, s.stage1_config.theta);
  s.stage1_next.clear();
  const int n = static_cast<int>(s.stage1_records.size());
  if (safety_stop(chain, s.stage1_config.theta, s.stage1_config)) {
    s.status = Status::SafetyStopped;
  } else if (n < n_max) {
    s.alpha = alpha_schedule(n, s.stage1_config);
    const auto [first, second] =
        next_cohort_doses(chain, cohort.front().dose, cohort.back().dose, s.alpha, s.stage1_config);
    s.stage1_next = {first, second};
  }
  return stage1_recommendation(s);
}

Json apply_finalize(TrialState& s) {
  if (s.stage == 2 && s.curve) return finalize_response(s);
  if (s.status != Status::Active) throw ApiError{409, std::string("trial is ") + status_name(s.status)};
  if (s.stage1_records.empty() || !s.posterior_medians) throw ApiError{409, "no stage-1 outcomes yet"};
  const std::optional<MTDCurve> curve = estimate_curve(*s.posterior_medians, s.stage1_config.theta);
  if (!curve) throw ApiError{409, "posterior medians give no MTD curve in the dose range"};
  s.curve = curve;
  s.stage = 2;
  s.stage1_next.clear();
  const int n1 = std::min(s.stage2_config.n1, s.stage2_config.n_max);
  s.stage2_next.clear();
  for (int i = 0; i < n1; ++i) s.stage2_next.push_back(n1 == 1 ? 0.0 : static_cast<double>(i) / (n1 - 1));
  return finalize_response(s);
}

Json apply_stage2(TrialState& s, const Json& request) {
  if (s.stage != 2) throw ApiError{409, "trial is not in stage 2"};
  if (s.status != Status::Active) throw ApiError{409, std::string("trial is ") + status_name(s.status)};
  const Json& list = outcome_list(request);
  std::vector<Stage2Patient> updated = s.stage2_records;
  for (const Json& o : list) {
    for (const auto& [key, value] : o.items()) {
      if (key != "patient_id" && key != "z" && key != "time" && key != "event" && key != "dlt") {
        throw ApiError{422, "unknown outcome field '" + key + "'"};
      }
    }
    const double time = get_real(o, "time");
    if (!(time > 0.0)) throw ApiError{422, "time must be positive"};
    const int event = get_flag(o, "event");
    const int dlt = get_flag(o, "dlt");
    if (o.contains("patient_id")) {
      // Follow-up update of an enrolled patient.
      if (!o.at("patient_id").is_number_integer()) throw ApiError{422, "patient_id must be an integer"};
      const int id = o.at("patient_id").get<int>();
      auto it = std::find_if(updated.begin(), updated.end(), [&](const Stage2Patient& p) { return p.patient_id == id; });
      if (it == updated.end()) throw ApiError{422, "unknown patient_id " + std::to_string(id)};
      if (o.contains("z") && get_real(o, "z") != it->z) throw ApiError{422, "z does not match the enrolled patient"};
      it->time = time;
      it->event = event;
      it->dlt = dlt;
      continue;
    }
    const double z = get_real(o, "z");
    if (z < 0.0 || z > 1.0) throw ApiError{422, "z must lie in [0,1]"};
    Stage2Patient p;
    p.patient_id = static_cast<int>(updated.size()) + 1;
    p.cohort = s.stage2_submissions + 1;
    p.z = z;
    p.dose = s.curve->dose_at_z(z, s.stage1_config.ranges);
    p.time = time;
    p.event = event;
    p.dlt = dlt;
    updated.push_back(p);
  }
  if (static_cast<int>(updated.size()) > s.stage2_config.n_max) {
    throw ApiError{422, "outcomes exceed the stage-2 sample size"};
  }

  s.stage2_records = std::move(updated);
  ++s.stage2_submissions;
  s.stage2_next.clear();
  const Stage2Config& cfg = s.stage2_config;
  const int n = static_cast<int>(s.stage2_records.size());
  if (toxicity_monitor(s.stage2_records, cfg.tox_target, cfg.tox_margin, cfg.tox_monitor_threshold)) {
    s.status = Status::ToxicityStopped;
    return stage2_recommendation(s);
  }
  std::vector<TTPRecord> data;
  for (const Stage2Patient& p : s.stage2_records) data.push_back({p.z, p.time, p.event});
  MCMCConfig mcmc = cfg.mcmc;
  mcmc.seed = derive_seed(s.seed, 2000 + static_cast<std::uint64_t>(s.stage2_submissions));
  const PosteriorChain chain = fit_stage2(data, cfg.prior, mcmc);
  const std::vector<double> grid = uniform_grid(cfg.prob_grid_size);
  s.prob_curve = prob_exceed_curve(chain, cfg.med0, grid);
  s.median_ttp = posterior_median_median(chain, grid);
  s.max_prob = s.prob_curve->max();
  s.z_opt = optimal_dose(*s.prob_curve);
  if (n >= cfg.n_max) {
    s.status = Status::Completed;
    s.reject_h0 = s.max_prob > cfg.delta_u;
  } else if (futility_stop(*s.prob_curve, cfg.delta_0)) {
    s.status = Status::FutilityStopped;
  } else {
    std::mt19937_64 rng(derive_seed(s.seed, 3000 + static_cast<std::uint64_t>(s.stage2_submissions)));
    s.stage2_next = rejection_sample_doses(chain, std::min(cfg.n2, cfg.n_max - n), rng, cfg.envelope_grid_size);
  }
  return stage2_recommendation(s);
}

Json curves_json(const TrialState& s) {
  Json out;
  std::optional<MTDCurve> curve = s.curve;
  if (!curve && s.posterior_medians) curve = estimate_curve(*s.posterior_medians, s.stage1_config.theta);
  if (curve) {
    Json pts = Json::array();
    for (int i = 0; i <= 100; ++i) {
      const DoseCombination d = curve->dose_at_z(i / 100.0, s.stage1_config.ranges);
      pts.push_back({{"z", i / 100.0}, {"x", d.x}, {"y", d.y}, {"raw_x", d.raw_x}, {"raw_y", d.raw_y}});
    }
    out["mtd_curve"] = {{"final", s.curve.has_value()}, {"points", pts}};
  } else {
    out["mtd_curve"] = nullptr;
  }
  if (s.prob_curve) {
    out["median_ttp"] = {{"grid", s.prob_curve->grid}, {"values", s.median_ttp}};
    out["prob_curve"] = *s.prob_curve;
    out["med0"] = s.stage2_config.med0;
  } else {
    out["median_ttp"] = nullptr;
    out["prob_curve"] = nullptr;
    out["med0"] = s.stage2_config.med0;
  }
  return out;
}

std::string new_trial_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

std::uint64_t new_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

void append_line(const std::filesystem::path& path, const Json& event) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw ApiError{500, "cannot open event log " + path.string()};
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw ApiError{500, "cannot write event log " + path.string()};
}

Json make_event(const TrialState& s, const std::string& type, const Json& request, const Json& response,
                const std::string& timestamp) {
  return {{"seq", s.events.size() + 1}, {"type", type}, {"timestamp", timestamp}, {"request", request},
          {"response", response}};
}

}  // namespace

TrialService::TrialService(ServiceOptions options) : options_(std::move(options)) {
  std::filesystem::create_directories(options_.data_dir);
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& log : logs) replay(log);
}

TrialService::~TrialService() = default;

void TrialService::replay(const std::filesystem::path& log) {
  std::string text;
  {
    std::ifstream in(log, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  auto trial = std::make_shared<Trial>();
  TrialState& s = trial->state;
  std::string key;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    // A last line without its newline is a write cut short by a crash.
    if (nl == std::string::npos) break;
    const std::string line = text.substr(pos, nl - pos);
    if (line.empty()) {
      pos = nl + 1;
      continue;
    }
    Json event;
    try {
      event = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (text.find_first_not_of("\n", nl) != std::string::npos) {
        throw std::runtime_error(log.string() + ": corrupt event at byte " + std::to_string(pos));
      }
      break;
    }
    pos = nl + 1;
    const std::string type = event.at("type").get<std::string>();
    const Json& request = event.at("request");
    Json response;
    try {
      if (type == "create") {
        s.id = event.at("trial_id").get<std::string>();
        s.seed = event.at("seed").get<std::uint64_t>();
        key = event.value("idempotency_key", "");
        apply_create(s, request);
        response = event.at("response");
      } else if (type == "stage1_outcomes") {
        response = apply_stage1(s, request);
      } else if (type == "finalize") {
        response = apply_finalize(s);
      } else if (type == "stage2_outcomes") {
        response = apply_stage2(s, request);
      } else {
        throw std::runtime_error("unknown event type " + type);
      }
    } catch (const ApiError& e) {
      throw std::runtime_error(log.string() + ": replay failed: " + e.message);
    }
    event["response"] = response;
    s.events.push_back(event);
  }
  // Drop the torn tail so the next append starts on a fresh line.
  if (pos < text.size()) std::filesystem::resize_file(log, pos);
  if (s.id.empty()) return;
  trials_[s.id] = trial;
  if (!key.empty()) idempotency_[key] = s.id;
}

std::shared_ptr<Trial> TrialService::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = trials_.find(id);
  if (it == trials_.end()) throw ApiError{404, "unknown trial '" + id + "'"};
  return it->second;
}

std::vector<std::string> TrialService::trial_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, t] : trials_) ids.push_back(id);
  return ids;
}

ApiResponse TrialService::create_trial(const std::string& body, const std::string& idempotency_key) {
  try {
    std::unique_lock lock(mutex_);
    if (!idempotency_key.empty()) {
      const auto it = idempotency_.find(idempotency_key);
      if (it != idempotency_.end()) {
        const auto trial = trials_.at(it->second);
        std::lock_guard tl(trial->mutex);
        return {200, trial->state.events.front().at("response")};
      }
    }
    const Json request = parse_body(body, 400);
    auto trial = std::make_shared<Trial>();
    TrialState& s = trial->state;
    s.id = new_trial_id();
    if (request.is_object() && request.contains("seed")) {
      if (!request.at("seed").is_number_unsigned()) throw ApiError{400, "seed must be a non-negative integer"};
      s.seed = request.at("seed").get<std::uint64_t>();
    } else {
      s.seed = new_seed();
    }
    apply_create(s, request);
    const Json response = {{"id", s.id}, {"seed", s.seed}, {"stage", 1},
                           {"recommendation", stage1_recommendation(s)}};
    Json event = make_event(s, "create", request, response, timestamp_now());
    event["trial_id"] = s.id;
    event["seed"] = s.seed;
    if (!idempotency_key.empty()) event["idempotency_key"] = idempotency_key;
    append_line(options_.data_dir / (s.id + ".jsonl"), event);
    s.events.push_back(event);
    trials_[s.id] = trial;
    if (!idempotency_key.empty()) idempotency_[idempotency_key] = s.id;
    return {201, response};
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

namespace {

template <typename Apply>
ApiResponse mutate(const std::shared_ptr<Trial>& trial, const std::filesystem::path& log, const std::string& type,
                   const Json& request, Apply apply) {
  std::lock_guard lock(trial->mutex);
  TrialState next = trial->state;
  const Json response = apply(next);
  const Json event = make_event(next, type, request, response, timestamp_now());
  append_line(log, event);
  next.events.push_back(event);
  trial->state = std::move(next);
  return {200, response};
}

}  // namespace

ApiResponse TrialService::submit_stage1(const std::string& id, const std::string& body) {
  try {
    const auto trial = find(id);
    const Json request = parse_body(body, 422);
    return mutate(trial, options_.data_dir / (id + ".jsonl"), "stage1_outcomes", request,
                  [&](TrialState& s) { return apply_stage1(s, request); });
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

ApiResponse TrialService::finalize_stage1(const std::string& id) {
  try {
    const auto trial = find(id);
    {
      // A repeated finalize returns the stored curve without a new event.
      std::lock_guard lock(trial->mutex);
      if (trial->state.stage == 2 && trial->state.curve) return {200, finalize_response(trial->state)};
    }
    return mutate(trial, options_.data_dir / (id + ".jsonl"), "finalize", Json::object(),
                  [&](TrialState& s) { return apply_finalize(s); });
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

ApiResponse TrialService::submit_stage2(const std::string& id, const std::string& body) {
  try {
    const auto trial = find(id);
    const Json request = parse_body(body, 422);
    return mutate(trial, options_.data_dir / (id + ".jsonl"), "stage2_outcomes", request,
                  [&](TrialState& s) { return apply_stage2(s, request); });
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

ApiResponse TrialService::get_state(const std::string& id) const {
  try {
    const auto trial = find(id);
    std::lock_guard lock(trial->mutex);
    return {200, state_json(trial->state)};
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

ApiResponse TrialService::get_curves(const std::string& id) const {
  try {
    const auto trial = find(id);
    std::lock_guard lock(trial->mutex);
    return {200, curves_json(trial->state)};
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  }
}

ApiResponse TrialService::handle(const std::string& method, const std::string& path, const std::string& body,
                                 const std::string& idempotency_key) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '/');) {
    if (!part.empty()) parts.push_back(part);
  }
  auto not_found = ApiResponse{404, error_body("no route for " + method + " " + path)};
  if (parts.size() < 2 || parts[0] != "v1" || parts[1] != "trials") return not_found;
  if (parts.size() == 2) return method == "POST" ? create_trial(body, idempotency_key) : not_found;
  const std::string& id = parts[2];
  if (!valid_id(id)) return {404, error_body("unknown trial '" + id + "'")};
  if (parts.size() == 3 && method == "GET") return get_state(id);
  if (parts.size() == 4 && parts[3] == "curves" && method == "GET") return get_curves(id);
  if (parts.size() == 5 && method == "POST" && parts[3] == "stage1" && parts[4] == "outcomes") {
    return submit_stage1(id, body);
  }
  if (parts.size() == 5 && method == "POST" && parts[3] == "stage1" && parts[4] == "finalize") {
    return finalize_stage1(id);
  }
  if (parts.size() == 5 && method == "POST" && parts[3] == "stage2" && parts[4] == "outcomes") {
    return submit_stage2(id, body);
  }
  return not_found;
}

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(TrialService& service) : impl_(std::make_unique<Impl>()) {
  httplib::Server& server = impl_->server;
  const auto timeout = service.options().request_timeout;
  server.set_read_timeout(timeout);
  server.set_write_timeout(timeout);
  server.set_default_headers({{"Access-Control-Allow-Origin", service.options().cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"}});
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = service.handle(req.method, req.path, req.body, req.get_header_value("Idempotency-Key"));
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(R"(/v1/.*)", dispatch);
  server.Post(R"(/v1/.*)", dispatch);
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpFrontend::~HttpFrontend() = default;

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpFrontend::run() { return impl_->server.listen_after_bind(); }

void HttpFrontend::stop() { impl_->server.stop(); }

int serve(TrialService& service, const std::string& host, int port, std::ostream& log) {
  HttpFrontend http(service);
  if (http.bind(host, port) < 0) {
    log << "cannot listen on " << host << ':' << port << std::endl;
    return 3;
  }
  log << "listening on " << host << ':' << port << std::endl;
  return http.run() ? 0 : 3;
}

}  // namespace combidose
