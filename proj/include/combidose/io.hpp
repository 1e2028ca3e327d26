#pragma once

// JSON and CSV serialization. Numbers are written in the shortest decimal
// form that parses back to the same double, so a document read and written
// again is byte-identical. Non-finite values are written as null.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "combidose/harness.hpp"
#include "combidose/mcmc.hpp"
#include "combidose/model.hpp"
#include "combidose/stage1.hpp"
#include "combidose/stage2.hpp"

namespace combidose {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void to_json(Json& j, const DoseRange& v);
void from_json(const Json& j, DoseRange& v);
void to_json(Json& j, const DoseRanges& v);
void from_json(const Json& j, DoseRanges& v);
void to_json(Json& j, const DoseCombination& v);
void from_json(const Json& j, DoseCombination& v);
void to_json(Json& j, const ToxParams& v);
void from_json(const Json& j, ToxParams& v);
void to_json(Json& j, const BetaPrior& v);
void from_json(const Json& j, BetaPrior& v);
void to_json(Json& j, const GammaPrior& v);
void from_json(const Json& j, GammaPrior& v);
void to_json(Json& j, const ToxPriorConfig& v);
void from_json(const Json& j, ToxPriorConfig& v);
void to_json(Json& j, const TTPParams& v);
void from_json(const Json& j, TTPParams& v);
void to_json(Json& j, const TTPPriorConfig& v);
void from_json(const Json& j, TTPPriorConfig& v);
void to_json(Json& j, const MCMCConfig& v);
void from_json(const Json& j, MCMCConfig& v);
void to_json(Json& j, const Stage1Config& v);
void from_json(const Json& j, Stage1Config& v);
void to_json(Json& j, const Stage2Config& v);
void from_json(const Json& j, Stage2Config& v);
void to_json(Json& j, const Stage1Patient& v);
void from_json(const Json& j, Stage1Patient& v);
void to_json(Json& j, const Stage2Patient& v);
void from_json(const Json& j, Stage2Patient& v);
void to_json(Json& j, const ProbCurve& v);
void from_json(const Json& j, ProbCurve& v);
void to_json(Json& j, const Stage2Interim& v);
void from_json(const Json& j, Stage2Interim& v);
void to_json(Json& j, const Scenario& v);
void from_json(const Json& j, Scenario& v);
void to_json(Json& j, const Stage1Summary& v);
void from_json(const Json& j, Stage1Summary& v);
void to_json(Json& j, const EarlyStopRow& v);
void from_json(const Json& j, EarlyStopRow& v);
void to_json(Json& j, const Stage2Summary& v);
void from_json(const Json& j, Stage2Summary& v);
void to_json(Json& j, const OperatingCharacteristics& v);
void from_json(const Json& j, OperatingCharacteristics& v);

// Summary of an estimated curve: parameters, theta and the clipped x range.
Json curve_summary(const MTDCurve& curve);

std::string format_number(double v);
std::string dump(const Json& j);  // two-space indent, trailing newline

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

// "{scenario}_{effect}_{accrual}" with numbers in shortest form.
std::string report_stem(const OperatingCharacteristics& oc);
std::string report_csv(const OperatingCharacteristics& oc);
// Writes <stem>.json and <stem>.csv under `dir`; returns both paths.
std::vector<std::filesystem::path> emit_reports(const OperatingCharacteristics& oc,
                                                const std::filesystem::path& dir);

}  // namespace combidose
