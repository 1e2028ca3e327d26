#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage, 3 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "combidose/model.hpp"

namespace combidose {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::filesystem::path scenario;
  std::filesystem::path output_dir = "results";
  int parallelism = 1;
  std::uint64_t master_seed = 1;
  std::optional<int> replicates;
  std::optional<double> delta_u;
  std::optional<double> delta_0;
  std::optional<double> accrual_rate;
  std::optional<std::filesystem::path> null_report;  // pairs type-I with this run's power
  std::vector<int> trajectories;                      // replicate indices to export as CSV

  // prior-report
  int draws = 100000;
  std::optional<double> sigma2;

  // calibrate-prior
  double theta = 0.33;
  double raw_x = 15.0;
  double raw_y = 75.0;
  double corner_b = 2.0;
  BetaPrior ratio{0.5, 0.5};
  GammaPrior eta3{3.0, 1.0};

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "trials";
  std::string cors_origin = "*";
};

// Parses argv (argv[0] is the program name). Help requests print usage to
// `out` and return nullopt; invalid input throws UsageError whose message
// names the offending item. `threads_env` is the value of COMBIDOSE_THREADS,
// used when --threads is not given.
std::optional<RunConfig> parse_cli(const std::vector<std::string>& argv, std::ostream& out,
                                   const char* threads_env = nullptr);

struct PriorReportRow {
  double z = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

// Quantiles of the induced prior median TTP at z = 0, 0.1, ..., 1.
std::vector<PriorReportRow> prior_predictive_report(const TTPPriorConfig& prior, int n_draws,
                                                    std::uint64_t seed = 1);

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace combidose
