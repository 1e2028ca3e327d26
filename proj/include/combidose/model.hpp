#pragma once

// Dose-toxicity and time-to-progression models for two-agent combination
// trials. Everything here is a pure function of its arguments.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace combidose {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NoCurveError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Logistic link. F maps the linear predictor to a probability.
namespace logistic {
inline double cdf(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}
inline double quantile(double p) { return std::log(p) - std::log1p(-p); }
// log F(eta) and log(1 - F(eta)), stable for large |eta|.
inline double log_cdf(double eta) {
  return eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
}
inline double log_ccdf(double eta) { return log_cdf(-eta); }
}  // namespace logistic

struct DoseRange {
  double min = 0.0;
  double max = 1.0;

  double standardize(double raw) const { return (raw - min) / (max - min); }
  double raw(double standardized) const { return min + standardized * (max - min); }
  friend bool operator==(const DoseRange&, const DoseRange&) = default;
};

// Agent A is dosed along x, agent B along y.
struct DoseRanges {
  DoseRange a{10.0, 25.0};
  DoseRange b{50.0, 100.0};
  friend bool operator==(const DoseRanges&, const DoseRanges&) = default;
};

struct DoseCombination {
  double x = 0.0;
  double y = 0.0;
  double raw_x = 0.0;
  double raw_y = 0.0;

  static DoseCombination from_standardized(double x, double y, const DoseRanges& ranges);
  static DoseCombination from_raw(double raw_x, double raw_y, const DoseRanges& ranges);
  friend bool operator==(const DoseCombination&, const DoseCombination&) = default;
};

// Reparameterized dose-toxicity model: probabilities of DLT at the corners
// (0,0), (1,0), (0,1) plus a positive interaction.
struct ToxParams {
  double rho00 = 0.05;
  double rho10 = 0.3;
  double rho01 = 0.3;
  double eta3 = 1.0;

  bool valid() const;
  void validate() const;

  double logit00() const { return logistic::quantile(rho00); }
  // Linear-predictor slopes of the original parameterization.
  double slope_x() const { return logistic::quantile(rho10) - logit00(); }
  double slope_y() const { return logistic::quantile(rho01) - logit00(); }

  friend bool operator==(const ToxParams&, const ToxParams&) = default;
};

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
  friend bool operator==(const BetaPrior&, const BetaPrior&) = default;
};

struct GammaPrior {
  double shape = 1.0;  // mean shape/rate, variance shape/rate^2
  double rate = 1.0;
  friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

struct ToxPriorConfig {
  BetaPrior rho01{1.0, 1.0};
  BetaPrior rho10{1.0, 1.0};
  BetaPrior rho00_ratio{1.0, 1.0};  // on rho00 / min(rho01, rho10)
  GammaPrior eta3{1.0, 1.0};

  void validate() const;
  friend bool operator==(const ToxPriorConfig&, const ToxPriorConfig&) = default;
};

struct ToxRecord {
  double x = 0.0;
  double y = 0.0;
  int dlt = 0;
};

double prob_dlt(const ToxParams& params, double x, double y);

// Conditional MTD of one agent with the other held fixed, clipped to [0,1].
double conditional_mtd_x(const ToxParams& params, double y, double theta);
double conditional_mtd_y(const ToxParams& params, double x, double theta);

// Contour {(x, y) : prob_dlt = theta} clipped to the unit square.
class MTDCurve {
 public:
  MTDCurve(const ToxParams& params, double theta);

  const ToxParams& params() const { return params_; }
  double theta() const { return theta_; }
  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }

  // Unclipped contour ordinate; defined for every x >= 0.
  double y_at(double x) const;

  // Linear-in-x coordinate along the clipped curve.
  double project_to_z(double x, double y) const;
  DoseCombination dose_at_z(double z, const DoseRanges& ranges = {}) const;

  std::vector<std::array<double, 2>> points(std::size_t n) const;

 private:
  ToxParams params_;
  double theta_;
  double numerator0_;
  double x_lo_;
  double x_hi_;
};

inline MTDCurve mtd_curve(const ToxParams& params, double theta) { return MTDCurve(params, theta); }

double log_posterior_stage1(const ToxParams& params, std::span<const ToxRecord> data,
                            const ToxPriorConfig& prior);
// Gradient with respect to (rho00, rho10, rho01, eta3).
std::array<double, 4> log_posterior_stage1_gradient(const ToxParams& params,
                                                    std::span<const ToxRecord> data,
                                                    const ToxPriorConfig& prior);

// ---------------------------------------------------------------------------
// Time to progression.

inline constexpr std::size_t kSplineCoefficients = 6;

struct TTPParams {
  std::array<double, kSplineCoefficients> beta{};
  double phi4 = 1.0 / 3.0;
  double phi5 = 2.0 / 3.0;
  double k = 1.0;

  bool valid() const;

  // Constant median `median` for every z.
  static TTPParams flat(double median, double k);

  friend bool operator==(const TTPParams&, const TTPParams&) = default;
};

struct TTPPriorConfig {
  std::array<double, kSplineCoefficients> mu{};
  double sigma2 = 100.0;
  double k_lo = 1e-100;
  double k_hi = 10.0;

  void validate() const;
  friend bool operator==(const TTPPriorConfig&, const TTPPriorConfig&) = default;
};

struct TTPRecord {
  double z = 0.0;
  double time = 1.0;
  int event = 1;  // 1 progression observed, 0 censored
};

double log_lambda_spline(const TTPParams& params, double z);
inline double lambda_spline(const TTPParams& params, double z) {
  return std::exp(log_lambda_spline(params, z));
}
double weibull_median(const TTPParams& params, double z);

double weibull_pdf(double t, double scale, double shape);
double weibull_cdf(double t, double scale, double shape);
double weibull_quantile(double p, double scale, double shape);

double log_posterior_stage2(const TTPParams& params, std::span<const TTPRecord> data,
                            const TTPPriorConfig& prior);
// Gradient with respect to (beta0..beta5, phi4, phi5, k).
std::array<double, 9> log_posterior_stage2_gradient(const TTPParams& params,
                                                    std::span<const TTPRecord> data,
                                                    const TTPPriorConfig& prior);

}  // namespace combidose
