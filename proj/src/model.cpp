#include "combidose/model.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace combidose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

double log_beta_density(double v, const BetaPrior& p) {
  return (p.a - 1.0) * std::log(v) + (p.b - 1.0) * std::log1p(-v) -
         (std::lgamma(p.a) + std::lgamma(p.b) - std::lgamma(p.a + p.b));
}

double dlog_beta_density(double v, const BetaPrior& p) {
  return (p.a - 1.0) / v - (p.b - 1.0) / (1.0 - v);
}

double cube_plus(double v) { return v > 0.0 ? v * v * v : 0.0; }
double square_plus(double v) { return v > 0.0 ? v * v : 0.0; }

}  // namespace

DoseCombination DoseCombination::from_standardized(double x, double y, const DoseRanges& ranges) {
  return {x, y, ranges.a.raw(x), ranges.b.raw(y)};
}

DoseCombination DoseCombination::from_raw(double raw_x, double raw_y, const DoseRanges& ranges) {
  return {ranges.a.standardize(raw_x), ranges.b.standardize(raw_y), raw_x, raw_y};
}

bool ToxParams::valid() const {
  return rho00 > 0.0 && rho00 < std::min(rho10, rho01) && rho10 < 1.0 && rho01 < 1.0 &&
         eta3 > 0.0 && std::isfinite(eta3);
}

void ToxParams::validate() const {
  if (!valid()) {
    throw DomainError("invalid ToxParams: need 0 < rho00 < min(rho10, rho01), rho10, rho01 < 1, eta3 > 0");
  }
}

void ToxPriorConfig::validate() const {
  for (const BetaPrior& p : {rho01, rho10, rho00_ratio}) {
    if (!(p.a > 0.0 && p.b > 0.0)) throw DomainError("beta hyperparameters must be positive");
  }
  if (!(eta3.shape > 0.0 && eta3.rate > 0.0)) throw DomainError("gamma hyperparameters must be positive");
}

double prob_dlt(const ToxParams& params, double x, double y) {
  params.validate();
  if (!in_unit(x) || !in_unit(y)) throw DomainError("dose outside [0,1]");
  return logistic::cdf(params.logit00() + params.slope_x() * x + params.slope_y() * y +
                       params.eta3 * x * y);
}

double conditional_mtd_x(const ToxParams& params, double y, double theta) {
  const double target = logistic::quantile(theta);
  const double x = (target - params.logit00() - params.slope_y() * y) /
                   (params.slope_x() + params.eta3 * y);
  return std::clamp(x, 0.0, 1.0);
}

double conditional_mtd_y(const ToxParams& params, double x, double theta) {
  const double target = logistic::quantile(theta);
  const double y = (target - params.logit00() - params.slope_x() * x) /
                   (params.slope_y() + params.eta3 * x);
  return std::clamp(y, 0.0, 1.0);
}

MTDCurve::MTDCurve(const ToxParams& params, double theta) : params_(params), theta_(theta) {
  params.validate();
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  if (theta <= params.rho00) throw NoCurveError("theta <= rho00: every combination is above target");
  numerator0_ = logistic::quantile(theta) - params.logit00();
  const double sx = params.slope_x();
  const double sy = params.slope_y();
  const double x_at_top = (numerator0_ - sy) / (sx + params.eta3);  // y* = 1
  const double x_at_bottom = numerator0_ / sx;                      // y* = 0
  x_lo_ = std::max(0.0, x_at_top);
  x_hi_ = std::min(1.0, x_at_bottom);
  if (!(x_lo_ < x_hi_)) throw NoCurveError("MTD contour lies outside the unit square");
}

double MTDCurve::y_at(double x) const {
  return (numerator0_ - params_.slope_x() * x) / (params_.slope_y() + params_.eta3 * x);
}

double MTDCurve::project_to_z(double x, double y) const {
  constexpr double tol = 1e-6;
  if (x < x_lo_ - tol || x > x_hi_ + tol || std::abs(y - y_at(x)) > tol) {
    throw DomainError("dose combination is not on the MTD curve");
  }
  return std::clamp((x - x_lo_) / (x_hi_ - x_lo_), 0.0, 1.0);
}

DoseCombination MTDCurve::dose_at_z(double z, const DoseRanges& ranges) const {
  if (!in_unit(z)) throw DomainError("z outside [0,1]");
  const double x = x_lo_ + z * (x_hi_ - x_lo_);
  return DoseCombination::from_standardized(x, std::clamp(y_at(x), 0.0, 1.0), ranges);
}

std::vector<std::array<double, 2>> MTDCurve::points(std::size_t n) const {
  std::vector<std::array<double, 2>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const DoseCombination d = dose_at_z(z);
    out.push_back({d.x, d.y});
  }
  return out;
}

double log_posterior_stage1(const ToxParams& params, std::span<const ToxRecord> data,
                            const ToxPriorConfig& prior) {
  if (!params.valid()) return kNegInf;
  const double l00 = params.logit00();
  const double sx = params.slope_x();
  const double sy = params.slope_y();
  double ll = 0.0;
  for (const ToxRecord& r : data) {
    const double eta = l00 + sx * r.x + sy * r.y + params.eta3 * r.x * r.y;
    ll += r.dlt ? logistic::log_cdf(eta) : logistic::log_ccdf(eta);
  }
  const double m = std::min(params.rho01, params.rho10);
  const double ratio = params.rho00 / m;
  const GammaPrior& g = prior.eta3;
  const double log_gamma = g.shape * std::log(g.rate) - std::lgamma(g.shape) +
                           (g.shape - 1.0) * std::log(params.eta3) - g.rate * params.eta3;
  return ll + log_beta_density(params.rho01, prior.rho01) +
         log_beta_density(params.rho10, prior.rho10) +
         log_beta_density(ratio, prior.rho00_ratio) - std::log(m) + log_gamma;
}

std::array<double, 4> log_posterior_stage1_gradient(const ToxParams& params,
                                                    std::span<const ToxRecord> data,
                                                    const ToxPriorConfig& prior) {
  params.validate();
  const double l00 = params.logit00();
  const double sx = params.slope_x();
  const double sy = params.slope_y();
  // d loglik / d(l00, l10, l01, eta3)
  double g00 = 0.0, g10 = 0.0, g01 = 0.0, g3 = 0.0;
  for (const ToxRecord& r : data) {
    const double eta = l00 + sx * r.x + sy * r.y + params.eta3 * r.x * r.y;
    const double resid = static_cast<double>(r.dlt) - logistic::cdf(eta);
    g00 += resid * (1.0 - r.x - r.y);
    g10 += resid * r.x;
    g01 += resid * r.y;
    g3 += resid * r.x * r.y;
  }
  auto dlogit = [](double p) { return 1.0 / (p * (1.0 - p)); };
  std::array<double, 4> grad{g00 * dlogit(params.rho00), g10 * dlogit(params.rho10),
                             g01 * dlogit(params.rho01), g3};

  const bool rho01_is_min = params.rho01 <= params.rho10;
  const double m = rho01_is_min ? params.rho01 : params.rho10;
  const double ratio = params.rho00 / m;
  const double dratio = dlog_beta_density(ratio, prior.rho00_ratio);
  grad[0] += dratio / m;
  const double dm = dratio * (-ratio / m) - 1.0 / m;
  grad[1] += dlog_beta_density(params.rho10, prior.rho10) + (rho01_is_min ? 0.0 : dm);
  grad[2] += dlog_beta_density(params.rho01, prior.rho01) + (rho01_is_min ? dm : 0.0);
  grad[3] += (prior.eta3.shape - 1.0) / params.eta3 - prior.eta3.rate;
  return grad;
}

// ---------------------------------------------------------------------------

bool TTPParams::valid() const {
  return phi4 >= 0.0 && phi4 < phi5 && phi5 <= 1.0 && k > 0.0 && std::isfinite(k) &&
         std::all_of(beta.begin(), beta.end(), [](double b) { return std::isfinite(b); });
}

TTPParams TTPParams::flat(double median, double k) {
  TTPParams p;
  p.k = k;
  p.beta[0] = std::log(median) - std::log(std::numbers::ln2) / k;
  return p;
}

void TTPPriorConfig::validate() const {
  if (!(sigma2 > 0.0)) throw DomainError("prior variance must be positive");
  if (!(k_lo < k_hi) || k_lo < 0.0) throw DomainError("invalid k range");
}

double log_lambda_spline(const TTPParams& p, double z) {
  const auto& b = p.beta;
  return b[0] + z * (b[1] + z * b[2]) + b[3] * cube_plus(z) + b[4] * cube_plus(z - p.phi4) +
         b[5] * cube_plus(z - p.phi5);
}

double weibull_median(const TTPParams& params, double z) {
  return std::exp(log_lambda_spline(params, z) + std::log(std::numbers::ln2) / params.k);
}

double weibull_pdf(double t, double scale, double shape) {
  if (t < 0.0) return 0.0;
  const double u = t / scale;
  return shape / scale * std::pow(u, shape - 1.0) * std::exp(-std::pow(u, shape));
}

double weibull_cdf(double t, double scale, double shape) {
  if (t <= 0.0) return 0.0;
  return -std::expm1(-std::pow(t / scale, shape));
}

double weibull_quantile(double p, double scale, double shape) {
  return scale * std::pow(-std::log1p(-p), 1.0 / shape);
}

double log_posterior_stage2(const TTPParams& params, std::span<const TTPRecord> data,
                            const TTPPriorConfig& prior) {
  if (!params.valid() || !(params.k > prior.k_lo && params.k < prior.k_hi)) return kNegInf;
  const double k = params.k;
  const double log_k = std::log(k);
  double ll = 0.0;
  for (const TTPRecord& r : data) {
    const double log_t = std::log(r.time);
    const double s = log_lambda_spline(params, r.z);
    if (r.event) ll += log_k - s + (k - 1.0) * (log_t - s);
    ll -= std::exp(k * (log_t - s));
  }
  double lp = 0.0;
  for (std::size_t j = 0; j < kSplineCoefficients; ++j) {
    const double d = params.beta[j] - prior.mu[j];
    lp -= 0.5 * d * d / prior.sigma2;
  }
  lp -= 0.5 * static_cast<double>(kSplineCoefficients) * std::log(2.0 * std::numbers::pi * prior.sigma2);
  lp += std::numbers::ln2 - std::log(prior.k_hi - prior.k_lo);
  const double out = ll + lp;
  return std::isnan(out) ? kNegInf : out;
}

std::array<double, 9> log_posterior_stage2_gradient(const TTPParams& params,
                                                    std::span<const TTPRecord> data,
                                                    const TTPPriorConfig& prior) {
  if (!params.valid()) throw DomainError("invalid TTPParams");
  const double k = params.k;
  const auto& b = params.beta;
  std::array<double, 9> grad{};
  for (const TTPRecord& r : data) {
    const double z = r.z;
    const double log_t = std::log(r.time);
    const double s = log_lambda_spline(params, z);
    const double w = std::exp(k * (log_t - s));
    const double ds = -static_cast<double>(r.event) * k + k * w;  // d loglik / d s
    const std::array<double, 6> basis{1.0, z, z * z, cube_plus(z), cube_plus(z - params.phi4),
                                      cube_plus(z - params.phi5)};
    for (std::size_t j = 0; j < 6; ++j) grad[j] += ds * basis[j];
    grad[6] += ds * (-3.0 * b[4] * square_plus(z - params.phi4));
    grad[7] += ds * (-3.0 * b[5] * square_plus(z - params.phi5));
    grad[8] += static_cast<double>(r.event) * (1.0 / k + log_t - s) - w * (log_t - s);
  }
  for (std::size_t j = 0; j < kSplineCoefficients; ++j) {
    grad[j] -= (b[j] - prior.mu[j]) / prior.sigma2;
  }
  return grad;
}

}  // namespace combidose
