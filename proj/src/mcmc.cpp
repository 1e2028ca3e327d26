#include "combidose/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace combidose {

namespace {

enum class Kind { Real, LowerBounded, Interval };

struct Transform {
  Kind kind = Kind::Real;
  double lo = 0.0;
  double width = 1.0;

  explicit Transform(const ParamSpec& spec) {
    const bool has_lo = std::isfinite(spec.lo);
    const bool has_hi = std::isfinite(spec.hi);
    if (has_lo && has_hi) {
      kind = Kind::Interval;
      lo = spec.lo;
      width = spec.hi - spec.lo;
    } else if (has_lo) {
      kind = Kind::LowerBounded;
      lo = spec.lo;
    } else if (has_hi) {
      throw std::invalid_argument("upper-bounded-only support is not supported: " + spec.name);
    }
  }

  double to_free(double v) const {
    switch (kind) {
      case Kind::Real: return v;
      case Kind::LowerBounded: return std::log(v - lo);
      case Kind::Interval: {
        const double p = (v - lo) / width;
        return std::log(p) - std::log1p(-p);
      }
    }
    return v;
  }

  double from_free(double u) const {
    switch (kind) {
      case Kind::Real: return u;
      case Kind::LowerBounded: return lo + std::exp(u);
      case Kind::Interval: return lo + width / (1.0 + std::exp(-u));
    }
    return u;
  }

  // log |dv/du|
  double log_jacobian(double u) const {
    switch (kind) {
      case Kind::Real: return 0.0;
      case Kind::LowerBounded: return u;
      case Kind::Interval:
        return std::log(width) - std::abs(u) - 2.0 * std::log1p(std::exp(-std::abs(u)));
    }
    return 0.0;
  }
};

}  // namespace

void MCMCConfig::validate() const {
  if (burn_in < 0 || keep < 100 || thin < 1 || !(adapt_target > 0.0 && adapt_target < 1.0)) {
    throw std::invalid_argument("invalid MCMCConfig");
  }
  for (double s : initial_step_sizes) {
    if (!(s > 0.0)) throw std::invalid_argument("step sizes must be positive");
  }
}

PosteriorChain::PosteriorChain(std::vector<std::string> names, std::vector<double> draws,
                               std::vector<double> acceptance_rates, std::uint64_t seed)
    : names_(std::move(names)),
      draws_(std::move(draws)),
      acceptance_rates_(std::move(acceptance_rates)),
      seed_(seed) {
  if (!names_.empty() && draws_.size() % names_.size() != 0) {
    throw std::invalid_argument("draw matrix does not match parameter count");
  }
}

PosteriorChain PosteriorChain::from_rows(std::vector<std::string> names,
                                         const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  flat.reserve(rows.size() * names.size());
  for (const auto& r : rows) {
    if (r.size() != names.size()) throw std::invalid_argument("row length mismatch");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return PosteriorChain(std::move(names), std::move(flat), {}, 0);
}

std::vector<double> PosteriorChain::column(std::size_t param) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, param);
  return out;
}

void PosteriorChain::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < dim(); ++j) out << (j ? "," : "") << names_[j];
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < dim(); ++j) out << (j ? "," : "") << at(i, j);
    out << '\n';
  }
  out.precision(old_precision);
}

PosteriorChain sample(const LogDensity& log_density, std::span<const ParamSpec> params,
                      const MCMCConfig& config, const NaturalMap& to_natural,
                      std::vector<std::string> natural_names) {
  config.validate();
  const std::size_t p = params.size();
  if (p == 0) throw std::invalid_argument("no parameters to sample");
  if (!config.initial_step_sizes.empty() && config.initial_step_sizes.size() != p) {
    throw std::invalid_argument("initial_step_sizes length mismatch");
  }

  std::vector<Transform> transforms;
  std::vector<double> free(p), value(p), step(p);
  for (std::size_t j = 0; j < p; ++j) {
    transforms.emplace_back(params[j]);
    free[j] = transforms[j].to_free(params[j].initial);
    value[j] = params[j].initial;
    step[j] = config.initial_step_sizes.empty() ? params[j].step : config.initial_step_sizes[j];
  }

  auto target = [&](std::span<const double> v, std::span<const double> u) {
    double lp = log_density(v);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p; ++j) lp += transforms[j].log_jacobian(u[j]);
    return lp;
  };

  double current = target(value, free);
  if (!std::isfinite(current)) {
    throw SamplerInitError("log density is not finite at the initial point");
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  std::vector<double> log_step(p);
  for (std::size_t j = 0; j < p; ++j) log_step[j] = std::log(step[j]);
  std::vector<long> accepted(p, 0);

  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.keep) * config.thin;
  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(config.keep) * p);
  std::vector<double> natural(p);

  for (long it = 0; it < total; ++it) {
    const bool adapting = it < config.burn_in;
    for (std::size_t j = 0; j < p; ++j) {
      const double old_free = free[j];
      const double old_value = value[j];
      free[j] = old_free + std::exp(log_step[j]) * normal(rng);
      value[j] = transforms[j].from_free(free[j]);
      const double proposed = target(value, free);
      const double log_ratio = proposed - current;
      const bool accept = std::isfinite(proposed) && (log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio);
      if (accept) {
        current = proposed;
      } else {
        free[j] = old_free;
        value[j] = old_value;
      }
      if (adapting) {
        const double gain = 1.0 / std::pow(static_cast<double>(it) + 1.0, 0.6);
        log_step[j] += gain * ((accept ? 1.0 : 0.0) - config.adapt_target);
      } else if (accept) {
        ++accepted[j];
      }
    }
    if (!adapting && (it - config.burn_in) % config.thin == config.thin - 1) {
      if (to_natural) {
        to_natural(value, natural);
        draws.insert(draws.end(), natural.begin(), natural.end());
      } else {
        draws.insert(draws.end(), value.begin(), value.end());
      }
    }
  }

  std::vector<double> rates(p);
  const double retained_iters = static_cast<double>(config.keep) * config.thin;
  for (std::size_t j = 0; j < p; ++j) rates[j] = static_cast<double>(accepted[j]) / retained_iters;

  if (natural_names.empty()) {
    for (const ParamSpec& s : params) natural_names.push_back(s.name);
  }
  return PosteriorChain(std::move(natural_names), std::move(draws), std::move(rates), config.seed);
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0,1]");
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

double quantile(const PosteriorChain& chain, std::size_t param, double q) {
  if (chain.empty()) throw std::invalid_argument("empty chain");
  if (param >= chain.dim()) throw std::out_of_range("parameter index out of range");
  return empirical_quantile(chain.column(param), q);
}

}  // namespace combidose
