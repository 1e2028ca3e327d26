#pragma once

// Adaptive random-walk Metropolis-within-Gibbs.
//
// Each coordinate has an interval support (lo, hi) and is updated on an
// unconstrained scale: identity for the real line, log(v - lo) for a half
// line, logit((v - lo) / (hi - lo)) for a bounded interval. Step sizes are
// tuned by Robbins-Monro toward `adapt_target` during burn-in and frozen
// afterwards, so the retained draws come from a fixed Markov kernel.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace combidose {

class SamplerInitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MCMCConfig {
  int burn_in = 2000;
  int keep = 2000;
  int thin = 1;
  std::vector<double> initial_step_sizes;  // empty: use each ParamSpec's step
  double adapt_target = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const MCMCConfig&, const MCMCConfig&) = default;
};

struct ParamSpec {
  std::string name;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double initial = 0.0;
  double step = 0.5;  // on the unconstrained scale
};

class PosteriorChain {
 public:
  PosteriorChain() = default;
  PosteriorChain(std::vector<std::string> names, std::vector<double> draws,
                 std::vector<double> acceptance_rates, std::uint64_t seed);

  // Builds a chain from explicit draws, one row per draw.
  static PosteriorChain from_rows(std::vector<std::string> names,
                                  const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return dim() == 0 ? 0 : draws_.size() / dim(); }
  std::size_t dim() const { return names_.size(); }
  bool empty() const { return draws_.empty(); }

  double at(std::size_t draw, std::size_t param) const { return draws_[draw * dim() + param]; }
  std::span<const double> row(std::size_t draw) const {
    return {draws_.data() + draw * dim(), dim()};
  }
  std::vector<double> column(std::size_t param) const;

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& draws() const { return draws_; }
  const std::vector<double>& acceptance_rates() const { return acceptance_rates_; }
  std::uint64_t seed() const { return seed_; }

  void write_csv(std::ostream& out) const;

  friend bool operator==(const PosteriorChain&, const PosteriorChain&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> draws_;  // row-major, size() x dim()
  std::vector<double> acceptance_rates_;
  std::uint64_t seed_ = 0;
};

// Target density over the sampler coordinates (in the ParamSpec supports).
using LogDensity = std::function<double(std::span<const double>)>;
// Maps sampler coordinates to the stored natural-space row (same length).
using NaturalMap = std::function<void(std::span<const double>, std::span<double>)>;

PosteriorChain sample(const LogDensity& log_density, std::span<const ParamSpec> params,
                      const MCMCConfig& config, const NaturalMap& to_natural = {},
                      std::vector<std::string> natural_names = {});

// Linear interpolation between order statistics (h = (n - 1) q).
double empirical_quantile(std::vector<double> values, double q);
double quantile(const PosteriorChain& chain, std::size_t param, double q);
inline double median(const PosteriorChain& chain, std::size_t param) {
  return quantile(chain, param, 0.5);
}

}  // namespace combidose
