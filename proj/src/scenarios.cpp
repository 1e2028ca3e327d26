#include <cmath>
#include <numbers>

#include "combidose/harness.hpp"

namespace combidose {

std::string to_string(MedianShape shape) {
  switch (shape) {
    case MedianShape::FlatNull: return "flat-null";
    case MedianShape::Increasing: return "increasing";
    case MedianShape::Decreasing: return "decreasing";
    case MedianShape::MidPeak: return "mid-peak";
    case MedianShape::EdgePeak: return "edge-peak";
    case MedianShape::AboveNull: return "above-null";
  }
  return "flat-null";
}

TTPParams median_shape(MedianShape shape, double med0, double effect, double weibull_shape) {
  if (!(med0 > 1.0)) throw DomainError("shapes need med0 > 1 month");
  const double low = std::log(med0 - 1.0);
  const double high = std::log(med0 + effect);
  // Shapes are polynomials in z of degree <= 2 on the log-median scale; the
  // spline's cubic terms stay at zero.
  double c0 = std::log(med0), c1 = 0.0, c2 = 0.0;
  switch (shape) {
    case MedianShape::FlatNull: break;
    case MedianShape::AboveNull: c0 = high; break;
    case MedianShape::Increasing: c0 = low; c1 = high - low; break;
    case MedianShape::Decreasing: c0 = high; c1 = low - high; break;
    case MedianShape::MidPeak: {
      // Peak at z = 0.5, both ends at `low`.
      const double c = 4.0 * (high - low);
      c0 = high - c / 4.0; c1 = c; c2 = -c;
      break;
    }
    case MedianShape::EdgePeak: {
      // Peak at z = 0.8, z = 0 at `low`.
      const double c = (high - low) / 0.64;
      c0 = high - 0.64 * c; c1 = 1.6 * c; c2 = -c;
      break;
    }
  }
  TTPParams p;
  p.k = weibull_shape;
  p.beta[0] = c0 - std::log(std::numbers::ln2) / weibull_shape;
  p.beta[1] = c1;
  p.beta[2] = c2;
  return p;
}

ToxParams tox_truth_through(double rho00, double rho10, double rho01, double p_start,
                            const DoseCombination& start) {
  const double x = start.x, y = start.y;
  if (!(x > 0.0 && y > 0.0)) throw DomainError("start dose must be interior to solve for eta3");
  const double eta3 = (logistic::quantile(p_start) - (1.0 - x - y) * logistic::quantile(rho00) -
                       x * logistic::quantile(rho10) - y * logistic::quantile(rho01)) / (x * y);
  ToxParams p{rho00, rho10, rho01, eta3};
  p.validate();
  return p;
}

namespace {

constexpr const char* kNote =
    "Reconstructed truth: the published scenario parameters are not available, so this "
    "scenario targets the described curve position or median-TTP shape.";

struct Stage1Truth {
  const char* name;
  double rho00, rho10, rho01, p_start;
};

}  // namespace

std::vector<Scenario> scenario_pack() {
  const Stage1Config s1{};
  // Curves through, above (p_start < theta) and below (p_start > theta) the
  // start combination, and agents of unequal toxicity.
  const Stage1Truth truths[] = {
      {"s1-through-symmetric", 0.05, 0.30, 0.30, 0.33},
      {"s1-through-calibrated", 0.06, 0.35, 0.25, 0.33},
      {"s1-through-synergy", 0.02, 0.20, 0.20, 0.33},
      {"s1-below", 0.10, 0.45, 0.45, 0.50},
      {"s1-below-toxic", 0.20, 0.60, 0.60, 0.65},
      {"s1-above", 0.02, 0.15, 0.12, 0.15},
      {"s1-above-far", 0.01, 0.10, 0.08, 0.08},
      {"s1-above-synergy", 0.01, 0.06, 0.06, 0.12},
      {"s1-agent-a-toxic", 0.03, 0.50, 0.10, 0.25},
      {"s1-agent-b-toxic", 0.03, 0.12, 0.50, 0.25},
      {"s1-agent-a-toxic-through", 0.05, 0.50, 0.20, 0.33},
      {"s1-agent-b-toxic-above", 0.02, 0.10, 0.30, 0.15},
  };
  std::vector<Scenario> out;
  for (const Stage1Truth& t : truths) {
    Scenario s;
    s.name = t.name;
    s.note = kNote;
    s.true_tox = tox_truth_through(t.rho00, t.rho10, t.rho01, t.p_start, s1.start_dose);
    s.effect_size = 0.0;
    out.push_back(s);
  }

  const ToxParams calibrated = out[1].true_tox;
  const MedianShape shapes[] = {MedianShape::FlatNull,  MedianShape::Increasing, MedianShape::Decreasing,
                                MedianShape::MidPeak,   MedianShape::EdgePeak,   MedianShape::AboveNull};
  for (MedianShape shape : shapes) {
    for (double effect : {1.5, 2.0}) {
      if (shape == MedianShape::FlatNull && effect != 2.0) continue;
      Scenario s;
      s.name = "s2-" + to_string(shape);
      if (shape != MedianShape::FlatNull) s.name += effect == 2.0 ? "-e2" : "-e1.5";
      s.note = kNote;
      s.true_tox = calibrated;
      s.effect_size = shape == MedianShape::FlatNull ? 0.0 : effect;
      if (shape != MedianShape::FlatNull) s.true_ttp = median_shape(shape, s.stage2.med0, effect);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace combidose
