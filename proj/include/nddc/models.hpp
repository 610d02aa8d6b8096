#pragma once

// Two-agent scalar reductions of the consensus systems and the closed-form
// stability conditions that go with them.
//
// With psi_12 = psi_21 = 1 the gap x = x1 - x2 obeys
//   transmission:  x' = -x(t-tau) - lambda*tau*x'(t-tau) - x
//   reaction:      x' = -2 x(t-tau) - 2 lambda*tau*x'(t-tau)

#include "nddc/mesh.hpp"

#include <numbers>

namespace nddc::models {

/// One implicit-Euler step of the transmission gap equation; appends the new
/// value and its right-hand side to the history and returns the value.
inline double stepTwoAgentTransmission(HistoryBuffer<double>& h, double lambda, double tau,
                                       DerivativeMode mode = DerivativeMode::BackwardDifference) {
  const double dt = h.stepSize();
  const long n = h.newest();
  double next = 0.0;
  double rhs = 0.0;
  if (h.delaySteps() == 0) {
    next = h.state(n) / (1.0 + 2.0 * dt);
    rhs = -2.0 * next;
  } else {
    const double xi = anticipated(h, n + 1 - h.delaySteps(), lambda * tau, mode);
    next = (h.state(n) - dt * xi) / (1.0 + dt);
    rhs = -xi - next;
  }
  if (!std::isfinite(next)) throw NonFiniteState("stepTwoAgentTransmission: non-finite gap");
  h.push(next, rhs);
  return next;
}

/// One step of the reaction gap equation. Every right-hand term is delayed by
/// m >= 1 steps, so the implicit scheme is a direct update.
inline double stepTwoAgentReaction(HistoryBuffer<double>& h, double lambda, double tau,
                                   DerivativeMode mode = DerivativeMode::BackwardDifference) {
  const double dt = h.stepSize();
  const long n = h.newest();
  double next = 0.0;
  double rhs = 0.0;
  if (h.delaySteps() == 0) {
    next = h.state(n) / (1.0 + 2.0 * dt);
    rhs = -2.0 * next;
  } else {
    const double xi = anticipated(h, n + 1 - h.delaySteps(), lambda * tau, mode);
    rhs = -2.0 * xi;
    next = h.state(n) + dt * rhs;
  }
  if (!std::isfinite(next)) throw NonFiniteState("stepTwoAgentReaction: non-finite gap");
  h.push(next, rhs);
  return next;
}

/// Zero is globally stable for the transmission gap equation iff lambda*tau < 1.
[[nodiscard]] constexpr bool transTwoAgentStable(double lambda, double tau) {
  return lambda * tau < 1.0;
}

/// Lyapunov-based sufficient condition for the reaction gap equation.
[[nodiscard]] constexpr bool reactTwoAgentSufficient(double lambda, double tau) {
  return 2.0 * (1.0 + lambda) * tau < 1.0;
}

/// Sufficient condition for consensus in the N-agent transmission model (N >= 3).
[[nodiscard]] constexpr bool theoremTransmissionCondition(double lambda, double tau) {
  return lambda * tau <= 1.0;
}

/// Sufficient condition for consensus in the N-agent reaction model.
[[nodiscard]] constexpr bool theoremReactCondition(double lambda, double tau) {
  return (1.0 + lambda) * tau < 0.5;
}

enum class RegimeLabel { StableNonOscillatory, StableOscillatory, Unstable, Boundary };

[[nodiscard]] inline std::string_view toString(RegimeLabel l) {
  switch (l) {
    case RegimeLabel::StableNonOscillatory: return "StableNonOscillatory";
    case RegimeLabel::StableOscillatory: return "StableOscillatory";
    case RegimeLabel::Unstable: return "Unstable";
    case RegimeLabel::Boundary: return "Boundary";
  }
  return "?";
}

struct AnalyticRegime {
  RegimeLabel label = RegimeLabel::Boundary;
  double product = 0.0;  // 2*tau, the quantity compared with the thresholds
  double oscillationThreshold = 1.0 / std::numbers::e;
  double stabilityThreshold = std::numbers::pi / 2.0;
};

/// Regime of x'(t) = -2 x(t - tau): non-oscillatory decay for 2tau < 1/e,
/// oscillatory decay for 1/e < 2tau < pi/2, growth for 2tau > pi/2.
[[nodiscard]] inline AnalyticRegime reactNoAnticipationRegime(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("reactNoAnticipationRegime: tau must be > 0");
  AnalyticRegime r;
  r.product = 2.0 * tau;
  if (r.product == r.oscillationThreshold || r.product == r.stabilityThreshold)
    r.label = RegimeLabel::Boundary;
  else if (r.product < r.oscillationThreshold)
    r.label = RegimeLabel::StableNonOscillatory;
  else if (r.product < r.stabilityThreshold)
    r.label = RegimeLabel::StableOscillatory;
  else
    r.label = RegimeLabel::Unstable;
  return r;
}

}  // namespace nddc::models
