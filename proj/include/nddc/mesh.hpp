#pragma once

// Uniform mesh with the delay an integer multiple of the step, plus history
// initialization from the initial datum and delayed lookups.

#include "nddc/core.hpp"

#include <cmath>

namespace nddc {

struct Mesh {
  double tau = 0.0;
  double stepSize = 0.0;
  int delaySteps = 0;  // m; zero only for tau = 0
  long totalSteps = 0;

  [[nodiscard]] double tEnd() const { return static_cast<double>(totalSteps) * stepSize; }
  [[nodiscard]] double timeOf(long k) const { return static_cast<double>(k) * stepSize; }
};

namespace detail {
inline double stepFor(double tau, int stepsPerDelay) {
  if (stepsPerDelay < 1) throw std::invalid_argument("mesh: steps per delay must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("mesh: tau must be >= 0");
  // tau = 0 is an ODE; m then counts steps per unit time.
  return tau > 0.0 ? tau / stepsPerDelay : 1.0 / stepsPerDelay;
}
}  // namespace detail

/// Exact mesh: tEnd must be an integer multiple of the step (relative 1e-9).
[[nodiscard]] inline Mesh makeMesh(double tau, int stepsPerDelay, double tEnd) {
  const double dt = detail::stepFor(tau, stepsPerDelay);
  if (!(tEnd > 0.0) || !std::isfinite(tEnd)) throw std::invalid_argument("mesh: tEnd must be > 0");
  const double ratio = tEnd / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("mesh: tEnd = " + std::to_string(tEnd) +
                                " is not an integer multiple of dt = " + std::to_string(dt));
  return {tau, dt, tau > 0.0 ? stepsPerDelay : 0, static_cast<long>(steps)};
}

/// Mesh whose horizon is tEnd rounded up to the next multiple of the step.
[[nodiscard]] inline Mesh makeMeshCovering(double tau, int stepsPerDelay, double tEnd) {
  const double dt = detail::stepFor(tau, stepsPerDelay);
  const double ratio = tEnd / dt;
  auto steps = static_cast<long>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
  return {tau, dt, tau > 0.0 ? stepsPerDelay : 0, std::max(1L, steps)};
}

[[nodiscard]] inline std::size_t historyCapacity(const Mesh& mesh) {
  return static_cast<std::size_t>(std::max(2 * mesh.delaySteps + 1, 2));
}

/// History holding the datum at mesh indices -m..0 with its analytic derivative.
[[nodiscard]] inline HistoryBuffer<StateMatrix> initHistory(const InitialDatum& datum,
                                                            const Mesh& mesh, int agents,
                                                            int dim) {
  if (datum.rows() != agents || datum.cols() != dim)
    throw std::invalid_argument("initHistory: datum shape does not match N x d");
  HistoryBuffer<StateMatrix> h(mesh.stepSize, mesh.delaySteps, historyCapacity(mesh));
  const int m = mesh.delaySteps;
  h.setFirstIndex(-m);
  if (datum.kind() == DatumKind::SampledTable) {
    const auto& s = datum.samples();
    if (static_cast<int>(s.size()) != m + 1)
      throw std::invalid_argument("initHistory: table needs exactly m+1 = " +
                                  std::to_string(m + 1) + " samples on [-tau, 0]");
    const double tol = 1e-9 * std::max(1.0, mesh.tau);
    for (int k = -m; k <= 0; ++k) {
      const auto& sample = s[static_cast<std::size_t>(k + m)];
      if (std::abs(sample.time - mesh.timeOf(k)) > tol)
        throw std::invalid_argument("initHistory: table sample at t = " +
                                    std::to_string(sample.time) + " is not mesh aligned");
      h.push(sample.state, sample.derivative);
    }
    return h;
  }
  for (int k = -m; k <= 0; ++k) {
    const double t = mesh.timeOf(k);
    h.push(datum.state(t), datum.derivative(t));
  }
  return h;
}

/// Scalar history for the two-agent gap equations; the datum must be 1×1.
[[nodiscard]] inline HistoryBuffer<double> initScalarHistory(const InitialDatum& datum,
                                                             const Mesh& mesh) {
  const auto full = initHistory(datum, mesh, 1, 1);
  HistoryBuffer<double> h(mesh.stepSize, mesh.delaySteps, historyCapacity(mesh));
  h.setFirstIndex(-mesh.delaySteps);
  for (long k = full.oldest(); k <= full.newest(); ++k)
    h.push(full.state(k)(0, 0), full.derivative(k)(0, 0));
  return h;
}

/// Approximation of x'(k·dt) used in the anticipation term. On the datum
/// (k <= 0) both modes use the analytic derivative.
template <class T>
[[nodiscard]] T delayedDerivative(const HistoryBuffer<T>& h, long k, DerivativeMode mode) {
  if (mode == DerivativeMode::StoredRhs || k <= 0) return h.derivative(k);
  return T((h.state(k) - h.state(k - 1)) / h.stepSize());
}

/// Anticipated delayed value x(k·dt) + lambda·tau·D(k·dt).
template <class T>
[[nodiscard]] T anticipated(const HistoryBuffer<T>& h, long k, double lambdaTau,
                            DerivativeMode mode) {
  if (lambdaTau == 0.0) return h.state(k);
  return T(h.state(k) + lambdaTau * delayedDerivative(h, k, mode));
}

}  // namespace nddc
