#pragma once

// Small builders for common run configurations.

#include "nddc/mesh.hpp"
#include "nddc/weights.hpp"

namespace nddc {

/// Default horizon max(50, 40 tau), rounded up onto the mesh.
[[nodiscard]] inline double defaultHorizon(double tau, int stepsPerDelay) {
  return makeMeshCovering(tau, stepsPerDelay, std::max(50.0, 40.0 * tau)).tEnd();
}

/// Horizon rounded up onto the mesh.
[[nodiscard]] inline double meshHorizon(double tau, int stepsPerDelay, double tEnd) {
  return makeMeshCovering(tau, stepsPerDelay, tEnd).tEnd();
}

/// Constant-in-time ramp x_i = c (N-1-i)/(N-1) in every coordinate (agent 0
/// at c, agent N-1 at 0), so that x_1 - x_N = c.
[[nodiscard]] inline StateMatrix rampState(int agents, int dim, double c) {
  if (agents < 2) throw std::invalid_argument("rampState: need N >= 2");
  StateMatrix x(agents, dim);
  for (int i = 0; i < agents; ++i)
    x.row(i).setConstant(c * static_cast<double>(agents - 1 - i) / (agents - 1));
  return x;
}

[[nodiscard]] inline SimConfig twoAgentConfig(ModelKind model, double lambda, double tau,
                                              int stepsPerDelay, double tEnd, double gap = 1.0) {
  if (!isTwoAgent(model)) throw std::invalid_argument("twoAgentConfig: not a two-agent model");
  SimConfig c;
  c.model = model;
  c.agents = 2;
  c.dim = 1;
  c.lambda = lambda;
  c.tau = tau;
  c.stepsPerDelay = stepsPerDelay;
  c.tEnd = tEnd;
  c.datum = InitialDatum::constant(StateMatrix::Constant(1, 1, gap));
  return c;
}

[[nodiscard]] inline SimConfig agentConfig(ModelKind model, const WeightMatrix& w, double lambda,
                                           double tau, int stepsPerDelay, double tEnd,
                                           InitialDatum datum) {
  if (isTwoAgent(model)) throw std::invalid_argument("agentConfig: not an N-agent model");
  SimConfig c;
  c.model = model;
  c.agents = w.size();
  c.dim = static_cast<int>(datum.cols());
  c.lambda = lambda;
  c.tau = tau;
  c.stepsPerDelay = stepsPerDelay;
  c.tEnd = tEnd;
  c.weights = w;
  c.datum = std::move(datum);
  return c;
}

}  // namespace nddc
