#pragma once

// Randomized property harness for the two consensus theorems: each instance
// is integrated and checked for decay, mean conservation (reaction), the
// Lyapunov decrement and the a-priori bounds (transmission).

#include "nddc/config.hpp"
#include "nddc/integrator.hpp"
#include "nddc/sweep.hpp"

namespace nddc::theorems {

enum class Theorem { Transmission, Reaction };

[[nodiscard]] inline std::string_view toString(Theorem t) {
  return t == Theorem::Transmission ? "transmission" : "reaction";
}

struct Instance {
  Theorem theorem = Theorem::Transmission;
  std::uint64_t seed = 0;
  SimConfig config;
};

inline constexpr double kDecayTarget = 1e-3;
inline constexpr double kMeanDriftLimit = 1e-10;
inline constexpr double kSuiteHorizon = 100.0;
inline constexpr int kSuiteStepsPerDelay = 32;

namespace detail {

inline std::mt19937_64 instanceRng(Theorem t, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    t == Theorem::Transmission ? 0x7a11u : 0x5eedu};
  return std::mt19937_64(seq);
}

/// Constant datum with entries in [-1, 1], scaled so the largest agent norm is 1.
inline StateMatrix unitDatum(int n, int d, std::mt19937_64& rng) {
  StateMatrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) x(i, k) = 2.0 * weights::unitUniform(rng) - 1.0;
  return x / x.rowwise().norm().maxCoeff();
}

}  // namespace detail

/// Transmission instance: N in 3..8, d in 1..3, tau in [0.1, 1], lambda*tau in
/// [0, 1] (exactly 1 for every fifth seed), random row-stochastic W with
/// off-diagonal floor 0.5/(N-1), random constant datum with M = 1.
[[nodiscard]] inline Instance transmissionInstance(std::uint64_t seed) {
  auto rng = detail::instanceRng(Theorem::Transmission, seed);
  const int n = 3 + static_cast<int>(rng() % 6);
  const int d = 1 + static_cast<int>(rng() % 3);
  const double tau = 0.1 + 0.9 * weights::unitUniform(rng);
  double lambda = (seed % 5 == 4 ? 1.0 : weights::unitUniform(rng)) / tau;
  while (lambda * tau > 1.0) lambda = std::nextafter(lambda, 0.0);
  const auto w = weights::makeRandomRowStochastic(n, 0.5 / (n - 1), rng());
  const StateMatrix x0 = detail::unitDatum(n, d, rng);
  auto cfg = agentConfig(ModelKind::TransmissionN, w, lambda, tau, kSuiteStepsPerDelay,
                         meshHorizon(tau, kSuiteStepsPerDelay, kSuiteHorizon),
                         InitialDatum::constant(x0));
  cfg.seed = seed;
  return {Theorem::Transmission, seed, std::move(cfg)};
}

/// Reaction instance: N in 3..8, d in 1..3, tau in [0.05, 0.45],
/// lambda = u (1/(2 tau) - 1) 0.98 so (1+lambda) tau < 1/2, random symmetric
/// bi-stochastic W, random constant datum with M = 1.
[[nodiscard]] inline Instance reactionInstance(std::uint64_t seed) {
  auto rng = detail::instanceRng(Theorem::Reaction, seed);
  const int n = 3 + static_cast<int>(rng() % 6);
  const int d = 1 + static_cast<int>(rng() % 3);
  const double tau = 0.05 + 0.4 * weights::unitUniform(rng);
  const double lambda = weights::unitUniform(rng) * (0.5 / tau - 1.0) * 0.98;
  const auto w = weights::makeRandomSymmetricBistochastic(n, rng());
  const StateMatrix x0 = detail::unitDatum(n, d, rng);
  auto cfg = agentConfig(ModelKind::ReactionN, w, lambda, tau, kSuiteStepsPerDelay,
                         meshHorizon(tau, kSuiteStepsPerDelay, kSuiteHorizon),
                         InitialDatum::constant(x0));
  cfg.seed = seed;
  return {Theorem::Reaction, seed, std::move(cfg)};
}

struct Result {
  Theorem theorem = Theorem::Transmission;
  std::uint64_t seed = 0;
  int agents = 0;
  int dim = 0;
  double lambda = 0.0;
  double tau = 0.0;
  bool conditionHolds = false;  // the theorem's hypothesis, as coded

  double decayRatio = 0.0;  // d_x(tEnd) / d_x(0)
  bool decayOk = false;

  double meanDrift = 0.0;  // reaction: max_n |X(t_n) - X(0)|
  bool meanOk = true;

  std::optional<double> T0;
  std::size_t lyapChecked = 0;
  std::size_t lyapSkipped = 0;
  std::size_t lyapViolations = 0;
  double lyapWorstMargin = 0.0;
  bool lyapOk = false;

  double aprioriStateRatio = 0.0;  // transmission only
  double aprioriDerivRatio = 0.0;
  bool aprioriOk = true;

  std::string error;  // set when the run itself threw

  [[nodiscard]] bool pass() const {
    return error.empty() && conditionHolds && decayOk && meanOk && lyapOk && aprioriOk;
  }
};

[[nodiscard]] inline Result evaluate(const Instance& inst) {
  const auto& c = inst.config;
  Result r;
  r.theorem = inst.theorem;
  r.seed = inst.seed;
  r.agents = c.agents;
  r.dim = c.dim;
  r.lambda = c.lambda;
  r.tau = c.tau;
  r.conditionHolds = inst.theorem == Theorem::Transmission
                         ? models::theoremTransmissionCondition(c.lambda, c.tau)
                         : models::theoremReactCondition(c.lambda, c.tau);
  try {
    const auto tr = integrator::run(c);
    const auto o = tr.origin();
    const double d0 = tr.diameters[o].value;
    r.decayRatio = d0 > 0.0 ? tr.diameters.back().value / d0 : 0.0;
    r.decayOk = !tr.aborted && r.decayRatio < kDecayTarget;

    if (inst.theorem == Theorem::Transmission) {
      const auto ij = diagnostics::trackIJ(tr);
      r.T0 = ij.T0;
      const auto l = diagnostics::lyapTransmission(tr, c.weights, c.lambda, c.tau, ij.finalPair,
                                                   ij.T0.value_or(0.0));
      r.lyapChecked = l.checkedSteps;
      r.lyapSkipped = l.skippedSteps;
      r.lyapViolations = l.violations;
      r.lyapWorstMargin = l.worstMargin;
      r.lyapOk = l.violations == 0 && l.checkedSteps > 0;
      const auto a = diagnostics::aprioriBounds(tr, c.lambda, c.tau);
      r.aprioriStateRatio = a.worstStateRatio;
      r.aprioriDerivRatio = a.worstDerivRatio;
      r.aprioriOk = a.holds;
    } else {
      const auto X0 = tr.meanAt(o);
      for (std::size_t s = o; s < tr.size(); ++s)
        r.meanDrift = std::max(r.meanDrift, (tr.meanAt(s) - X0).cwiseAbs().maxCoeff());
      r.meanOk = r.meanDrift <= kMeanDriftLimit;
      const auto l = diagnostics::lyapReaction(tr, c.weights, c.lambda, c.tau);
      r.lyapChecked = l.checkedSteps;
      r.lyapViolations = l.violations;
      r.lyapWorstMargin = l.worstMargin;
      r.lyapOk = l.violations == 0 && l.checkedSteps > 0;
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

/// Evaluates seeds 0..count-1 of one theorem; result order follows the seeds.
[[nodiscard]] inline std::vector<Result> runSuite(Theorem t, std::uint64_t count,
                                                  unsigned threads = 0) {
  std::vector<Result> out(count);
  sweep::parallelFor(count, sweep::resolveThreads(threads), [&](std::size_t i) {
    const auto seed = static_cast<std::uint64_t>(i);
    out[i] = evaluate(t == Theorem::Transmission ? transmissionInstance(seed) : reactionInstance(seed));
  });
  return out;
}

}  // namespace nddc::theorems
