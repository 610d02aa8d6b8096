#include "nddc/config.hpp"
#include "nddc/diagnostics.hpp"
#include "nddc/integrator.hpp"

#include <catch_amalgamated.hpp>

using namespace nddc;
using Catch::Matchers::WithinAbs;

namespace {

StateMatrix column(std::initializer_list<double> v) {
  StateMatrix x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double a : v) x(i++, 0) = a;
  return x;
}

StateMatrix randomState(int n, int d, std::mt19937_64& rng) {
  StateMatrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = 2.0 * weights::unitUniform(rng) - 1.0;
  return x;
}

}  // namespace

TEST_CASE("psiSum examples", "[diagnostics]") {
  const auto w3 = weights::makeUniform(3);
  const auto psi = diagnostics::psiSum(column({0.0, 1.0, 2.0}), w3);
  CHECK(psi(0, 0) == 1.5);
  CHECK(psi(1, 0) == 1.0);
  CHECK(psi(2, 0) == 0.5);
  const auto w2 = weights::makeUniform(2);
  const auto p2 = diagnostics::psiSum(column({3.0, -2.0}), w2);
  CHECK(p2(0, 0) == -2.0);
  CHECK(p2(1, 0) == 3.0);
  const auto pc = diagnostics::psiSum(StateMatrix::Constant(3, 2, 0.7), weights::makeRandomRowStochastic(3, 0.3, 1));
  CHECK((pc.array() - 0.7).abs().maxCoeff() < 1e-15);
}

TEST_CASE("phi and dissimilarity examples", "[diagnostics]") {
  const auto w2 = weights::makeUniform(2);
  const auto p = diagnostics::phi(column({0.0, 1.0}), w2);
  CHECK(p(0, 0) == 1.0);
  CHECK(p(1, 0) == -1.0);
  CHECK(diagnostics::dissimilarity(column({0.0, 1.0}), w2) == 2.0);
  CHECK(diagnostics::phi(StateMatrix::Constant(3, 1, 2.0), weights::makeUniform(3)).isZero());
  CHECK(diagnostics::dissimilarity(StateMatrix::Constant(3, 1, 2.0), weights::makeUniform(3)) == 0.0);
}

TEST_CASE("functional identities", "[diagnostics][property]") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 3 + static_cast<int>(seed % 5);
    const auto w = weights::makeRandomRowStochastic(n, 0.4 / (n - 1), seed);
    const auto s = weights::makeRandomSymmetricBistochastic(n, seed);
    const StateMatrix x = randomState(n, 2, rng);
    const StateMatrix diff = diagnostics::phi(x, w) - (diagnostics::psiSum(x, w) - x);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(diagnostics::phi(x, s).colwise().sum().cwiseAbs().maxCoeff() < 1e-14);
    const StateMatrix y = (x * 1.7).rowwise() + Eigen::RowVector2d(5.0, -3.0);
    CHECK_THAT(diagnostics::dissimilarity(y, s), WithinAbs(1.7 * 1.7 * diagnostics::dissimilarity(x, s), 1e-12));
  }
}

TEST_CASE("geometric bound examples", "[diagnostics]") {
  const auto w3 = weights::makeUniform(3);
  const auto g = diagnostics::geomBoundCheck(column({0.0, 1.0, 2.0}), w3, {0, 2});
  CHECK_THAT(g.lhs, WithinAbs(1.0, 1e-15));
  CHECK_THAT(g.rhs, WithinAbs(1.0, 1e-15));
  CHECK(g.holds);
  const auto c = diagnostics::geomBoundCheck(StateMatrix::Constant(3, 1, 4.0), w3, {0, 1});
  CHECK(c.lhs == 0.0);
  CHECK(c.rhs == 0.0);
  CHECK(c.holds);
  Matrix cyc(3, 3);
  cyc << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  CHECK_THROWS_AS(diagnostics::geomBoundCheck(column({0.0, 1.0, 2.0}), weights::validate(cyc), {0, 1}),
                  std::invalid_argument);
}

TEST_CASE("geometric bound holds on random samples", "[diagnostics][property]") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int d = 1 + static_cast<int>(rng() % 3);
    const double floor = (0.05 + 0.95 * weights::unitUniform(rng)) / (n - 1);
    const auto w = weights::makeRandomRowStochastic(n, floor, rng());
    const StateMatrix x = randomState(n, d, rng);
    const int i = static_cast<int>(rng() % static_cast<unsigned>(n));
    int j = static_cast<int>(rng() % static_cast<unsigned>(n - 1));
    if (j >= i) ++j;
    CHECK(diagnostics::geomBoundCheck(x, w, {i, j}).holds);
  }
}

TEST_CASE("decay coefficients", "[diagnostics]") {
  CHECK(diagnostics::transmissionDecayCoefficient(0.5, 1.0) == 0.25);
  CHECK(diagnostics::transmissionDecayCoefficient(0.3, 0.0) == 0.7);
  CHECK(diagnostics::reactionDecayCoefficient(0.0, 0.25) == -0.25);
  CHECK_THAT(diagnostics::reactionDecayCoefficient(1.0, 0.2), WithinAbs(-0.1, 1e-15));
  const auto c = diagnostics::reactionWeights(0.5, 0.2);
  CHECK(c.epsilon == 1.0);
  CHECK_THAT(c.delta, WithinAbs(0.4, 1e-15));
  CHECK(diagnostics::reactionWeights(0.0, 0.3).phiHistory == 0.0);
}

TEST_CASE("classifier rules", "[diagnostics]") {
  std::vector<double> decay(100);
  for (std::size_t k = 0; k < decay.size(); ++k) decay[k] = std::exp(-0.2 * static_cast<double>(k));
  CHECK(diagnostics::classifyDiameters(decay, 1.0, false, false).label == Classification::Converged);
  std::vector<double> flat(100, 1.0);
  const auto r = diagnostics::classifyDiameters(flat, 1.0, false, false);
  CHECK(r.label == Classification::Inconclusive);
  CHECK(r.evidence.amplitudeRatio == 1.0);
  CHECK(r.evidence.windowSamples == 20);
  std::vector<double> grow(100);
  for (std::size_t k = 0; k < grow.size(); ++k) grow[k] = std::exp(0.1 * static_cast<double>(k));
  CHECK(diagnostics::classifyDiameters(grow, 1.0, false, false).label == Classification::Diverged);
  CHECK(diagnostics::classifyDiameters(flat, 1.0, true, false).label == Classification::Diverged);
  CHECK(diagnostics::classifyDiameters(flat, 1.0, false, true).label == Classification::Diverged);
  std::vector<double> zeros(50, 0.0);
  CHECK(diagnostics::classifyDiameters(zeros, 0.0, false, false).label == Classification::Converged);
  diagnostics::ClassificationResult loose =
      diagnostics::classifyDiameters(flat, 1.0, false, false, {2.0, 1e3, 0.2});
  CHECK(loose.label == Classification::Converged);
}

TEST_CASE("classify two-agent transmission figure cases", "[diagnostics]") {
  const auto d = integrator::run(twoAgentConfig(ModelKind::TwoAgentTransmission, 4.5, 0.25, 64, 100.0));
  CHECK(diagnostics::classify(d).label == Classification::Diverged);
  const auto n = integrator::run(twoAgentConfig(ModelKind::TwoAgentTransmission, 4.0, 0.25, 64, 100.0));
  CHECK(diagnostics::classify(n).label == Classification::Inconclusive);
  const auto c = integrator::run(twoAgentConfig(ModelKind::TwoAgentTransmission, 1.0, 0.25, 64, 100.0, 0.0));
  CHECK(diagnostics::classify(c).label == Classification::Converged);
}

TEST_CASE("transmission functional on a consensus history is zero", "[diagnostics]") {
  const auto w = weights::makeUniform(3);
  const auto tr = integrator::run(
      agentConfig(ModelKind::TransmissionN, w, 1.0, 0.2, 16, 4.0, InitialDatum::constant(StateMatrix::Constant(3, 1, 1.0))));
  const auto l = diagnostics::lyapTransmission(tr, w, 1.0, 0.2, {0, 1});
  for (double v : l.values) CHECK(v == 0.0);
  CHECK(l.violations == 0);
}

TEST_CASE("transmission functional decays after T0", "[diagnostics]") {
  std::mt19937_64 rng(5);
  const auto w = weights::makeUniform(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tr = integrator::run(agentConfig(ModelKind::TransmissionN, w, 1.0, 0.2, 32, 20.0,
                                                InitialDatum::constant(randomState(3, 2, rng))));
    const auto ij = diagnostics::trackIJ(tr);
    REQUIRE(ij.T0.has_value());
    const auto l = diagnostics::lyapTransmission(tr, w, 1.0, 0.2, ij.finalPair, *ij.T0);
    CHECK(l.checkedSteps > 0);
    CHECK(l.violations == 0);
    CHECK(l.values.size() == l.times.size());
    CHECK(l.decrements.size() + 1 == l.values.size());
  }
  const auto tr = integrator::run(agentConfig(ModelKind::TransmissionN, w, 6.0, 0.2, 8, 2.0,
                                              InitialDatum::constant(randomState(3, 1, rng))));
  CHECK_THROWS_AS(diagnostics::lyapTransmission(tr, w, 6.0, 0.2, {0, 1}), std::invalid_argument);
}

TEST_CASE("reaction functional decays for t >= 2 tau", "[diagnostics]") {
  const auto w2 = weights::makeUniform(2);
  const auto tr = integrator::run(agentConfig(ModelKind::ReactionN, w2, 0.1, 0.2, 32, 20.0,
                                              InitialDatum::constant(rampState(2, 1, 1.0))));
  const auto l = diagnostics::lyapReaction(tr, w2, 0.1, 0.2);
  CHECK(l.violations == 0);
  CHECK(l.times.front() == Catch::Approx(0.4));
  for (std::size_t k = 1; k < l.values.size(); ++k) CHECK(l.values[k] <= l.values[k - 1] + l.tolerance);

  const auto cons = integrator::run(agentConfig(ModelKind::ReactionN, w2, 0.1, 0.2, 8, 2.0,
                                                InitialDatum::constant(StateMatrix::Constant(2, 1, 3.0))));
  for (double v : diagnostics::lyapReaction(cons, w2, 0.1, 0.2).values) CHECK(v == 0.0);

  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = weights::makeRandomSymmetricBistochastic(5, seed);
    const auto r = integrator::run(agentConfig(ModelKind::ReactionN, w, 0.0, 0.4, 32, 20.0,
                                               InitialDatum::linear(randomState(5, 2, rng), randomState(5, 2, rng))));
    CHECK(diagnostics::lyapReaction(r, w, 0.0, 0.4).violations == 0);
  }
  CHECK_THROWS_AS(diagnostics::lyapReaction(tr, w2, 1.0, 0.3), std::invalid_argument);
  const auto row = weights::makeRandomRowStochastic(3, 0.2, 1);
  const auto t3 = integrator::run(agentConfig(ModelKind::ReactionN, row, 0.1, 0.2, 8, 2.0,
                                              InitialDatum::constant(rampState(3, 1, 1.0))));
  CHECK_THROWS_AS(diagnostics::lyapReaction(t3, row, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("a-priori bounds", "[diagnostics]") {
  const auto w = weights::makeUniform(3);
  const auto tr = integrator::run(agentConfig(ModelKind::TransmissionN, w, 1.0, 0.5, 32, 20.0,
                                              InitialDatum::constant(rampState(3, 1, 1.0))));
  const auto a = diagnostics::aprioriBounds(tr, 1.0, 0.5);
  CHECK(a.M == 1.0);
  CHECK(a.holds);
  CHECK(a.worstStateRatio <= 1.0 / 1.5 + 1e-12);
  const auto z = integrator::run(agentConfig(ModelKind::TransmissionN, w, 1.0, 0.5, 8, 5.0,
                                             InitialDatum::constant(StateMatrix::Zero(3, 1))));
  const auto b = diagnostics::aprioriBounds(z, 1.0, 0.5);
  CHECK(b.M == 0.0);
  CHECK(b.worstStateRatio == 0.0);
  CHECK(b.worstDerivRatio == 0.0);
  CHECK(b.holds);

  std::mt19937_64 rng(17);
  for (int k = 0; k < 20; ++k) {
    const int n = 3 + k % 4;
    const double tau = 0.1 + 0.9 * weights::unitUniform(rng);
    const double lambda = weights::unitUniform(rng) / tau;
    const auto wr = weights::makeRandomRowStochastic(n, 0.5 / (n - 1), rng());
    StateMatrix x0 = randomState(n, 2, rng);
    x0 /= x0.rowwise().norm().maxCoeff();
    const auto r = integrator::run(agentConfig(ModelKind::TransmissionN, wr, lambda, tau, 16, 10.0 * tau,
                                               InitialDatum::constant(x0)));
    CHECK(diagnostics::aprioriBounds(r, lambda, tau).holds);
  }
}

TEST_CASE("argmax pair tracking", "[diagnostics]") {
  const auto two = integrator::run(agentConfig(ModelKind::TransmissionN, weights::makeUniform(2), 1.0, 0.5, 8, 10.0,
                                               InitialDatum::constant(rampState(2, 1, 1.0))));
  auto ij = diagnostics::trackIJ(two);
  CHECK(ij.T0 == 0.0);
  CHECK(ij.finalPair == AgentPair{0, 1});
  CHECK(ij.changeFraction == 0.0);

  const auto cons = integrator::run(agentConfig(ModelKind::TransmissionN, weights::makeUniform(4), 1.0, 0.5, 8, 10.0,
                                                InitialDatum::constant(StateMatrix::Constant(4, 1, 1.0))));
  ij = diagnostics::trackIJ(cons);
  CHECK(ij.T0 == 0.0);
  CHECK(ij.finalPair == AgentPair{0, 1});

  std::mt19937_64 rng(3);
  const auto w5 = weights::makeRandomRowStochastic(5, 0.1, 12);
  const auto r = integrator::run(agentConfig(ModelKind::TransmissionN, w5, 1.0, 0.5, 16, 40.0,
                                             InitialDatum::constant(randomState(5, 2, rng))));
  ij = diagnostics::trackIJ(r);
  REQUIRE(ij.T0.has_value());
  for (std::size_t k = 0; k < ij.pairs.size(); ++k)
    if (r.times[r.origin() + k] >= *ij.T0) CHECK(ij.pairs[k] == ij.finalPair);
}

TEST_CASE("gap helpers", "[diagnostics]") {
  const auto tr = integrator::run(twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.5, 32, 50.0));
  CHECK(diagnostics::signChanges(tr, 1.0) >= 5);
  CHECK(diagnostics::peakAbsGap(tr, -1.0) == 1.0);
  const auto mono = integrator::run(twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.15, 32, 21.0));
  CHECK(diagnostics::signChanges(mono, 0.3) <= 1);
}
