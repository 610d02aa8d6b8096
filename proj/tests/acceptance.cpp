// Acceptance binary: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "nddc/nddc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

namespace {

using namespace nddc;

/// Long policy used for boundary work near neutral stability.
sweep::SweepOptions longPolicy() {
  sweep::SweepOptions o;
  o.stepsPerDelay = 64;
  o.horizon = {400.0, 200.0};
  return o;
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* label(Classification c) { return toString(c).data(); }

double absGapAt(const Trajectory& tr, double t) {
  return std::abs(tr.gap(integrator::sampleAt(tr, t)));
}

void transmissionBoundary(Outcome& o) {
  const auto base = twoAgentConfig(ModelKind::TwoAgentTransmission, 0.0, 0.5, 64, 1.0);
  for (double lambda : {0.5, 1.0, 2.0, 4.0}) {
    const double tau = sweep::boundaryBisect(ModelKind::TwoAgentTransmission, lambda, 0.5 / lambda,
                                             2.0 / lambda, 20, base, longPolicy());
    const double err = std::abs(lambda * tau - 1.0);
    o.detail << "lambda " << g(lambda) << " tau* " << g(tau) << " |lambda tau*-1| " << g(err) << "; ";
    o.require(err <= 0.05, "lambda " + g(lambda));
  }
}

void figureOne(Outcome& o) {
  const auto p = io::figurePreset("fig1");
  std::vector<Trajectory> runs;
  for (const auto& c : p.runs) runs.push_back(integrator::run(c));
  for (std::size_t k = 0; k < runs.size(); ++k)
    o.detail << "lambda " << g(p.runs[k].lambda) << " " << label(runs[k].classification) << "; ";
  for (std::size_t k : {0u, 1u}) {
    o.require(runs[k].classification == Classification::Converged, "converged " + g(p.runs[k].lambda));
    o.require(diagnostics::signChanges(runs[k]) == 0, "no sign change " + g(p.runs[k].lambda));
  }
  const double x0 = absGapAt(runs[0], 5.0), x1 = absGapAt(runs[1], 5.0);
  o.detail << "|x(5)| " << g(x0) << " vs " << g(x1) << "; ";
  o.require(x1 > x0 && std::log(x1) > std::log(x0), "lambda 1 slower");
  const double ratio = runs[2].evidence.amplitudeRatio;
  o.detail << "lambda 4 amplitude ratio " << g(ratio);
  o.require(runs[2].classification == Classification::Inconclusive, "lambda 4 inconclusive");
  o.require(ratio >= 0.85 && ratio <= 1.1, "lambda 4 amplitude ratio");
  o.require(runs[3].classification == Classification::Diverged, "lambda 4.5 diverged");
}

void figureTwo(Outcome& o) {
  const auto p = io::figurePreset("fig2");
  std::vector<Trajectory> runs;
  for (const auto& c : p.runs) runs.push_back(integrator::run(c));
  for (std::size_t k = 0; k < runs.size(); ++k)
    o.detail << "lambda " << g(p.runs[k].lambda) << " " << label(runs[k].classification) << "; ";
  const auto findRun = [&](double lambda) -> const Trajectory& {
    for (std::size_t k = 0; k < runs.size(); ++k)
      if (p.runs[k].lambda == lambda) return runs[k];
    throw std::logic_error("fig2 preset lacks lambda " + g(lambda));
  };
  const auto& r0 = findRun(0.0);
  const auto& r02 = findRun(0.2);
  const auto& r1 = findRun(1.0);
  const auto changes = diagnostics::signChanges(r0);
  const double tau = p.runs.front().tau;
  const double peak0 = diagnostics::peakAbsGap(r0, 2.0 * tau);
  const double peak02 = diagnostics::peakAbsGap(r02, 2.0 * tau);
  o.detail << "lambda 0 sign changes " << changes << ", post-transient peaks " << g(peak0) << " vs "
           << g(peak02);
  o.require(r0.classification == Classification::Converged && changes >= 2, "lambda 0 oscillatory");
  o.require(r02.classification == Classification::Converged, "lambda 0.2 converged");
  o.require(peak02 < peak0, "lambda 0.2 damps");
  o.require(r1.classification == Classification::Diverged, "lambda 1 diverged");
}

void stabilizationWindow(Outcome& o) {
  const auto window = io::figurePreset("fig4");
  const std::vector<std::pair<double, Classification>> expected{{0.0, Classification::Diverged},
                                                                {0.25, Classification::Converged},
                                                                {0.45, Classification::Diverged}};
  for (const auto& c : window.runs) {
    const auto label = integrator::run(c).classification;
    o.detail << "tau 0.85 lambda " << g(c.lambda) << " " << toString(label) << "; ";
    for (const auto& [lambda, want] : expected)
      if (c.lambda == lambda) o.require(label == want, "window lambda " + g(lambda));
  }
  const auto base = twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.5, 64, 1.0);
  const auto opt = longPolicy();
  const double atZero = sweep::boundaryBisect(ModelKind::TwoAgentReaction, 0.0, 0.5, 1.2, 20, base, opt);
  o.detail << "boundary at lambda 0 " << g(atZero) << " (pi/4 " << g(std::numbers::pi / 4) << "); ";
  o.require(std::abs(atZero - std::numbers::pi / 4.0) <= 0.02, "boundary at lambda 0");

  // Apex: largest stable tau over a lambda grid, each column bisected.
  const auto lambdas = sweep::linspace({0.0, 0.6}, 25);
  std::vector<double> taus(lambdas.size(), 0.0);
  sweep::parallelFor(lambdas.size(), sweep::resolveThreads(0), [&](std::size_t i) {
    taus[i] = sweep::boundaryBisect(ModelKind::TwoAgentReaction, lambdas[i], 0.5, 1.5, 14, base, opt);
  });
  const auto it = std::max_element(taus.begin(), taus.end());
  const double apex = *it;
  o.detail << "apex tau " << g(apex) << " at lambda " << g(lambdas[static_cast<std::size_t>(it - taus.begin())]);
  o.require(apex >= 0.85 && apex <= 0.95, "apex band");
}

void noAnticipationRegimes(Outcome& o) {
  auto runAt = [](double tau, int m, double tEnd) {
    return integrator::run(
        twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, tau, m, meshHorizon(tau, m, tEnd)));
  };
  const auto slow = runAt(0.15, 64, 400.0);
  const auto osc = runAt(0.5, 64, 400.0);
  const auto div = runAt(0.8, 128, 1000.0);
  const auto c1 = diagnostics::signChanges(slow, 0.3);
  const auto c2 = diagnostics::signChanges(osc, 1.0);
  o.detail << "tau 0.15 " << label(slow.classification) << " with " << c1 << " sign changes; tau 0.5 "
           << label(osc.classification) << " with " << c2 << "; tau 0.8 " << label(div.classification);
  o.require(slow.classification == Classification::Converged && c1 <= 1, "tau 0.15");
  o.require(osc.classification == Classification::Converged && c2 >= 5, "tau 0.5");
  o.require(div.classification == Classification::Diverged, "tau 0.8");
}

struct SuiteRuns {
  std::vector<theorems::Result> transmission;
  std::vector<theorems::Result> reaction;
};

void theoremSuite(Outcome& o, const SuiteRuns& s) {
  auto summarize = [&](const char* name, const std::vector<theorems::Result>& rs) {
    std::size_t fails = 0;
    double worstDecay = 0.0, worstDrift = 0.0;
    for (const auto& r : rs) {
      const bool ok = r.error.empty() && r.conditionHolds && r.decayOk && r.meanOk;
      if (!ok) ++fails;
      worstDecay = std::max(worstDecay, r.decayRatio);
      worstDrift = std::max(worstDrift, r.meanDrift);
    }
    o.detail << name << " " << rs.size() - fails << "/" << rs.size() << " (worst decay " << g(worstDecay);
    if (std::string(name) == "reaction") o.detail << ", worst mean drift " << g(worstDrift);
    o.detail << "); ";
    o.require(fails == 0 && rs.size() == 50, name);
  };
  summarize("transmission", s.transmission);
  summarize("reaction", s.reaction);
}

void lyapunovMonotonicity(Outcome& o, const SuiteRuns& s) {
  auto summarize = [&](const char* name, const std::vector<theorems::Result>& rs) {
    std::size_t violations = 0, checked = 0, empty = 0;
    for (const auto& r : rs) {
      violations += r.lyapViolations;
      checked += r.lyapChecked;
      if (r.lyapChecked == 0 || !r.error.empty()) ++empty;
    }
    o.detail << name << " " << violations << " violations over " << checked << " checked steps; ";
    o.require(violations == 0 && empty == 0, name);
  };
  summarize("transmission", s.transmission);
  summarize("reaction", s.reaction);
  const double tc = diagnostics::transmissionDecayCoefficient(0.5, 1.0);
  const double rc = diagnostics::reactionDecayCoefficient(0.5, 0.5);
  o.detail << "coefficients " << g(tc) << ", " << g(rc);
  o.require(tc == 0.25, "transmission coefficient");
  o.require(rc == 0.25, "reaction coefficient");
}

void aprioriBounds(Outcome& o, const SuiteRuns& s) {
  std::size_t fails = 0;
  double worstX = 0.0, worstD = 0.0;
  for (const auto& r : s.transmission) {
    if (!r.aprioriOk || !r.error.empty()) ++fails;
    worstX = std::max(worstX, r.aprioriStateRatio);
    worstD = std::max(worstD, r.aprioriDerivRatio);
  }
  // Same instances started from a ramp of unit height, so M = 1.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto c = theorems::transmissionInstance(seed).config;
    c.datum = InitialDatum::constant(rampState(c.agents, c.dim, 1.0));
    const auto a = diagnostics::aprioriBounds(integrator::run(c), c.lambda, c.tau);
    if (!a.holds) ++fails;
    worstX = std::max(worstX, a.worstStateRatio);
    worstD = std::max(worstD, a.worstDerivRatio);
  }
  o.detail << "100 runs, " << fails << " failures; worst ratios state " << g(worstX) << ", derivative "
           << g(worstD);
  o.require(fails == 0, "a-priori bounds");
}

void numerics(Outcome& o) {
  const std::vector<std::pair<std::string, SimConfig>> configs{
      {"two-agent transmission", twoAgentConfig(ModelKind::TwoAgentTransmission, 1.0, 0.25, 32, 5.0)},
      {"two-agent reaction", twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.15, 30, 3.0)},
      {"3-agent transmission",
       agentConfig(ModelKind::TransmissionN, weights::makeUniform(3), 0.5, 0.5, 16, 5.0,
                   InitialDatum::constant(rampState(3, 2, 1.0)))}};
  for (const auto& [name, c] : configs) {
    const auto ratios = integrator::refinementRatios(integrator::refineOracle(c, 4));
    o.detail << name << " ratios";
    for (double r : ratios) {
      o.detail << " " << g(r);
      o.require(r >= 1.7 && r <= 2.3, name);
    }
    o.detail << "; ";
  }

  std::mt19937_64 rng(7);
  std::size_t geomFails = 0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int d = 1 + static_cast<int>(rng() % 3);
    const auto w = weights::makeRandomRowStochastic(n, (0.05 + 0.95 * weights::unitUniform(rng)) / (n - 1), rng());
    StateMatrix x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = 4.0 * weights::unitUniform(rng) - 2.0;
    const int i = static_cast<int>(rng() % static_cast<unsigned>(n));
    int j = static_cast<int>(rng() % static_cast<unsigned>(n - 1));
    if (j >= i) ++j;
    if (!diagnostics::geomBoundCheck(x, w, {i, j}).holds) ++geomFails;
  }
  o.detail << "geometric bound " << 1000 - geomFails << "/1000; ";
  o.require(geomFails == 0, "geometric bound");

  const auto base = twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.5, 16, 1.0);
  sweep::SweepOptions serial, parallel;
  serial.stepsPerDelay = parallel.stepsPerDelay = 16;
  serial.threads = 1;
  parallel.threads = 4;
  const auto a = sweep::gridSweep(ModelKind::TwoAgentReaction, {0.0, 1.0}, {0.0, 1.0}, {9, 9}, base, serial);
  const auto b = sweep::gridSweep(ModelKind::TwoAgentReaction, {0.0, 1.0}, {0.0, 1.0}, {9, 9}, base, parallel);
  const bool same = io::gridCsv(a) == io::gridCsv(b) && io::gridToJson(a).dump() == io::gridToJson(b).dump();
  o.detail << "parallel sweep " << (same ? "identical" : "differs") << " to serial";
  o.require(same, "parallel sweep");
}

}  // namespace

int main() {
  std::optional<SuiteRuns> suites;
  auto suite = [&]() -> const SuiteRuns& {
    if (!suites)
      suites = SuiteRuns{theorems::runSuite(theorems::Theorem::Transmission, 50),
                         theorems::runSuite(theorems::Theorem::Reaction, 50)};
    return *suites;
  };
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"transmission two-agent boundary lambda*tau = 1", transmissionBoundary},
      {"figure 1 runs (tau = 0.25)", figureOne},
      {"figure 2 runs (tau = 1.25)", figureTwo},
      {"reaction stabilization window", stabilizationWindow},
      {"reaction regimes without anticipation", noAnticipationRegimes},
      {"theorem property suite", [&](Outcome& o) { theoremSuite(o, suite()); }},
      {"Lyapunov monotonicity", [&](Outcome& o) { lyapunovMonotonicity(o, suite()); }},
      {"a-priori bounds", [&](Outcome& o) { aprioriBounds(o, suite()); }},
      {"numerics", numerics}};

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %zu %s: %s (%.1fs) %s\n", k + 1, o.pass ? "PASS" : "FAIL",
                criteria[k].first.c_str(), secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures > 0 ? 1 : 0;
}
