// Command-line driver: run, sweep, figure, validate-weights, check-theorems.
// Exit status 0 = success, 1 = an invariant was violated, 2 = usage or input error.

#include "nddc/io.hpp"
#include "nddc/theorem_suite.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace {

using namespace nddc;
namespace fs = std::filesystem;

constexpr int kViolation = 1;
constexpr int kInputError = 2;

struct RunFlags {
  std::optional<std::string> config;
  io::Overrides overrides;
};

void addRunFlags(CLI::App& app, RunFlags& f) {
  auto& o = f.overrides;
  app.add_option("--config", f.config, "JSON config file (flags override it)");
  app.add_option("--model", o.model,
                 "transmission | reaction | two-agent-transmission | two-agent-reaction");
  app.add_option("--tau", o.tau, "delay tau >= 0");
  app.add_option("--lambda", o.lambda, "anticipation lambda >= 0");
  app.add_option("--steps-per-delay", o.stepsPerDelay, "m = tau / dt (default 32)");
  app.add_option("--t-end", o.tEnd, "horizon, a multiple of dt (default max(50, 40 tau))");
  app.add_option("--n", o.agents, "number of agents (default 3)");
  app.add_option("--d", o.dim, "opinion dimension (default 1)");
  app.add_option("--seed", o.seed, "seed for random weights (default 0)");
  app.add_option("--weights", o.weights, "uniform | random-row | random-sym | <file>");
  app.add_option("--datum", o.datum, "constant:c | linear:a,b | <file> (default constant:1)");
  app.add_option("--derivative-mode", o.derivativeMode, "backward-difference | stored-rhs");
}

SimConfig resolveConfig(const RunFlags& f) {
  if (f.config) return io::parseConfigFile(*f.config, f.overrides);
  return io::parseConfig(io::json(nullptr), f.overrides);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Checks that only hold under a theorem's hypotheses; returns violations.
int checkRunInvariants(const SimConfig& c, const Trajectory& tr, const fs::path& out,
                       std::vector<std::string>& written) {
  int violations = 0;
  if (isTwoAgent(c.model)) {
    const bool sufficient = c.model == ModelKind::TwoAgentTransmission
                                ? models::transTwoAgentStable(c.lambda, c.tau)
                                : models::reactTwoAgentSufficient(c.lambda, c.tau);
    if (sufficient && tr.classification == Classification::Diverged) {
      std::cout << "violation: analytic condition holds but the run diverged\n";
      ++violations;
    }
    return violations;
  }
  const auto& w = c.weights;
  const auto ij = diagnostics::trackIJ(tr);
  io::writeIJCsv(tr, ij, out / "argmax_pairs.csv");
  written.push_back((out / "argmax_pairs.csv").string());
  if (c.model == ModelKind::TransmissionN && models::theoremTransmissionCondition(c.lambda, c.tau) &&
      w.flags.positiveOffDiagonal) {
    const auto l = diagnostics::lyapTransmission(tr, w, c.lambda, c.tau, ij.finalPair,
                                                 ij.T0.value_or(0.0));
    io::writeLyapunovCsv(l, out / "lyapunov.csv");
    written.push_back((out / "lyapunov.csv").string());
    const auto a = diagnostics::aprioriBounds(tr, c.lambda, c.tau);
    std::cout << "lyapunov: checked " << l.checkedSteps << " skipped " << l.skippedSteps
              << " violations " << l.violations << "\n"
              << "a-priori: state ratio " << fmt(a.worstStateRatio) << " derivative ratio "
              << fmt(a.worstDerivRatio) << "\n";
    if (l.violations > 0) ++violations;
    if (!a.holds) ++violations;
  }
  if (c.model == ModelKind::ReactionN && models::theoremReactCondition(c.lambda, c.tau) &&
      w.flags.symmetric && w.flags.biStochastic && c.tau > 0.0) {
    const auto l = diagnostics::lyapReaction(tr, w, c.lambda, c.tau);
    io::writeLyapunovCsv(l, out / "lyapunov.csv");
    written.push_back((out / "lyapunov.csv").string());
    std::cout << "lyapunov: checked " << l.checkedSteps << " violations " << l.violations << "\n";
    if (l.violations > 0) ++violations;
  }
  return violations;
}

int cmdRun(const RunFlags& f, const fs::path& out) {
  const auto c = resolveConfig(f);
  const auto start = std::chrono::steady_clock::now();
  const auto tr = integrator::run(c);
  std::vector<std::string> written{(out / "trajectory.csv").string()};
  io::writeTrajectoryCsv(tr, out / "trajectory.csv");
  const int violations = checkRunInvariants(c, tr, out, written);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::RunManifest m{c, io::kToolVersion, secs, written, tr.classification, tr.evidence};
  io::writeManifest(m, out / "manifest.json");
  std::cout << "model " << toString(c.model) << " tau " << fmt(c.tau) << " lambda "
            << fmt(c.lambda) << ": " << toString(tr.classification) << " (final d_x "
            << fmt(tr.evidence.finalDiameter) << ", amplitude ratio "
            << fmt(tr.evidence.amplitudeRatio) << ")\n"
            << "wrote " << out.string() << "\n";
  return violations > 0 ? kViolation : 0;
}

/// Cells satisfying the analytic sufficient condition must be Converged.
int containmentViolations(const sweep::StabilityGrid& g) {
  int bad = 0;
  for (std::size_t t = 0; t < g.taus.size(); ++t)
    for (std::size_t l = 0; l < g.lambdas.size(); ++l)
      if (g.model != ModelKind::TwoAgentTransmission &&
          sweep::analyticallyStable(g.model, g.lambdas[l], g.taus[t]) &&
          g.at(l, t).label != Classification::Converged) {
        std::cout << "violation: lambda " << fmt(g.lambdas[l]) << " tau " << fmt(g.taus[t])
                  << " satisfies the sufficient condition but is " << toString(g.at(l, t).label)
                  << "\n";
        ++bad;
      }
  return bad;
}

void printRaster(const sweep::StabilityGrid& g) {
  for (std::size_t t = g.taus.size(); t-- > 0;) {
    std::printf("%6.3f ", g.taus[t]);
    for (std::size_t l = 0; l < g.lambdas.size(); ++l)
      std::putchar("CDI"[static_cast<int>(g.at(l, t).label)]);
    std::putchar('\n');
  }
  std::printf("       lambda %s .. %s  (C Converged, D Diverged, I Inconclusive)\n",
              fmt(g.lambdas.front()).c_str(), fmt(g.lambdas.back()).c_str());
}

struct SweepFlags {
  std::string model = "two-agent-reaction";
  double lambdaMin = 0.0, lambdaMax = 3.0, tauMin = 0.0, tauMax = 1.0;
  int lambdaSteps = 31, tauSteps = 41;
  int stepsPerDelay = 32;
  unsigned threads = 0;
  int n = 3, d = 1;
  std::uint64_t seed = 0;
  std::string weights = "uniform";
};

void writeBoundary(const std::vector<std::pair<double, std::optional<double>>>& rows,
                   const fs::path& path) {
  std::string text = "lambda,tau_star\n";
  for (const auto& [l, t] : rows) text += io::formatNumber(l) + "," + (t ? io::formatNumber(*t) : "") + "\n";
  io::writeFile(path, text);
}

/// Bisects each bracketed column of the grid with the long horizon policy.
std::vector<std::pair<double, std::optional<double>>> bisectColumns(const sweep::StabilityGrid& g,
                                                                    const SimConfig& base,
                                                                    unsigned threads) {
  sweep::SweepOptions opt;
  opt.stepsPerDelay = 64;
  opt.horizon = {400.0, 200.0};
  std::vector<std::pair<double, std::optional<double>>> rows(g.lambdas.size());
  sweep::parallelFor(g.lambdas.size(), sweep::resolveThreads(threads), [&](std::size_t l) {
    rows[l].first = g.lambdas[l];
    const auto& b = g.boundary[l];
    if (!b.tau) return;
    double lo = g.taus[static_cast<std::size_t>(b.convergedBelow)];
    double hi = g.taus[static_cast<std::size_t>(b.divergedAbove)];
    // Widen the grid bracket until it is valid under the longer horizon.
    for (int k = 0; k < 8; ++k) {
      try {
        rows[l].second = sweep::boundaryBisect(g.model, g.lambdas[l], lo, hi, 12, base, opt);
        return;
      } catch (const std::invalid_argument&) {
        lo = std::max(0.0, lo - 0.05);
        hi += 0.05;
      }
    }
  });
  return rows;
}

int cmdSweep(const SweepFlags& f, bool bisect, const fs::path& out) {
  const auto model = io::parseModel(f.model);
  SimConfig base = isTwoAgent(model)
                       ? twoAgentConfig(model, 0.0, 0.5, f.stepsPerDelay, 1.0)
                       : agentConfig(model, io::weightsFromSpec(f.weights, f.n, f.seed), 0.0, 0.5,
                                     f.stepsPerDelay, 1.0,
                                     InitialDatum::constant(rampState(f.n, f.d, 1.0)));
  sweep::SweepOptions opt;
  opt.stepsPerDelay = f.stepsPerDelay;
  opt.threads = f.threads;
  const auto g = sweep::gridSweep(model, {f.lambdaMin, f.lambdaMax}, {f.tauMin, f.tauMax},
                                  {f.lambdaSteps, f.tauSteps}, base, opt);
  io::writeGridCsv(g, out / "grid.csv");
  io::writeGridJson(g, out / "grid.json");
  printRaster(g);
  if (bisect) writeBoundary(bisectColumns(g, base, f.threads), out / "boundary.csv");
  std::cout << "wrote " << out.string() << "\n";
  return containmentViolations(g) > 0 ? kViolation : 0;
}

int cmdFigure(const std::string& name, unsigned threads, bool bisect, const fs::path& out) {
  const auto p = io::figurePreset(name);
  if (p.sweep) {
    const auto& s = *p.sweep;
    sweep::SweepOptions opt;
    opt.stepsPerDelay = s.base.stepsPerDelay;
    opt.horizon = s.horizon;
    opt.threads = threads;
    const auto g = sweep::gridSweep(s.model, s.lambdaRange, s.tauRange, s.resolution, s.base, opt);
    io::writeGridCsv(g, out / (name + "_grid.csv"));
    io::writeGridJson(g, out / (name + "_grid.json"));
    printRaster(g);
    if (bisect) writeBoundary(bisectColumns(g, s.base, threads), out / (name + "_boundary.csv"));
    std::cout << "wrote " << out.string() << "\n";
    return containmentViolations(g) > 0 ? kViolation : 0;
  }
  io::json summary = io::json::array();
  for (const auto& c : p.runs) {
    const auto start = std::chrono::steady_clock::now();
    const auto tr = integrator::run(c);
    const auto file = out / (name + "_lambda_" + fmt(c.lambda) + ".csv");
    io::writeTrajectoryCsv(tr, file);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::RunManifest m{c, io::kToolVersion, secs, {file.string()}, tr.classification, tr.evidence};
    io::writeManifest(m, out / (name + "_lambda_" + fmt(c.lambda) + ".manifest.json"));
    summary.push_back({{"lambda", c.lambda},
                       {"tau", c.tau},
                       {"classification", std::string(toString(tr.classification))},
                       {"amplitude_ratio", io::jsonNumber(tr.evidence.amplitudeRatio)},
                       {"file", file.string()}});
    std::cout << name << " lambda " << fmt(c.lambda) << " tau " << fmt(c.tau) << ": "
              << toString(tr.classification) << " (amplitude ratio "
              << fmt(tr.evidence.amplitudeRatio) << ")\n";
  }
  io::writeFile(out / (name + "_summary.json"), summary.dump(2) + "\n");
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmdValidateWeights(const std::string& spec, int n, std::uint64_t seed,
                       const std::vector<std::string>& require) {
  const auto w = io::weightsFromSpec(spec, n, seed);
  const std::vector<std::pair<std::string, bool>> flags{
      {"row-stochastic", w.flags.rowStochastic},
      {"symmetric", w.flags.symmetric},
      {"bistochastic", w.flags.biStochastic},
      {"positive-off-diagonal", w.flags.positiveOffDiagonal},
      {"irreducible", w.flags.irreducible}};
  for (const auto& [name, value] : flags) std::cout << name << ": " << (value ? "yes" : "no") << "\n";
  if (w.flags.positiveOffDiagonal)
    std::cout << "min off-diagonal: " << fmt(weights::minOffDiagonal(w)) << "\ngamma: "
              << fmt(weights::gamma(w)) << "\n";
  int missing = 0;
  for (const auto& r : require) {
    const auto it = std::find_if(flags.begin(), flags.end(), [&](const auto& p) { return p.first == r; });
    if (it == flags.end()) throw std::invalid_argument("unknown property '" + r + "'");
    if (!it->second) {
      std::cout << "violation: required property '" << r << "' does not hold\n";
      ++missing;
    }
  }
  return missing > 0 ? kViolation : 0;
}

int cmdCheckTheorems(std::uint64_t seeds, unsigned threads, const std::optional<std::string>& csv) {
  std::string table = "theorem,seed,n,d,lambda,tau,decay_ratio,mean_drift,lyap_checked,lyap_skipped,"
                      "lyap_violations,apriori_state,apriori_deriv,pass\n";
  int failures = 0;
  std::printf("%-13s %4s %2s %2s %10s %8s %11s %10s %8s %6s %s\n", "theorem", "seed", "N", "d",
              "lambda", "tau", "d_x ratio", "mean drift", "L checks", "L viol", "result");
  for (auto th : {theorems::Theorem::Transmission, theorems::Theorem::Reaction}) {
    for (const auto& r : theorems::runSuite(th, seeds, threads)) {
      const bool ok = r.pass();
      failures += ok ? 0 : 1;
      std::printf("%-13s %4llu %2d %2d %10.5g %8.5g %11.3e %10.2e %8zu %6zu %s%s\n",
                  std::string(theorems::toString(th)).c_str(),
                  static_cast<unsigned long long>(r.seed), r.agents, r.dim, r.lambda, r.tau,
                  r.decayRatio, r.meanDrift, r.lyapChecked, r.lyapViolations, ok ? "pass" : "FAIL",
                  r.error.empty() ? "" : (" (" + r.error + ")").c_str());
      table += std::string(theorems::toString(th)) + "," + std::to_string(r.seed) + "," +
               std::to_string(r.agents) + "," + std::to_string(r.dim) + "," +
               io::formatNumber(r.lambda) + "," + io::formatNumber(r.tau) + "," +
               io::formatNumber(r.decayRatio) + "," + io::formatNumber(r.meanDrift) + "," +
               std::to_string(r.lyapChecked) + "," + std::to_string(r.lyapSkipped) + "," +
               std::to_string(r.lyapViolations) + "," + io::formatNumber(r.aprioriStateRatio) +
               "," + io::formatNumber(r.aprioriDerivRatio) + "," + (ok ? "1" : "0") + "\n";
    }
  }
  if (csv) io::writeFile(*csv, table);
  std::printf("%d failure(s) over %llu seeds per theorem\n", failures,
              static_cast<unsigned long long>(seeds));
  return failures > 0 ? kViolation : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus with anticipation and delay: simulation and diagnostics"};
  app.require_subcommand(1);

  RunFlags runFlags;
  std::string runOut = "out";
  auto* run = app.add_subcommand("run", "integrate one configuration and write its trajectory");
  addRunFlags(*run, runFlags);
  run->add_option("--out", runOut, "output directory");

  SweepFlags sweepFlags;
  std::string sweepOut = "out";
  bool sweepBisect = false;
  auto* sw = app.add_subcommand("sweep", "classify a (lambda, tau) grid");
  sw->add_option("--model", sweepFlags.model, "model kind");
  sw->add_option("--lambda-min", sweepFlags.lambdaMin);
  sw->add_option("--lambda-max", sweepFlags.lambdaMax);
  sw->add_option("--tau-min", sweepFlags.tauMin);
  sw->add_option("--tau-max", sweepFlags.tauMax);
  sw->add_option("--lambda-steps", sweepFlags.lambdaSteps, "samples on the lambda axis");
  sw->add_option("--tau-steps", sweepFlags.tauSteps, "samples on the tau axis");
  sw->add_option("--steps-per-delay", sweepFlags.stepsPerDelay);
  sw->add_option("--threads", sweepFlags.threads, "worker threads (default NDDC_THREADS or all cores)");
  sw->add_option("--n", sweepFlags.n, "agents for N-agent models");
  sw->add_option("--d", sweepFlags.d, "dimension for N-agent models");
  sw->add_option("--seed", sweepFlags.seed);
  sw->add_option("--weights", sweepFlags.weights, "uniform | random-row | random-sym | <file>");
  sw->add_flag("--bisect", sweepBisect, "refine the boundary of each column by bisection");
  sw->add_option("--out", sweepOut, "output directory");

  std::string figName;
  std::string figOut = "out";
  unsigned figThreads = 0;
  bool figBisect = false;
  auto* fig = app.add_subcommand("figure", "reproduce a figure preset (fig1..fig4)");
  fig->add_option("name", figName, "fig1 | fig2 | fig3 | fig4")->required();
  fig->add_option("--threads", figThreads);
  fig->add_flag("--bisect", figBisect, "fig3: refine the boundary of each column by bisection");
  fig->add_option("--out", figOut, "output directory");

  std::string wSpec = "uniform";
  int wN = 3;
  std::uint64_t wSeed = 0;
  std::vector<std::string> wRequire;
  auto* vw = app.add_subcommand("validate-weights", "report structural properties of a weight matrix");
  vw->add_option("--weights", wSpec, "uniform | random-row | random-sym | <file>");
  vw->add_option("--n", wN);
  vw->add_option("--seed", wSeed);
  vw->add_option("--require", wRequire,
                 "row-stochastic | symmetric | bistochastic | positive-off-diagonal | irreducible");

  std::uint64_t seeds = 50;
  unsigned suiteThreads = 0;
  std::optional<std::string> suiteCsv;
  auto* ct = app.add_subcommand("check-theorems", "randomized check of both consensus theorems");
  ct->add_option("--seeds", seeds, "instances per theorem (default 50)");
  ct->add_option("--threads", suiteThreads);
  ct->add_option("--out", suiteCsv, "CSV file for the result table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmdRun(runFlags, runOut);
    if (*sw) return cmdSweep(sweepFlags, sweepBisect, sweepOut);
    if (*fig) return cmdFigure(figName, figThreads, figBisect, figOut);
    if (*vw) return cmdValidateWeights(wSpec, wN, wSeed, wRequire);
    if (*ct) return cmdCheckTheorems(seeds, suiteThreads, suiteCsv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return 0;
}
