#pragma once

// (lambda, tau) stability raster, per-lambda boundary extraction by
// bisection, and the analytic condition curves drawn over it.

#include "nddc/config.hpp"
#include "nddc/integrator.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace nddc::sweep {

/// Horizon per run: max(minimum, delayMultiple * tau), rounded onto the mesh.
struct HorizonPolicy {
  double minimum = 50.0;
  double delayMultiple = 40.0;

  [[nodiscard]] double horizon(double tau, int stepsPerDelay) const {
    return meshHorizon(tau, stepsPerDelay, std::max(minimum, delayMultiple * tau));
  }
};

struct SweepOptions {
  int stepsPerDelay = 32;
  HorizonPolicy horizon;
  unsigned threads = 0;  // 0: NDDC_THREADS, else hardware concurrency
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct Resolution {
  int lambdaSamples = 2;
  int tauSamples = 2;
};

struct CellEvidence {
  Classification label = Classification::Inconclusive;
  double finalDiameter = 0.0;
  double trailingPeak = 0.0;
  double amplitudeRatio = 0.0;
  double tEnd = 0.0;
  int stepsPerDelay = 0;
  bool aborted = false;
};

struct OverlayCurve {
  std::string label;
  std::vector<double> lambdas;
  std::vector<double> taus;  // +inf where the curve leaves the plane
};

struct BoundaryEntry {
  std::optional<double> tau;  // midpoint of the bracketing cells
  int convergedBelow = -1;    // tau index of the last Converged cell under it
  int divergedAbove = -1;     // tau index of the first Diverged cell
};

struct StabilityGrid {
  ModelKind model = ModelKind::TwoAgentReaction;
  std::vector<double> lambdas;
  std::vector<double> taus;
  std::vector<CellEvidence> cells;  // index = tauIndex * lambdas.size() + lambdaIndex
  std::vector<BoundaryEntry> boundary;  // one per lambda
  std::vector<OverlayCurve> overlays;

  [[nodiscard]] const CellEvidence& at(std::size_t lambdaIndex, std::size_t tauIndex) const {
    return cells.at(tauIndex * lambdas.size() + lambdaIndex);
  }
};

/// Worker count: explicit option, else NDDC_THREADS, else hardware concurrency.
[[nodiscard]] inline unsigned resolveThreads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NDDC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on up to `threads` workers. Each job writes
/// only its own slot, so the result does not depend on scheduling.
inline void parallelFor(std::size_t count, unsigned threads,
                        const std::function<void(std::size_t)>& job) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureLock;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failureLock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

[[nodiscard]] inline std::vector<double> linspace(Range r, int samples) {
  if (samples < 2) throw std::invalid_argument("sweep: need at least 2 samples per axis");
  std::vector<double> v(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i)
    v[static_cast<std::size_t>(i)] =
        i == samples - 1 ? r.hi : r.lo + (r.hi - r.lo) * i / (samples - 1);
  return v;
}

/// Copy of `base` with the given model, lambda, tau and horizon. States are not
/// recorded; only the diameter series is needed to classify.
[[nodiscard]] inline SimConfig cellConfig(ModelKind model, double lambda, double tau,
                                          const SimConfig& base, int stepsPerDelay,
                                          const HorizonPolicy& policy) {
  SimConfig c = base;
  c.model = model;
  c.lambda = lambda;
  c.tau = tau;
  c.stepsPerDelay = stepsPerDelay;
  c.tEnd = policy.horizon(tau, stepsPerDelay);
  c.recordStates = false;
  return c;
}

[[nodiscard]] inline CellEvidence runCell(const SimConfig& c) {
  const auto tr = integrator::run(c);
  CellEvidence e;
  e.label = tr.classification;
  e.finalDiameter = tr.evidence.finalDiameter;
  e.trailingPeak = tr.evidence.trailingPeak;
  e.amplitudeRatio = tr.evidence.amplitudeRatio;
  e.tEnd = c.tEnd;
  e.stepsPerDelay = c.stepsPerDelay;
  e.aborted = tr.aborted;
  return e;
}

/// Per-lambda bracket: first Diverged cell in ascending tau and the last
/// Converged cell below it.
[[nodiscard]] inline std::vector<BoundaryEntry> extractBoundary(const StabilityGrid& g) {
  std::vector<BoundaryEntry> out(g.lambdas.size());
  for (std::size_t l = 0; l < g.lambdas.size(); ++l) {
    auto& b = out[l];
    for (std::size_t t = 0; t < g.taus.size(); ++t) {
      const auto label = g.at(l, t).label;
      if (label == Classification::Diverged) {
        b.divergedAbove = static_cast<int>(t);
        break;
      }
      if (label == Classification::Converged) b.convergedBelow = static_cast<int>(t);
    }
    if (b.divergedAbove < 0 || b.convergedBelow < 0) {
      b = BoundaryEntry{};
      continue;
    }
    b.tau = 0.5 * (g.taus[static_cast<std::size_t>(b.convergedBelow)] +
                   g.taus[static_cast<std::size_t>(b.divergedAbove)]);
  }
  return out;
}

/// Labeled analytic curves tau(lambda) for the model.
[[nodiscard]] inline std::vector<OverlayCurve> analyticOverlays(ModelKind model, Range lambdaRange,
                                                                int samples = 61) {
  const auto lambdas = linspace(lambdaRange, samples);
  auto curve = [&](std::string label, auto f) {
    OverlayCurve c{std::move(label), lambdas, {}};
    for (double l : lambdas) c.taus.push_back(f(l));
    return c;
  };
  auto inverse = [](double l) {
    return l > 0.0 ? 1.0 / l : std::numeric_limits<double>::infinity();
  };
  auto halfOverOnePlus = [](double l) { return 1.0 / (2.0 * (1.0 + l)); };
  std::vector<OverlayCurve> out;
  switch (model) {
    case ModelKind::TwoAgentReaction:
      out.push_back(curve("sufficient 2(1+lambda)tau<1", halfOverOnePlus));
      out.push_back(curve("critical tau=pi/4", [](double) { return std::numbers::pi / 4.0; }));
      break;
    case ModelKind::TwoAgentTransmission:
      out.push_back(curve("stable iff lambda*tau<1", inverse));
      break;
    case ModelKind::TransmissionN:
      out.push_back(curve("theorem lambda*tau<=1", inverse));
      break;
    case ModelKind::ReactionN:
      out.push_back(curve("theorem (1+lambda)tau<1/2", halfOverOnePlus));
      break;
  }
  return out;
}

/// Analytic sufficient condition for convergence of the model.
[[nodiscard]] inline bool analyticallyStable(ModelKind model, double lambda, double tau) {
  switch (model) {
    case ModelKind::TwoAgentTransmission: return models::transTwoAgentStable(lambda, tau);
    case ModelKind::TwoAgentReaction: return models::reactTwoAgentSufficient(lambda, tau);
    case ModelKind::TransmissionN: return models::theoremTransmissionCondition(lambda, tau);
    case ModelKind::ReactionN: return models::theoremReactCondition(lambda, tau);
  }
  return false;
}

/// One run per (lambda, tau) cell. Cells are independent jobs merged by index,
/// so the grid is identical for any thread count.
[[nodiscard]] inline StabilityGrid gridSweep(ModelKind model, Range lambdaRange, Range tauRange,
                                             Resolution res, const SimConfig& base,
                                             const SweepOptions& opt = {}) {
  if (lambdaRange.lo < 0.0 || tauRange.lo < 0.0 || lambdaRange.hi < lambdaRange.lo ||
      tauRange.hi < tauRange.lo)
    throw std::invalid_argument("gridSweep: ranges must be nonnegative and ordered");
  StabilityGrid g;
  g.model = model;
  g.lambdas = linspace(lambdaRange, res.lambdaSamples);
  g.taus = linspace(tauRange, res.tauSamples);
  g.cells.resize(g.lambdas.size() * g.taus.size());
  parallelFor(g.cells.size(), resolveThreads(opt.threads), [&](std::size_t i) {
    const double lambda = g.lambdas[i % g.lambdas.size()];
    const double tau = g.taus[i / g.lambdas.size()];
    g.cells[i] = runCell(cellConfig(model, lambda, tau, base, opt.stepsPerDelay, opt.horizon));
  });
  g.boundary = extractBoundary(g);
  g.overlays = analyticOverlays(model, lambdaRange);
  return g;
}

/// Classification used by bisection: an Inconclusive run is repeated once with
/// m and tEnd doubled; if still Inconclusive it counts as Diverged.
[[nodiscard]] inline Classification resolvedClassification(ModelKind model, double lambda,
                                                           double tau, const SimConfig& base,
                                                           const SweepOptions& opt) {
  auto c = cellConfig(model, lambda, tau, base, opt.stepsPerDelay, opt.horizon);
  auto label = integrator::run(c).classification;
  if (label != Classification::Inconclusive) return label;
  c.stepsPerDelay *= 2;
  c.tEnd = meshHorizon(tau, c.stepsPerDelay, 2.0 * c.tEnd);
  label = integrator::run(c).classification;
  return label == Classification::Inconclusive ? Classification::Diverged : label;
}

/// Bisection on tau between a Converged tauLow and a Diverged tauHigh; returns
/// the midpoint of the final bracket.
[[nodiscard]] inline double boundaryBisect(ModelKind model, double lambda, double tauLow,
                                           double tauHigh, int iterations, const SimConfig& base,
                                           const SweepOptions& opt = {}) {
  if (!(tauLow < tauHigh) || tauLow < 0.0 || iterations < 0)
    throw std::invalid_argument("boundaryBisect: need 0 <= tauLow < tauHigh");
  if (resolvedClassification(model, lambda, tauLow, base, opt) != Classification::Converged)
    throw std::invalid_argument("boundaryBisect: tauLow = " + std::to_string(tauLow) +
                                " is not Converged");
  if (resolvedClassification(model, lambda, tauHigh, base, opt) != Classification::Diverged)
    throw std::invalid_argument("boundaryBisect: tauHigh = " + std::to_string(tauHigh) +
                                " is not Diverged");
  for (int k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (tauLow + tauHigh);
    if (resolvedClassification(model, lambda, mid, base, opt) == Classification::Converged)
      tauLow = mid;
    else
      tauHigh = mid;
  }
  return 0.5 * (tauLow + tauHigh);
}

}  // namespace nddc::sweep
