#pragma once

// Functionals evaluated along recorded trajectories, the empirical convergence
// classifier, and numerical monitors for the decay inequalities.

#include "nddc/core.hpp"
#include "nddc/models.hpp"
#include "nddc/weights.hpp"

#include <optional>
#include <span>

namespace nddc::diagnostics {

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ClassificationResult {
  Classification label = Classification::Inconclusive;
  ClassificationEvidence evidence;
};

/// Classifies a run from its diameter series on t >= 0.
///   Diverged     aborted by the overflow guard / non-finite state, or the
///                trailing-window peak exceeds tolHigh * max(1, reference);
///   Converged    trailing-window peak below tolLow * max(reference, eps);
///   Inconclusive otherwise.
[[nodiscard]] inline ClassificationResult classifyDiameters(std::span<const double> dx,
                                                            double reference, bool overflow,
                                                            bool nonFinite,
                                                            const ClassifierOptions& opt = {}) {
  ClassificationResult r;
  auto& ev = r.evidence;
  ev.reference = reference;
  ev.overflow = overflow;
  ev.nonFinite = nonFinite;
  if (dx.empty()) {
    r.label = (overflow || nonFinite) ? Classification::Diverged : Classification::Inconclusive;
    return r;
  }
  const auto n = dx.size();
  const auto window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(opt.trailingFraction * static_cast<double>(n))));
  ev.windowSamples = window;
  ev.finalDiameter = dx.back();
  ev.trailingPeak = *std::max_element(dx.end() - static_cast<std::ptrdiff_t>(window), dx.end());
  const std::size_t prevEnd = n - window;
  const std::size_t prevBegin = prevEnd >= window ? prevEnd - window : 0;
  ev.previousPeak = prevEnd > prevBegin
                        ? *std::max_element(dx.begin() + static_cast<std::ptrdiff_t>(prevBegin),
                                            dx.begin() + static_cast<std::ptrdiff_t>(prevEnd))
                        : ev.trailingPeak;
  if (ev.previousPeak > 0.0)
    ev.amplitudeRatio = ev.trailingPeak / ev.previousPeak;
  else
    ev.amplitudeRatio = ev.trailingPeak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;

  const double eps = std::numeric_limits<double>::epsilon();
  if (overflow || nonFinite || !std::isfinite(ev.trailingPeak) ||
      ev.trailingPeak > opt.tolHigh * std::max(1.0, reference))
    r.label = Classification::Diverged;
  else if (ev.trailingPeak < opt.tolLow * std::max(reference, eps))
    r.label = Classification::Converged;
  else
    r.label = Classification::Inconclusive;
  return r;
}

[[nodiscard]] inline std::vector<double> diameterValues(const Trajectory& tr, std::size_t from = 0) {
  std::vector<double> v;
  v.reserve(tr.diameters.size() - std::min(from, tr.diameters.size()));
  for (std::size_t k = from; k < tr.diameters.size(); ++k) v.push_back(tr.diameters[k].value);
  return v;
}

/// Largest d_x over the datum samples (t <= 0).
[[nodiscard]] inline double datumReference(const Trajectory& tr) {
  double ref = 0.0;
  for (std::size_t k = 0; k <= tr.origin() && k < tr.diameters.size(); ++k)
    ref = std::max(ref, tr.diameters[k].value);
  return ref;
}

[[nodiscard]] inline ClassificationResult classify(const Trajectory& tr,
                                                   const ClassifierOptions& opt) {
  const auto dx = diameterValues(tr, tr.origin());
  return classifyDiameters(dx, datumReference(tr), tr.evidence.overflow, tr.evidence.nonFinite,
                           opt);
}

[[nodiscard]] inline ClassificationResult classify(const Trajectory& tr) {
  return classify(tr, tr.config.classifier);
}

// ---------------------------------------------------------------------------
// Gap series helpers
// ---------------------------------------------------------------------------

/// x_1 - x_2 (first coordinate) per sample; the stored gap for two-agent runs.
[[nodiscard]] inline std::vector<double> gapSeries(const Trajectory& tr) {
  if (!tr.hasStates()) throw std::invalid_argument("gapSeries: states were not recorded");
  std::vector<double> g(tr.size());
  for (std::size_t s = 0; s < tr.size(); ++s) {
    const auto x = tr.state(s);
    g[s] = tr.scalarGap ? x(0, 0) : x(0, 0) - x(1, 0);
  }
  return g;
}

/// Strict sign changes of the gap on samples with time >= from (zeros skipped).
[[nodiscard]] inline std::size_t signChanges(const Trajectory& tr, double from = 0.0) {
  const auto g = gapSeries(tr);
  std::size_t count = 0;
  double last = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (tr.times[s] < from - 1e-12 || g[s] == 0.0) continue;
    if (last != 0.0 && (g[s] > 0.0) != (last > 0.0)) ++count;
    last = g[s];
  }
  return count;
}

/// max |gap| over samples with time > from.
[[nodiscard]] inline double peakAbsGap(const Trajectory& tr, double from) {
  const auto g = gapSeries(tr);
  double peak = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s)
    if (tr.times[s] > from + 1e-12) peak = std::max(peak, std::abs(g[s]));
  return peak;
}

// ---------------------------------------------------------------------------
// Pointwise functionals
// ---------------------------------------------------------------------------

/// Row i: Psi^i = sum_{j != i} psi_ij x_j.
template <class Derived>
[[nodiscard]] StateMatrix psiSum(const Eigen::MatrixBase<Derived>& x, const WeightMatrix& w) {
  return w.offDiagonal() * x;
}

/// Row i: Phi^i = sum_j psi_ij (x_j - x_i).
template <class Derived>
[[nodiscard]] StateMatrix phi(const Eigen::MatrixBase<Derived>& x, const WeightMatrix& w) {
  const Matrix off = w.offDiagonal();
  StateMatrix out = off * x;
  out -= off.rowwise().sum().asDiagonal() * x;
  return out;
}

/// D = sum_i sum_j psi_ij |x_j - x_i|^2.
template <class Derived>
[[nodiscard]] double dissimilarity(const Eigen::MatrixBase<Derived>& x, const WeightMatrix& w) {
  const auto n = x.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sum += w.weights(i, j) * (x.row(j) - x.row(i)).squaredNorm();
  return sum;
}

struct GeomBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// |Psi^i - Psi^k| against gamma * d_x for a row-stochastic positive W.
template <class Derived>
[[nodiscard]] GeomBound geomBoundCheck(const Eigen::MatrixBase<Derived>& x, const WeightMatrix& w,
                                       AgentPair pair) {
  if (!w.validated || !w.flags.rowStochastic || !w.flags.positiveOffDiagonal)
    throw std::invalid_argument("geomBoundCheck: W must be row-stochastic with positive off-diagonal");
  const StateMatrix psi = psiSum(x, w);
  GeomBound g;
  g.lhs = (psi.row(pair.first) - psi.row(pair.second)).norm();
  g.rhs = weights::gamma(w) * diameter(x).value;
  g.holds = g.lhs <= g.rhs + 1e-12;
  return g;
}

// ---------------------------------------------------------------------------
// Lyapunov monitors
// ---------------------------------------------------------------------------

/// Decay rate in d/dt L <= -(1-gamma)(1-lambda*tau*gamma) d_x^2.
[[nodiscard]] constexpr double transmissionDecayCoefficient(double gamma, double lambdaTau) {
  return (1.0 - gamma) * (1.0 - lambdaTau * gamma);
}

/// Factor in d/dt L_{eps,delta} <= ((1+lambda)tau - 1/2) D(t - tau).
[[nodiscard]] constexpr double reactionDecayCoefficient(double lambda, double tau) {
  return (1.0 + lambda) * tau - 0.5;
}

struct ReactionWeights {
  double epsilon = 0.0;  // 2 lambda
  double delta = 0.0;    // (1 + 2 lambda) tau
  double phiHistory = 0.0;  // lambda^2 tau^2 (1 + 1/eps) / delta, 0 at lambda = 0
  double doubleIntegral = 0.0;  // (1 + eps) tau / (2 delta)
};

[[nodiscard]] inline ReactionWeights reactionWeights(double lambda, double tau) {
  ReactionWeights c;
  c.epsilon = 2.0 * lambda;
  c.delta = (1.0 + 2.0 * lambda) * tau;
  c.phiHistory =
      lambda == 0.0 ? 0.0 : lambda * lambda * tau * tau * (1.0 + 1.0 / c.epsilon) / c.delta;
  c.doubleIntegral = (1.0 + c.epsilon) * tau / (2.0 * c.delta);
  return c;
}

struct LyapunovSeries {
  std::vector<double> times;       // t_n for each reported value
  std::vector<double> values;      // L(t_n)
  std::vector<double> decrements;  // L(t_{n+1}) - L(t_n), aligned with times[1..]
  std::vector<double> bounds;      // allowed decrement, aligned with decrements
  std::vector<char> checked;       // 1 if the decrement was compared against the bound
  std::size_t checkedSteps = 0;
  std::size_t skippedSteps = 0;
  std::size_t violations = 0;
  double worstMargin = -std::numeric_limits<double>::infinity();  // max(decrement - bound)
  double tolerance = 0.0;
};

namespace detail {

inline void requireStates(const Trajectory& tr, const char* who) {
  if (!tr.hasStates() || tr.scalarGap)
    throw std::invalid_argument(std::string(who) + ": needs an N-agent trajectory with states");
}

inline void finishSeries(LyapunovSeries& s) {
  if (s.values.empty()) return;
  std::size_t firstChecked = s.checked.size();
  for (std::size_t i = 0; i < s.checked.size(); ++i)
    if (s.checked[i]) {
      firstChecked = i;
      break;
    }
  const double base = firstChecked < s.checked.size() ? s.values[firstChecked] : s.values.front();
  s.tolerance = 1e-8 * (1.0 + std::abs(base));
  for (std::size_t i = 0; i < s.decrements.size(); ++i) {
    if (!s.checked[i]) continue;
    const double margin = s.decrements[i] - s.bounds[i];
    s.worstMargin = std::max(s.worstMargin, margin);
    if (margin > s.tolerance) ++s.violations;
  }
}

}  // namespace detail

/// Transmission functional for the fixed pair (I, K):
///   L_n = 1/2 |(x_I - lt Psi_I(n-m)) - (x_K - lt Psi_K(n-m))|^2
///         + [(1+lt)/(2 gamma) - lt] gamma^2 dt sum_{q=n-m+1}^{n} d_x(q)^2
/// (lt = lambda*tau). The window sum is the right-endpoint rule, which makes
/// the discrete decrement obey L_{n+1} - L_n <= -(1-gamma)(1-lt gamma) d_x(n+1)^2 dt
/// for the implicit-Euler scheme whenever (I, K) is the argmax pair at n+1.
/// Steps n -> n+1 with t_n >= startTime are checked; steps where the argmax
/// pair at n+1 differs from (I, K) are skipped and counted.
[[nodiscard]] inline LyapunovSeries lyapTransmission(const Trajectory& tr, const WeightMatrix& w,
                                                     double lambda, double tau, AgentPair pair,
                                                     double startTime = 0.0) {
  detail::requireStates(tr, "lyapTransmission");
  const double lt = lambda * tau;
  if (lt > 1.0) throw std::invalid_argument("lyapTransmission: lambda*tau > 1, functional not sign-definite");
  const double g = weights::gamma(w);
  const double integralWeight = ((1.0 + lt) / (2.0 * g) - lt) * g * g;
  const double rate = transmissionDecayCoefficient(g, lt);
  const long m = tr.delaySteps;
  const double dt = tr.stepSize;
  const Matrix off = w.offDiagonal();

  const auto total = static_cast<long>(tr.size());
  const long origin = static_cast<long>(tr.origin());
  // sample index s <-> mesh index s - origin; need Psi at n - m >= -m.
  std::vector<double> dx2(static_cast<std::size_t>(total));
  for (long s = 0; s < total; ++s) dx2[static_cast<std::size_t>(s)] = std::pow(tr.diameters[static_cast<std::size_t>(s)].value, 2);

  LyapunovSeries out;
  double window = 0.0;
  for (long s = origin - m + 1; s <= origin; ++s) window += dx2[static_cast<std::size_t>(s)];
  for (long s = origin; s < total; ++s) {
    if (s > origin) window += dx2[static_cast<std::size_t>(s)] - dx2[static_cast<std::size_t>(s - m)];
    const auto x = tr.state(static_cast<std::size_t>(s));
    const auto xd = tr.state(static_cast<std::size_t>(s - m));
    const Eigen::RowVectorXd psiI = off.row(pair.first) * xd;
    const Eigen::RowVectorXd psiK = off.row(pair.second) * xd;
    const Eigen::RowVectorXd u = (x.row(pair.first) - lt * psiI) - (x.row(pair.second) - lt * psiK);
    out.times.push_back(tr.times[static_cast<std::size_t>(s)]);
    out.values.push_back(0.5 * u.squaredNorm() + integralWeight * dt * window);
    if (s > origin) {
      const auto prev = static_cast<std::size_t>(s - 1);
      out.decrements.push_back(out.values.back() - out.values[out.values.size() - 2]);
      out.bounds.push_back(-rate * dx2[static_cast<std::size_t>(s)] * dt);
      bool check = tr.times[prev] >= startTime;
      if (check && tr.diameters[static_cast<std::size_t>(s)].pair != pair) {
        check = false;
        ++out.skippedSteps;
      }
      out.checked.push_back(check ? 1 : 0);
      if (check) ++out.checkedSteps;
    }
  }
  detail::finishSeries(out);
  return out;
}

/// Reaction functional with eps = 2 lambda, delta = (1 + 2 lambda) tau:
///   L_n = 1/2 sum_i |x_i - X(0) - lt Phi_i(n-m)|^2
///         + c1 dt sum_{q=n-m+1}^{n} P(q-m)
///         + c2 dt^2 sum_{p=n-m+1}^{n} sum_{q=p+1}^{n} D(q-m)
/// with P = sum_i |Phi_i|^2, c1 = lambda^2 tau^2 (1+1/eps)/delta (0 at
/// lambda = 0) and c2 = (1+eps) tau / (2 delta). These mesh sums make the
/// decrement satisfy L_{n+1} - L_n <= ((1+lambda)tau - 1/2) D(n+1-m) dt exactly
/// for the scheme. Values are reported from t >= 2 tau.
[[nodiscard]] inline LyapunovSeries lyapReaction(const Trajectory& tr, const WeightMatrix& w,
                                                 double lambda, double tau) {
  detail::requireStates(tr, "lyapReaction");
  if (!models::theoremReactCondition(lambda, tau))
    throw std::invalid_argument("lyapReaction: requires (1+lambda)*tau < 1/2");
  if (!w.validated || !w.flags.symmetric || !w.flags.biStochastic)
    throw std::invalid_argument("lyapReaction: W must be symmetric and bi-stochastic");
  if (!(tau > 0.0) || tr.delaySteps < 1)
    throw std::invalid_argument("lyapReaction: needs tau > 0");

  const double lt = lambda * tau;
  const auto c = reactionWeights(lambda, tau);
  const long m = tr.delaySteps;
  const double dt = tr.stepSize;
  const auto total = static_cast<long>(tr.size());
  const long origin = static_cast<long>(tr.origin());
  const auto X0 = tr.meanAt(tr.origin());

  std::vector<StateMatrix> phis(static_cast<std::size_t>(total));
  std::vector<double> P(static_cast<std::size_t>(total));
  std::vector<double> D(static_cast<std::size_t>(total));
  for (long s = 0; s < total; ++s) {
    const auto x = tr.state(static_cast<std::size_t>(s));
    phis[static_cast<std::size_t>(s)] = phi(x, w);
    P[static_cast<std::size_t>(s)] = phis[static_cast<std::size_t>(s)].squaredNorm();
    D[static_cast<std::size_t>(s)] = dissimilarity(x, w);
  }
  const long first = origin + 2 * m;  // t = 2 tau
  LyapunovSeries out;
  if (first >= total) return out;

  // Running sums for n = first: A = sum_{q=n-m+1}^{n} P(q-m),
  // B = sum_{q=n-m+1}^{n} D(q-m), C = sum_{p} sum_{q=p+1}^{n} D(q-m)
  //   = sum_{q=n-m+2}^{n} (q - (n-m+1)) D(q-m).
  auto at = [](const std::vector<double>& v, long s) { return v[static_cast<std::size_t>(s)]; };
  double A = 0.0, B = 0.0, C = 0.0;
  for (long s = first - m + 1; s <= first; ++s) {
    A += at(P, s - m);
    B += at(D, s - m);
    C += static_cast<double>(s - (first - m + 1)) * at(D, s - m);
  }
  for (long s = first; s < total; ++s) {
    if (s > first) {
      // window slides by one: C_s = C_{s-1} - (B_{s-1} - leaving) + (m-1) entering
      const double leaving = at(D, s - 2 * m);
      const double entering = at(D, s - m);
      C = C - (B - leaving) + (static_cast<double>(m) - 1.0) * entering;
      B = B - leaving + entering;
      A = A - at(P, s - 2 * m) + at(P, s - m);
    }
    const auto x = tr.state(static_cast<std::size_t>(s));
    StateMatrix u = x.rowwise() - X0;
    u -= lt * phis[static_cast<std::size_t>(s - m)];
    out.times.push_back(tr.times[static_cast<std::size_t>(s)]);
    out.values.push_back(0.5 * u.squaredNorm() + c.phiHistory * dt * A +
                         c.doubleIntegral * dt * dt * C);
    if (s > first) {
      out.decrements.push_back(out.values.back() - out.values[out.values.size() - 2]);
      out.bounds.push_back(reactionDecayCoefficient(lambda, tau) * at(D, s - m) * dt);
      out.checked.push_back(1);
      ++out.checkedSteps;
    }
  }
  detail::finishSeries(out);
  return out;
}

// ---------------------------------------------------------------------------
// A-priori bounds
// ---------------------------------------------------------------------------

struct AprioriReport {
  double M = 0.0;
  double worstStateRatio = 0.0;  // sup |x_i| / ((1 + lt) M)
  double worstDerivRatio = 0.0;  // sup |x_i'| / (3 (1 + lt) M)
  bool holds = true;
};

/// Checks sup_{t>0} |x_i(t)| <= (1+lt) M and |x_i'(t)| <= 3(1+lt) M, where M
/// bounds the datum and its derivative (Euclidean norm per agent).
[[nodiscard]] inline AprioriReport aprioriBounds(const Trajectory& tr, double lambda, double tau) {
  detail::requireStates(tr, "aprioriBounds");
  const double lt = lambda * tau;
  AprioriReport r;
  for (std::size_t s = 0; s <= tr.origin(); ++s) {
    r.M = std::max(r.M, tr.state(s).rowwise().norm().maxCoeff());
    r.M = std::max(r.M, tr.derivative(s).rowwise().norm().maxCoeff());
  }
  double supX = 0.0, supD = 0.0;
  for (std::size_t s = tr.origin() + 1; s < tr.size(); ++s) {
    supX = std::max(supX, tr.state(s).rowwise().norm().maxCoeff());
    supD = std::max(supD, tr.derivative(s).rowwise().norm().maxCoeff());
  }
  const double boundX = (1.0 + lt) * r.M;
  const double boundD = 3.0 * (1.0 + lt) * r.M;
  r.worstStateRatio = boundX > 0.0 ? supX / boundX : (supX > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.worstDerivRatio = boundD > 0.0 ? supD / boundD : (supD > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.holds = r.worstStateRatio <= 1.0 + 1e-9 && r.worstDerivRatio <= 1.0 + 1e-9;
  return r;
}

// ---------------------------------------------------------------------------
// Argmax pair tracking
// ---------------------------------------------------------------------------

struct IJReport {
  std::vector<AgentPair> pairs;  // per sample on t >= 0
  std::optional<double> T0;      // start of the final constant stretch
  AgentPair finalPair{0, 1};
  double changeFraction = 0.0;   // fraction of steps where the pair changed
};

/// Reports when the argmax pair last changed. No T0 when that happens inside
/// the final 25% of the run.
[[nodiscard]] inline IJReport trackIJ(const Trajectory& tr) {
  IJReport r;
  const std::size_t o = tr.origin();
  if (tr.diameters.size() <= o) return r;
  std::size_t changes = 0;
  std::size_t lastChange = o;
  for (std::size_t s = o; s < tr.diameters.size(); ++s) {
    r.pairs.push_back(tr.diameters[s].pair);
    if (s > o && tr.diameters[s].pair != tr.diameters[s - 1].pair) {
      ++changes;
      lastChange = s;
    }
  }
  r.finalPair = r.pairs.back();
  const std::size_t steps = r.pairs.size() - 1;
  r.changeFraction = steps > 0 ? static_cast<double>(changes) / static_cast<double>(steps) : 0.0;
  const double t0 = tr.times[o];
  const double tEnd = tr.times.back();
  const double candidate = tr.times[lastChange];
  if (candidate <= t0 + 0.75 * (tEnd - t0)) r.T0 = candidate;
  return r;
}

}  // namespace nddc::diagnostics
