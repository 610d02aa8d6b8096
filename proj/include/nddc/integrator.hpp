#pragma once

// Fixed-step implicit-Euler integration of the N-agent systems and the run
// driver that records trajectories and classifies them.

#include "nddc/diagnostics.hpp"
#include "nddc/mesh.hpp"
#include "nddc/models.hpp"

namespace nddc::integrator {

/// Weight-dependent pieces shared by every step of a run.
struct Operator {
  Matrix off;                       // W with zero diagonal
  Eigen::VectorXd rowSums;          // s_i = sum_{j != i} psi_ij
  Eigen::PartialPivLU<Matrix> ode;  // I + dt L, used only when tau = 0
  bool hasOde = false;
};

[[nodiscard]] inline Operator makeOperator(const WeightMatrix& w, double stepSize, bool ode) {
  Operator op;
  op.off = w.offDiagonal();
  op.rowSums = op.off.rowwise().sum();
  if (ode) {
    const auto n = op.off.rows();
    Matrix a = Matrix::Identity(n, n) + stepSize * (Matrix(op.rowSums.asDiagonal()) - op.off);
    op.ode.compute(a);
    op.hasOde = true;
  }
  return op;
}

namespace detail {

/// Row i: sum_j psi_ij (y_j - x_i). Written as differences so that a
/// consensus state gives exactly zero.
inline StateMatrix pullToward(const Matrix& off, const StateMatrix& y, const StateMatrix& x) {
  StateMatrix out = StateMatrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j)
      if (off(i, j) != 0.0) out.row(i) += off(i, j) * (y.row(j) - x.row(i));
  return out;
}

/// x^{n+1} = x^n + dt delta with (I + dt L) delta = -L x^n.
inline OpinionState stepOde(HistoryBuffer<StateMatrix>& h, const Operator& op) {
  const long n = h.newest();
  const StateMatrix& x = h.state(n);
  const StateMatrix force = pullToward(op.off, x, x);
  StateMatrix next = x + h.stepSize() * StateMatrix(op.ode.solve(Matrix(force)));
  StateMatrix rhs = pullToward(op.off, next, next);
  if (!allFinite(next)) throw NonFiniteState("step: non-finite state");
  h.push(next, rhs);
  return {std::move(next), h.timeOf(n + 1)};
}

}  // namespace detail

/// x_i^{n+1} (1 + dt s_i) = x_i^n + dt sum_{j != i} psi_ij xi_j^{n+1-m},
/// xi = x + lambda tau D, evaluated as the increment
/// dt sum_j psi_ij (xi_j - x_i^n) / (1 + dt s_i). Appends the state and its
/// right-hand side.
inline OpinionState stepTransmission(HistoryBuffer<StateMatrix>& h, const Operator& op,
                                     double lambda, double tau,
                                     DerivativeMode mode = DerivativeMode::BackwardDifference) {
  if (h.delaySteps() == 0) return detail::stepOde(h, op);
  const double dt = h.stepSize();
  const long n = h.newest();
  const StateMatrix xi = anticipated(h, n + 1 - h.delaySteps(), lambda * tau, mode);
  const StateMatrix& x = h.state(n);
  StateMatrix inc = detail::pullToward(op.off, xi, x);
  for (Eigen::Index i = 0; i < inc.rows(); ++i) inc.row(i) *= dt / (1.0 + dt * op.rowSums(i));
  StateMatrix next = x + inc;
  StateMatrix rhs = detail::pullToward(op.off, xi, next);
  if (!allFinite(next)) throw NonFiniteState("stepTransmission: non-finite state");
  h.push(next, rhs);
  return {std::move(next), h.timeOf(n + 1)};
}

/// x_i^{n+1} = x_i^n + dt sum_j psi_ij (xi_j - xi_i)^{n+1-m}.
inline OpinionState stepReaction(HistoryBuffer<StateMatrix>& h, const Operator& op, double lambda,
                                 double tau,
                                 DerivativeMode mode = DerivativeMode::BackwardDifference) {
  if (h.delaySteps() == 0) return detail::stepOde(h, op);
  const double dt = h.stepSize();
  const long n = h.newest();
  const StateMatrix xi = anticipated(h, n + 1 - h.delaySteps(), lambda * tau, mode);
  StateMatrix rhs = detail::pullToward(op.off, xi, xi);
  StateMatrix next = h.state(n) + dt * rhs;
  if (!allFinite(next)) throw NonFiniteState("stepReaction: non-finite state");
  h.push(next, rhs);
  return {std::move(next), h.timeOf(n + 1)};
}

inline OpinionState stepTransmission(HistoryBuffer<StateMatrix>& h, const WeightMatrix& w,
                                     double lambda, double tau,
                                     DerivativeMode mode = DerivativeMode::BackwardDifference) {
  return stepTransmission(h, makeOperator(w, h.stepSize(), h.delaySteps() == 0), lambda, tau,
                          mode);
}

inline OpinionState stepReaction(HistoryBuffer<StateMatrix>& h, const WeightMatrix& w,
                                 double lambda, double tau,
                                 DerivativeMode mode = DerivativeMode::BackwardDifference) {
  return stepReaction(h, makeOperator(w, h.stepSize(), h.delaySteps() == 0), lambda, tau, mode);
}

namespace detail {

inline void validateConfig(const SimConfig& c) {
  if (!std::isfinite(c.lambda) || c.lambda < 0.0)
    throw std::invalid_argument("run: lambda must be finite and >= 0");
  if (isTwoAgent(c.model)) {
    if (c.datum.rows() != 1 || c.datum.cols() != 1)
      throw std::invalid_argument("run: two-agent models take a scalar (1x1) gap datum");
    return;
  }
  if (c.agents < 2 || c.dim < 1) throw std::invalid_argument("run: need N >= 2 and d >= 1");
  if (!c.weights.validated) throw std::invalid_argument("run: weights must be validated");
  if (c.weights.size() != c.agents)
    throw std::invalid_argument("run: weight matrix size does not match N");
  if (c.model == ModelKind::TransmissionN && !c.weights.flags.rowStochastic)
    throw std::invalid_argument("run: transmission model requires row-stochastic weights");
  if (c.datum.rows() != c.agents || c.datum.cols() != c.dim)
    throw std::invalid_argument("run: datum shape does not match N x d");
}

class Recorder {
 public:
  explicit Recorder(Trajectory& tr) : tr_(tr) {}

  template <class S, class D>
  void push(double t, const S& state, const D& derivative, const Diameter& dx) {
    tr_.times.push_back(t);
    tr_.diameters.push_back(dx);
    if (tr_.config.recordStates) {
      append(tr_.states, state);
      append(tr_.derivatives, derivative);
    }
    if (!tr_.scalarGap) append(tr_.means, mean(state));
  }

 private:
  template <class M>
  static void append(std::vector<double>& out, const M& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  Trajectory& tr_;
};

inline Diameter gapDiameter(double g) {
  if (!std::isfinite(g)) throw NonFiniteState("diameter: non-finite gap");
  return {std::abs(g), {0, 1}};
}

}  // namespace detail

/// Integrates to tEnd (or until the divergence guard trips), then classifies.
[[nodiscard]] inline Trajectory run(const SimConfig& config) {
  detail::validateConfig(config);
  const Mesh mesh = makeMesh(config.tau, config.stepsPerDelay, config.tEnd);
  Trajectory tr;
  tr.config = config;
  tr.scalarGap = isTwoAgent(config.model);
  tr.agents = tr.scalarGap ? 2 : config.agents;
  tr.dim = tr.scalarGap ? 1 : config.dim;
  tr.stepSize = mesh.stepSize;
  tr.delaySteps = mesh.delaySteps;
  tr.prefix = static_cast<std::size_t>(mesh.delaySteps);
  const auto samples = static_cast<std::size_t>(mesh.totalSteps + mesh.delaySteps + 1);
  tr.times.reserve(samples);
  tr.diameters.reserve(samples);

  detail::Recorder rec(tr);
  auto& ev = tr.evidence;
  double limit = 0.0;
  const double lambda = config.lambda;
  const double tau = config.tau;

  if (tr.scalarGap) {
    auto h = initScalarHistory(config.datum, mesh);
    for (long k = h.oldest(); k <= h.newest(); ++k) {
      const double g = h.state(k);
      rec.push(h.timeOf(k), Eigen::Matrix<double, 1, 1>(g),
               Eigen::Matrix<double, 1, 1>(h.derivative(k)), detail::gapDiameter(g));
    }
    limit = kOverflowFactor * std::max(1.0, tr.diameters.back().value);
    const bool transmission = config.model == ModelKind::TwoAgentTransmission;
    for (long step = 1; step <= mesh.totalSteps; ++step) {
      try {
        const double g = transmission
                             ? models::stepTwoAgentTransmission(h, lambda, tau, config.derivativeMode)
                             : models::stepTwoAgentReaction(h, lambda, tau, config.derivativeMode);
        const auto dx = detail::gapDiameter(g);
        rec.push(h.timeOf(step), Eigen::Matrix<double, 1, 1>(g),
                 Eigen::Matrix<double, 1, 1>(h.derivative(step)), dx);
        if (dx.value > limit) {
          ev.overflow = true;
          break;
        }
      } catch (const NonFiniteState&) {
        ev.nonFinite = true;
        break;
      }
    }
  } else {
    auto h = initHistory(config.datum, mesh, config.agents, config.dim);
    for (long k = h.oldest(); k <= h.newest(); ++k)
      rec.push(h.timeOf(k), h.state(k), h.derivative(k), diameter(h.state(k)));
    limit = kOverflowFactor * std::max(1.0, tr.diameters.back().value);
    const Operator op = makeOperator(config.weights, mesh.stepSize, mesh.delaySteps == 0);
    const bool transmission = config.model == ModelKind::TransmissionN;
    for (long step = 1; step <= mesh.totalSteps; ++step) {
      try {
        const auto s = transmission
                           ? stepTransmission(h, op, lambda, tau, config.derivativeMode)
                           : stepReaction(h, op, lambda, tau, config.derivativeMode);
        const auto dx = diameter(s.values);
        rec.push(s.time, s.values, h.derivative(step), dx);
        if (dx.value > limit) {
          ev.overflow = true;
          break;
        }
      } catch (const NonFiniteState&) {
        ev.nonFinite = true;
        break;
      }
    }
  }
  tr.aborted = ev.overflow || ev.nonFinite;
  const auto result = diagnostics::classify(tr);
  tr.classification = result.label;
  tr.evidence = result.evidence;
  return tr;
}

/// Runs at m, 2m, 4m, ... steps per delay and returns the max-norm differences
/// of successive end states (levels - 1 entries).
[[nodiscard]] inline std::vector<double> refineOracle(const SimConfig& config, int levels) {
  if (levels < 2) throw std::invalid_argument("refineOracle: need at least 2 levels");
  std::vector<StateMatrix> ends;
  SimConfig c = config;
  c.recordStates = true;
  for (int l = 0; l < levels; ++l) {
    const auto tr = run(c);
    if (tr.classification == Classification::Diverged || tr.aborted)
      throw std::invalid_argument("refineOracle: configuration diverges at m = " +
                                  std::to_string(c.stepsPerDelay));
    ends.emplace_back(tr.state(tr.size() - 1));
    c.stepsPerDelay *= 2;
  }
  std::vector<double> diffs;
  for (std::size_t l = 1; l < ends.size(); ++l)
    diffs.push_back((ends[l] - ends[l - 1]).cwiseAbs().maxCoeff());
  return diffs;
}

/// Consecutive ratios diffs[i] / diffs[i+1]; about 2 for a first-order scheme.
[[nodiscard]] inline std::vector<double> refinementRatios(const std::vector<double>& diffs) {
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) r.push_back(diffs[i] / diffs[i + 1]);
  return r;
}

/// Sample index of time t on the trajectory mesh.
[[nodiscard]] inline std::size_t sampleAt(const Trajectory& tr, double t) {
  const double k = std::round(t / tr.stepSize);
  if (std::abs(t / tr.stepSize - k) > 1e-9 * std::max(1.0, std::abs(k)))
    throw std::invalid_argument("sampleAt: time is not on the mesh");
  const auto s = static_cast<long>(tr.origin()) + static_cast<long>(k);
  if (s < 0 || static_cast<std::size_t>(s) >= tr.size())
    throw std::out_of_range("sampleAt: time outside the recorded run");
  return static_cast<std::size_t>(s);
}

}  // namespace nddc::integrator
