#pragma once

// Domain types shared by every nddc module: opinion states, the mesh-aligned
// history ring, communication weights, initial data, run configuration and
// recorded trajectories.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nddc {

/// N×d opinion coordinates, one agent per row. Row-major so a state can be
/// copied into / viewed from a flat trajectory buffer without reshuffling.
using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense N×N communication weights psi_ij.
using Matrix = Eigen::MatrixXd;

/// Raised when a state (or an integrator result) carries NaN or ±inf.
class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered pair of agent indices (0-based, first < second).
using AgentPair = std::pair<int, int>;

struct OpinionState {
  StateMatrix values;
  double time = 0.0;

  [[nodiscard]] int agents() const { return static_cast<int>(values.rows()); }
  [[nodiscard]] int dim() const { return static_cast<int>(values.cols()); }
};

[[nodiscard]] inline bool allFinite(const StateMatrix& x) {
  return x.array().isFinite().all();
}

// ---------------------------------------------------------------------------
// diameter / mean
// ---------------------------------------------------------------------------

struct Diameter {
  double value = 0.0;
  AgentPair pair{0, 1};
};

/// Maximum pairwise Euclidean distance between agents. Ties go to the
/// lexicographically smallest (i, j).
template <class Derived>
[[nodiscard]] Diameter diameter(const Eigen::MatrixBase<Derived>& x) {
  const auto n = x.rows();
  if (n < 2) throw std::invalid_argument("diameter: need at least two agents");
  if (!x.array().isFinite().all())
    throw NonFiniteState("diameter: state contains non-finite entries");
  Diameter best{-1.0, {0, 1}};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (x.row(i) - x.row(j)).norm();
      if (dist > best.value) best = {dist, {static_cast<int>(i), static_cast<int>(j)}};
    }
  }
  return best;
}

[[nodiscard]] inline Diameter diameter(const OpinionState& s) {
  return diameter(s.values);
}

/// Arithmetic mean of the agent rows.
template <class Derived>
[[nodiscard]] Eigen::RowVectorXd mean(const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() < 1) throw std::invalid_argument("mean: empty state");
  return x.colwise().mean();
}

[[nodiscard]] inline Eigen::RowVectorXd mean(const OpinionState& s) {
  return mean(s.values);
}

// ---------------------------------------------------------------------------
// HistoryBuffer
// ---------------------------------------------------------------------------

/// Ring of (state, derivative) pairs on a uniform mesh, addressed by absolute
/// mesh index k (time k·Δt). The datum occupies indices -m..0.
template <class T>
class HistoryBuffer {
 public:
  HistoryBuffer(double stepSize, int delaySteps, std::size_t capacity)
      : stepSize_(stepSize), delaySteps_(delaySteps), states_(capacity), derivatives_(capacity) {
    if (!(stepSize > 0.0)) throw std::invalid_argument("HistoryBuffer: step size must be positive");
    if (delaySteps < 0) throw std::invalid_argument("HistoryBuffer: negative delay steps");
    if (capacity < static_cast<std::size_t>(2 * delaySteps + 1) || capacity < 1)
      throw std::invalid_argument("HistoryBuffer: capacity below 2m+1");
  }

  /// Appends the sample with index newest()+1 (or firstIndex for the first push).
  void push(const T& state, const T& derivative) {
    const long next = count_ == 0 ? first_ : newest_ + 1;
    const std::size_t slot = slotOf(next);
    states_[slot] = state;
    derivatives_[slot] = derivative;
    newest_ = next;
    ++count_;
  }

  /// Index of the first sample that will be pushed (defaults to -m).
  void setFirstIndex(long k) {
    if (count_ != 0) throw std::logic_error("HistoryBuffer: first index fixed after first push");
    first_ = k;
  }

  [[nodiscard]] const T& state(long k) const { return states_[checkedSlot(k)]; }
  [[nodiscard]] const T& derivative(long k) const { return derivatives_[checkedSlot(k)]; }

  [[nodiscard]] long newest() const { return newest_; }
  [[nodiscard]] long oldest() const {
    const long held = static_cast<long>(std::min<std::size_t>(count_, states_.size()));
    return newest_ - held + 1;
  }
  [[nodiscard]] std::size_t size() const { return std::min<std::size_t>(count_, states_.size()); }
  [[nodiscard]] std::size_t capacity() const { return states_.size(); }
  [[nodiscard]] double stepSize() const { return stepSize_; }
  [[nodiscard]] int delaySteps() const { return delaySteps_; }
  [[nodiscard]] double timeOf(long k) const { return static_cast<double>(k) * stepSize_; }

 private:
  [[nodiscard]] std::size_t slotOf(long k) const {
    const long c = static_cast<long>(states_.size());
    return static_cast<std::size_t>(((k % c) + c) % c);
  }
  [[nodiscard]] std::size_t checkedSlot(long k) const {
    if (count_ == 0 || k > newest_ || k < oldest())
      throw std::out_of_range("HistoryBuffer: index " + std::to_string(k) + " not held");
    return slotOf(k);
  }

  double stepSize_;
  int delaySteps_;
  std::vector<T> states_;
  std::vector<T> derivatives_;
  long first_ = 0;
  long newest_ = -1;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

struct WeightFlags {
  bool rowStochastic = false;
  bool symmetric = false;
  bool biStochastic = false;
  bool positiveOffDiagonal = false;
  bool irreducible = false;
};

/// Communication weights plus structural flags. Flags are only meaningful when
/// `validated` is true; weights::validate is the only thing that sets them.
struct WeightMatrix {
  Matrix weights;
  WeightFlags flags;
  bool validated = false;

  [[nodiscard]] int size() const { return static_cast<int>(weights.rows()); }

  /// Copy with the diagonal zeroed (the transmission model never reads it and
  /// it cancels in the reaction model).
  [[nodiscard]] Matrix offDiagonal() const {
    Matrix w = weights;
    w.diagonal().setZero();
    return w;
  }
};

// ---------------------------------------------------------------------------
// InitialDatum
// ---------------------------------------------------------------------------

enum class DatumKind { Constant, Linear, SampledTable };

struct DatumSample {
  double time = 0.0;
  StateMatrix state;
  StateMatrix derivative;
};

/// Trajectory on [-tau, 0] together with its derivative.
class InitialDatum {
 public:
  InitialDatum() = default;

  static InitialDatum constant(StateMatrix c) {
    InitialDatum d;
    d.kind_ = DatumKind::Constant;
    d.a_ = std::move(c);
    d.b_ = StateMatrix::Zero(d.a_.rows(), d.a_.cols());
    return d;
  }

  /// x0(t) = a + t·b.
  static InitialDatum linear(StateMatrix a, StateMatrix b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw std::invalid_argument("InitialDatum::linear: shape mismatch");
    InitialDatum d;
    d.kind_ = DatumKind::Linear;
    d.a_ = std::move(a);
    d.b_ = std::move(b);
    return d;
  }

  static InitialDatum table(std::vector<DatumSample> samples) {
    if (samples.empty()) throw std::invalid_argument("InitialDatum::table: no samples");
    std::sort(samples.begin(), samples.end(),
              [](const DatumSample& l, const DatumSample& r) { return l.time < r.time; });
    for (const auto& s : samples) {
      if (s.state.rows() != samples.front().state.rows() ||
          s.state.cols() != samples.front().state.cols() ||
          s.derivative.rows() != s.state.rows() || s.derivative.cols() != s.state.cols())
        throw std::invalid_argument("InitialDatum::table: inconsistent sample shapes");
    }
    InitialDatum d;
    d.kind_ = DatumKind::SampledTable;
    d.samples_ = std::move(samples);
    return d;
  }

  [[nodiscard]] DatumKind kind() const { return kind_; }
  [[nodiscard]] const StateMatrix& offset() const { return a_; }
  [[nodiscard]] const StateMatrix& slope() const { return b_; }
  [[nodiscard]] const std::vector<DatumSample>& samples() const { return samples_; }

  [[nodiscard]] Eigen::Index rows() const {
    return kind_ == DatumKind::SampledTable ? samples_.front().state.rows() : a_.rows();
  }
  [[nodiscard]] Eigen::Index cols() const {
    return kind_ == DatumKind::SampledTable ? samples_.front().state.cols() : a_.cols();
  }

  /// Closed-form value; SampledTable must go through initHistory instead.
  [[nodiscard]] StateMatrix state(double t) const {
    if (kind_ == DatumKind::SampledTable)
      throw std::logic_error("InitialDatum::state: table data are read by mesh index");
    return a_ + t * b_;
  }
  [[nodiscard]] StateMatrix derivative(double /*t*/) const {
    if (kind_ == DatumKind::SampledTable)
      throw std::logic_error("InitialDatum::derivative: table data are read by mesh index");
    return b_;
  }

 private:
  DatumKind kind_ = DatumKind::Constant;
  StateMatrix a_;
  StateMatrix b_;
  std::vector<DatumSample> samples_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ModelKind { TransmissionN, ReactionN, TwoAgentTransmission, TwoAgentReaction };
enum class DerivativeMode { BackwardDifference, StoredRhs };
enum class Classification { Converged, Diverged, Inconclusive };

[[nodiscard]] constexpr bool isTwoAgent(ModelKind k) {
  return k == ModelKind::TwoAgentTransmission || k == ModelKind::TwoAgentReaction;
}
[[nodiscard]] constexpr bool isTransmission(ModelKind k) {
  return k == ModelKind::TransmissionN || k == ModelKind::TwoAgentTransmission;
}

[[nodiscard]] inline std::string_view toString(ModelKind k) {
  switch (k) {
    case ModelKind::TransmissionN: return "transmission";
    case ModelKind::ReactionN: return "reaction";
    case ModelKind::TwoAgentTransmission: return "two-agent-transmission";
    case ModelKind::TwoAgentReaction: return "two-agent-reaction";
  }
  return "?";
}

[[nodiscard]] inline std::string_view toString(DerivativeMode m) {
  return m == DerivativeMode::BackwardDifference ? "backward-difference" : "stored-rhs";
}

[[nodiscard]] inline std::string_view toString(Classification c) {
  switch (c) {
    case Classification::Converged: return "Converged";
    case Classification::Diverged: return "Diverged";
    case Classification::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct ClassifierOptions {
  double tolLow = 1e-3;
  double tolHigh = 1e3;
  double trailingFraction = 0.2;
};

/// Divergence guard: runs abort once d_x exceeds this multiple of max(1, d_x(0)).
inline constexpr double kOverflowFactor = 1e6;

struct SimConfig {
  ModelKind model = ModelKind::TwoAgentTransmission;
  int agents = 2;
  int dim = 1;
  double tau = 0.0;
  double lambda = 0.0;
  int stepsPerDelay = 32;
  double tEnd = 1.0;
  WeightMatrix weights;  // N-agent models only
  InitialDatum datum;
  DerivativeMode derivativeMode = DerivativeMode::BackwardDifference;
  std::uint64_t seed = 0;
  ClassifierOptions classifier;
  bool recordStates = true;
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct ClassificationEvidence {
  double reference = 0.0;       // max d_x over the datum samples
  double finalDiameter = 0.0;
  double trailingPeak = 0.0;    // peak d_x in the final window
  double previousPeak = 0.0;    // peak d_x in the window before it
  double amplitudeRatio = 0.0;  // trailingPeak / previousPeak
  std::size_t windowSamples = 0;
  bool overflow = false;
  bool nonFinite = false;
};

/// Recorded run. Samples are stored for every mesh index from -m (start of the
/// datum) to the last accepted step; `origin()` is the index of t = 0.
/// For two-agent models the stored state is the scalar gap x1 - x2.
struct Trajectory {
  SimConfig config;
  int agents = 0;
  int dim = 0;
  bool scalarGap = false;
  double stepSize = 0.0;
  int delaySteps = 0;
  std::size_t prefix = 0;  // number of samples before t = 0

  std::vector<double> times;
  std::vector<double> states;       // empty when states are not recorded
  std::vector<double> derivatives;  // idem
  std::vector<Diameter> diameters;
  std::vector<double> means;        // dim entries per sample (N-agent only)

  Classification classification = Classification::Inconclusive;
  ClassificationEvidence evidence;
  bool aborted = false;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] std::size_t origin() const { return prefix; }
  [[nodiscard]] std::size_t width() const {
    return scalarGap ? 1 : static_cast<std::size_t>(agents) * static_cast<std::size_t>(dim);
  }
  [[nodiscard]] bool hasStates() const { return !states.empty(); }

  [[nodiscard]] Eigen::Map<const StateMatrix> state(std::size_t sample) const {
    const auto rows = scalarGap ? 1 : agents;
    const auto cols = scalarGap ? 1 : dim;
    return {states.data() + sample * width(), rows, cols};
  }
  [[nodiscard]] Eigen::Map<const StateMatrix> derivative(std::size_t sample) const {
    const auto rows = scalarGap ? 1 : agents;
    const auto cols = scalarGap ? 1 : dim;
    return {derivatives.data() + sample * width(), rows, cols};
  }
  [[nodiscard]] Eigen::Map<const Eigen::RowVectorXd> meanAt(std::size_t sample) const {
    return {means.data() + sample * static_cast<std::size_t>(dim), dim};
  }
  /// Scalar gap of a two-agent run.
  [[nodiscard]] double gap(std::size_t sample) const { return states[sample]; }
};

}  // namespace nddc
