#pragma once

// Construction and structural validation of communication-weight matrices.

#include "nddc/core.hpp"

#include <cstdint>
#include <queue>
#include <random>

namespace nddc::weights {

inline constexpr double kStochasticTol = 1e-12;

enum class WeightKind { Uniform, RandomRowStochastic, RandomSymmetricBistochastic, Explicit };

struct WeightSpec {
  WeightKind kind = WeightKind::Uniform;
  int agents = 2;
  double minOffDiagonal = 0.0;
  std::uint64_t seed = 0;
  Matrix explicitWeights;  // Explicit only
};

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform
/// (std::uniform_real_distribution is implementation-defined).
[[nodiscard]] inline double unitUniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace detail {

inline bool reachesAll(const Matrix& w, bool transpose) {
  const auto n = w.rows();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Eigen::Index> open;
  open.push(0);
  seen[0] = 1;
  Eigen::Index count = 1;
  while (!open.empty()) {
    const auto i = open.front();
    open.pop();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || seen[static_cast<std::size_t>(j)]) continue;
      const double edge = transpose ? w(j, i) : w(i, j);
      if (edge > 0.0) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++count;
        open.push(j);
      }
    }
  }
  return count == n;
}

}  // namespace detail

/// Sets all five structural flags. Irreducibility is decided by reachability
/// over edges i→j with psi_ij > 0 (i != j), forwards and backwards from node 0.
[[nodiscard]] inline WeightMatrix validate(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw std::invalid_argument("validate: weight matrix must be square and non-empty");
  if (!m.array().isFinite().all())
    throw std::invalid_argument("validate: weight matrix has non-finite entries");
  if ((m.array() < 0.0).any())
    throw std::invalid_argument("validate: weight matrix has negative entries");

  const auto n = m.rows();
  WeightMatrix out;
  out.weights = m;
  out.validated = true;
  auto& f = out.flags;

  f.rowStochastic = true;
  f.biStochastic = true;
  f.positiveOffDiagonal = n >= 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double offRow = m.row(i).sum() - m(i, i);
    if (std::abs(offRow - 1.0) > kStochasticTol) f.rowStochastic = false;
    if (std::abs(m.row(i).sum() - 1.0) > kStochasticTol ||
        std::abs(m.col(i).sum() - 1.0) > kStochasticTol)
      f.biStochastic = false;
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && !(m(i, j) > 0.0)) f.positiveOffDiagonal = false;
  }
  f.symmetric = (m - m.transpose()).cwiseAbs().maxCoeff() <= kStochasticTol;
  f.irreducible = n == 1 || (detail::reachesAll(m, false) && detail::reachesAll(m, true));
  return out;
}

[[nodiscard]] inline WeightMatrix validate(const WeightMatrix& w) { return validate(w.weights); }

/// psi_ij = 1/(N-1) off the diagonal, zero diagonal.
[[nodiscard]] inline WeightMatrix makeUniform(int n) {
  if (n < 2) throw std::invalid_argument("makeUniform: need N >= 2");
  Matrix m = Matrix::Constant(n, n, 1.0 / (n - 1));
  m.diagonal().setZero();
  return validate(m);
}

/// Off-diagonal entries drawn from [floor, 1], then each row's off-diagonal
/// block is rescaled affinely about the floor so it sums to one:
///   w_ij = floor + (u_ij - floor) * (1 - (N-1) floor) / sum_j (u_ij - floor).
[[nodiscard]] inline WeightMatrix makeRandomRowStochastic(int n, double minOffDiagonal,
                                                         std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("makeRandomRowStochastic: need N >= 2");
  const double cap = 1.0 / (n - 1);
  if (!(minOffDiagonal > 0.0) || minOffDiagonal > cap * (1.0 + 1e-12))
    throw std::invalid_argument("makeRandomRowStochastic: minOffDiagonal must lie in (0, 1/(N-1)]");
  const double floor = std::min(minOffDiagonal, cap);

  std::mt19937_64 rng(seed);
  Matrix m = Matrix::Zero(n, n);
  const double slack = 1.0 - (n - 1) * floor;
  for (int i = 0; i < n; ++i) {
    double excess = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      m(i, j) = floor + (1.0 - floor) * unitUniform(rng);
      excess += m(i, j) - floor;
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      m(i, j) = (slack <= 0.0 || excess <= 0.0) ? cap : floor + (m(i, j) - floor) * slack / excess;
    }
    // Fold the residual rounding into the largest entry so the row sums to 1.
    double sum = 0.0;
    int largest = i == 0 ? 1 : 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum += m(i, j);
      if (m(i, j) > m(i, largest)) largest = j;
    }
    m(i, largest) += 1.0 - sum;
  }
  return validate(m);
}

/// Symmetric strictly positive off-diagonal block with entries drawn from
/// [0.1, 1], scaled globally so the largest off-diagonal row sum is one; the
/// slack goes on the diagonal so every row and column sums to one.
[[nodiscard]] inline WeightMatrix makeRandomSymmetricBistochastic(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("makeRandomSymmetricBistochastic: need N >= 2");
  std::mt19937_64 rng(seed);
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = 0.1 + 0.9 * unitUniform(rng);
  double maxRow = 0.0;
  for (int i = 0; i < n; ++i) maxRow = std::max(maxRow, m.row(i).sum());
  m /= maxRow;
  for (int i = 0; i < n; ++i) m(i, i) = std::max(0.0, 1.0 - (m.row(i).sum() - m(i, i)));
  return validate(m);
}

[[nodiscard]] inline WeightMatrix make(const WeightSpec& spec) {
  switch (spec.kind) {
    case WeightKind::Uniform: return makeUniform(spec.agents);
    case WeightKind::RandomRowStochastic:
      return makeRandomRowStochastic(
          spec.agents, spec.minOffDiagonal > 0.0 ? spec.minOffDiagonal : 0.5 / (spec.agents - 1),
          spec.seed);
    case WeightKind::RandomSymmetricBistochastic:
      return makeRandomSymmetricBistochastic(spec.agents, spec.seed);
    case WeightKind::Explicit: return validate(spec.explicitWeights);
  }
  throw std::invalid_argument("make: unknown weight kind");
}

/// Smallest off-diagonal weight.
[[nodiscard]] inline double minOffDiagonal(const WeightMatrix& w) {
  const auto n = w.weights.rows();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) lo = std::min(lo, w.weights(i, j));
  return lo;
}

/// Ergodicity coefficient gamma = 1 - (N-2) * min_{i!=j} psi_ij.
[[nodiscard]] inline double gamma(const WeightMatrix& w) {
  if (!w.validated || !w.flags.positiveOffDiagonal)
    throw std::invalid_argument("gamma: weights must be validated with positive off-diagonal");
  return 1.0 - (w.size() - 2) * minOffDiagonal(w);
}

}  // namespace nddc::weights
