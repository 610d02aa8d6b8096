#include "nddc/core.hpp"

#include <catch_amalgamated.hpp>

using namespace nddc;
using Catch::Matchers::WithinAbs;

namespace {
StateMatrix rows(std::initializer_list<std::initializer_list<double>> v) {
  StateMatrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : v) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}
}  // namespace

TEST_CASE("diameter of scalar agents", "[core]") {
  const auto d = diameter(rows({{0.0}, {3.0}, {1.0}}));
  CHECK(d.value == 3.0);
  CHECK(d.pair == AgentPair{0, 1});
}

TEST_CASE("diameter of planar agents", "[core]") {
  const auto d = diameter(rows({{0.0, 0.0}, {3.0, 4.0}}));
  CHECK(d.value == 5.0);
  CHECK(d.pair == AgentPair{0, 1});
}

TEST_CASE("diameter of a consensus state is zero", "[core]") {
  CHECK(diameter(rows({{2.0, 1.0}, {2.0, 1.0}, {2.0, 1.0}})).value == 0.0);
}

TEST_CASE("diameter ties go to the lexicographically smallest pair", "[core]") {
  const auto d = diameter(rows({{0.0}, {1.0}, {-1.0}, {0.0}}));
  CHECK(d.value == 2.0);
  CHECK(d.pair == AgentPair{1, 2});
  const auto e = diameter(rows({{0.0}, {1.0}, {0.0}}));
  CHECK(e.pair == AgentPair{0, 1});
}

TEST_CASE("diameter rejects non-finite states and single agents", "[core]") {
  CHECK_THROWS_AS(diameter(rows({{0.0}, {std::nan("")}})), NonFiniteState);
  CHECK_THROWS_AS(diameter(rows({{0.0}, {HUGE_VAL}})), NonFiniteState);
  CHECK_THROWS_AS(diameter(rows({{1.0}})), std::invalid_argument);
}

TEST_CASE("diameter is translation invariant and homogeneous", "[core][property]") {
  for (int seed = 0; seed < 50; ++seed) {
    std::srand(static_cast<unsigned>(seed));
    StateMatrix x = StateMatrix::Random(5, 3);
    Eigen::RowVectorXd shift = Eigen::RowVectorXd::Random(3);
    StateMatrix y = (x.rowwise() + shift) * 2.5;
    CHECK_THAT(diameter(y).value, WithinAbs(2.5 * diameter(x).value, 1e-12));
  }
}

TEST_CASE("mean of agents", "[core]") {
  const auto m = mean(rows({{1.0, 0.0}, {3.0, 2.0}}));
  CHECK(m(0) == 2.0);
  CHECK(m(1) == 1.0);
  OpinionState s{rows({{1.0}, {2.0}, {6.0}}), 0.5};
  CHECK(mean(s)(0) == 3.0);
  CHECK(s.agents() == 3);
  CHECK(s.dim() == 1);
}

TEST_CASE("history buffer addresses by absolute mesh index", "[core]") {
  HistoryBuffer<double> h(0.25, 2, 5);
  h.setFirstIndex(-2);
  for (int k = -2; k <= 0; ++k) h.push(k, 10.0 * k);
  CHECK(h.oldest() == -2);
  CHECK(h.newest() == 0);
  CHECK(h.state(-1) == -1.0);
  CHECK(h.derivative(-2) == -20.0);
  CHECK(h.timeOf(-2) == -0.5);
  for (int k = 1; k <= 7; ++k) h.push(k, 10.0 * k);
  CHECK(h.size() == 5);
  CHECK(h.oldest() == 3);
  CHECK(h.state(3) == 3.0);
  CHECK(h.state(7) == 7.0);
  CHECK_THROWS_AS(h.state(2), std::out_of_range);
  CHECK_THROWS_AS(h.state(8), std::out_of_range);
}

TEST_CASE("history buffer rejects bad construction", "[core]") {
  CHECK_THROWS_AS(HistoryBuffer<double>(0.0, 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(HistoryBuffer<double>(0.1, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(HistoryBuffer<double>(0.1, -1, 4), std::invalid_argument);
}

TEST_CASE("initial datum kinds", "[core]") {
  const auto c = InitialDatum::constant(rows({{1.0}, {0.0}}));
  CHECK(c.kind() == DatumKind::Constant);
  CHECK(c.state(-0.3)(0, 0) == 1.0);
  CHECK(c.derivative(-0.3).isZero());
  const auto l = InitialDatum::linear(rows({{0.0}}), rows({{2.0}}));
  CHECK(l.state(-0.5)(0, 0) == -1.0);
  CHECK(l.derivative(-0.5)(0, 0) == 2.0);
  CHECK_THROWS(InitialDatum::linear(rows({{0.0}}), rows({{1.0}, {2.0}})));
  const auto t = InitialDatum::table({{0.0, rows({{1.0}}), rows({{0.0}})},
                                      {-1.0, rows({{2.0}}), rows({{0.0}})}});
  CHECK(t.samples().front().time == -1.0);
  CHECK(t.rows() == 1);
  CHECK_THROWS_AS(t.state(0.0), std::logic_error);
}

TEST_CASE("enum names", "[core]") {
  CHECK(toString(ModelKind::TwoAgentReaction) == "two-agent-reaction");
  CHECK(toString(DerivativeMode::StoredRhs) == "stored-rhs");
  CHECK(toString(Classification::Inconclusive) == "Inconclusive");
  CHECK(isTwoAgent(ModelKind::TwoAgentTransmission));
  CHECK_FALSE(isTransmission(ModelKind::ReactionN));
}
