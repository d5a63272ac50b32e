#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "numlab/core.hpp"
#include "numlab/errors.hpp"
#include "numlab/scalar_dynamics.hpp"
#include "support.hpp"

using namespace numlab;

namespace {

GDConfig cfg_with(double delta, std::size_t iters) {
  GDConfig c;
  c.step_size = delta;
  c.max_iters = iters;
  return c;
}

Trajectory sequence(const std::vector<double>& xs) {
  Trajectory t;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    t.states.push_back(scalar_state(xs[i]));
    t.losses.push_back(0.0);
    t.grad_norms.push_back(1.0);
    t.iter_indices.push_back(i);
  }
  return t;
}

}  // namespace

TEST(GDConfig, RejectsBadFields) {
  GDConfig c;
  EXPECT_NO_THROW(c.validate());
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = GDConfig{};
  c.max_period = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = GDConfig{};
  c.grad_tol = 1e13;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = GDConfig{};
  c.record_stride = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = GDConfig{};
  c.orbit_tol = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Iterate, IdentityMapKeepsState) {
  const auto traj = iterate([](const State& x) { return x; }, scalar_state(0.7), cfg_with(0.1, 100));
  EXPECT_EQ(traj.size(), 101u);
  for (const auto& s : traj.states) EXPECT_EQ(s[0], 0.7);
  EXPECT_EQ(traj.stop, StopReason::MaxIters);
}

TEST(Iterate, LinearMapDecaysGeometrically) {
  const double d = 0.1;
  const auto traj = iterate([d](const State& x) { return State(x - d * 2.0 * x); },
                            scalar_state(1.0), cfg_with(d, 50));
  for (std::size_t i = 0; i < traj.size(); ++i)
    EXPECT_NEAR(traj.states[i][0], std::pow(0.8, static_cast<double>(traj.iter_indices[i])), 1e-15);
}

TEST(Iterate, PowerMapDivergesAndStopsEarly) {
  const scalar::Problem p = scalar::Power{4};
  const auto traj = iterate(scalar::make_dynamics(p, 0.1), scalar_state(3.0), cfg_with(0.1, 1000));
  EXPECT_EQ(traj.stop, StopReason::Diverged);
  EXPECT_GE(std::abs(traj.final_state()[0]), 1e12);
  EXPECT_LT(traj.final_iter(), 1000u);
  EXPECT_EQ(classify_tail(traj, cfg_with(0.1, 1000)).kind, TailKind::Divergent);
}

TEST(Iterate, NonFiniteIsReportedNotThrown) {
  const auto traj = iterate(
      [](const State& x) { return State(x.array() * std::numeric_limits<double>::infinity()); },
      scalar_state(1.0), cfg_with(0.1, 10));
  EXPECT_EQ(traj.stop, StopReason::NonFinite);
  EXPECT_TRUE(traj.diverged());
  EXPECT_EQ(classify_tail(traj, cfg_with(0.1, 10)).kind, TailKind::Divergent);
}

TEST(Iterate, RejectsNonFiniteStart) {
  EXPECT_THROW(iterate([](const State& x) { return x; },
                       scalar_state(std::numeric_limits<double>::quiet_NaN()), cfg_with(0.1, 5)),
               InvalidArgument);
}

TEST(Iterate, StopsOnGradTol) {
  const double d = 0.25;
  Dynamics dyn{[d](const State& x) { return State(x - d * 2.0 * x); },
               [](const State& x) { return x.squaredNorm(); }, gd_grad_norm(d)};
  GDConfig c = cfg_with(d, 10000);
  c.grad_tol = 1e-8;
  const auto traj = iterate(dyn, scalar_state(1.0), c);
  EXPECT_EQ(traj.stop, StopReason::Converged);
  EXPECT_LT(traj.final_grad_norm(), 1e-8);
  EXPECT_NEAR(traj.final_grad_norm(), 2.0 * std::abs(traj.final_state()[0]), 1e-20);
}

TEST(Iterate, StrideKeepsDenseTail) {
  GDConfig c = cfg_with(0.1, 1000);
  c.record_stride = 100;
  const auto traj = iterate([](const State& x) { return State(0.5 * x); }, scalar_state(1.0), c);
  const auto& idx = traj.iter_indices;
  ASSERT_EQ(traj.losses.size(), traj.size());
  ASSERT_EQ(traj.grad_norms.size(), traj.size());
  ASSERT_EQ(idx.size(), traj.size());
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
  EXPECT_EQ(idx.front(), 0u);
  EXPECT_EQ(idx.back(), 1000u);
  // Last 4 * max_period states are consecutive.
  const std::size_t w = c.tail_window();
  for (std::size_t i = idx.size() - w + 1; i < idx.size(); ++i) EXPECT_EQ(idx[i], idx[i - 1] + 1);
  for (std::size_t i = 0; i + w < idx.size(); ++i) EXPECT_EQ(idx[i] % 100, 0u);
  EXPECT_NO_THROW(classify_tail(traj, c));
}

TEST(Iterate, DeterministicBitForBit) {
  const scalar::Problem p = scalar::Quartic{};
  const auto a = iterate(scalar::make_dynamics(p, 0.15), scalar_state(-1.3), cfg_with(0.15, 500));
  const auto b = iterate(scalar::make_dynamics(p, 0.15), scalar_state(-1.3), cfg_with(0.15, 500));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.states[i][0], b.states[i][0]);
    EXPECT_EQ(a.losses[i], b.losses[i]);
  }
}

TEST(ClassifyTail, ConstantTail) {
  const auto t = classify_tail(sequence(std::vector<double>(40, 1.0)), GDConfig{});
  EXPECT_EQ(t.kind, TailKind::FixedPoint);
  ASSERT_TRUE(t.limit_state);
  EXPECT_EQ((*t.limit_state)[0], 1.0);
  EXPECT_FALSE(t.period);
}

TEST(ClassifyTail, AlternatingTail) {
  std::vector<double> xs;
  for (int i = 0; i < 40; ++i) xs.push_back(i % 2 ? -0.0025 : 0.0025);
  const auto t = classify_tail(sequence(xs), GDConfig{});
  EXPECT_EQ(t.kind, TailKind::PeriodicOrbit);
  EXPECT_EQ(t.period, 2u);
  EXPECT_NEAR(*t.amplitude, 0.0025, 1e-15);
  EXPECT_FALSE(t.limit_state);
}

TEST(ClassifyTail, PeriodThreeIsSmallestPeriod) {
  std::vector<double> xs;
  for (int i = 0; i < 60; ++i) xs.push_back(std::vector<double>{0.0, 1.0, 3.0}[i % 3]);
  const auto t = classify_tail(sequence(xs), GDConfig{});
  EXPECT_EQ(t.kind, TailKind::PeriodicOrbit);
  EXPECT_EQ(t.period, 3u);
  EXPECT_DOUBLE_EQ(*t.amplitude, 1.5);
}

TEST(ClassifyTail, PeriodBeyondMaxIsUndecided) {
  std::vector<double> xs;
  for (int i = 0; i < 80; ++i) xs.push_back(i % 11);
  GDConfig c;
  c.max_period = 8;
  EXPECT_EQ(classify_tail(sequence(xs), c).kind, TailKind::Undecided);
}

TEST(ClassifyTail, LargeStateWithoutStopIsDivergent) {
  std::vector<double> xs;
  for (int i = 0; i < 40; ++i) xs.push_back(std::pow(2.0, 30 + i));
  EXPECT_EQ(classify_tail(sequence(xs), GDConfig{}).kind, TailKind::Divergent);
}

TEST(ClassifyTail, ShortTailThrows) {
  EXPECT_THROW(classify_tail(sequence(std::vector<double>(10, 1.0)), GDConfig{}), InsufficientTail);
  EXPECT_THROW(classify_tail(Trajectory{}, GDConfig{}), InsufficientTail);
}

TEST(ClassifyTail, CuspOrbitAmplitude) {
  const double d = 0.1;
  GDConfig c = cfg_with(d, 10000);
  const auto traj = iterate(scalar::make_dynamics(scalar::SqrtCusp{}, d), scalar_state(0.3), c);
  const auto t = classify_tail(traj, c);
  EXPECT_EQ(t.kind, TailKind::PeriodicOrbit);
  EXPECT_EQ(t.period, 2u);
  EXPECT_NEAR(*t.amplitude, 0.0025, 1e-12);
}

// Property: any exact fixed point of the map is classified FixedPoint.
TEST(ClassifyTail, ExactFixedPointsProperty) {
  testing_support::Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = gen.uniform(-0.99, 0.99);
    const double xs = gen.uniform(-5.0, 5.0);
    // m(x) = xs + a (x - xs) has m(xs) = xs exactly.
    auto m = [a, xs](const State& x) { return State(xs + a * (x.array() - xs)); };
    GDConfig c = cfg_with(0.1, static_cast<std::size_t>(gen.integer(32, 200)));
    const auto t = classify_tail(iterate(m, scalar_state(xs), c), c);
    EXPECT_EQ(t.kind, TailKind::FixedPoint);
    EXPECT_EQ((*t.limit_state)[0], xs);
  }
}

TEST(FiniteDiff, Quadratic) {
  const auto g = finite_diff_grad([](const State& x) { return x.squaredNorm(); }, scalar_state(3.0));
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantGivesZero) {
  const auto g = finite_diff_grad([](const State&) { return 4.2; }, State::Ones(5));
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(FiniteDiff, ExplicitStep) {
  const auto g = finite_diff_grad([](const State& x) { return std::pow(x[0], 3); }, scalar_state(2.0), 1e-3);
  EXPECT_NEAR(g[0], 12.0 + 1e-6, 1e-9);  // central difference error h^2 f'''/6
}

TEST(FiniteDiff, NonFiniteProbeThrows) {
  EXPECT_THROW(finite_diff_grad([](const State& x) { return std::log(x[0]); }, scalar_state(0.0), 1e-3),
               NonFiniteValue);
}

TEST(Trajectory, CsvHeaderAndRows) {
  const auto traj = iterate([](const State& x) { return State(0.5 * x); }, State::Ones(2), cfg_with(0.1, 3));
  std::ostringstream os;
  traj.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,loss,grad_norm,state_0,state_1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
