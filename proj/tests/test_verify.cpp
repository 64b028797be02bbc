#include "mcflab/mcflab.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mcflab;

TEST(BoundConstants, KnownValues) {
  const BoundConstants b = compute_bound_constants(std::sqrt(2.0), 1.0, 1.0, 0.3);
  EXPECT_NEAR(b.c0, 1.0, 1e-15);
  EXPECT_NEAR(b.c1, 2.0, 1e-15);
  EXPECT_NEAR(b.bound_p(0.0), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(b.eps1, 0.0);
  EXPECT_DOUBLE_EQ(b.a0, 0.6);
  for (int m = 2; m <= 5; ++m) EXPECT_DOUBLE_EQ(compute_bound_constants(1.0, m - 1.0, 1.0, 0.0).eps0, (m - 1) / 4.0);
  EXPECT_DOUBLE_EQ(compute_bound_constants(1.0, -2.0, -3.0, 0.0).eps0, -1.0);
  EXPECT_DOUBLE_EQ(compute_bound_constants(1.0, -2.0, -3.0, 0.0).eps1, -1.0);
  EXPECT_THROW(compute_bound_constants(0.0, 1.0, 1.0, 0.0), NotAreaDecreasingError);
  EXPECT_THROW(compute_bound_constants(-0.5, 1.0, 1.0, 0.0), NotAreaDecreasingError);
}

TEST(BoundConstants, PBoundSolvesTheLogisticOde) {
  // b(t) = 2 c0 e^{eps0 t} / sqrt(1 + c0^2 e^{2 eps0 t}) solves b' = eps0 b (4 - b^2) / 4
  const BoundConstants b = compute_bound_constants(0.7, 1.0, 1.0, 0.0);
  for (double t : {0.0, 0.5, 2.0, 7.0}) {
    const double h = 1e-5;
    const double db = (b.bound_p(t + h) - b.bound_p(t - h)) / (2.0 * h);
    const double v = b.bound_p(t);
    EXPECT_NEAR(db, b.eps0 * v * (4.0 - v * v) / 4.0, 1e-8);
    EXPECT_LE(b.bound_df2(t + 1.0), b.bound_df2(t));
  }
}

TEST(DecayBounds, NotApplicableWithoutConditionA) {
  const BoundConstants b = compute_bound_constants(1.0, 1.0, 1.0, 0.0);
  const DecayReport r = check_decay_bounds({TimeSeriesRecord{}}, b, false, 1e-6);
  EXPECT_FALSE(r.applicable);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.note.empty());
}

TEST(DecayBounds, MarginsAgainstSyntheticSeries) {
  const BoundConstants b = compute_bound_constants(1.0, 1.0, 1.0, 0.5);
  std::vector<TimeSeriesRecord> s;
  for (double t : {0.0, 1.0, 2.0}) {
    TimeSeriesRecord r;
    r.t = t;
    r.min_p = b.bound_p(t);
    r.max_df2 = b.bound_df2(t);
    r.max_H2 = b.bound_H2(t);
    r.max_theta = b.bound_theta(t);
    s.push_back(r);
  }
  EXPECT_TRUE(check_decay_bounds(s, b, true, 1e-12).pass);
  s[1].min_p -= 1e-6;
  const DecayReport r = check_decay_bounds(s, b, true, 1e-9);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.worst.margin_p, -1e-6, 1e-12);
  EXPECT_TRUE(check_decay_bounds(s, b, true, 1e-5).pass);
}

TEST(TimeDerivative, ExactOnQuadratics) {
  const auto u = [](double t) { return 1.0 - 2.0 * t + 3.0 * t * t; };
  for (const auto& [dp, dn] : std::vector<std::pair<double, double>>{{0.1, 0.1}, {0.1, 0.03}, {1e-3, 0.7}}) {
    const double t = 0.4;
    EXPECT_NEAR(detail::time_derivative(u(t - dp), u(t), u(t + dn), dp, dn), -2.0 + 6.0 * t, 1e-9);
  }
}

TEST(Residuals, PEquationConvergesOnTheEquivariantFlow) {
  const CheckpointResidual r16 = oracle::p_residual_at(16, 0.5, 0.05);
  const CheckpointResidual r32 = oracle::p_residual_at(32, 0.5, 0.05);
  EXPECT_DOUBLE_EQ(r32.t, 0.05);
  EXPECT_GT(r16.L2 / r32.L2, 2.5);
  EXPECT_LT(r32.L2, 0.05);
}

TEST(Residuals, PEquationOnTheCircleDriftAtSmallStep) {
  // the reduced grid has no spatial error; what remains is the O(dt^2) time difference
  app::ScenarioConfig cfg = app::preset("cylinder_drift");
  cfg.dt_max = 5e-4;
  const app::Setup s = app::build_setup(cfg);
  FlowState st(*s.initial);
  for (int k = 0; k < 10; ++k) advance(st, s.params);
  const Snapshot prev{st.t, st.field.values()};
  advance(st, s.params);
  const Snapshot cur{st.t, st.field.values()};
  advance(st, s.params);
  const Snapshot next{st.t, st.field.values()};
  const CheckpointResidual r =
      residual_p_evolution(*s.initial, {prev, cur, next}, node_curvatures(s.initial->grid()));
  EXPECT_LE(r.Linf, 1e-8);
}

TEST(Residuals, SnapshotTimesMustIncrease) {
  const GraphMapField f = oracle::equivariant_field(16, 0.5);
  const Snapshot a{0.0, f.values()};
  EXPECT_THROW(residual_p_evolution(f, {a, a, a}, node_curvatures(f.grid())), ConfigurationError);
}

TEST(Inequalities, HoldOnTheEquivariantFlow) {
  const GraphMapField f = oracle::equivariant_field(32, 0.5);
  FlowState st(f);
  FlowParams P;
  for (int k = 0; k < 20; ++k) advance(st, P);
  const Snapshot prev{st.t, st.field.values()};
  advance(st, P);
  const Snapshot cur{st.t, st.field.values()};
  advance(st, P);
  const Snapshot next{st.t, st.field.values()};
  const InequalityReport r =
      check_H_and_theta_inequalities(f, {prev, cur, next}, node_curvatures(f.grid()), 0.0, next.t - cur.t);
  EXPECT_GT(r.evaluated, 0);
  EXPECT_TRUE(r.pass) << r.worst_slack_H << " " << r.worst_slack_theta;
  EXPECT_LE(r.worst_w_excess, 1e-12);
}

TEST(Budget, RelativeError) {
  EXPECT_TRUE(volume_budget(10.0, 9.0, 1.01).pass);
  EXPECT_FALSE(volume_budget(10.0, 9.0, 1.1).pass);
  EXPECT_NEAR(volume_budget(10.0, 9.0, 1.1).relative_error, 0.1 / 1.1, 1e-15);
  EXPECT_TRUE(volume_budget(5.0, 5.0, 0.0).pass);
  EXPECT_FALSE(volume_budget(5.0, 5.0, 1e-3).pass);
}
