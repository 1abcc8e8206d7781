#include "wiphwbc/mpc.hpp"
#include "wiphwbc/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wiphwbc;

namespace {

struct Fixture {
  RobotDescription desc = default_seven_link();
  RobotState s = balanced_pose(desc, RobotState(7));
  MpcConfig cfg;
};

Trajectory constant_reference(const WipmState& at, int N) {
  Trajectory t;
  t.states.assign(static_cast<std::size_t>(N) + 1, at);
  t.controls.assign(static_cast<std::size_t>(N), 0.0);
  t.dt = 0.01;
  return t;
}

}  // namespace

TEST(Mpc, HorizonSteps) {
  MpcConfig cfg;
  EXPECT_EQ(cfg.horizon_steps(), 100);
  cfg.tH = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Mpc, ReferenceWindowPadsWithFinalState) {
  Trajectory t;
  for (int k = 0; k < 5; ++k) t.states.push_back(WipmState::Constant(k));
  const auto w = reference_window(t, 3, 4);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[0], WipmState::Constant(3));
  EXPECT_EQ(w[1], WipmState::Constant(4));
  EXPECT_EQ(w[4], WipmState::Constant(4));
}

TEST(Mpc, MakeReference) {
  Fixture f;
  const WipmParams p = extract_params(f.desc, f.s);
  const WipmState x0 = wipm_state_of(f.desc, f.s);
  const Trajectory same = make_reference(p, x0, x0, 2.0, CostSpec{}, f.cfg);
  for (const auto& X : same.states) EXPECT_LT((X - x0).cwiseAbs().maxCoeff(), 1e-12);

  const Trajectory go = make_reference(p, x0, WipmState(0, 0, 2, 0), 20.0, CostSpec{}, f.cfg);
  EXPECT_EQ(go.states.size(), 2001u);
  EXPECT_LT(std::abs(go.states.back()[kX] - 2.0), 0.01);

  EXPECT_THROW(make_reference(p, x0, x0, 0.5, CostSpec{}, f.cfg), std::invalid_argument);
}

TEST(Mpc, AtRestOnReferenceCommandsNothing) {
  Fixture f;
  f.s.x = 2.0;
  const Trajectory ref = constant_reference(WipmState(0, 0, 2, 0), 2000);
  MpcWarmStart warm;
  const MpcOutput out = mpc_step(0, f.s, f.desc, ref, f.cfg, warm);
  EXPECT_LT(std::abs(out.theta_ddot_ref), 1e-6);
  EXPECT_EQ(out.reference, WipmState(0, 0, 2, 0));
}

TEST(Mpc, TiltCorrectionDrivesWheelsUnderTheBody) {
  Fixture f;
  f.s.x = 2.0;
  f.s.q[0] += 0.05;
  const Trajectory ref = constant_reference(WipmState(0, 0, 2, 0), 2000);
  MpcWarmStart warm;
  const MpcOutput out = mpc_step(0, f.s, f.desc, ref, f.cfg, warm);
  EXPECT_GT(out.state[kTheta], 0.04);
  EXPECT_LT(out.theta_ddot_ref, 0.0);
  EXPECT_GT(heading_acceleration(out.state, out.theta_ddot_ref, out.params), 0.0);

  // The optimized first control beats doing nothing on the horizon cost.
  CostSpec c = f.cfg.cost;
  c.reference = reference_window(ref, 0, 100);
  const std::vector<double> zero(100, 0.0);
  const double idle = trajectory_cost(rollout(out.params, out.state, zero, 0.01), zero, c);
  EXPECT_LT(out.horizon_cost, idle);
}

TEST(Mpc, NearEndOfReferenceStaysFinite) {
  Fixture f;
  const Trajectory ref = constant_reference(WipmState(0, 0, 0, 0), 200);
  MpcWarmStart warm;
  const MpcOutput out = mpc_step(198, f.s, f.desc, ref, f.cfg, warm);
  EXPECT_TRUE(std::isfinite(out.theta_ddot_ref));
  EXPECT_THROW(mpc_step(-1, f.s, f.desc, ref, f.cfg, warm), std::invalid_argument);
}

TEST(Mpc, WarmStartShiftsPreviousSolution) {
  Fixture f;
  f.s.q[0] += 0.03;
  const Trajectory ref = constant_reference(WipmState(0, 0, 0, 0), 2000);
  MpcWarmStart warm;
  mpc_step(0, f.s, f.desc, ref, f.cfg, warm);
  ASSERT_EQ(warm.controls.size(), 100u);
  const MpcOutput again = mpc_step(0, f.s, f.desc, ref, f.cfg, warm);
  EXPECT_TRUE(again.solve_converged);
}

TEST(Mpc, ControllerHoldsOutputOnDegenerateState) {
  Fixture f;
  f.s.q[0] += 0.03;
  MpcController ctl(f.cfg, constant_reference(WipmState(0, 0, 0, 0), 2000));
  const MpcOutput good = ctl.step(0, f.s, f.desc);
  EXPECT_FALSE(good.degenerate);
  RobotState bad = f.s;
  bad.q[0] = 2.5;  // body folded below the axle
  const MpcOutput held = ctl.step(1, bad, f.desc);
  EXPECT_TRUE(held.degenerate);
  EXPECT_EQ(held.theta_ddot_ref, good.theta_ddot_ref);
}
