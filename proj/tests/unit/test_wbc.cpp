#include "oracles.hpp"
#include "wiphwbc/isolation.hpp"
#include "wiphwbc/sim.hpp"
#include "wiphwbc/wbc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace wiphwbc;

namespace {

// Task value by the transform-chain oracle.
Eigen::VectorXd task_value_oracle(const RobotDescription& d, const Eigen::VectorXd& pos, TaskKind kind) {
  const oracle::Fk f = oracle::fk(d, pos);
  const Eigen::Vector2d axle(pos[0], d.wheel.radius);
  switch (kind) {
    case TaskKind::com_angle: {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      double M = 0.0;
      for (int k = 0; k < d.dof(); ++k) {
        c += d.links[k].mass * (f.coms[k] - axle);
        M += d.links[k].mass;
      }
      return Eigen::VectorXd::Constant(1, std::atan2(c.x() / M, c.y() / M));
    }
    case TaskKind::ee_position:
      return f.tip - axle;
    case TaskKind::ee_orientation:
      return Eigen::VectorXd::Constant(1, pos.tail(d.dof()).sum());
    default:
      return pos.tail(d.dof());
  }
}

TaskSpec task(TaskKind kind, int rows, double w, double kp, double kd) {
  TaskSpec t;
  t.kind = kind;
  t.weight = w;
  t.Kp = Eigen::VectorXd::Constant(rows, kp);
  t.Kd = Eigen::VectorXd::Constant(rows, kd);
  t.desired = Eigen::VectorXd::Zero(rows);
  t.desired_dot = Eigen::VectorXd::Zero(rows);
  t.desired_ddot = Eigen::VectorXd::Zero(rows);
  return t;
}

}  // namespace

TEST(TaskJacobian, OneLinkTheta) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  s.q[0] = 0.3;
  s.qdot[0] = 1.1;
  const TaskKinematics tk = task_jacobian(d, s, TaskKind::com_angle);
  EXPECT_NEAR(tk.J(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(tk.Jdot_qdot[0], 0.0, 1e-14);
  EXPECT_NEAR(tk.value[0], 0.3, 1e-14);
}

TEST(TaskJacobian, OrientationAndPostureRows) {
  oracle::Gen gen(61);
  const RobotDescription d = gen.description(4);
  const RobotState s = gen.state(d);
  const TaskKinematics phi = task_jacobian(d, s, TaskKind::ee_orientation);
  EXPECT_TRUE(phi.J.isOnes(0.0));
  EXPECT_NEAR(phi.rate[0], s.qdot.sum(), 1e-15);
  EXPECT_EQ(phi.Jdot_qdot[0], 0.0);

  const TaskKinematics post = task_jacobian(d, s, TaskKind::posture);
  ASSERT_EQ(post.J.rows(), 3);
  EXPECT_TRUE(post.J.col(0).isZero(0.0));
  EXPECT_TRUE(post.J.rightCols(3).isIdentity(0.0));
  EXPECT_EQ(task_rows(TaskKind::posture, 4), 3);
  EXPECT_EQ(task_rows(TaskKind::regularization, 4), 4);
  EXPECT_EQ(task_rows(TaskKind::ee_position, 4), 2);
}

TEST(TaskJacobian, MatchesFiniteDifferencesOfOracle) {
  oracle::Gen gen(62);
  for (int trial = 0; trial < 50; ++trial) {
    const RobotDescription d = gen.description(trial % 2 ? 3 : gen.integer(2, 7));
    const RobotState s = gen.state(d);
    const int m = d.dof() + 1;
    for (TaskKind kind : {TaskKind::com_angle, TaskKind::ee_position, TaskKind::ee_orientation}) {
      const TaskKinematics tk = task_jacobian(d, s, kind);
      EXPECT_LT((tk.value - task_value_oracle(d, s.position(), kind)).cwiseAbs().maxCoeff(), 1e-12);
      for (int j = 0; j < d.dof(); ++j) {
        const Eigen::VectorXd fd = oracle::diff5(
            [&](const Eigen::VectorXd& p) { return task_value_oracle(d, p, kind); }, s.position(),
            oracle::unit(m, j + 1), 1e-3);
        EXPECT_LT((fd - tk.J.col(j)).cwiseAbs().maxCoeff(), 1e-6);
      }
      // Jdot qdot = d/dt (J qdot) with qdot frozen, along the flow.
      const Eigen::VectorXd fd_bias = oracle::diff5(
          [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            RobotState t = s;
            t.set_position(p);
            return task_jacobian(d, t, kind).rate;
          },
          s.position(), s.velocity(), 1e-3);
      EXPECT_LT((fd_bias - tk.Jdot_qdot).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(ControlStep, PureRegularizationAtRest) {
  const RobotDescription d = default_three_link();
  RobotState s(3);
  s.q << 0.2, -0.3, 0.4;
  const auto tasks = {task(TaskKind::regularization, 3, 1.0, 0.0, 5.0)};
  const WbcOutput out = control_step(d, s, tasks, MpcOutput{}, Eigen::VectorXd::Constant(3, 1e3));
  ASSERT_EQ(out.qp_status, QpStatus::optimal);
  EXPECT_LT(out.qddot.cwiseAbs().maxCoeff(), 1e-12);
  const IsolatedDynamics iso = isolate(dynamics_terms(d, s), d.wheel.radius);
  EXPECT_LT((out.torques - iso.bias).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(out.active_constraints.empty());
}

TEST(ControlStep, HeavyThetaTaskIsAchieved) {
  oracle::Gen gen(63);
  const RobotDescription d = default_three_link();
  for (int trial = 0; trial < 20; ++trial) {
    RobotState s = gen.state(d, 1.0);
    s = balanced_pose(d, s);
    s.q[0] += gen.uniform(-0.1, 0.1);
    MpcOutput ref;
    ref.theta_ddot_ref = gen.uniform(-3, 3);
    ref.theta_ref = gen.uniform(-0.05, 0.05);
    ref.thetadot_ref = gen.uniform(-0.2, 0.2);
    const std::vector<TaskSpec> tasks = {task(TaskKind::com_angle, 1, 1e4, 60.0, 16.0)};
    WbcConfig cfg;
    cfg.joint_limits = false;
    const WbcOutput out = control_step(d, s, tasks, ref, Eigen::VectorXd::Constant(3, 1e6), cfg);
    ASSERT_EQ(out.qp_status, QpStatus::optimal);
    const TaskKinematics tk = task_jacobian(d, s, TaskKind::com_angle);
    const double cmd =
        ref.theta_ddot_ref - 60.0 * (tk.value[0] - ref.theta_ref) - 16.0 * (tk.rate[0] - ref.thetadot_ref);
    EXPECT_NEAR(tk.J.row(0).dot(out.qddot), cmd - tk.Jdot_qdot[0], 1e-6);
  }
}

TEST(ControlStep, TinyBaseTorqueLimitIsPinned) {
  const RobotDescription d = default_three_link();
  RobotState s = balanced_pose(d, RobotState(3));
  s.q[0] += 0.1;
  MpcOutput ref;
  ref.theta_ddot_ref = -5.0;
  Eigen::VectorXd limits = d.torque_limits();
  limits[0] = 0.05;
  const WbcOutput out = control_step(d, s, unified_tasks(d, s, TaskGains{}), ref, limits);
  ASSERT_EQ(out.qp_status, QpStatus::optimal);
  EXPECT_NEAR(std::abs(out.torques[0]), 0.05, 1e-8);
  const bool row_active = std::find(out.active_constraints.begin(), out.active_constraints.end(), 0) !=
                              out.active_constraints.end() ||
                          std::find(out.active_constraints.begin(), out.active_constraints.end(), 3) !=
                              out.active_constraints.end();
  EXPECT_TRUE(row_active);
}

TEST(ControlStep, TorquesWithinLimitsProperty) {
  oracle::Gen gen(64);
  const RobotDescription d = default_seven_link();
  const Eigen::VectorXd limits = d.torque_limits();
  for (int trial = 0; trial < 100; ++trial) {
    RobotState s = gen.state(d, 1.5);
    s.q[0] = 0.0;
    s = balanced_pose(d, s);
    s.q[0] += gen.uniform(-0.3, 0.3);
    MpcOutput ref;
    ref.theta_ddot_ref = gen.uniform(-30, 30);
    const auto tasks = trial % 2 ? unified_tasks(d, s, TaskGains{}) : decoupled_tasks(d, s, TaskGains{});
    const WbcOutput out = control_step(d, s, tasks, ref, limits);
    EXPECT_EQ(out.qp_status, QpStatus::optimal);
    EXPECT_LE((out.torques.cwiseAbs() - limits).maxCoeff(), 1e-8);
  }
}

TEST(ControlStep, JointLimitBraking) {
  const RobotDescription d = default_three_link();
  RobotState s = balanced_pose(d, RobotState(3));
  s.q[2] = d.links[2].angle_max - 0.1;
  s.qdot[2] = 3.0;  // heading for the stop
  WbcConfig cfg;
  const WbcOutput out = control_step(d, s, unified_tasks(d, balanced_pose(d, RobotState(3)), TaskGains{}),
                                     MpcOutput{}, Eigen::VectorXd::Constant(3, 1e3), cfg);
  ASSERT_EQ(out.qp_status, QpStatus::optimal);
  ASSERT_FALSE(out.joint_limits_dropped);
  const double T = cfg.limit_horizon;
  EXPECT_LE(s.q[2] + T * s.qdot[2] + 0.5 * T * T * out.qddot[2], d.links[2].angle_max - cfg.joint_limit_margin + 1e-9);
}

TEST(ControlStep, ConflictingLimitRowsAreDropped) {
  const RobotDescription d = default_three_link();
  RobotState s = balanced_pose(d, RobotState(3));
  s.q[2] = d.links[2].angle_max;
  s.qdot[2] = 20.0;  // cannot be stopped with the torque available
  const Eigen::VectorXd limits = Eigen::VectorXd::Constant(3, 0.5);
  const WbcOutput out = control_step(d, s, unified_tasks(d, s, TaskGains{}), MpcOutput{}, limits);
  EXPECT_TRUE(out.joint_limits_dropped);
  EXPECT_EQ(out.qp_status, QpStatus::optimal);
  EXPECT_LE((out.torques.cwiseAbs() - limits).maxCoeff(), 1e-8);
}

TEST(ControlStep, TaskSets) {
  const RobotDescription d = default_seven_link();
  const RobotState s = balanced_pose(d, RobotState(7));
  const auto unified = unified_tasks(d, s, TaskGains{});
  ASSERT_EQ(unified.size(), 4u);
  EXPECT_EQ(unified[0].kind, TaskKind::com_angle);
  EXPECT_EQ(unified[1].kind, TaskKind::ee_position);
  EXPECT_EQ(unified[2].kind, TaskKind::ee_orientation);
  const auto decoupled = decoupled_tasks(d, s, TaskGains{});
  for (const auto& t : decoupled) {
    EXPECT_NE(t.kind, TaskKind::ee_position);
    EXPECT_NE(t.kind, TaskKind::ee_orientation);
  }
  EXPECT_EQ(to_string(TaskKind::posture), "posture");
  EXPECT_THROW(control_step(d, s, {}, MpcOutput{}, d.torque_limits()), std::invalid_argument);
}
