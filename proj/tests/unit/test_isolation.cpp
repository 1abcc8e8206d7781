#include "oracles.hpp"
#include "wiphwbc/isolation.hpp"
#include "wiphwbc/sim.hpp"

#include <gtest/gtest.h>

using namespace wiphwbc;

namespace {

// Solve the full equations for (xddot, tau) given qddot, eliminating tau1 between the heading
// and base rows by hand. Independent of the isolation algebra.
Eigen::VectorXd torques_by_elimination(const DynamicsTerms& t, double R, const Eigen::VectorXd& qdd) {
  // heading row:  a_xx xdd + a_xq.qdd + h_x = -tau1 / R
  // base row:     a_xq1 xdd + A_qq.row(0).qdd + h_q1 = tau1
  const double lhs = t.a_xx + t.a_xq[0] / R;
  const double rhs = -(t.a_xq.dot(qdd) + t.h[0]) - (t.A_qq.row(0).dot(qdd) + t.h[1]) / R;
  const double xdd = rhs / lhs;
  return t.a_xq * xdd + t.A_qq * qdd + t.h.tail(t.h.size() - 1);
}

}  // namespace

TEST(Isolation, OneLinkUprightClosedForm) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  const IsolatedDynamics iso = isolate(dynamics_terms(d, s), d.wheel.radius);
  const double axx = 2 * 0.5 + 2 * 0.0025 / 0.01 + 2.0;
  EXPECT_NEAR(iso.alpha, 2.0 * 0.3 / (0.1 * axx), 1e-12);
  EXPECT_NEAR(iso.beta, 1.0 / (1.0 + iso.alpha), 1e-12);
  ASSERT_EQ(iso.Acal.rows(), 1);
  EXPECT_GT(iso.Acal(0, 0), 0.0);
}

TEST(Isolation, DecouplingLimit) {
  const RobotDescription d = default_three_link();
  RobotState s(3);
  DynamicsTerms t = dynamics_terms(d, s);
  t.a_xq.setZero();
  t.A.row(0).tail(3).setZero();
  t.A.col(0).tail(3).setZero();
  const IsolatedDynamics iso = isolate(t, d.wheel.radius);
  EXPECT_EQ(iso.alpha, 0.0);
  EXPECT_EQ(iso.beta, 1.0);
  EXPECT_TRUE(iso.Bmat.isZero(0.0));
  EXPECT_LT((iso.Acal - t.A_qq).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(3, 4);
  P0.rightCols(3).setIdentity();
  EXPECT_LT((iso.P - P0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Isolation, RoundTripThroughFullModelProperty) {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 300; ++trial) {
    const RobotDescription d = gen.description(gen.integer(1, 8), trial % 2 == 0);
    const RobotState s = gen.state(d);
    const Eigen::VectorXd qdd = gen.vector(d.dof(), -5, 5);
    const DynamicsTerms t = dynamics_terms(d, s);
    const IsolatedDynamics iso = isolate(t, d.wheel.radius);
    const Eigen::VectorXd tau = inverse_dynamics(iso, qdd);
    EXPECT_LT((tau - torques_by_elimination(t, d.wheel.radius, qdd)).cwiseAbs().maxCoeff(),
              1e-9 * std::max(1.0, tau.cwiseAbs().maxCoeff()));
    const Eigen::VectorXd acc = forward_dynamics(t, actuation_matrix(d), tau);
    EXPECT_LT((acc.tail(d.dof()) - qdd).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((isolated_forward(iso, tau) - qdd).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Isolation, ZeroAccelerationGivesBias) {
  oracle::Gen gen(22);
  const RobotDescription d = gen.description(4, true);
  const IsolatedDynamics iso = isolate(dynamics_terms(d, gen.state(d)), d.wheel.radius);
  EXPECT_LT((inverse_dynamics(iso, Eigen::VectorXd::Zero(4)) - iso.bias).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Isolation, BalancedRestNeedsNoTorque) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  const IsolatedDynamics iso = isolate(dynamics_terms(d, s), d.wheel.radius);
  EXPECT_NEAR(inverse_dynamics(iso, Eigen::VectorXd::Zero(1))[0], 0.0, 1e-15);

  const RobotDescription seven = default_seven_link();
  RobotState b(7);
  b = balanced_pose(seven, b);
  const IsolatedDynamics iso7 = isolate(dynamics_terms(seven, b), seven.wheel.radius);
  // Only the base joint is free of gravity load at balance; it carries no torque.
  EXPECT_NEAR(inverse_dynamics(iso7, Eigen::VectorXd::Zero(7))[0], 0.0, 1e-10);
}

TEST(TorqueRows, ScalarBox) {
  IsolatedDynamics iso;
  iso.Acal = Eigen::MatrixXd::Constant(1, 1, 2.0);
  iso.bias = Eigen::VectorXd::Zero(1);
  const TorqueRows r = torque_constraint_rows(iso, Eigen::VectorXd::Ones(1));
  auto feasible = [&](double qdd) {
    return ((r.C_I * Eigen::VectorXd::Constant(1, qdd) + r.c_I).array() <= 1e-15).all();
  };
  EXPECT_TRUE(feasible(0.5));
  EXPECT_TRUE(feasible(-0.5));
  EXPECT_TRUE(feasible(0.0));
  EXPECT_FALSE(feasible(0.5 + 1e-9));
  EXPECT_FALSE(feasible(-0.5 - 1e-9));
}

TEST(TorqueRows, BoundaryAndSamplingOracle) {
  oracle::Gen gen(23);
  const RobotDescription d = gen.description(3, true);
  const RobotState s = gen.state(d);
  const IsolatedDynamics iso = isolate(dynamics_terms(d, s), d.wheel.radius);
  const Eigen::VectorXd lim = d.torque_limits();
  const TorqueRows r = torque_constraint_rows(iso, lim);
  ASSERT_EQ(r.C_I.rows(), 6);

  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd qdd = gen.vector(3, -60, 60);
    const Eigen::VectorXd tau = iso.Acal * qdd + iso.bias;
    const bool direct = (tau.cwiseAbs().array() <= lim.array()).all();
    const bool rows = ((r.C_I * qdd + r.c_I).array() <= 0.0).all();
    EXPECT_EQ(direct, rows);
  }

  // Acceleration that puts joint 2 exactly at its upper limit.
  Eigen::VectorXd tau = iso.bias;
  tau[1] = lim[1];
  const Eigen::VectorXd qdd = iso.Acal.lu().solve(tau - iso.bias);
  const Eigen::VectorXd val = r.C_I * qdd + r.c_I;
  EXPECT_NEAR(val.cwiseAbs().minCoeff(), 0.0, 1e-9);
}
