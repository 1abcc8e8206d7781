#include "oracles.hpp"
#include "wiphwbc/dynamics.hpp"
#include "wiphwbc/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wiphwbc;

TEST(Kinematics, OneLinkUprightAndHorizontal) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  auto p = link_poses(d, s);
  EXPECT_NEAR(p[0].com.x(), 0.0, 1e-15);
  EXPECT_NEAR(p[0].com.y(), 0.1 + 0.3, 1e-15);

  s.q[0] = M_PI / 2;
  p = link_poses(d, s);
  EXPECT_NEAR(p[0].com.x(), 0.3, 1e-15);
  EXPECT_NEAR(p[0].com.y(), 0.1, 1e-15);
}

TEST(Kinematics, MatchesTransformChainOracle) {
  oracle::Gen gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const RobotDescription d = gen.description(trial % 2 ? 3 : gen.integer(1, 7));
    const RobotState s = gen.state(d);
    const auto poses = link_poses(d, s);
    const oracle::Fk f = oracle::fk(d, s.position());
    double phi = 0.0;
    for (int k = 0; k < d.dof(); ++k) {
      phi += s.q[k];
      EXPECT_LT((poses[k].joint - f.joints[k]).norm(), 1e-12);
      EXPECT_LT((poses[k].com - f.coms[k]).norm(), 1e-12);
      EXPECT_NEAR(poses[k].angle, phi, 1e-12);
    }
    const Eigen::Vector2d axle(s.x, d.wheel.radius);
    EXPECT_LT((end_effector_position(d, s) - (f.tip - axle)).norm(), 1e-12);
    EXPECT_NEAR(end_effector_angle(s), s.q.sum(), 1e-15);
  }
}

TEST(MassMatrix, OneLinkClosedForm) {
  const RobotDescription d = default_one_link();
  for (double q : {-1.0, 0.0, 0.3, 1.2}) {
    RobotState s(1);
    s.q[0] = q;
    const Eigen::MatrixXd A = mass_matrix(d, s);
    EXPECT_NEAR(A(0, 0), 2 * 0.5 + 2 * 0.0025 / 0.01 + 2.0, 1e-12);
    EXPECT_NEAR(A(0, 1), 2.0 * 0.3 * std::cos(q), 1e-12);
    EXPECT_NEAR(A(1, 1), 2.0 * 0.09 + 0.06, 1e-12);
  }
}

TEST(MassMatrix, SymmetricPositiveDefiniteProperty) {
  oracle::Gen gen(2);
  for (int trial = 0; trial < 300; ++trial) {
    const RobotDescription d = gen.description(gen.integer(1, 8));
    const Eigen::MatrixXd A = mass_matrix(d, gen.state(d));
    EXPECT_EQ((A - A.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(A).info(), Eigen::Success);
  }
}

TEST(MassMatrix, MatchesKineticEnergyOracle) {
  oracle::Gen gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const RobotDescription d = gen.description(3);
    const RobotState s = gen.state(d);
    const Eigen::MatrixXd A = mass_matrix(d, s);
    const Eigen::MatrixXd ref = oracle::mass_matrix(d, s.position());
    EXPECT_LT((A - ref).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(MassMatrix, KineticEnergyHessian) {
  // d^2 T / d qdot^2 by central differences of total_energy's kinetic part.
  oracle::Gen gen(4);
  const RobotDescription d = gen.description(3);
  const RobotState s = gen.state(d);
  const Eigen::MatrixXd A = mass_matrix(d, s);
  const double h = 1e-3;
  auto T = [&](const Eigen::VectorXd& v) {
    RobotState t = s;
    t.set_velocity(v);
    return total_energy(d, t).kinetic;
  };
  const Eigen::VectorXd v = s.velocity();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const Eigen::VectorXd ei = h * oracle::unit(4, i), ej = h * oracle::unit(4, j);
      const double H = (T(v + ei + ej) - T(v + ei - ej) - T(v - ei + ej) + T(v - ei - ej)) / (4 * h * h);
      EXPECT_NEAR(H, A(i, j), 1e-6);
    }
}

TEST(MassMatrix, PartialsMatchFiniteDifferences) {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    const RobotDescription d = gen.description(gen.integer(1, 7));
    const RobotState s = gen.state(d);
    const auto dA = mass_matrix_partials(d, s);
    const int m = d.dof() + 1;
    ASSERT_EQ(static_cast<int>(dA.size()), m);
    EXPECT_TRUE(dA[0].isZero(0.0));
    for (int c = 1; c < m; ++c) {
      const Eigen::MatrixXd fd = oracle::diff5(
          [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
            RobotState t = s;
            t.set_position(p);
            return mass_matrix(d, t);
          },
          s.position(), oracle::unit(m, c), 1e-3);
      EXPECT_LT((fd - dA[c]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(BiasTerms, AtRestNoCoriolisOrFriction) {
  oracle::Gen gen(6);
  const RobotDescription d = gen.description(4, true);
  RobotState s = gen.state(d);
  s.xdot = 0;
  s.qdot.setZero();
  const BiasTerms b = bias_terms(d, s);
  EXPECT_LT((b.C * s.velocity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(b.friction.isZero(0.0));
}

TEST(BiasTerms, GravityVanishesAtBalance) {
  for (const RobotDescription& d : {default_one_link(), default_three_link(), default_seven_link()}) {
    RobotState s(d.dof());
    for (int k = 1; k < d.dof(); ++k) s.q[k] = 0.3 * std::pow(-1.0, k);
    s = balanced_pose(d, s);
    EXPECT_NEAR(com_state(d, s).X_com, 0.0, 1e-12);
    EXPECT_NEAR(bias_terms(d, s).Q_grav[1], 0.0, 1e-10);
    EXPECT_EQ(bias_terms(d, s).Q_grav[0], 0.0);
  }
}

TEST(BiasTerms, SkewSymmetryAlongFlow) {
  oracle::Gen gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const RobotDescription d = gen.description(trial % 3 == 0 ? 3 : gen.integer(1, 7));
    const RobotState s = gen.state(d);
    const Eigen::VectorXd v = s.velocity();
    const Eigen::MatrixXd Adot = oracle::diff5(
        [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
          RobotState t = s;
          t.set_position(p);
          return mass_matrix(d, t);
        },
        s.position(), v, 2.5e-4);
    EXPECT_LT(std::abs(v.dot((Adot - 2.0 * bias_terms(d, s).C) * v)), 1e-8);
  }
}

TEST(BiasTerms, MatchesLagrangeOracle) {
  oracle::Gen gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const RobotDescription d = gen.description(gen.integer(1, 4), true);
    const RobotState s = gen.state(d);
    const DynamicsTerms t = dynamics_terms(d, s);
    const Eigen::VectorXd ref = oracle::bias(d, s);
    EXPECT_LT((t.h - ref).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(BiasTerms, OneLinkHandDerived) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  s.q[0] = 0.4;
  s.qdot[0] = -1.3;
  s.xdot = 0.7;
  const oracle::OneLink o = oracle::one_link(d, 0.4, -1.3);
  const DynamicsTerms t = dynamics_terms(d, s);
  EXPECT_LT((t.A - Eigen::MatrixXd(o.A)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.h - Eigen::VectorXd(o.h)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardDynamics, EquilibriumAtUprightRest) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  EXPECT_LT(forward_dynamics(d, s, Eigen::VectorXd::Zero(1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ForwardDynamics, TiltedOneLinkFallsForwardAndCartRecoils) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  s.q[0] = 0.1;
  const Eigen::VectorXd acc = forward_dynamics(d, s, Eigen::VectorXd::Zero(1));
  EXPECT_GT(acc[1], 0.0);
  EXPECT_LT(acc[0], 0.0);  // no horizontal force: momentum a_xx xdot + a_xq qdot is conserved

  // Hand-derived one-link ODE: A acc = B tau - h with B = (-1/R, 1).
  const oracle::OneLink o = oracle::one_link(d, 0.1, 0.0);
  const Eigen::Vector2d ref = o.A.lu().solve(-o.h);
  EXPECT_LT((acc - Eigen::VectorXd(ref)).cwiseAbs().maxCoeff(), 1e-12);

  Eigen::VectorXd tau(1);
  tau << 1.7;
  const Eigen::Vector2d forced = o.A.lu().solve(Eigen::Vector2d(-1.7 / 0.1, 1.7) - o.h);
  EXPECT_LT((forward_dynamics(d, s, tau) - Eigen::VectorXd(forced)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardDynamics, SolveConsistencyProperty) {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 200; ++trial) {
    const RobotDescription d = gen.description(gen.integer(1, 8), true);
    const RobotState s = gen.state(d);
    const Eigen::VectorXd tau = gen.vector(d.dof(), -10, 10);
    const DynamicsTerms t = dynamics_terms(d, s);
    const Eigen::MatrixXd B = actuation_matrix(d);
    const Eigen::VectorXd acc = forward_dynamics(t, B, tau);
    EXPECT_LT((t.A * acc - (B * tau - t.h)).norm(), 1e-10);
    EXPECT_LT(std::abs(full_zero_dynamics_residual(d, s, acc)), 1e-9);
  }
}

TEST(ForwardDynamics, ActuationStructure) {
  const Eigen::MatrixXd B = actuation_matrix(default_three_link());
  ASSERT_EQ(B.rows(), 4);
  ASSERT_EQ(B.cols(), 3);
  EXPECT_DOUBLE_EQ(B(0, 0), -1.0 / 0.1);
  EXPECT_EQ(B(0, 1), 0.0);
  EXPECT_EQ(B(0, 2), 0.0);
  EXPECT_TRUE(B.bottomRows(3).isIdentity(0.0));
}

TEST(ComState, OneLinkIdentity) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  s.q[0] = 0.37;
  s.qdot[0] = -0.8;
  const ComState c = com_state(d, s);
  EXPECT_NEAR(c.X_com, 0.3 * std::sin(0.37), 1e-15);
  EXPECT_NEAR(c.Z_com, 0.3 * std::cos(0.37), 1e-15);
  EXPECT_NEAR(c.theta, 0.37, 1e-15);
  EXPECT_NEAR(c.thetadot, -0.8, 1e-15);
  EXPECT_NEAR(c.length(), 0.3, 1e-15);
}

TEST(ComState, WeightedAverageAndRateProperty) {
  oracle::Gen gen(10);
  for (int trial = 0; trial < 100; ++trial) {
    const RobotDescription d = gen.description(3);
    const RobotState s = gen.state(d);
    const ComState c = com_state(d, s);
    const oracle::Fk f = oracle::fk(d, s.position());
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int k = 0; k < 3; ++k) sum += d.links[k].mass * (f.coms[k] - Eigen::Vector2d(s.x, d.wheel.radius));
    EXPECT_NEAR(c.M, d.body_mass(), 1e-12);
    EXPECT_LT((c.M * Eigen::Vector2d(c.X_com, c.Z_com) - sum).norm(), 1e-12);

    const double eps = 1e-6;
    RobotState sp = s, sm = s;
    sp.q += eps * s.qdot;
    sm.q -= eps * s.qdot;
    EXPECT_NEAR(c.thetadot, (com_state(d, sp).theta - com_state(d, sm).theta) / (2 * eps), 1e-6);
  }
}

TEST(Energy, RestAndPureHeading) {
  const RobotDescription d = default_one_link();
  RobotState s(1);
  s.q[0] = 0.2;
  EXPECT_EQ(total_energy(d, s).kinetic, 0.0);
  s.q[0] = 0.0;
  s.xdot = 1.0;
  EXPECT_NEAR(total_energy(d, s).kinetic, 0.5 * (2 * 0.5 + 2 * 0.0025 / 0.01 + 2.0), 1e-12);
  EXPECT_NEAR(total_energy(d, s).potential, oracle::potential(d, s.position()), 1e-12);
}

TEST(Energy, ActuatorPowerIsTorqueTimesRelativeRate) {
  oracle::Gen gen(12);
  const RobotDescription d = gen.description(3);
  const RobotState s = gen.state(d);
  const Eigen::VectorXd tau = gen.vector(3, -5, 5);
  // The base torque reacts against the wheels, so it works on (q1dot - xdot / R).
  const double expected = tau[0] * (s.qdot[0] - s.xdot / d.wheel.radius) + tau[1] * s.qdot[1] + tau[2] * s.qdot[2];
  EXPECT_NEAR(actuator_power(d, s, tau), expected, 1e-12);
}

TEST(ZeroDynamics, UprightAndTiltedRest) {
  const RobotDescription d = default_three_link();
  RobotState s(3);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  EXPECT_NEAR(full_zero_dynamics_residual(d, s, zero), 0.0, 1e-12);

  s.q << 0.2, -0.4, 0.9;
  const ComState c = com_state(d, s);
  EXPECT_NEAR(full_zero_dynamics_residual(d, s, zero), -c.M * d.gravity * c.X_com, 1e-12);
}
