#pragma once

#include "wiphwbc/robot_model.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace wiphwbc {

/// Thrown when a configuration makes a quantity undefined (e.g. CoM level with the axle).
class DegenerateConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coordinate order everywhere in this header: (x, q1, ..., qn).
// Link k has absolute angle phi_k = q1 + ... + qk measured from vertical, positive toward +x.

struct LinkPose {
  Eigen::Vector2d joint;  // world (x, z) of the inboard joint
  double angle = 0.0;     // absolute angle from vertical
  Eigen::Vector2d com;    // world (x, z) of the link CoM
};

std::vector<LinkPose> link_poses(const RobotDescription& desc, const RobotState& s);

/// Tip of the last link, relative to the wheel axle.
Eigen::Vector2d end_effector_position(const RobotDescription& desc, const RobotState& s);

/// Absolute angle of the last link (sum of all joint angles).
double end_effector_angle(const RobotState& s);

struct DynamicsTerms {
  Eigen::MatrixXd A;       // (n+1)x(n+1) mass matrix
  Eigen::VectorXd h;       // C qdot + Q - Gamma_fric
  Eigen::VectorXd Q_grav;  // gravity alone
  double a_xx = 0.0;
  Eigen::VectorXd a_xq;    // n
  Eigen::MatrixXd A_qq;    // n x n
};

struct BiasTerms {
  Eigen::MatrixXd C;         // Coriolis/centrifugal matrix from Christoffel symbols of A
  Eigen::VectorXd Q_grav;    // dV/dq
  Eigen::VectorXd friction;  // Gamma_fric = -diag(0, damping) qdot, enters the right-hand side
};

Eigen::MatrixXd mass_matrix(const RobotDescription& desc, const RobotState& s);

/// dA/dq_k for every coordinate k (entry 0, the heading, is identically zero).
std::vector<Eigen::MatrixXd> mass_matrix_partials(const RobotDescription& desc, const RobotState& s);

BiasTerms bias_terms(const RobotDescription& desc, const RobotState& s);

/// A, lumped bias h and the block partition {a_xx, a_xq, A_qq} extracted by index from A.
DynamicsTerms dynamics_terms(const RobotDescription& desc, const RobotState& s);

/// (n+1) x n map from joint torques Gamma = (tau1, ..., taun) to generalized forces.
/// tau1 is the combined wheel torque: -tau1/R on the heading row and +tau1 on the base pitch row.
Eigen::MatrixXd actuation_matrix(const RobotDescription& desc);

/// (xddot, qddot) solving A acc = B Gamma - C qdot - Q + Gamma_fric.
Eigen::VectorXd forward_dynamics(const RobotDescription& desc, const RobotState& s,
                                 const Eigen::VectorXd& torques);

/// Same as above on precomputed terms.
Eigen::VectorXd forward_dynamics(const DynamicsTerms& terms, const Eigen::MatrixXd& actuation,
                                 const Eigen::VectorXd& torques);

/// Body centre of mass relative to the wheel axle and the pendulum angle it defines.
struct ComState {
  double X_com = 0.0;
  double Z_com = 0.0;
  double theta = 0.0;
  double thetadot = 0.0;
  Eigen::MatrixXd J_com;  // 2 x n, d(X_com, Z_com)/dq
  double M = 0.0;

  [[nodiscard]] double length() const;
};

/// Throws DegenerateConfiguration when Z_com == 0.
ComState com_state(const RobotDescription& desc, const RobotState& s);

struct Energy {
  double kinetic = 0.0;
  double potential = 0.0;
  [[nodiscard]] double total() const { return kinetic + potential; }
};

Energy total_energy(const RobotDescription& desc, const RobotState& s);

/// Mechanical power delivered by the actuators, Gamma . (q1dot - xdot/R, q2dot, ..., qndot).
double actuator_power(const RobotDescription& desc, const RobotState& s, const Eigen::VectorXd& torques);

/// R * (heading row) + (base pitch row) of A acc + h. Vanishes iff some tau1 explains the motion.
double full_zero_dynamics_residual(const RobotDescription& desc, const RobotState& s,
                                   const Eigen::VectorXd& acc);

}  // namespace wiphwbc
