#pragma once

#include "wiphwbc/dynamics.hpp"

#include <Eigen/Dense>

namespace wiphwbc {

/// Manipulator dynamics with the wheel heading eliminated:
///   Acal qddot + P h = Gamma,   h = C qdot + Q - Gamma_fric.
/// Built from the blocks of A only; the full mass matrix is never inverted.
struct IsolatedDynamics {
  Eigen::MatrixXd Acal;  // n x n, asymmetric in general
  Eigen::MatrixXd P;     // n x (n+1)
  double alpha = 0.0;    // a_xq1 / (R a_xx)
  double beta = 1.0;     // 1 / (1 + alpha)
  Eigen::MatrixXd Bmat;  // [a_xq / (R a_xx) | 0]
  Eigen::VectorXd bias;  // P h
};

/// Throws DegenerateConfiguration when a_xx <= 0 or 1 + alpha == 0.
IsolatedDynamics isolate(const DynamicsTerms& terms, const Eigen::VectorXd& bias_full, double wheel_radius);

inline IsolatedDynamics isolate(const DynamicsTerms& terms, double wheel_radius) {
  return isolate(terms, terms.h, wheel_radius);
}

/// Gamma = Acal qddot + bias. Gamma(0) is the combined wheel torque tau1; each wheel gets -tau1/2.
Eigen::VectorXd inverse_dynamics(const IsolatedDynamics& iso, const Eigen::VectorXd& qddot);

/// qddot solving Acal qddot = Gamma - bias (LU with partial pivoting).
Eigen::VectorXd isolated_forward(const IsolatedDynamics& iso, const Eigen::VectorXd& torques);

/// Rows C_I qddot + c_I <= 0 encoding -limits <= Acal qddot + bias <= limits.
struct TorqueRows {
  Eigen::MatrixXd C_I;  // 2n x n
  Eigen::VectorXd c_I;  // 2n
};

TorqueRows torque_constraint_rows(const IsolatedDynamics& iso, const Eigen::VectorXd& limits);

}  // namespace wiphwbc
