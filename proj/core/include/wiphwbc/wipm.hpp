#pragma once

#include "wiphwbc/dynamics.hpp"

#include <Eigen/Dense>

namespace wiphwbc {

/// Wheeled inverted pendulum model state X = [theta, thetadot, x, xdot].
using WipmState = Eigen::Vector4d;

enum WipmIndex : int { kTheta = 0, kThetaDot = 1, kX = 2, kXDot = 3 };

/// Simplified-model parameters extracted from the full robot at one instant.
/// alpha_w and beta_w are the dimensionless coefficients of the pendulum ODE;
/// the wheel terms use the lumped pair (2 m_w, 2 I_w).
struct WipmParams {
  double M = 0.0;
  double L = 0.0;
  double I = 0.0;  // body inertia about the axle, A(q1, q1) of the full model
  double R = 0.0;
  double m_w = 0.0;
  double I_w = 0.0;
  double alpha_w = 0.0;
  double beta_w = 0.0;
  double g = 9.81;
  // Snapshot of the full robot the parameters came from.
  double X_com = 0.0;
  double Z_com = 0.0;
  double theta = 0.0;
  double thetadot = 0.0;

  /// 2 m_w + 2 I_w / R^2 + M
  [[nodiscard]] double heading_mass() const;
};

/// Builds parameters from explicit physical values (M, L, I) and wheel data.
WipmParams make_wipm_params(double M, double L, double I, const WheelParams& wheel, double g);

/// Throws DegenerateConfiguration when Z_com <= 0.
WipmParams extract_params(const RobotDescription& desc, const RobotState& s);

/// WIPM state of the full robot: (theta, thetadot) of the body CoM plus (x, xdot).
WipmState wipm_state_of(const RobotDescription& desc, const RobotState& s);

/// Continuous dynamics Xdot = f_c(X, u) with u = thetaddot.
WipmState f_c(const WipmState& X, double u, const WipmParams& p);

/// Heading acceleration of the pendulum ODE.
double heading_acceleration(const WipmState& X, double u, const WipmParams& p);

/// Explicit Euler: X + dt f_c(X, u).
WipmState step(const WipmState& X, double u, const WipmParams& p, double dt);

struct StepJacobians {
  Eigen::Matrix4d f_X;
  Eigen::Vector4d f_u;
};

StepJacobians step_jacobians(const WipmState& X, double u, const WipmParams& p, double dt);

/// Left side of the simplified zero dynamics (tau1 eliminated from the heading and pitch rows).
double wipm_zero_residual(const WipmState& X, double xddot, double thetaddot, const WipmParams& p);

/// (xddot, thetaddot) of the two-equation pendulum driven by the wheel torque tau1.
Eigen::Vector2d forced_dynamics(const WipmState& X, double tau1, const WipmParams& p);

/// tau1 explaining (xddot, thetaddot) through the pitch equation.
double wheel_torque(const WipmState& X, double xddot, double thetaddot, const WipmParams& p);

}  // namespace wiphwbc
