#include "wiphwbc/wipm.hpp"

#include <cmath>
#include <stdexcept>

namespace wiphwbc {

namespace {

constexpr double kMinDenominator = 1e-9;

double denominator(double theta, const WipmParams& p) {
  const double den = p.alpha_w + std::cos(theta);
  if (!(den > kMinDenominator))
    throw DegenerateConfiguration("wipm: alpha_w + cos(theta) vanishes");
  return den;
}

}  // namespace

double WipmParams::heading_mass() const { return 2.0 * m_w + 2.0 * I_w / (R * R) + M; }

WipmParams make_wipm_params(double M, double L, double I, const WheelParams& wheel, double g) {
  WipmParams p;
  p.M = M;
  p.L = L;
  p.I = I;
  p.R = wheel.radius;
  p.m_w = wheel.mass;
  p.I_w = wheel.inertia;
  p.g = g;
  p.alpha_w = (p.R / (M * L)) * p.heading_mass();
  p.beta_w = I / (M * L);
  p.Z_com = L;
  return p;
}

WipmParams extract_params(const RobotDescription& desc, const RobotState& s) {
  const ComState cs = com_state(desc, s);
  if (!(cs.Z_com > 0.0))
    throw DegenerateConfiguration("extract_params: body CoM at or below the wheel axle");
  const double I = mass_matrix(desc, s)(1, 1);
  WipmParams p = make_wipm_params(cs.M, cs.length(), I, desc.wheel, desc.gravity);
  p.X_com = cs.X_com;
  p.Z_com = cs.Z_com;
  p.theta = cs.theta;
  p.thetadot = cs.thetadot;
  return p;
}

WipmState wipm_state_of(const RobotDescription& desc, const RobotState& s) {
  const ComState cs = com_state(desc, s);
  return {cs.theta, cs.thetadot, s.x, s.xdot};
}

double heading_acceleration(const WipmState& X, double u, const WipmParams& p) {
  const double th = X[kTheta];
  const double thd = X[kThetaDot];
  const double s = std::sin(th);
  const double c = std::cos(th);
  return (p.g * s + p.R * s * thd * thd - (p.beta_w + p.R * c) * u) / denominator(th, p);
}

WipmState f_c(const WipmState& X, double u, const WipmParams& p) {
  return {X[kThetaDot], u, X[kXDot], heading_acceleration(X, u, p)};
}

WipmState step(const WipmState& X, double u, const WipmParams& p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("wipm::step: dt must be positive");
  return X + dt * f_c(X, u, p);
}

StepJacobians step_jacobians(const WipmState& X, double u, const WipmParams& p, double dt) {
  const double th = X[kTheta];
  const double thd = X[kThetaDot];
  const double s = std::sin(th);
  const double c = std::cos(th);
  const double den = denominator(th, p);
  const double xdd = (p.g * s + p.R * s * thd * thd - (p.beta_w + p.R * c) * u) / den;

  // d(num)/dtheta with num = g s + R s thd^2 - (beta + R c) u; d(den)/dtheta = -s.
  const double dnum_dth = p.g * c + p.R * c * thd * thd + p.R * s * u;

  StepJacobians J;
  J.f_X.setIdentity();
  J.f_X(kTheta, kThetaDot) += dt;
  J.f_X(kX, kXDot) += dt;
  J.f_X(kXDot, kTheta) += dt * (dnum_dth + xdd * s) / den;
  J.f_X(kXDot, kThetaDot) += dt * 2.0 * p.R * s * thd / den;
  J.f_u << 0.0, dt, 0.0, -dt * (p.beta_w + p.R * c) / den;
  return J;
}

double wipm_zero_residual(const WipmState& X, double xddot, double thetaddot, const WipmParams& p) {
  const double th = X[kTheta];
  const double thd = X[kThetaDot];
  const double Xc = p.L * std::sin(th);
  const double Zc = p.L * std::cos(th);
  return (p.R * p.heading_mass() + p.M * Zc) * xddot + (p.R * p.M * Zc + p.I) * thetaddot -
         p.R * p.M * Xc * thd * thd - p.M * p.g * Xc;
}

Eigen::Vector2d forced_dynamics(const WipmState& X, double tau1, const WipmParams& p) {
  const double th = X[kTheta];
  const double thd = X[kThetaDot];
  const double Xc = p.L * std::sin(th);
  const double Zc = p.L * std::cos(th);
  Eigen::Matrix2d K;
  K << p.R * p.heading_mass(), p.R * p.M * Zc,
       p.M * Zc, p.I;
  const Eigen::Vector2d rhs(-tau1 + p.R * p.M * Xc * thd * thd, tau1 + p.M * Xc * p.g);
  return K.partialPivLu().solve(rhs);
}

double wheel_torque(const WipmState& X, double xddot, double thetaddot, const WipmParams& p) {
  const double th = X[kTheta];
  return p.M * p.L * std::cos(th) * xddot + p.I * thetaddot - p.M * p.L * std::sin(th) * p.g;
}

}  // namespace wiphwbc
