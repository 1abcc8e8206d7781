#pragma once

#include "wiphwbc/isolation.hpp"
#include "wiphwbc/mpc.hpp"
#include "wiphwbc/qp_solver.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace wiphwbc {

enum class TaskKind {
  com_angle,       // pendulum angle theta of the body CoM
  ee_position,     // end-effector tip, axle-anchored frame (moves with the robot)
  ee_orientation,  // absolute angle of the last link
  regularization,  // all joint accelerations
  posture,         // joints 2..n held at fixed angles (decoupled upper body)
};

std::string_view to_string(TaskKind k);

/// One weighted row block of the least-squares cost. The commanded task acceleration is
///   xddot* = xddot_d - Kp (x - x_d) - Kd (xdot - xdot_d).
/// For com_angle, the desired triple is overwritten with the MPC output each tick.
struct TaskSpec {
  TaskKind kind = TaskKind::regularization;
  double weight = 1.0;
  Eigen::VectorXd Kp;
  Eigen::VectorXd Kd;
  Eigen::VectorXd desired;
  Eigen::VectorXd desired_dot;
  Eigen::VectorXd desired_ddot;
};

struct TaskKinematics {
  Eigen::MatrixXd J;          // rows x n
  Eigen::VectorXd Jdot_qdot;  // rows
  Eigen::VectorXd value;      // x_t
  Eigen::VectorXd rate;       // xdot_t = J qdot
};

TaskKinematics task_jacobian(const RobotDescription& desc, const RobotState& s, TaskKind kind);

/// Task dimension for a robot with n joints.
int task_rows(TaskKind kind, int n);

struct WbcConfig {
  bool joint_limits = true;
  double joint_limit_margin = 0.02;  // rad
  double limit_horizon = 0.01;       // s, one-step-ahead braking horizon
};

struct WbcOutput {
  Eigen::VectorXd qddot;
  Eigen::VectorXd torques;
  std::vector<double> task_errors;  // |x_t - x_d| per task
  QpStatus qp_status = QpStatus::infeasible;
  std::vector<int> active_constraints;  // rows of [torque rows; joint-limit rows]
  int qp_iterations = 0;
  bool joint_limits_dropped = false;
  bool fallback = false;  // clamped gravity compensation was emitted
};

/// Task set used by the unified controller: theta, end-effector position and orientation held at
/// their values in `initial`, plus damping regularization.
struct TaskGains {
  double w_theta = 100.0, kp_theta = 60.0, kd_theta = 16.0;
  double w_ee = 10.0, kp_ee = 100.0, kd_ee = 20.0;
  double w_phi = 10.0, kp_phi = 100.0, kd_phi = 20.0;
  double w_reg = 0.1, kd_reg = 5.0;
  double w_posture = 10.0, kp_posture = 100.0, kd_posture = 20.0;
};

std::vector<TaskSpec> unified_tasks(const RobotDescription& desc, const RobotState& initial, const TaskGains& gains);

/// Ablation: theta task plus a fixed upper-body posture; no end-effector tasks.
std::vector<TaskSpec> decoupled_tasks(const RobotDescription& desc, const RobotState& initial, const TaskGains& gains);

/// Weighted least-squares QP over qddot with isolated-dynamics torque rows and joint-limit rows;
/// torques by inverse dynamics of the isolated model.
WbcOutput control_step(const RobotDescription& desc, const RobotState& s, const std::vector<TaskSpec>& tasks,
                       const MpcOutput& ref, const Eigen::VectorXd& limits, const WbcConfig& cfg = {});

}  // namespace wiphwbc
