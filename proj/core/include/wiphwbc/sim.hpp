#pragma once

#include "wiphwbc/mpc.hpp"
#include "wiphwbc/wbc.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wiphwbc {

struct SimConfig {
  double dt_physics = 1e-3;
  double wbc_period = 1e-3;
  double mpc_period = 0.01;
  double duration = 20.0;
  double goal = 2.0;   // heading target, m
  double tf = 20.0;    // length of the planned reference, s
  RobotState initial;  // empty q means all joints at zero
  bool balance_initial = true;  // rotate q1 so the body CoM starts above the axle
  std::uint64_t seed = 0;
  double perturbation = 0.0;  // std-dev of seeded noise on initial q, rad; 0 disables
  int log_decimation = 1;
  bool decoupled = false;

  void validate(int n) const;
  [[nodiscard]] long physics_steps() const;
  [[nodiscard]] int wbc_every() const;
  [[nodiscard]] int mpc_every() const;
};

struct ControllerConfig {
  MpcConfig mpc;
  CostSpec ddp_cost;  // full-horizon reference weights
  DdpOptions ddp;
  TaskGains gains;
  WbcConfig wbc;
};

/// Sim and controller settings from the [sim] and [controller] sections of an INI file.
void load_sim_config(const std::filesystem::path& path, SimConfig& sim, ControllerConfig& ctrl);
void parse_sim_config(const std::string& text, SimConfig& sim, ControllerConfig& ctrl);

struct SimRecord {
  double t = 0.0;
  RobotState state;
  WipmState X = WipmState::Zero();
  WipmState X_traj = WipmState::Zero();
  WipmParams lambda;
  double u = 0.0;  // held thetaddot reference
  Eigen::VectorXd torques;
  std::vector<double> task_errors;
  Energy energy;
  Eigen::Vector2d ee = Eigen::Vector2d::Zero();  // world frame
  double ee_phi = 0.0;
  QpStatus qp_status = QpStatus::optimal;
  int qp_iterations = 0;
  int mpc_iterations = 0;
  bool mpc_converged = true;
  bool fallback = false;
};

struct SimLog {
  std::vector<SimRecord> records;
  Trajectory reference;
  long mpc_calls = 0;
  long wbc_calls = 0;
  std::vector<int> mpc_iterations;  // per MPC call
  bool diverged = false;
  std::string divergence;
  double wall_time_s = 0.0;
};

/// Classical RK4 on the full forward dynamics with torques held over the step.
/// Throws std::runtime_error when the state becomes non-finite.
RobotState integrate_step(const RobotDescription& desc, const RobotState& s, const Eigen::VectorXd& torques,
                          double dt);

/// Copy of `s` with q1 chosen so the body CoM sits directly above the axle.
RobotState balanced_pose(const RobotDescription& desc, const RobotState& s);

/// Resolved starting state: initial pose, optional seeded perturbation, optional balancing.
RobotState initial_state(const RobotDescription& desc, const SimConfig& cfg);

/// Full-horizon DDP reference from the resolved initial state toward (0, 0, goal, 0).
Trajectory plan_reference(const RobotDescription& desc, const SimConfig& cfg, const ControllerConfig& ctrl);

/// Reference once, MPC every mpc_period, WBC every wbc_period, RK4 every dt_physics.
SimLog run_closed_loop(const RobotDescription& desc, const SimConfig& cfg, const ControllerConfig& ctrl);

struct SimSummary {
  double terminal_x_error = 0.0;
  double terminal_theta = 0.0;
  double peak_theta = 0.0;
  double peak_orientation_deviation = 0.0;  // rad, |ee_phi(t) - ee_phi(0)|
  std::optional<double> completion_time;    // first t with |x - goal| < 0.05 held thereafter
  long torque_violations = 0;               // records with |tau_j| > limit_j + 1e-8
  long non_optimal_qp = 0;
  long mpc_calls = 0;
  long wbc_calls = 0;
  bool diverged = false;
  bool reference_converged = false;
};

SimSummary summarize(const SimLog& log, const RobotDescription& desc, const SimConfig& cfg);

inline constexpr const char* kSimLogSchema = "# wiphwbc sim-log v1";
inline constexpr const char* kPlanSchema = "# wiphwbc plan v1";

/// CSV with a schema comment line and one header row.
void write_sim_csv(std::ostream& out, const SimLog& log, int n);
void write_plan_csv(std::ostream& out, const Trajectory& traj);

}  // namespace wiphwbc
