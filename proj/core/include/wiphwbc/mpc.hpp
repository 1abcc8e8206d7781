#pragma once

#include "wiphwbc/ddp.hpp"

#include <optional>

namespace wiphwbc {

struct MpcConfig {
  double Ts = 0.01;   // control period
  double tH = 1.0;    // horizon
  double dt = 0.01;   // planner step
  CostSpec cost = default_cost();
  bool warm_start = true;
  DdpOptions ddp;

  [[nodiscard]] int horizon_steps() const;
  void validate() const;

  /// Tracking weights: positions above speeds, terminal = 1e3 x running.
  static CostSpec default_cost();
};

struct MpcOutput {
  double theta_ddot_ref = 0.0;
  double theta_ref = 0.0;
  double thetadot_ref = 0.0;
  double horizon_cost = 0.0;
  bool solve_converged = false;
  int iterations = 0;
  bool degenerate = false;  // lambda extraction failed, previous output held
  WipmState state = WipmState::Zero();      // X of the full robot
  WipmState reference = WipmState::Zero();  // X_traj(i)
  WipmParams params;
};

/// Full-horizon reference from the parameters at the initial state. Requires tf >= tH.
Trajectory make_reference(const WipmParams& p0, const WipmState& x0, const WipmState& goal, double tf,
                          const CostSpec& cost, const MpcConfig& cfg);

/// Reference states [i, i + N], padded with the final state past the end.
std::vector<WipmState> reference_window(const Trajectory& reference, int i, int N);

/// Previous horizon solution, shifted by one step before reuse.
struct MpcWarmStart {
  std::vector<double> controls;
};

/// One receding-horizon solve at reference index i from the current full robot state.
/// Throws DegenerateConfiguration when lambda(q) cannot be extracted.
MpcOutput mpc_step(int i, const RobotState& s_full, const RobotDescription& desc, const Trajectory& reference,
                   const MpcConfig& cfg, MpcWarmStart& warm);

/// Owns the warm-start buffer and holds the last good output when extraction fails.
class MpcController {
 public:
  MpcController(MpcConfig cfg, Trajectory reference);

  MpcOutput step(int i, const RobotState& s_full, const RobotDescription& desc);

  [[nodiscard]] const Trajectory& reference() const { return reference_; }
  [[nodiscard]] const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  Trajectory reference_;
  MpcWarmStart warm_;
  std::optional<MpcOutput> last_;
};

}  // namespace wiphwbc
