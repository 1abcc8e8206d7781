#pragma once

#include "wiphwbc/wipm.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace wiphwbc {

/// Quadratic tracking cost
///   sum_i (X_i - r_i)' G_run (X_i - r_i) + g_run u_i^2  +  (X_N - r_N)' G_term (X_N - r_N).
/// A single reference entry is a fixed goal; otherwise entry i is the target at step i and
/// indices past the end hold the last entry.
struct CostSpec {
  Eigen::Vector4d G_run = Eigen::Vector4d(50.0, 1.0, 10.0, 1.0);
  double g_run = 0.1;
  Eigen::Vector4d G_term = 1e4 * Eigen::Vector4d(100.0, 10.0, 100.0, 10.0);
  std::vector<WipmState> reference{WipmState::Zero()};

  [[nodiscard]] const WipmState& target(std::size_t i) const;
  void validate() const;

  static CostSpec goal(const WipmState& goal_state);
};

struct FeedbackGain {
  double k = 0.0;                                        // feedforward
  Eigen::RowVector4d K = Eigen::RowVector4d::Zero();     // state feedback
};

struct Trajectory {
  std::vector<WipmState> states;    // N + 1
  std::vector<double> controls;     // N
  std::vector<FeedbackGain> gains;  // N
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_history;  // initial cost then one entry per accepted iteration
  double dt = 0.0;
};

struct DdpOptions {
  int max_iters = 200;
  double tol_cost = 1e-9;  // relative to max(1, |J|)
  double reg_init = 1e-6;
  double reg_min = 1e-9;
  double reg_max = 1e10;
  double reg_increase = 10.0;
  double reg_decrease = 5.0;
  int line_search_steps = 11;        // alpha = 1, 1/2, ..., 2^-10
  std::vector<double> initial_controls;  // warm start; padded with its last value
};

/// Raised when a rollout or cost becomes non-finite.
class DdpDivergence : public std::runtime_error {
 public:
  DdpDivergence(const std::string& what, int iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
  [[nodiscard]] int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// iLQR over the WIPM Euler map with Levenberg-Marquardt regularization on Q_uu and
/// backtracking line search that accepts only cost decrease.
Trajectory solve(const WipmParams& p, const WipmState& x0, const CostSpec& cost, int N, double dt,
                 const DdpOptions& opts = {});

std::vector<WipmState> rollout(const WipmParams& p, const WipmState& x0, const std::vector<double>& controls,
                               double dt);

double trajectory_cost(const std::vector<WipmState>& states, const std::vector<double>& controls,
                       const CostSpec& cost);

/// dJ/du_i for the open-loop control sequence, by the adjoint recursion of the backward pass.
std::vector<double> control_gradient(const WipmParams& p, const WipmState& x0,
                                     const std::vector<double>& controls, const CostSpec& cost, double dt);

/// Closed-loop replay of a solved trajectory from a (possibly perturbed) start:
/// u_i = controls_i + K_i (X_i - states_i).
std::vector<WipmState> replay_with_feedback(const WipmParams& p, const Trajectory& traj, const WipmState& x0,
                                            std::vector<double>* applied_controls = nullptr);

}  // namespace wiphwbc
