#include "wiphwbc/mpc.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace wiphwbc {

int MpcConfig::horizon_steps() const { return static_cast<int>(std::lround(tH / dt)); }

void MpcConfig::validate() const {
  if (!(Ts > 0.0)) throw std::invalid_argument("MpcConfig: Ts must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("MpcConfig: dt must be positive");
  if (!(tH >= Ts)) throw std::invalid_argument("MpcConfig: tH must be >= Ts");
  if (std::abs(horizon_steps() * dt - tH) > 1e-9 * tH)
    throw std::invalid_argument("MpcConfig: dt must divide tH");
  cost.validate();
}

CostSpec MpcConfig::default_cost() {
  CostSpec c;
  c.G_run = Eigen::Vector4d(100.0, 1.0, 100.0, 1.0);
  c.g_run = 0.05;
  c.G_term = 1e3 * c.G_run;
  return c;
}

Trajectory make_reference(const WipmParams& p0, const WipmState& x0, const WipmState& goal, double tf,
                          const CostSpec& cost, const MpcConfig& cfg) {
  if (!(tf >= cfg.tH)) throw std::invalid_argument("make_reference: tf must be >= tH");
  CostSpec c = cost;
  c.reference = {goal};
  const int N = static_cast<int>(std::lround(tf / cfg.dt));
  return solve(p0, x0, c, N, cfg.dt, cfg.ddp);
}

std::vector<WipmState> reference_window(const Trajectory& reference, int i, int N) {
  std::vector<WipmState> w(static_cast<std::size_t>(N) + 1);
  const int last = static_cast<int>(reference.states.size()) - 1;
  for (int j = 0; j <= N; ++j) w[static_cast<std::size_t>(j)] = reference.states[static_cast<std::size_t>(std::min(i + j, last))];
  return w;
}

MpcOutput mpc_step(int i, const RobotState& s_full, const RobotDescription& desc, const Trajectory& reference,
                   const MpcConfig& cfg, MpcWarmStart& warm) {
  if (i < 0) throw std::invalid_argument("mpc_step: negative reference index");
  const int N = cfg.horizon_steps();

  MpcOutput out;
  out.params = extract_params(desc, s_full);  // refreshed every call
  out.state = {out.params.theta, out.params.thetadot, s_full.x, s_full.xdot};

  CostSpec cost = cfg.cost;
  cost.reference = reference_window(reference, i, N);
  out.reference = cost.reference.front();

  DdpOptions opts = cfg.ddp;
  if (cfg.warm_start && !warm.controls.empty()) {
    opts.initial_controls.assign(warm.controls.begin() + 1, warm.controls.end());
    opts.initial_controls.push_back(warm.controls.back());
  }
  const Trajectory sol = solve(out.params, out.state, cost, N, cfg.dt, opts);
  warm.controls = sol.controls;

  out.theta_ddot_ref = sol.controls.front();
  out.theta_ref = out.reference[kTheta];
  out.thetadot_ref = out.reference[kThetaDot];
  out.horizon_cost = sol.cost;
  out.solve_converged = sol.converged;
  out.iterations = sol.iterations;
  return out;
}

MpcController::MpcController(MpcConfig cfg, Trajectory reference)
    : cfg_(std::move(cfg)), reference_(std::move(reference)) {
  cfg_.validate();
}

MpcOutput MpcController::step(int i, const RobotState& s_full, const RobotDescription& desc) {
  try {
    last_ = mpc_step(i, s_full, desc, reference_, cfg_, warm_);
  } catch (const DegenerateConfiguration& e) {
    spdlog::warn("mpc step {}: {}; holding previous output", i, e.what());
    MpcOutput held = last_.value_or(MpcOutput{});
    held.degenerate = true;
    return held;
  }
  return *last_;
}

}  // namespace wiphwbc
