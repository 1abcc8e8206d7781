#include "wiphwbc/sim.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace wiphwbc {

namespace {

long ratio(double period, double dt) { return std::lround(period / dt); }

bool is_multiple(double period, double dt) {
  const long k = ratio(period, dt);
  return k >= 1 && std::abs(static_cast<double>(k) * dt - period) <= 1e-9 * period;
}

}  // namespace

void SimConfig::validate(int n) const {
  if (!(dt_physics > 0.0) || !(duration > 0.0)) throw ConfigError("sim: dt_physics and duration must be positive");
  if (!(dt_physics <= wbc_period && wbc_period <= mpc_period))
    throw ConfigError("sim: require dt_physics <= wbc_period <= mpc_period");
  if (!is_multiple(wbc_period, dt_physics) || !is_multiple(mpc_period, dt_physics))
    throw ConfigError("sim: periods must be integer multiples of dt_physics");
  if (!(tf > 0.0)) throw ConfigError("sim: tf must be positive");
  if (log_decimation < 1) throw ConfigError("sim: log_decimation must be >= 1");
  if (initial.q.size() != 0 && initial.q.size() != n) throw ConfigError("sim: q0 has wrong length");
  if (initial.qdot.size() != 0 && initial.qdot.size() != n) throw ConfigError("sim: qdot0 has wrong length");
}

long SimConfig::physics_steps() const { return ratio(duration, dt_physics); }
int SimConfig::wbc_every() const { return static_cast<int>(ratio(wbc_period, dt_physics)); }
int SimConfig::mpc_every() const { return static_cast<int>(ratio(mpc_period, dt_physics)); }

namespace {

namespace pt = boost::property_tree;

std::vector<double> numbers(const std::string& raw, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("malformed number list for '" + key + "': " + raw);
    }
  }
  return out;
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  void get(const std::string& key, double& v) const {
    if (auto raw = find(key)) {
      const auto vals = numbers(*raw, name_ + "." + key);
      if (vals.size() != 1) throw ConfigError("expected one number for " + name_ + "." + key);
      v = vals[0];
    }
  }
  void get(const std::string& key, int& v) const {
    double d = v;
    get(key, d);
    v = static_cast<int>(d);
  }
  void get(const std::string& key, bool& v) const {
    if (auto raw = find(key)) {
      if (*raw == "1" || *raw == "true" || *raw == "on") v = true;
      else if (*raw == "0" || *raw == "false" || *raw == "off") v = false;
      else throw ConfigError("expected boolean for " + name_ + "." + key);
    }
  }
  void get(const std::string& key, Eigen::Vector4d& v) const {
    if (auto raw = find(key)) {
      const auto vals = numbers(*raw, name_ + "." + key);
      if (vals.size() != 4) throw ConfigError("expected four numbers for " + name_ + "." + key);
      v = Eigen::Vector4d(vals[0], vals[1], vals[2], vals[3]);
    }
  }
  void get(const std::string& key, Eigen::VectorXd& v) const {
    if (auto raw = find(key)) {
      const auto vals = numbers(*raw, name_ + "." + key);
      v = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }
  }

 private:
  [[nodiscard]] std::optional<std::string> find(const std::string& key) const {
    if (!tree_) return std::nullopt;
    auto node = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!node) return std::nullopt;
    return node->data();
  }

  const pt::ptree* tree_;
  std::string name_;
};

}  // namespace

void parse_sim_config(const std::string& text, SimConfig& sim, ControllerConfig& ctrl) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  auto section = [&](const std::string& name) {
    auto node = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
    return Section(node ? &*node : nullptr, name);
  };

  const Section s = section("sim");
  s.get("dt_physics", sim.dt_physics);
  s.get("wbc_period", sim.wbc_period);
  s.get("mpc_period", sim.mpc_period);
  s.get("duration", sim.duration);
  s.get("goal", sim.goal);
  s.get("tf", sim.tf);
  double seed = static_cast<double>(sim.seed);
  s.get("seed", seed);
  sim.seed = static_cast<std::uint64_t>(seed);
  s.get("perturbation", sim.perturbation);
  s.get("log_decimation", sim.log_decimation);
  s.get("balance_initial", sim.balance_initial);
  s.get("decoupled", sim.decoupled);
  s.get("x0", sim.initial.x);
  s.get("xdot0", sim.initial.xdot);
  s.get("q0", sim.initial.q);
  s.get("qdot0", sim.initial.qdot);

  const Section c = section("controller");
  c.get("mpc_horizon", ctrl.mpc.tH);
  c.get("mpc_dt", ctrl.mpc.dt);
  c.get("mpc_G_run", ctrl.mpc.cost.G_run);
  c.get("mpc_g_run", ctrl.mpc.cost.g_run);
  c.get("mpc_G_term", ctrl.mpc.cost.G_term);
  c.get("mpc_warm_start", ctrl.mpc.warm_start);
  c.get("ddp_G_run", ctrl.ddp_cost.G_run);
  c.get("ddp_g_run", ctrl.ddp_cost.g_run);
  c.get("ddp_G_term", ctrl.ddp_cost.G_term);
  c.get("ddp_max_iters", ctrl.ddp.max_iters);
  ctrl.mpc.ddp.max_iters = ctrl.ddp.max_iters;
  c.get("mpc_max_iters", ctrl.mpc.ddp.max_iters);
  c.get("w_theta", ctrl.gains.w_theta);
  c.get("kp_theta", ctrl.gains.kp_theta);
  c.get("kd_theta", ctrl.gains.kd_theta);
  c.get("w_ee", ctrl.gains.w_ee);
  c.get("kp_ee", ctrl.gains.kp_ee);
  c.get("kd_ee", ctrl.gains.kd_ee);
  c.get("w_phi", ctrl.gains.w_phi);
  c.get("kp_phi", ctrl.gains.kp_phi);
  c.get("kd_phi", ctrl.gains.kd_phi);
  c.get("w_reg", ctrl.gains.w_reg);
  c.get("kd_reg", ctrl.gains.kd_reg);
  c.get("w_posture", ctrl.gains.w_posture);
  c.get("kp_posture", ctrl.gains.kp_posture);
  c.get("kd_posture", ctrl.gains.kd_posture);
  c.get("joint_limits", ctrl.wbc.joint_limits);
  c.get("joint_limit_margin", ctrl.wbc.joint_limit_margin);
  ctrl.mpc.Ts = sim.mpc_period;
  ctrl.wbc.limit_horizon = sim.mpc_period;
}

void load_sim_config(const std::filesystem::path& path, SimConfig& sim, ControllerConfig& ctrl) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sim config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    parse_sim_config(buffer.str(), sim, ctrl);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RobotState integrate_step(const RobotDescription& desc, const RobotState& s, const Eigen::VectorXd& torques,
                          double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_step: dt must be positive");
  const Eigen::MatrixXd B = actuation_matrix(desc);
  const auto dim = s.q.size() + 1;

  auto deriv = [&](const Eigen::VectorXd& pos, const Eigen::VectorXd& vel) {
    RobotState st;
    st.set_position(pos);
    st.set_velocity(vel);
    return forward_dynamics(dynamics_terms(desc, st), B, torques);
  };

  const Eigen::VectorXd p0 = s.position();
  const Eigen::VectorXd v0 = s.velocity();
  const Eigen::VectorXd a1 = deriv(p0, v0);
  const Eigen::VectorXd p1 = p0 + 0.5 * dt * v0, v1 = v0 + 0.5 * dt * a1;
  const Eigen::VectorXd a2 = deriv(p1, v1);
  const Eigen::VectorXd p2 = p0 + 0.5 * dt * v1, v2 = v0 + 0.5 * dt * a2;
  const Eigen::VectorXd a3 = deriv(p2, v2);
  const Eigen::VectorXd p3 = p0 + dt * v2, v3 = v0 + dt * a3;
  const Eigen::VectorXd a4 = deriv(p3, v3);

  RobotState next;
  next.set_position(p0 + dt / 6.0 * (v0 + 2.0 * v1 + 2.0 * v2 + v3));
  next.set_velocity(v0 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4));
  if (!next.position().allFinite() || !next.velocity().allFinite() || next.q.size() + 1 != dim)
    throw std::runtime_error("integrate_step: non-finite state");
  return next;
}

RobotState balanced_pose(const RobotDescription& desc, const RobotState& s) {
  RobotState out = s;
  out.q[0] = 0.0;
  const ComState cs = com_state(desc, out);
  // Changing q1 rotates the whole body about the axle.
  out.q[0] = -cs.theta;
  return out;
}

RobotState initial_state(const RobotDescription& desc, const SimConfig& cfg) {
  const int n = desc.dof();
  RobotState s(n);
  s.x = cfg.initial.x;
  s.xdot = cfg.initial.xdot;
  if (cfg.initial.q.size() == n) s.q = cfg.initial.q;
  if (cfg.initial.qdot.size() == n) s.qdot = cfg.initial.qdot;
  if (cfg.balance_initial) s = balanced_pose(desc, s);
  if (cfg.perturbation > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.perturbation);
    for (int j = 0; j < n; ++j) s.q[j] += noise(rng);
  }
  return s;
}

namespace {

SimRecord make_record(const RobotDescription& desc, double t, const RobotState& s, const MpcOutput& mpc,
                      const WbcOutput& wbc) {
  SimRecord r;
  r.t = t;
  r.state = s;
  r.X = mpc.state;
  r.X_traj = mpc.reference;
  r.lambda = mpc.params;
  r.u = mpc.theta_ddot_ref;
  r.torques = wbc.torques;
  r.task_errors = wbc.task_errors;
  r.energy = total_energy(desc, s);
  r.ee = end_effector_position(desc, s) + Eigen::Vector2d(s.x, desc.wheel.radius);
  r.ee_phi = end_effector_angle(s);
  r.qp_status = wbc.qp_status;
  r.qp_iterations = wbc.qp_iterations;
  r.mpc_iterations = mpc.iterations;
  r.mpc_converged = mpc.solve_converged;
  r.fallback = wbc.fallback;
  return r;
}

}  // namespace

Trajectory plan_reference(const RobotDescription& desc, const SimConfig& cfg, const ControllerConfig& ctrl) {
  const RobotState s = initial_state(desc, cfg);
  MpcConfig ref_cfg = ctrl.mpc;
  ref_cfg.ddp = ctrl.ddp;
  return make_reference(extract_params(desc, s), wipm_state_of(desc, s), WipmState(0.0, 0.0, cfg.goal, 0.0), cfg.tf,
                        ctrl.ddp_cost, ref_cfg);
}

SimLog run_closed_loop(const RobotDescription& desc, const SimConfig& cfg, const ControllerConfig& ctrl) {
  const int n = desc.dof();
  cfg.validate(n);
  const auto wall_start = std::chrono::steady_clock::now();

  SimLog log;
  RobotState s = initial_state(desc, cfg);

  MpcConfig mpc_cfg = ctrl.mpc;
  mpc_cfg.Ts = cfg.mpc_period;
  log.reference = plan_reference(desc, cfg, ctrl);
  if (!log.reference.converged) spdlog::warn("reference DDP did not converge ({} iterations)", log.reference.iterations);

  MpcController mpc(mpc_cfg, log.reference);
  const std::vector<TaskSpec> tasks =
      cfg.decoupled ? decoupled_tasks(desc, s, ctrl.gains) : unified_tasks(desc, s, ctrl.gains);
  const Eigen::VectorXd limits = desc.torque_limits();
  WbcConfig wbc_cfg = ctrl.wbc;
  wbc_cfg.limit_horizon = cfg.mpc_period;

  const long steps = cfg.physics_steps();
  const int wbc_every = cfg.wbc_every();
  const int mpc_every = cfg.mpc_every();
  MpcOutput mpc_out;
  WbcOutput wbc_out;
  log.records.reserve(static_cast<std::size_t>(steps / cfg.log_decimation + 1));

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_physics;
    if (k % mpc_every == 0) {
      const int i = static_cast<int>(std::lround(t / mpc_cfg.dt));
      mpc_out = mpc.step(i, s, desc);
      log.mpc_iterations.push_back(mpc_out.iterations);
      ++log.mpc_calls;
    }
    if (k % wbc_every == 0) {
      wbc_out = control_step(desc, s, tasks, mpc_out, limits, wbc_cfg);
      ++log.wbc_calls;
    }
    if (k % cfg.log_decimation == 0) log.records.push_back(make_record(desc, t, s, mpc_out, wbc_out));

    try {
      s = integrate_step(desc, s, wbc_out.torques, cfg.dt_physics);
    } catch (const std::runtime_error& e) {
      log.diverged = true;
      log.divergence = std::string(e.what()) + " at t = " + std::to_string(t);
      break;
    }
    double theta = 0.0;
    try {
      theta = com_state(desc, s).theta;
    } catch (const DegenerateConfiguration&) {
      theta = M_PI;
    }
    if (std::abs(theta) > 0.5 * M_PI) {
      log.diverged = true;
      log.divergence = "robot fell over at t = " + std::to_string(t + cfg.dt_physics);
      break;
    }
  }

  log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return log;
}

SimSummary summarize(const SimLog& log, const RobotDescription& desc, const SimConfig& cfg) {
  SimSummary out;
  out.mpc_calls = log.mpc_calls;
  out.wbc_calls = log.wbc_calls;
  out.diverged = log.diverged;
  out.reference_converged = log.reference.converged;
  if (log.records.empty()) return out;

  const Eigen::VectorXd limits = desc.torque_limits();
  const double phi0 = log.records.front().ee_phi;
  std::optional<double> entered;
  for (const auto& r : log.records) {
    out.peak_theta = std::max(out.peak_theta, std::abs(r.X[kTheta]));
    out.peak_orientation_deviation = std::max(out.peak_orientation_deviation, std::abs(r.ee_phi - phi0));
    if (r.torques.size() == limits.size() &&
        ((r.torques.cwiseAbs() - limits).array() > 1e-8).any())
      ++out.torque_violations;
    if (r.qp_status != QpStatus::optimal) ++out.non_optimal_qp;
    if (std::abs(r.state.x - cfg.goal) < 0.05) {
      if (!entered) entered = r.t;
    } else {
      entered.reset();
    }
  }
  const auto& last = log.records.back();
  out.terminal_x_error = std::abs(last.state.x - cfg.goal);
  out.terminal_theta = last.X[kTheta];
  if (!log.diverged) out.completion_time = entered;
  return out;
}

void write_sim_csv(std::ostream& out, const SimLog& log, int n) {
  out << kSimLogSchema << "\n";
  out << "t,x,xdot";
  for (int j = 1; j <= n; ++j) out << ",q" << j;
  for (int j = 1; j <= n; ++j) out << ",qd" << j;
  out << ",theta,thetadot,theta_traj,x_traj,u";
  for (int j = 1; j <= n; ++j) out << ",tau" << j;
  out << ",ee_x,ee_z,ee_phi,E_kin,E_pot,qp_status,mpc_iters,thetadot_traj,xdot_traj\n";
  out << std::setprecision(17);
  for (const auto& r : log.records) {
    out << r.t << ',' << r.state.x << ',' << r.state.xdot;
    for (int j = 0; j < n; ++j) out << ',' << r.state.q[j];
    for (int j = 0; j < n; ++j) out << ',' << r.state.qdot[j];
    out << ',' << r.X[kTheta] << ',' << r.X[kThetaDot] << ',' << r.X_traj[kTheta] << ',' << r.X_traj[kX] << ','
        << r.u;
    for (int j = 0; j < n; ++j) out << ',' << r.torques[j];
    out << ',' << r.ee.x() << ',' << r.ee.y() << ',' << r.ee_phi << ',' << r.energy.kinetic << ','
        << r.energy.potential << ',' << to_string(r.qp_status) << ',' << r.mpc_iterations << ','
        << r.X_traj[kThetaDot] << ',' << r.X_traj[kXDot] << '\n';
  }
}

void write_plan_csv(std::ostream& out, const Trajectory& traj) {
  out << kPlanSchema << "\n";
  out << "t,theta_ref,thetadot_ref,x_ref,xdot_ref,u_ref\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const auto& X = traj.states[i];
    const double u = i < traj.controls.size() ? traj.controls[i] : 0.0;
    out << static_cast<double>(i) * traj.dt << ',' << X[kTheta] << ',' << X[kThetaDot] << ',' << X[kX] << ','
        << X[kXDot] << ',' << u << '\n';
  }
}

}  // namespace wiphwbc
