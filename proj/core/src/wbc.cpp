#include "wiphwbc/wbc.hpp"

#include <cmath>
#include <stdexcept>

namespace wiphwbc {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::com_angle: return "com_angle";
    case TaskKind::ee_position: return "ee_position";
    case TaskKind::ee_orientation: return "ee_orientation";
    case TaskKind::regularization: return "regularization";
    case TaskKind::posture: return "posture";
  }
  return "unknown";
}

int task_rows(TaskKind kind, int n) {
  switch (kind) {
    case TaskKind::com_angle: return 1;
    case TaskKind::ee_position: return 2;
    case TaskKind::ee_orientation: return 1;
    case TaskKind::regularization: return n;
    case TaskKind::posture: return n - 1;
  }
  return 0;
}

namespace {

struct PlanarChain {
  std::vector<double> s, c, phidot;
};

PlanarChain planar_chain(const RobotState& st) {
  const auto n = static_cast<std::size_t>(st.q.size());
  PlanarChain ch{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  double phi = 0.0, rate = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    phi += st.q[static_cast<Eigen::Index>(k)];
    rate += st.qdot[static_cast<Eigen::Index>(k)];
    ch.s[k] = std::sin(phi);
    ch.c[k] = std::cos(phi);
    ch.phidot[k] = rate;
  }
  return ch;
}

/// Jacobian (2 x n) and velocity-product term of a point at `offset` along link k, axle-relative.
void point_kinematics(const RobotDescription& desc, const PlanarChain& ch, int k, double offset,
                      Eigen::MatrixXd& J, Eigen::Vector2d& Jdot_qdot) {
  const int n = desc.dof();
  J = Eigen::MatrixXd::Zero(2, n);
  Jdot_qdot.setZero();
  Eigen::Vector2d tail(offset * ch.c[k], -offset * ch.s[k]);
  Jdot_qdot += offset * Eigen::Vector2d(-ch.s[k], -ch.c[k]) * ch.phidot[k] * ch.phidot[k];
  for (int i = k; i >= 0; --i) {
    J.col(i) = tail;
    if (i > 0) {
      const double l = desc.links[i - 1].length;
      tail += Eigen::Vector2d(l * ch.c[i - 1], -l * ch.s[i - 1]);
      Jdot_qdot += l * Eigen::Vector2d(-ch.s[i - 1], -ch.c[i - 1]) * ch.phidot[i - 1] * ch.phidot[i - 1];
    }
  }
}

}  // namespace

TaskKinematics task_jacobian(const RobotDescription& desc, const RobotState& s, TaskKind kind) {
  const int n = desc.dof();
  const PlanarChain ch = planar_chain(s);
  TaskKinematics tk;

  switch (kind) {
    case TaskKind::com_angle: {
      const ComState cs = com_state(desc, s);
      Eigen::Vector2d bias = Eigen::Vector2d::Zero();
      Eigen::MatrixXd Jk;
      Eigen::Vector2d bk;
      for (int k = 0; k < n; ++k) {
        point_kinematics(desc, ch, k, desc.links[k].com_offset, Jk, bk);
        bias += desc.links[k].mass * bk;
      }
      bias /= cs.M;
      const double X = cs.X_com, Z = cs.Z_com;
      const double D = X * X + Z * Z;
      const Eigen::Vector2d rate = cs.J_com * s.qdot;
      // theta = atan2(X, Z): thetadot = (Z Xdot - X Zdot) / D.
      tk.J = (Z * cs.J_com.row(0) - X * cs.J_com.row(1)) / D;
      tk.Jdot_qdot = Eigen::VectorXd::Constant(
          1, (Z * bias.x() - X * bias.y()) / D - 2.0 * cs.thetadot * (X * rate.x() + Z * rate.y()) / D);
      tk.value = Eigen::VectorXd::Constant(1, cs.theta);
      break;
    }
    case TaskKind::ee_position: {
      Eigen::MatrixXd J;
      Eigen::Vector2d b;
      point_kinematics(desc, ch, n - 1, desc.links[n - 1].length, J, b);
      tk.J = J;
      tk.Jdot_qdot = b;
      tk.value = end_effector_position(desc, s);
      break;
    }
    case TaskKind::ee_orientation:
      tk.J = Eigen::MatrixXd::Ones(1, n);
      tk.Jdot_qdot = Eigen::VectorXd::Zero(1);
      tk.value = Eigen::VectorXd::Constant(1, end_effector_angle(s));
      break;
    case TaskKind::regularization:
      tk.J = Eigen::MatrixXd::Identity(n, n);
      tk.Jdot_qdot = Eigen::VectorXd::Zero(n);
      tk.value = s.q;
      break;
    case TaskKind::posture:
      tk.J = Eigen::MatrixXd::Zero(n - 1, n);
      tk.J.rightCols(n - 1).setIdentity();
      tk.Jdot_qdot = Eigen::VectorXd::Zero(n - 1);
      tk.value = s.q.tail(n - 1);
      break;
  }
  tk.rate = tk.J * s.qdot;
  return tk;
}

namespace {

TaskSpec make_task(TaskKind kind, int rows, double w, double kp, double kd, Eigen::VectorXd desired) {
  TaskSpec t;
  t.kind = kind;
  t.weight = w;
  t.Kp = Eigen::VectorXd::Constant(rows, kp);
  t.Kd = Eigen::VectorXd::Constant(rows, kd);
  t.desired = std::move(desired);
  t.desired_dot = Eigen::VectorXd::Zero(rows);
  t.desired_ddot = Eigen::VectorXd::Zero(rows);
  return t;
}

}  // namespace

std::vector<TaskSpec> unified_tasks(const RobotDescription& desc, const RobotState& initial, const TaskGains& g) {
  const int n = desc.dof();
  std::vector<TaskSpec> tasks;
  tasks.push_back(make_task(TaskKind::com_angle, 1, g.w_theta, g.kp_theta, g.kd_theta, Eigen::VectorXd::Zero(1)));
  if (n >= 2) {
    tasks.push_back(make_task(TaskKind::ee_position, 2, g.w_ee, g.kp_ee, g.kd_ee,
                              task_jacobian(desc, initial, TaskKind::ee_position).value));
    tasks.push_back(make_task(TaskKind::ee_orientation, 1, g.w_phi, g.kp_phi, g.kd_phi,
                              Eigen::VectorXd::Constant(1, end_effector_angle(initial))));
  }
  tasks.push_back(make_task(TaskKind::regularization, n, g.w_reg, 0.0, g.kd_reg, Eigen::VectorXd::Zero(n)));
  return tasks;
}

std::vector<TaskSpec> decoupled_tasks(const RobotDescription& desc, const RobotState& initial, const TaskGains& g) {
  const int n = desc.dof();
  std::vector<TaskSpec> tasks;
  tasks.push_back(make_task(TaskKind::com_angle, 1, g.w_theta, g.kp_theta, g.kd_theta, Eigen::VectorXd::Zero(1)));
  if (n >= 2)
    tasks.push_back(make_task(TaskKind::posture, n - 1, g.w_posture, g.kp_posture, g.kd_posture,
                              initial.q.tail(n - 1)));
  tasks.push_back(make_task(TaskKind::regularization, n, g.w_reg, 0.0, g.kd_reg, Eigen::VectorXd::Zero(n)));
  return tasks;
}

WbcOutput control_step(const RobotDescription& desc, const RobotState& s, const std::vector<TaskSpec>& tasks,
                       const MpcOutput& ref, const Eigen::VectorXd& limits, const WbcConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("control_step: no tasks");
  const int n = desc.dof();

  int rows = 0;
  for (const auto& t : tasks) rows += task_rows(t.kind, n);
  Eigen::MatrixXd P(rows, n);
  Eigen::VectorXd b(rows);

  WbcOutput out;
  int r = 0;
  for (const auto& t : tasks) {
    const TaskKinematics tk = task_jacobian(desc, s, t.kind);
    const int m = static_cast<int>(tk.J.rows());
    Eigen::VectorXd xd = t.desired, xdd = t.desired_dot, xddd = t.desired_ddot;
    if (t.kind == TaskKind::com_angle) {
      xd = Eigen::VectorXd::Constant(1, ref.theta_ref);
      xdd = Eigen::VectorXd::Constant(1, ref.thetadot_ref);
      xddd = Eigen::VectorXd::Constant(1, ref.theta_ddot_ref);
    }
    Eigen::VectorXd err = tk.value - xd;
    if (t.kind == TaskKind::regularization) err.setZero();  // damping only
    const Eigen::VectorXd cmd =
        xddd - t.Kp.cwiseProduct(err) - t.Kd.cwiseProduct(tk.rate - xdd);
    P.middleRows(r, m) = t.weight * tk.J;
    b.segment(r, m) = t.weight * (cmd - tk.Jdot_qdot);
    out.task_errors.push_back(err.norm());
    r += m;
  }

  const DynamicsTerms terms = dynamics_terms(desc, s);
  const IsolatedDynamics iso = isolate(terms, desc.wheel.radius);
  const TorqueRows torque = torque_constraint_rows(iso, limits);

  // One-step-ahead braking rows for finite joint limits.
  std::vector<Eigen::RowVectorXd> limit_rows;
  std::vector<double> limit_consts;
  if (cfg.joint_limits) {
    const double T = cfg.limit_horizon;
    const double k = 2.0 / (T * T);
    for (int j = 0; j < n; ++j) {
      const auto& l = desc.links[j];
      if (std::isfinite(l.angle_min)) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        row[j] = -1.0;
        limit_rows.push_back(row);
        limit_consts.push_back(k * (l.angle_min + cfg.joint_limit_margin - s.q[j] - T * s.qdot[j]));
      }
      if (std::isfinite(l.angle_max)) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        row[j] = 1.0;
        limit_rows.push_back(row);
        limit_consts.push_back(-k * (l.angle_max - cfg.joint_limit_margin - s.q[j] - T * s.qdot[j]));
      }
    }
  }

  QpProblem qp(P.transpose() * P, -P.transpose() * b);
  auto build = [&](bool with_limits) {
    const auto extra = with_limits ? static_cast<Eigen::Index>(limit_rows.size()) : 0;
    qp.CI.resize(torque.C_I.rows() + extra, n);
    qp.cI.resize(torque.c_I.size() + extra);
    qp.CI.topRows(torque.C_I.rows()) = torque.C_I;
    qp.cI.head(torque.c_I.size()) = torque.c_I;
    for (Eigen::Index j = 0; j < extra; ++j) {
      qp.CI.row(torque.C_I.rows() + j) = limit_rows[static_cast<std::size_t>(j)];
      qp.cI[torque.c_I.size() + j] = limit_consts[static_cast<std::size_t>(j)];
    }
  };

  build(cfg.joint_limits);
  QpSolution sol = solve_qp(qp);
  if (sol.status != QpStatus::optimal && cfg.joint_limits && !limit_rows.empty()) {
    out.joint_limits_dropped = true;
    build(false);
    sol = solve_qp(qp);
  }

  out.qp_status = sol.status;
  out.qp_iterations = sol.iterations;
  if (sol.status == QpStatus::optimal) {
    out.qddot = sol.x;
    out.torques = inverse_dynamics(iso, sol.x);
    out.active_constraints = sol.active_set;
  } else {
    out.fallback = true;
    out.torques = iso.bias.cwiseMax(-limits).cwiseMin(limits);
    out.qddot = isolated_forward(iso, out.torques);
  }
  return out;
}

}  // namespace wiphwbc
