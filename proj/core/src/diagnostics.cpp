#include "wiphwbc/diagnostics.hpp"

#include "wiphwbc/ddp.hpp"
#include "wiphwbc/isolation.hpp"
#include "wiphwbc/qp_solver.hpp"
#include "wiphwbc/sim.hpp"
#include "wiphwbc/wbc.hpp"
#include "wiphwbc/wipm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wiphwbc {

RobotState random_state(const RobotDescription& desc, std::mt19937_64& rng, double max_rate) {
  const int n = desc.dof();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RobotState s(n);
  s.x = 2.0 * unit(rng);
  s.xdot = unit(rng);
  for (int j = 0; j < n; ++j) {
    const double lo = std::max(desc.links[j].angle_min, -1.0);
    const double hi = std::min(desc.links[j].angle_max, 1.0);
    s.q[j] = lo + 0.5 * (unit(rng) + 1.0) * (hi - lo);
    s.qdot[j] = max_rate * unit(rng);
  }
  return s;
}

namespace {

CheckResult make(std::string name, double measured, double tol, std::string detail = {}) {
  return {std::move(name), measured < tol, measured, tol, std::move(detail)};
}

RobotState advance(const RobotState& s, double h) {
  RobotState out = s;
  out.x += h * s.xdot;
  out.q += h * s.qdot;
  return out;
}

CheckResult check_mass_matrix(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  double asym = 0.0, min_eig = INFINITY;
  for (int k = 0; k < o.samples; ++k) {
    const Eigen::MatrixXd A = mass_matrix(desc, random_state(desc, rng));
    asym = std::max(asym, (A - A.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues().minCoeff());
  }
  CheckResult r = make("mass matrix symmetric", asym, 1e-12);
  if (!(min_eig > 0.0)) r.passed = false;
  std::ostringstream d;
  d << "min eigenvalue " << min_eig;
  r.detail = d.str();
  return r;
}

CheckResult check_skew(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  double worst = 0.0, worst_partial = 0.0;
  const double h = 2.5e-4;
  for (int k = 0; k < o.samples; ++k) {
    const RobotState s = random_state(desc, rng);
    const Eigen::VectorXd v = s.velocity();
    // Adot along the flow by the five-point stencil; the analytic partials must agree with it.
    const Eigen::MatrixXd Adot = (-mass_matrix(desc, advance(s, 2 * h)) + 8.0 * mass_matrix(desc, advance(s, h)) -
                                  8.0 * mass_matrix(desc, advance(s, -h)) + mass_matrix(desc, advance(s, -2 * h))) /
                                 (12.0 * h);
    const std::vector<Eigen::MatrixXd> dA = mass_matrix_partials(desc, s);
    Eigen::MatrixXd Adot_analytic = Eigen::MatrixXd::Zero(v.size(), v.size());
    for (std::size_t c = 0; c < dA.size(); ++c) Adot_analytic += dA[c] * v[static_cast<Eigen::Index>(c)];
    worst_partial = std::max(worst_partial, (Adot - Adot_analytic).cwiseAbs().maxCoeff() /
                                                std::max(1.0, Adot_analytic.cwiseAbs().maxCoeff()));
    const Eigen::MatrixXd C = bias_terms(desc, s).C;
    worst = std::max(worst, std::abs(v.dot((Adot - 2.0 * C) * v)));
  }
  CheckResult r = make("qdot'(Adot - 2C)qdot = 0", worst, 1e-8);
  if (!(worst_partial < 1e-6)) r.passed = false;
  std::ostringstream d;
  d << "dA/dq vs finite differences " << worst_partial;
  r.detail = d.str();
  return r;
}

CheckResult check_energy(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  RobotState s = random_state(desc, rng, 0.5);
  const int n = desc.dof();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const double E0 = total_energy(desc, s).total();
  const long steps = std::lround(o.energy_duration / o.energy_dt);
  const bool frictionless = desc.damping().isZero(0.0);
  const Eigen::VectorXd d = desc.damping();

  // Dissipated energy by Simpson's rule on each step (midpoint from a half step).
  double dissipated = 0.0;
  auto loss = [&](const RobotState& st) { return st.qdot.dot(d.cwiseProduct(st.qdot)); };
  for (long k = 0; k < steps; ++k) {
    if (!frictionless) {
      const RobotState mid = integrate_step(desc, s, zero, 0.5 * o.energy_dt);
      const RobotState end = integrate_step(desc, s, zero, o.energy_dt);
      dissipated += o.energy_dt / 6.0 * (loss(s) + 4.0 * loss(mid) + loss(end));
      s = end;
    } else {
      s = integrate_step(desc, s, zero, o.energy_dt);
    }
  }
  const double E1 = total_energy(desc, s).total();
  const double err = std::abs(E1 - E0 + dissipated) / std::max(1.0, std::abs(E0));
  return make(frictionless ? "energy conserved (frictionless)" : "power balance (damped)", err,
              frictionless ? 1e-6 : 1e-5);
}

CheckResult check_isolation(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 2.0);
  double worst = 0.0, worst_zero = 0.0;
  const int n = desc.dof();
  for (int k = 0; k < o.samples; ++k) {
    const RobotState s = random_state(desc, rng);
    Eigen::VectorXd qdd(n);
    for (int j = 0; j < n; ++j) qdd[j] = gauss(rng);
    const DynamicsTerms t = dynamics_terms(desc, s);
    const IsolatedDynamics iso = isolate(t, desc.wheel.radius);
    const Eigen::VectorXd tau = inverse_dynamics(iso, qdd);
    const Eigen::VectorXd acc = forward_dynamics(t, actuation_matrix(desc), tau);
    worst = std::max(worst, (acc.tail(n) - qdd).cwiseAbs().maxCoeff() / std::max(1.0, qdd.cwiseAbs().maxCoeff()));
    worst_zero = std::max(worst_zero, std::abs(full_zero_dynamics_residual(desc, s, acc)));
  }
  CheckResult r = make("isolation round trip", worst, 1e-9);
  if (!(worst_zero < 1e-9)) r.passed = false;
  std::ostringstream d;
  d << "zero-dynamics residual " << worst_zero;
  r.detail = d.str();
  return r;
}

CheckResult check_wipm_exactness(const RobotDescription& desc) {
  RobotDescription one;
  one.wheel = desc.wheel;
  one.gravity = desc.gravity;
  one.links = {desc.links.front()};
  one.links.front().damping = 0.0;

  RobotState s(1);
  s.q[0] = 0.05;
  const WipmParams p = extract_params(one, s);
  WipmState X = wipm_state_of(one, s);
  const double dt = 1e-3;
  double worst = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const double t = k * dt;
    const double tau = 0.3 * std::sin(3.0 * t) - 2.0 * one.links[0].mass * X[kTheta];
    Eigen::VectorXd torque(1);
    torque << tau;
    s = integrate_step(one, s, torque, dt);
    auto deriv = [&](const WipmState& Y) {
      const Eigen::Vector2d acc = forced_dynamics(Y, tau, p);
      return WipmState(Y[kThetaDot], acc[1], Y[kXDot], acc[0]);
    };
    const WipmState k1 = deriv(X), k2 = deriv(X + 0.5 * dt * k1), k3 = deriv(X + 0.5 * dt * k2),
                    k4 = deriv(X + dt * k3);
    X += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    worst = std::max({worst, std::abs(X[kTheta] - s.q[0]), std::abs(X[kX] - s.x)});
  }
  return make("WIPM exact for one link", worst, 1e-6);
}

CheckResult check_wipm_jacobians(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  RobotState s(desc.dof());
  s = balanced_pose(desc, s);
  const WipmParams p = extract_params(desc, s);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  const double dt = 0.01, h = 1e-6;
  for (int k = 0; k < o.samples; ++k) {
    const WipmState X(0.5 * unit(rng), unit(rng), unit(rng), unit(rng));
    const double u = 3.0 * unit(rng);
    const StepJacobians J = step_jacobians(X, u, p, dt);
    for (int c = 0; c < 5; ++c) {
      WipmState Xp = X, Xm = X;
      double up = u, um = u;
      if (c < 4) {
        Xp[c] += h;
        Xm[c] -= h;
      } else {
        up += h;
        um -= h;
      }
      const Eigen::Vector4d fd = (step(Xp, up, p, dt) - step(Xm, um, p, dt)) / (2.0 * h);
      const Eigen::Vector4d an = c < 4 ? Eigen::Vector4d(J.f_X.col(c)) : J.f_u;
      worst = std::max(worst, (fd - an).cwiseAbs().maxCoeff() / std::max(1.0, an.cwiseAbs().maxCoeff()));
    }
  }
  return make("WIPM step Jacobians vs finite differences", worst, 1e-6);
}

CheckResult check_task_jacobians(const RobotDescription& desc, const CheckOptions& o, std::mt19937_64& rng) {
  double worst = 0.0;
  const double h = 1e-6;
  const int n = desc.dof();
  const int samples = std::max(1, o.samples / 10);
  for (int k = 0; k < samples; ++k) {
    RobotState s = random_state(desc, rng);
    s.q[0] = 0.0;
    s = balanced_pose(desc, s);
    for (TaskKind kind : {TaskKind::com_angle, TaskKind::ee_position}) {
      const TaskKinematics tk = task_jacobian(desc, s, kind);
      for (int j = 0; j < n; ++j) {
        RobotState sp = s, sm = s;
        sp.q[j] += h;
        sm.q[j] -= h;
        const Eigen::VectorXd fd =
            (task_jacobian(desc, sp, kind).value - task_jacobian(desc, sm, kind).value) / (2.0 * h);
        worst = std::max(worst, (fd - tk.J.col(j)).cwiseAbs().maxCoeff());
      }
      // Jdot qdot: derivative of J qdot along the flow with qdot frozen.
      const Eigen::VectorXd fd_bias = (task_jacobian(desc, advance(s, h), kind).rate -
                                       task_jacobian(desc, advance(s, -h), kind).rate) / (2.0 * h);
      worst = std::max(worst, (fd_bias - tk.Jdot_qdot).cwiseAbs().maxCoeff());
    }
  }
  return make("task Jacobians vs finite differences", worst, 1e-6);
}

CheckResult check_qp(const CheckOptions& o, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_kkt = 0.0, worst_diff = 0.0;
  int solved = 0;
  for (int trial = 0; trial < o.samples; ++trial) {
    const int m = 1 + trial % 4;
    const int k = 1 + trial % 6;
    Eigen::MatrixXd L = Eigen::MatrixXd::NullaryExpr(m, m, [&] { return gauss(rng); });
    QpProblem p(L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m),
                Eigen::VectorXd::NullaryExpr(m, [&] { return gauss(rng); }));
    const Eigen::VectorXd feasible = Eigen::VectorXd::NullaryExpr(m, [&] { return gauss(rng); });
    p.CI = Eigen::MatrixXd::NullaryExpr(k, m, [&] { return gauss(rng); });
    p.cI = -p.CI * feasible - Eigen::VectorXd::NullaryExpr(k, [&] { return std::abs(gauss(rng)); });
    const QpSolution sol = solve_qp(p);
    if (sol.status != QpStatus::optimal) {
      worst_kkt = INFINITY;
      continue;
    }
    ++solved;
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);

    // Enumerate active subsets; the KKT point that is primal and dual feasible is the optimum.
    double best = INFINITY;
    Eigen::VectorXd best_x;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      std::vector<int> act;
      for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) act.push_back(i);
      if (static_cast<int>(act.size()) > m) continue;
      const int a = static_cast<int>(act.size());
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + a, m + a);
      Eigen::VectorXd rhs(m + a);
      K.topLeftCorner(m, m) = p.G;
      rhs.head(m) = -p.g;
      for (int j = 0; j < a; ++j) {
        K.block(0, m + j, m, 1) = p.CI.row(act[j]).transpose();
        K.block(m + j, 0, 1, m) = p.CI.row(act[j]);
        rhs[m + j] = -p.cI[act[j]];
      }
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd z = lu.solve(rhs);
      const Eigen::VectorXd x = z.head(m);
      if ((z.tail(a).array() < -1e-10).any()) continue;
      if (((p.CI * x + p.cI).array() > 1e-10).any()) continue;
      const double f = 0.5 * x.dot(p.G * x) + p.g.dot(x);
      if (f < best) {
        best = f;
        best_x = x;
      }
    }
    if (best_x.size() == m) worst_diff = std::max(worst_diff, (best_x - sol.x).cwiseAbs().maxCoeff());
  }
  CheckResult r = make("QP KKT residual", worst_kkt, 1e-8);
  if (!(worst_diff < 1e-8)) r.passed = false;
  std::ostringstream d;
  d << solved << " solved, max deviation from enumeration " << worst_diff;
  r.detail = d.str();
  return r;
}

}  // namespace

std::vector<CheckResult> run_checks(const RobotDescription& desc, const CheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<CheckResult> out;
  out.push_back(check_mass_matrix(desc, opts, rng));
  out.push_back(check_skew(desc, opts, rng));
  out.push_back(check_energy(desc, opts, rng));
  out.push_back(check_isolation(desc, opts, rng));
  out.push_back(check_wipm_exactness(desc));
  out.push_back(check_wipm_jacobians(desc, opts, rng));
  out.push_back(check_task_jacobians(desc, opts, rng));
  out.push_back(check_qp(opts, rng));
  return out;
}

}  // namespace wiphwbc
