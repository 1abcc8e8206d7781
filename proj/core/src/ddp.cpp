#include "wiphwbc/ddp.hpp"

#include <algorithm>
#include <cmath>

namespace wiphwbc {

const WipmState& CostSpec::target(std::size_t i) const {
  return reference[std::min(i, reference.size() - 1)];
}

void CostSpec::validate() const {
  if (reference.empty()) throw std::invalid_argument("CostSpec: empty reference");
  if (!G_run.allFinite() || !G_term.allFinite() || !std::isfinite(g_run) || (G_run.array() < 0).any() ||
      (G_term.array() < 0).any() || g_run < 0)
    throw std::invalid_argument("CostSpec: weights must be finite and nonnegative");
}

CostSpec CostSpec::goal(const WipmState& goal_state) {
  CostSpec c;
  c.reference = {goal_state};
  return c;
}

std::vector<WipmState> rollout(const WipmParams& p, const WipmState& x0, const std::vector<double>& controls,
                               double dt) {
  std::vector<WipmState> xs(controls.size() + 1);
  xs[0] = x0;
  for (std::size_t i = 0; i < controls.size(); ++i) xs[i + 1] = step(xs[i], controls[i], p, dt);
  return xs;
}

double trajectory_cost(const std::vector<WipmState>& states, const std::vector<double>& controls,
                       const CostSpec& cost) {
  double J = 0.0;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    const WipmState e = states[i] - cost.target(i);
    J += e.dot(cost.G_run.cwiseProduct(e)) + cost.g_run * controls[i] * controls[i];
  }
  const WipmState e = states.back() - cost.target(controls.size());
  return J + e.dot(cost.G_term.cwiseProduct(e));
}

std::vector<double> control_gradient(const WipmParams& p, const WipmState& x0,
                                     const std::vector<double>& controls, const CostSpec& cost, double dt) {
  const auto xs = rollout(p, x0, controls, dt);
  const std::size_t N = controls.size();
  std::vector<double> grad(N);
  Eigen::Vector4d lam = 2.0 * cost.G_term.cwiseProduct(xs[N] - cost.target(N));
  for (std::size_t i = N; i-- > 0;) {
    const StepJacobians J = step_jacobians(xs[i], controls[i], p, dt);
    grad[i] = 2.0 * cost.g_run * controls[i] + J.f_u.dot(lam);
    lam = 2.0 * cost.G_run.cwiseProduct(xs[i] - cost.target(i)) + J.f_X.transpose() * lam;
  }
  return grad;
}

std::vector<WipmState> replay_with_feedback(const WipmParams& p, const Trajectory& traj, const WipmState& x0,
                                            std::vector<double>* applied_controls) {
  const std::size_t N = traj.controls.size();
  std::vector<WipmState> xs(N + 1);
  if (applied_controls) applied_controls->resize(N);
  xs[0] = x0;
  for (std::size_t i = 0; i < N; ++i) {
    const double u = traj.controls[i] + traj.gains[i].K.dot(xs[i] - traj.states[i]);
    if (applied_controls) (*applied_controls)[i] = u;
    xs[i + 1] = step(xs[i], u, p, traj.dt);
  }
  return xs;
}

namespace {

struct BackwardResult {
  bool ok = false;
  double dV1 = 0.0;  // linear term of the expected cost change
  double dV2 = 0.0;  // quadratic term
};

BackwardResult backward_pass(const WipmParams& p, const CostSpec& cost, double dt, double reg,
                             const std::vector<WipmState>& xs, const std::vector<double>& us,
                             std::vector<FeedbackGain>& gains) {
  const std::size_t N = us.size();
  const Eigen::Matrix4d Gr = cost.G_run.asDiagonal();
  BackwardResult res;
  Eigen::Vector4d Vx = 2.0 * cost.G_term.cwiseProduct(xs[N] - cost.target(N));
  Eigen::Matrix4d Vxx = 2.0 * cost.G_term.asDiagonal().toDenseMatrix();

  for (std::size_t i = N; i-- > 0;) {
    const StepJacobians J = step_jacobians(xs[i], us[i], p, dt);
    const Eigen::Vector4d lx = 2.0 * cost.G_run.cwiseProduct(xs[i] - cost.target(i));
    const double lu = 2.0 * cost.g_run * us[i];

    const Eigen::Vector4d Qx = lx + J.f_X.transpose() * Vx;
    const double Qu = lu + J.f_u.dot(Vx);
    const Eigen::Matrix4d Qxx = 2.0 * Gr + J.f_X.transpose() * Vxx * J.f_X;
    const double Quu = 2.0 * cost.g_run + J.f_u.dot(Vxx * J.f_u);
    const Eigen::RowVector4d Qux = J.f_u.transpose() * Vxx * J.f_X;

    const double Quu_reg = Quu + reg;
    if (!(Quu_reg > 0.0) || !std::isfinite(Quu_reg)) return res;

    const double k = -Qu / Quu_reg;
    const Eigen::RowVector4d K = -Qux / Quu_reg;
    gains[i] = {k, K};

    res.dV1 += k * Qu;
    res.dV2 += 0.5 * k * k * Quu;

    Vx = Qx + K.transpose() * (Quu * k) + K.transpose() * Qu + Qux.transpose() * k;
    Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
    Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
  }
  res.ok = true;
  return res;
}

}  // namespace

Trajectory solve(const WipmParams& p, const WipmState& x0, const CostSpec& cost, int N, double dt,
                 const DdpOptions& opts) {
  if (N < 1) throw std::invalid_argument("ddp::solve: N must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("ddp::solve: dt must be positive");
  if (!x0.allFinite()) throw std::invalid_argument("ddp::solve: non-finite initial state");
  cost.validate();

  Trajectory tr;
  tr.dt = dt;
  tr.controls.assign(static_cast<std::size_t>(N), 0.0);
  if (!opts.initial_controls.empty()) {
    for (int i = 0; i < N; ++i) {
      const auto j = std::min<std::size_t>(static_cast<std::size_t>(i), opts.initial_controls.size() - 1);
      tr.controls[static_cast<std::size_t>(i)] = opts.initial_controls[j];
    }
  }
  tr.gains.assign(static_cast<std::size_t>(N), FeedbackGain{});
  tr.states = rollout(p, x0, tr.controls, dt);
  tr.cost = trajectory_cost(tr.states, tr.controls, cost);
  if (!std::isfinite(tr.cost)) throw DdpDivergence("ddp: non-finite cost of initial rollout", 0);
  tr.cost_history.push_back(tr.cost);

  double reg = opts.reg_init;
  std::vector<FeedbackGain> gains(static_cast<std::size_t>(N));
  std::vector<WipmState> xs_new(static_cast<std::size_t>(N) + 1);
  std::vector<double> us_new(static_cast<std::size_t>(N));

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    tr.iterations = iter;
    const double scale = opts.tol_cost * std::max(1.0, std::abs(tr.cost));

    BackwardResult back;
    while (true) {
      back = backward_pass(p, cost, dt, reg, tr.states, tr.controls, gains);
      if (back.ok) break;
      reg = std::max(reg * opts.reg_increase, opts.reg_min);
      if (reg > opts.reg_max) return tr;
    }

    // Nothing left to gain to first order: the current trajectory is stationary.
    if (-(back.dV1 + back.dV2) < scale) {
      tr.gains = gains;
      tr.converged = true;
      return tr;
    }

    bool accepted = false;
    double alpha = 1.0;
    double J_new = tr.cost;
    for (int ls = 0; ls < opts.line_search_steps; ++ls, alpha *= 0.5) {
      xs_new[0] = x0;
      bool finite = true;
      try {
        for (std::size_t i = 0; i < static_cast<std::size_t>(N); ++i) {
          us_new[i] = tr.controls[i] + alpha * gains[i].k + gains[i].K.dot(xs_new[i] - tr.states[i]);
          xs_new[i + 1] = step(xs_new[i], us_new[i], p, dt);
          if (!xs_new[i + 1].allFinite()) {
            finite = false;
            break;
          }
        }
      } catch (const DegenerateConfiguration&) {
        finite = false;  // the trial left the model's domain (pendulum past horizontal)
      }
      if (!finite) continue;
      J_new = trajectory_cost(xs_new, us_new, cost);
      if (std::isfinite(J_new) && J_new < tr.cost) {
        accepted = true;
        break;
      }
    }

    if (!accepted) {
      reg = std::max(reg * opts.reg_increase, opts.reg_min);
      if (reg > opts.reg_max) return tr;
      continue;
    }

    const double improvement = tr.cost - J_new;
    tr.states.swap(xs_new);
    tr.controls.swap(us_new);
    tr.gains = gains;
    tr.cost = J_new;
    tr.cost_history.push_back(J_new);
    reg = std::max(reg / opts.reg_decrease, opts.reg_min);

    if (improvement < opts.tol_cost * std::max(1.0, std::abs(J_new))) {
      // Gains must belong to the returned nominal, not the one before the last step.
      if (backward_pass(p, cost, dt, reg, tr.states, tr.controls, gains).ok) tr.gains = gains;
      tr.converged = true;
      return tr;
    }
  }
  return tr;
}

}  // namespace wiphwbc
