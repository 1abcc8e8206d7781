#include "wiphwbc/ddp.hpp"
#include "wiphwbc/dynamics.hpp"
#include "wiphwbc/mpc.hpp"
#include "wiphwbc/qp_solver.hpp"
#include "wiphwbc/sim.hpp"
#include "wiphwbc/wbc.hpp"

#include <benchmark/benchmark.h>

using namespace wiphwbc;

namespace {

RobotDescription robot(int n) {
  switch (n) {
    case 1: return default_one_link();
    case 3: return default_three_link();
    default: return default_seven_link();
  }
}

RobotState moving_state(const RobotDescription& d) {
  RobotState s(d.dof());
  for (int j = 0; j < d.dof(); ++j) {
    s.q[j] = 0.1 * (j + 1) * (j % 2 ? -1 : 1);
    s.qdot[j] = 0.3 * (j % 3 - 1);
  }
  s.xdot = 0.4;
  return s;
}

void BM_ForwardDynamics(benchmark::State& st) {
  const RobotDescription d = robot(static_cast<int>(st.range(0)));
  const RobotState s = moving_state(d);
  const Eigen::VectorXd tau = Eigen::VectorXd::Constant(d.dof(), 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(forward_dynamics(d, s, tau));
}
BENCHMARK(BM_ForwardDynamics)->Arg(1)->Arg(3)->Arg(7);

void BM_QpTorqueBox(benchmark::State& st) {
  // Weighted least squares over n accelerations with 2n general inequality rows.
  const auto n = st.range(0);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Random(n, n);
  QpProblem p(L * L.transpose() + Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Random(n) * 10.0);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(n, n);
  p.CI.resize(2 * n, n);
  p.CI << A, -A;
  p.cI = -Eigen::VectorXd::Constant(2 * n, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(solve_qp(p));
}
BENCHMARK(BM_QpTorqueBox)->Arg(3)->Arg(7)->Arg(14);

void BM_DdpHorizon(benchmark::State& st) {
  // One MPC solve: N = 100 steps from a tilted state toward a point 0.5 m ahead.
  const RobotDescription d = default_seven_link();
  const WipmParams p = extract_params(d, balanced_pose(d, RobotState(7)));
  const CostSpec cost = CostSpec::goal(WipmState(0, 0, 0.5, 0));
  const WipmState x0(0.05, 0.0, 0.0, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(solve(p, x0, cost, 100, 0.01));
}
BENCHMARK(BM_DdpHorizon)->Unit(benchmark::kMicrosecond);

void BM_WbcStep(benchmark::State& st) {
  const RobotDescription d = robot(static_cast<int>(st.range(0)));
  const RobotState s = balanced_pose(d, moving_state(d));
  const std::vector<TaskSpec> tasks = unified_tasks(d, s, TaskGains{});
  MpcOutput ref;
  ref.theta_ddot_ref = -0.5;
  const Eigen::VectorXd limits = d.torque_limits();
  for (auto _ : st) benchmark::DoNotOptimize(control_step(d, s, tasks, ref, limits, WbcConfig{}));
}
BENCHMARK(BM_WbcStep)->Arg(3)->Arg(7)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
