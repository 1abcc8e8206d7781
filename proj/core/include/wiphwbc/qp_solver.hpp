#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace wiphwbc {

/// min 1/2 x'Gx + g'x  s.t.  CE x + cE = 0,  CI x + cI <= 0.
struct QpProblem {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd CE;
  Eigen::VectorXd cE;
  Eigen::MatrixXd CI;
  Eigen::VectorXd cI;

  QpProblem() = default;
  QpProblem(Eigen::MatrixXd G_, Eigen::VectorXd g_);

  [[nodiscard]] Eigen::Index num_vars() const { return G.rows(); }
};

enum class QpStatus { optimal, infeasible, max_iter };

std::string_view to_string(QpStatus s);

struct QpSolution {
  Eigen::VectorXd x;
  QpStatus status = QpStatus::infeasible;
  std::vector<int> active_set;        // indices into CI rows, in order of activation
  Eigen::VectorXd eq_multipliers;     // nu:  Gx + g + CE' nu + CI' mu = 0
  Eigen::VectorXd ineq_multipliers;   // mu >= 0, zero off the active set
  double kkt_residual = 0.0;
  int iterations = 0;
  bool regularized = false;
};

struct QpOptions {
  int max_iter = 0;                 // 0 selects 10 * (vars + constraints) + 10
  std::vector<int> warm_active_set;  // candidate active set from a previous solve
};

/// Dense dual active-set solver (Goldfarb-Idnani). The objective is symmetrized and divided by
/// its largest |eigenvalue|; if the normalized G is then below 1e-12 in some direction it is
/// shifted by 1e-9 I. The entering constraint is the most violated
/// one, lowest index first on ties.
QpSolution solve_qp(const QpProblem& problem, const QpOptions& opts = {});

/// max of stationarity, primal infeasibility, dual infeasibility and complementarity.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                    const Eigen::VectorXd& mu);

}  // namespace wiphwbc
