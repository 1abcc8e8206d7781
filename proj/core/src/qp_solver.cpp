#include "wiphwbc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wiphwbc {

QpProblem::QpProblem(Eigen::MatrixXd G_, Eigen::VectorXd g_)
    : G(std::move(G_)),
      g(std::move(g_)),
      CE(0, G.rows()),
      cE(0),
      CI(0, G.rows()),
      cI(0) {}

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

double kkt_residual(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                    const Eigen::VectorXd& mu) {
  double r = (p.G * x + p.g + p.CE.transpose() * nu + p.CI.transpose() * mu).cwiseAbs().maxCoeff();
  if (p.CE.rows() > 0) r = std::max(r, (p.CE * x + p.cE).cwiseAbs().maxCoeff());
  if (p.CI.rows() > 0) {
    const Eigen::VectorXd s = p.CI * x + p.cI;
    r = std::max(r, s.maxCoeff());
    r = std::max(r, -mu.minCoeff());
    r = std::max(r, mu.cwiseProduct(s).cwiseAbs().maxCoeff());
  }
  return std::max(r, 0.0);
}

namespace {

// Internal constraint form: n_j' x = b_j (equalities), n_j' x >= b_j (inequalities).
// Column j < e of N is equality j; column e + i is inequality i.
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, Eigen::MatrixXd N, Eigen::VectorXd b,
                int num_eq)
      : G_(G), g_(g), N_(std::move(N)), b_(std::move(b)), e_(num_eq) {}

  /// Minimizer with the given constraints held as equalities. False if the KKT matrix is singular.
  bool solve_on(const std::vector<int>& active, Eigen::VectorXd& x, Eigen::VectorXd& u) const {
    const auto m = G_.rows();
    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + a, m + a);
    Eigen::VectorXd rhs(m + a);
    K.topLeftCorner(m, m) = G_;
    rhs.head(m) = -g_;
    for (Eigen::Index j = 0; j < a; ++j) {
      const auto c = active[static_cast<std::size_t>(j)];
      K.block(0, m + j, m, 1) = -N_.col(c);
      K.block(m + j, 0, 1, m) = N_.col(c).transpose();
      rhs[m + j] = b_[c];
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    x = sol.head(m);
    u = sol.tail(a);
    return true;
  }

  /// Step directions for adding constraint p: G z - N_A r' = n_p, N_A' z = 0; returns r = -r'.
  bool directions(const std::vector<int>& active, int p, Eigen::VectorXd& z, Eigen::VectorXd& r) const {
    const auto m = G_.rows();
    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + a, m + a);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + a);
    K.topLeftCorner(m, m) = G_;
    rhs.head(m) = N_.col(p);
    for (Eigen::Index j = 0; j < a; ++j) {
      const auto c = active[static_cast<std::size_t>(j)];
      K.block(0, m + j, m, 1) = -N_.col(c);
      K.block(m + j, 0, 1, m) = N_.col(c).transpose();
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    z = sol.head(m);
    r = -sol.tail(a);
    return true;
  }

  [[nodiscard]] double slack(int c, const Eigen::VectorXd& x) const { return N_.col(c).dot(x) - b_[c]; }

  [[nodiscard]] double tolerance(int c, const Eigen::VectorXd& x) const {
    return 1e-12 * std::max({1.0, std::abs(b_[c]), N_.col(c).norm() * x.norm()});
  }

  [[nodiscard]] int num_eq() const { return e_; }
  [[nodiscard]] int num_ineq() const { return static_cast<int>(N_.cols()) - e_; }
  [[nodiscard]] const Eigen::MatrixXd& normals() const { return N_; }

 private:
  const Eigen::MatrixXd& G_;
  const Eigen::VectorXd& g_;
  Eigen::MatrixXd N_;
  Eigen::VectorXd b_;
  int e_;
};

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const QpOptions& opts) {
  const auto m = problem.G.rows();
  if (problem.G.cols() != m || problem.g.size() != m || problem.CE.cols() != m ||
      problem.CE.rows() != problem.cE.size() || problem.CI.cols() != m || problem.CI.rows() != problem.cI.size())
    throw std::invalid_argument("solve_qp: inconsistent problem dimensions");
  if (problem.CE.rows() > m) throw std::invalid_argument("solve_qp: more equalities than variables");

  QpSolution sol;
  Eigen::MatrixXd G = 0.5 * (problem.G + problem.G.transpose());
  // Work on the objective normalized to unit largest eigenvalue: the minimizer is invariant to
  // scaling (G, g), and the KKT matrices stay balanced against the unit-scale constraint rows.
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues();
  const double scale = eig.cwiseAbs().maxCoeff() > 0.0 ? eig.cwiseAbs().maxCoeff() : 1.0;
  G /= scale;
  const Eigen::VectorXd g = problem.g / scale;
  if (eig.minCoeff() / scale < 1e-12) {
    G += 1e-9 * Eigen::MatrixXd::Identity(m, m);
    sol.regularized = true;
  }

  // Drop linearly dependent equality rows; an inconsistent dependent row is infeasible.
  std::vector<int> eq_rows;
  Eigen::Index rank = 0;
  if (problem.CE.rows() > 0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(problem.CE.transpose());
    rank = qr.rank();
    for (Eigen::Index j = 0; j < rank; ++j) eq_rows.push_back(static_cast<int>(qr.colsPermutation().indices()[j]));
    std::sort(eq_rows.begin(), eq_rows.end());
  }
  if (rank < problem.CE.rows()) {
    Eigen::MatrixXd Ek(rank, m);
    Eigen::VectorXd ek(rank);
    for (Eigen::Index j = 0; j < rank; ++j) {
      Ek.row(j) = problem.CE.row(eq_rows[static_cast<std::size_t>(j)]);
      ek[j] = problem.cE[eq_rows[static_cast<std::size_t>(j)]];
    }
    const Eigen::VectorXd xe =
        rank > 0 ? Eigen::VectorXd(Ek.completeOrthogonalDecomposition().solve(-ek)) : Eigen::VectorXd::Zero(m);
    if (((problem.CE * xe + problem.cE).cwiseAbs().array() > 1e-9 * std::max(1.0, problem.cE.cwiseAbs().maxCoeff())).any()) {
      sol.x = xe;
      sol.status = QpStatus::infeasible;
      return sol;
    }
  }

  const int e = static_cast<int>(eq_rows.size());
  const int k = static_cast<int>(problem.CI.rows());
  Eigen::MatrixXd N(m, e + k);
  Eigen::VectorXd b(e + k);
  for (int j = 0; j < e; ++j) {
    N.col(j) = problem.CE.row(eq_rows[static_cast<std::size_t>(j)]).transpose();
    b[j] = -problem.cE[eq_rows[static_cast<std::size_t>(j)]];
  }
  for (int i = 0; i < k; ++i) {
    N.col(e + i) = -problem.CI.row(i).transpose();
    b[e + i] = problem.cI[i];
  }
  const DualActiveSet das(G, g, N, b, e);

  // Map internal equality ids back to CE rows when reporting.
  auto report = [&](const std::vector<int>& active, const Eigen::VectorXd& u) {
    sol.eq_multipliers = Eigen::VectorXd::Zero(problem.CE.rows());
    sol.ineq_multipliers = Eigen::VectorXd::Zero(k);
    sol.active_set.clear();
    for (std::size_t j = 0; j < active.size(); ++j) {
      const int c = active[j];
      const auto idx = static_cast<Eigen::Index>(j);
      if (c < e) {
        sol.eq_multipliers[eq_rows[static_cast<std::size_t>(c)]] = -scale * u[idx];
      } else {
        sol.ineq_multipliers[c - e] = scale * u[idx];
        sol.active_set.push_back(c - e);
      }
    }
    QpProblem solved = problem;
    solved.G = scale * G;
    sol.kkt_residual = kkt_residual(solved, sol.x, sol.eq_multipliers, sol.ineq_multipliers);
  };

  std::vector<int> active(static_cast<std::size_t>(e));
  for (int j = 0; j < e; ++j) active[static_cast<std::size_t>(j)] = j;
  Eigen::VectorXd x, u;

  // Warm start: accept the previous active set outright if it is primal and dual feasible.
  if (!opts.warm_active_set.empty()) {
    std::vector<int> trial = active;
    for (int i : opts.warm_active_set)
      if (i >= 0 && i < k && std::find(trial.begin(), trial.end(), e + i) == trial.end()) trial.push_back(e + i);
    Eigen::VectorXd xw, uw;
    if (das.solve_on(trial, xw, uw)) {
      bool ok = true;
      for (std::size_t j = static_cast<std::size_t>(e); j < trial.size() && ok; ++j)
        ok = uw[static_cast<Eigen::Index>(j)] >= -1e-12;
      for (int i = 0; i < k && ok; ++i) ok = das.slack(e + i, xw) >= -das.tolerance(e + i, xw);
      if (ok) {
        sol.x = xw;
        sol.status = QpStatus::optimal;
        sol.iterations = 0;
        report(trial, uw);
        return sol;
      }
    }
  }

  if (!das.solve_on(active, x, u)) {
    sol.x = Eigen::VectorXd::Zero(m);
    sol.status = QpStatus::infeasible;
    return sol;
  }

  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * static_cast<int>(m + e + k) + 10;
  const double g_scale = std::max(1.0, G.cwiseAbs().maxCoeff());
  int iter = 0;

  while (true) {
    // Most violated inactive inequality, lowest index on ties.
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
      const int c = e + i;
      if (std::find(active.begin(), active.end(), c) != active.end()) continue;
      const double s = das.slack(c, x);
      if (s < -das.tolerance(c, x) && s < worst) {
        worst = s;
        p = c;
      }
    }
    if (p < 0) break;

    double lambda_p = 0.0;
    while (true) {
      if (++iter > max_iter) {
        sol.x = x;
        sol.status = QpStatus::max_iter;
        sol.iterations = iter;
        report(active, u);
        return sol;
      }
      Eigen::VectorXd z, r;
      if (!das.directions(active, p, z, r)) {
        sol.x = x;
        sol.status = QpStatus::infeasible;
        sol.iterations = iter;
        return sol;
      }
      const Eigen::VectorXd& np = das.normals().col(p);
      const double curvature = z.dot(np);
      const bool primal_step = curvature > 1e-14 * np.squaredNorm() / g_scale;

      // Partial step: largest t keeping active inequality multipliers nonnegative.
      double t2 = std::numeric_limits<double>::infinity();
      int blocking = -1;
      for (std::size_t j = static_cast<std::size_t>(e); j < active.size(); ++j) {
        const auto idx = static_cast<Eigen::Index>(j);
        if (r[idx] > 0.0) {
          const double t = u[idx] / r[idx];
          if (t < t2) {
            t2 = t;
            blocking = static_cast<int>(j);
          }
        }
      }
      const double t1 = primal_step ? -das.slack(p, x) / curvature : std::numeric_limits<double>::infinity();

      if (!primal_step && blocking < 0) {
        sol.x = x;
        sol.status = QpStatus::infeasible;
        sol.iterations = iter;
        return sol;
      }

      const double t = std::min(t1, t2);
      if (primal_step) x += t * z;
      u -= t * r;
      lambda_p += t;

      if (primal_step && t1 <= t2) {
        active.push_back(p);
        u.conservativeResize(u.size() + 1);
        u[u.size() - 1] = lambda_p;
        break;
      }
      // Drop the blocking constraint and retry adding p.
      active.erase(active.begin() + blocking);
      Eigen::VectorXd shrunk(u.size() - 1);
      shrunk << u.head(blocking), u.tail(u.size() - blocking - 1);
      u = shrunk;
    }
  }

  // Polish on the final active set.
  Eigen::VectorXd xp, up;
  if (das.solve_on(active, xp, up)) {
    bool dual_ok = true;
    for (std::size_t j = static_cast<std::size_t>(e); j < active.size(); ++j)
      dual_ok = dual_ok && up[static_cast<Eigen::Index>(j)] >= -1e-10;
    if (dual_ok) {
      x = xp;
      u = up;
    }
  }
  for (std::size_t j = static_cast<std::size_t>(e); j < active.size(); ++j)
    u[static_cast<Eigen::Index>(j)] = std::max(0.0, u[static_cast<Eigen::Index>(j)]);

  sol.x = x;
  sol.status = QpStatus::optimal;
  sol.iterations = iter;
  report(active, u);
  return sol;
}

}  // namespace wiphwbc
