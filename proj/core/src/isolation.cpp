#include "wiphwbc/isolation.hpp"

#include <spdlog/spdlog.h>

#include <cassert>
#include <cmath>

namespace wiphwbc {

IsolatedDynamics isolate(const DynamicsTerms& terms, const Eigen::VectorXd& bias_full, double wheel_radius) {
  const auto n = terms.a_xq.size();
  if (!(terms.a_xx > 0.0)) throw DegenerateConfiguration("isolate: a_xx must be positive");

  IsolatedDynamics iso;
  iso.alpha = terms.a_xq[0] / (wheel_radius * terms.a_xx);
  if (1.0 + iso.alpha == 0.0) throw DegenerateConfiguration("isolate: 1 + alpha vanishes");
  iso.beta = 1.0 / (1.0 + iso.alpha);

  iso.Bmat = Eigen::MatrixXd::Zero(n, n);
  iso.Bmat.col(0) = terms.a_xq / (wheel_radius * terms.a_xx);

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd left = I - iso.beta * iso.Bmat;
  const Eigen::MatrixXd A_star = terms.A_qq - terms.a_xq * terms.a_xq.transpose() / terms.a_xx;
  iso.Acal = left * A_star;

  Eigen::MatrixXd elim(n, n + 1);
  elim.col(0) = -terms.a_xq / terms.a_xx;
  elim.rightCols(n) = I;
  iso.P = left * elim;
  iso.bias = iso.P * bias_full;

#ifndef NDEBUG
  // (I - beta B) must invert (I + B): the rank-one Sherman-Morrison identity.
  assert(((I + iso.Bmat) * left - I).cwiseAbs().maxCoeff() < 1e-9);
#endif
  return iso;
}

Eigen::VectorXd inverse_dynamics(const IsolatedDynamics& iso, const Eigen::VectorXd& qddot) {
  return iso.Acal * qddot + iso.bias;
}

Eigen::VectorXd isolated_forward(const IsolatedDynamics& iso, const Eigen::VectorXd& torques) {
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(iso.Acal);
  const double rcond = lu.rcond();
  if (rcond < 1e-8) spdlog::debug("isolated dynamics ill-conditioned: cond ~ {:.3e}", 1.0 / rcond);
  return lu.solve(torques - iso.bias);
}

TorqueRows torque_constraint_rows(const IsolatedDynamics& iso, const Eigen::VectorXd& limits) {
  const auto n = iso.Acal.rows();
  TorqueRows rows;
  rows.C_I.resize(2 * n, n);
  rows.c_I.resize(2 * n);
  rows.C_I.topRows(n) = iso.Acal;
  rows.c_I.head(n) = iso.bias - limits;
  rows.C_I.bottomRows(n) = -iso.Acal;
  rows.c_I.tail(n) = -iso.bias - limits;
  return rows;
}

}  // namespace wiphwbc
