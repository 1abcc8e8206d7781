#include "wiphwbc/dynamics.hpp"

#include <cmath>

namespace wiphwbc {

namespace {

/// Absolute link angles and their sines/cosines.
struct Chain {
  std::vector<double> phi, s, c;

  explicit Chain(const RobotState& st) {
    const auto n = static_cast<std::size_t>(st.q.size());
    phi.resize(n);
    s.resize(n);
    c.resize(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += st.q[static_cast<Eigen::Index>(k)];
      phi[k] = acc;
      s[k] = std::sin(acc);
      c[k] = std::cos(acc);
    }
  }
};

/// d(com_k)/d(x, q) as a 2 x (n+1) matrix.
Eigen::MatrixXd com_jacobian(const RobotDescription& desc, const Chain& ch, int k) {
  const int n = desc.dof();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, n + 1);
  J(0, 0) = 1.0;
  // Column for q_i (i <= k): sum of outboard lever arms from joint i to the CoM of link k.
  Eigen::Vector2d tail(desc.links[k].com_offset * ch.c[k], -desc.links[k].com_offset * ch.s[k]);
  for (int i = k; i >= 0; --i) {
    J.col(i + 1) = tail;
    if (i > 0) tail += Eigen::Vector2d(desc.links[i - 1].length * ch.c[i - 1],
                                       -desc.links[i - 1].length * ch.s[i - 1]);
  }
  return J;
}

/// d^2(com_k)/(dq_i dq_l) for fixed l, as a 2 x (n+1) matrix over i.
Eigen::MatrixXd com_hessian_slice(const RobotDescription& desc, const Chain& ch, int k, int l) {
  const int n = desc.dof();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, n + 1);
  if (l > k) return H;
  // Entry (i, l) sums links m >= max(i, l) up to k: lengths for m < k, com offset for m = k.
  Eigen::Vector2d tail(-desc.links[k].com_offset * ch.s[k], -desc.links[k].com_offset * ch.c[k]);
  for (int i = k; i >= 0; --i) {
    if (i >= l) {
      H.col(i + 1) = tail;
      if (i > 0 && i - 1 >= l)
        tail += Eigen::Vector2d(-desc.links[i - 1].length * ch.s[i - 1],
                                -desc.links[i - 1].length * ch.c[i - 1]);
    } else {
      H.col(i + 1) = H.col(l + 1);
    }
  }
  return H;
}

/// Angular velocity Jacobian of link k: ones on q1..qk.
Eigen::RowVectorXd angular_jacobian(int n, int k) {
  Eigen::RowVectorXd J = Eigen::RowVectorXd::Zero(n + 1);
  J.segment(1, k + 1).setOnes();
  return J;
}

}  // namespace

std::vector<LinkPose> link_poses(const RobotDescription& desc, const RobotState& s) {
  const Chain ch(s);
  std::vector<LinkPose> poses(desc.links.size());
  Eigen::Vector2d joint(s.x, desc.wheel.radius);
  for (std::size_t k = 0; k < desc.links.size(); ++k) {
    const Eigen::Vector2d axis(ch.s[k], ch.c[k]);
    poses[k].joint = joint;
    poses[k].angle = ch.phi[k];
    poses[k].com = joint + desc.links[k].com_offset * axis;
    joint += desc.links[k].length * axis;
  }
  return poses;
}

Eigen::Vector2d end_effector_position(const RobotDescription& desc, const RobotState& s) {
  const Chain ch(s);
  Eigen::Vector2d tip = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < desc.links.size(); ++k)
    tip += desc.links[k].length * Eigen::Vector2d(ch.s[k], ch.c[k]);
  return tip;
}

double end_effector_angle(const RobotState& s) { return s.q.sum(); }

Eigen::MatrixXd mass_matrix(const RobotDescription& desc, const RobotState& s) {
  const int n = desc.dof();
  const Chain ch(s);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n + 1);
  A(0, 0) = desc.wheel_pair_inertia();
  for (int k = 0; k < n; ++k) {
    const Eigen::MatrixXd Jv = com_jacobian(desc, ch, k);
    const Eigen::RowVectorXd Jw = angular_jacobian(n, k);
    A.noalias() += desc.links[k].mass * Jv.transpose() * Jv;
    A.noalias() += desc.links[k].inertia_com * Jw.transpose() * Jw;
  }
  // Exact symmetry; the products above agree only to rounding.
  return 0.5 * (A + A.transpose());
}

std::vector<Eigen::MatrixXd> mass_matrix_partials(const RobotDescription& desc, const RobotState& s) {
  const int n = desc.dof();
  const Chain ch(s);
  std::vector<Eigen::MatrixXd> dA(n + 1, Eigen::MatrixXd::Zero(n + 1, n + 1));
  std::vector<Eigen::MatrixXd> J(n);
  for (int k = 0; k < n; ++k) J[k] = com_jacobian(desc, ch, k);
  for (int l = 0; l < n; ++l) {
    auto& D = dA[l + 1];
    for (int k = l; k < n; ++k) {
      const Eigen::MatrixXd H = com_hessian_slice(desc, ch, k, l);
      const Eigen::MatrixXd prod = desc.links[k].mass * J[k].transpose() * H;
      D += prod + prod.transpose();
    }
  }
  return dA;
}

BiasTerms bias_terms(const RobotDescription& desc, const RobotState& s) {
  const int n = desc.dof();
  const int dim = n + 1;
  const Chain ch(s);
  const Eigen::VectorXd v = s.velocity();
  const auto dA = mass_matrix_partials(desc, s);

  BiasTerms out;
  out.C = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      double cij = 0.0;
      for (int k = 0; k < dim; ++k)
        cij += 0.5 * (dA[k](i, j) + dA[j](i, k) - dA[i](j, k)) * v[k];
      out.C(i, j) = cij;
    }
  }

  out.Q_grav = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < n; ++k)
    out.Q_grav += desc.links[k].mass * desc.gravity * com_jacobian(desc, ch, k).row(1).transpose();

  out.friction = Eigen::VectorXd::Zero(dim);
  out.friction.tail(n) = -desc.damping().cwiseProduct(s.qdot);
  return out;
}

DynamicsTerms dynamics_terms(const RobotDescription& desc, const RobotState& s) {
  const int n = desc.dof();
  DynamicsTerms t;
  t.A = mass_matrix(desc, s);
  const BiasTerms b = bias_terms(desc, s);
  t.Q_grav = b.Q_grav;
  t.h = b.C * s.velocity() + b.Q_grav - b.friction;
  t.a_xx = t.A(0, 0);
  t.a_xq = t.A.block(1, 0, n, 1);
  t.A_qq = t.A.block(1, 1, n, n);
  return t;
}

Eigen::MatrixXd actuation_matrix(const RobotDescription& desc) {
  const int n = desc.dof();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + 1, n);
  B(0, 0) = -1.0 / desc.wheel.radius;
  B.bottomRows(n).setIdentity();
  return B;
}

Eigen::VectorXd forward_dynamics(const DynamicsTerms& terms, const Eigen::MatrixXd& actuation,
                                 const Eigen::VectorXd& torques) {
  const Eigen::VectorXd rhs = actuation * torques - terms.h;
  const Eigen::LLT<Eigen::MatrixXd> llt(terms.A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("forward_dynamics: mass matrix is not positive definite");
  return llt.solve(rhs);
}

Eigen::VectorXd forward_dynamics(const RobotDescription& desc, const RobotState& s,
                                 const Eigen::VectorXd& torques) {
  return forward_dynamics(dynamics_terms(desc, s), actuation_matrix(desc), torques);
}

double ComState::length() const { return std::hypot(X_com, Z_com); }

ComState com_state(const RobotDescription& desc, const RobotState& s) {
  const int n = desc.dof();
  const Chain ch(s);
  ComState cs;
  cs.M = desc.body_mass();
  cs.J_com = Eigen::MatrixXd::Zero(2, n);
  const auto poses = link_poses(desc, s);
  for (int k = 0; k < n; ++k) {
    const double m = desc.links[k].mass;
    cs.X_com += m * (poses[k].com.x() - s.x);
    cs.Z_com += m * (poses[k].com.y() - desc.wheel.radius);
    cs.J_com += m * com_jacobian(desc, ch, k).rightCols(n);
  }
  cs.X_com /= cs.M;
  cs.Z_com /= cs.M;
  cs.J_com /= cs.M;
  if (cs.Z_com == 0.0)
    throw DegenerateConfiguration("com_state: body CoM is level with the wheel axle (Z_com = 0)");
  cs.theta = std::atan2(cs.X_com, cs.Z_com);
  const double ct = std::cos(cs.theta);
  const double st = std::sin(cs.theta);
  cs.thetadot = (ct / cs.Z_com) * (ct * cs.J_com.row(0) - st * cs.J_com.row(1)).dot(s.qdot);
  return cs;
}

Energy total_energy(const RobotDescription& desc, const RobotState& s) {
  Energy e;
  const Eigen::VectorXd v = s.velocity();
  e.kinetic = 0.5 * v.dot(mass_matrix(desc, s) * v);
  const auto poses = link_poses(desc, s);
  for (std::size_t k = 0; k < poses.size(); ++k)
    e.potential += desc.links[k].mass * desc.gravity * poses[k].com.y();
  return e;
}

double actuator_power(const RobotDescription& desc, const RobotState& s, const Eigen::VectorXd& torques) {
  return (actuation_matrix(desc) * torques).dot(s.velocity());
}

double full_zero_dynamics_residual(const RobotDescription& desc, const RobotState& s,
                                   const Eigen::VectorXd& acc) {
  const DynamicsTerms t = dynamics_terms(desc, s);
  const Eigen::VectorXd lhs = t.A * acc + t.h;
  return desc.wheel.radius * lhs[0] + lhs[1];
}

}  // namespace wiphwbc
