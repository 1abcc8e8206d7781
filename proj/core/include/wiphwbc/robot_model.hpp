#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace wiphwbc {

/// Raised when a robot or simulation config cannot be parsed or fails validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of a single wheel. The planar model lumps the left/right pair into
/// one effective wheel of mass 2*mass and spin inertia 2*inertia.
struct WheelParams {
  double radius = 0.1;    // m
  double mass = 0.5;      // kg, one wheel
  double inertia = 0.0025;  // kg m^2, one wheel about its axle
};

struct LinkParams {
  double mass = 1.0;         // kg
  double length = 0.5;       // m, joint to joint
  double com_offset = 0.25;  // m, inboard joint to link CoM along the link axis
  double inertia_com = 0.0;  // kg m^2, planar inertia about the link CoM
  double damping = 0.0;      // N m s / rad
  double torque_limit = 10.0;  // N m, symmetric
  double angle_min = -3.14159;  // rad
  double angle_max = 3.14159;   // rad
};

struct RobotDescription {
  WheelParams wheel;
  std::vector<LinkParams> links;
  double gravity = 9.81;

  [[nodiscard]] int dof() const { return static_cast<int>(links.size()); }
  [[nodiscard]] double body_mass() const;
  /// Effective mass seen by the heading coordinate: 2 m_w + 2 I_w / R^2.
  [[nodiscard]] double wheel_pair_inertia() const;
  [[nodiscard]] Eigen::VectorXd torque_limits() const;
  [[nodiscard]] Eigen::VectorXd damping() const;
};

/// Minimal coordinates: heading x plus base pitch q1 and relative joint angles q2..qn.
struct RobotState {
  double x = 0.0;
  double xdot = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;

  RobotState() = default;
  explicit RobotState(int n) : q(Eigen::VectorXd::Zero(n)), qdot(Eigen::VectorXd::Zero(n)) {}

  /// (x, q1..qn)
  [[nodiscard]] Eigen::VectorXd position() const;
  /// (xdot, qdot1..qdotn)
  [[nodiscard]] Eigen::VectorXd velocity() const;
  void set_position(const Eigen::VectorXd& pos);
  void set_velocity(const Eigen::VectorXd& vel);
};

/// Throws ConfigError naming the first violated field, e.g. "links[0].mass".
void validate_description(const RobotDescription& desc);

RobotDescription parse_description(const std::string& text);
RobotDescription load_description(const std::filesystem::path& path);
std::string serialize_description(const RobotDescription& desc);

struct StateViolation {
  std::string what;
  int index = -1;  // 1-based joint index when relevant, -1 otherwise
};

/// Reports joint-limit violations and non-finite entries. An empty result means ok.
std::vector<StateViolation> validate_state(const RobotDescription& desc, const RobotState& s);

/// Built-in desk-scale parameter sets with n = 1, 3 and 7 body links.
RobotDescription default_one_link();
RobotDescription default_three_link();
RobotDescription default_seven_link();

}  // namespace wiphwbc
