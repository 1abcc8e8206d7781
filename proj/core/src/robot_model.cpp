#include "wiphwbc/robot_model.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace wiphwbc {

namespace pt = boost::property_tree;

double RobotDescription::body_mass() const {
  double m = 0.0;
  for (const auto& l : links) m += l.mass;
  return m;
}

double RobotDescription::wheel_pair_inertia() const {
  return 2.0 * wheel.mass + 2.0 * wheel.inertia / (wheel.radius * wheel.radius);
}

Eigen::VectorXd RobotDescription::torque_limits() const {
  Eigen::VectorXd lim(dof());
  for (int i = 0; i < dof(); ++i) lim[i] = links[i].torque_limit;
  return lim;
}

Eigen::VectorXd RobotDescription::damping() const {
  Eigen::VectorXd d(dof());
  for (int i = 0; i < dof(); ++i) d[i] = links[i].damping;
  return d;
}

Eigen::VectorXd RobotState::position() const {
  Eigen::VectorXd p(q.size() + 1);
  p << x, q;
  return p;
}

Eigen::VectorXd RobotState::velocity() const {
  Eigen::VectorXd v(qdot.size() + 1);
  v << xdot, qdot;
  return v;
}

void RobotState::set_position(const Eigen::VectorXd& pos) {
  x = pos[0];
  q = pos.tail(pos.size() - 1);
}

void RobotState::set_velocity(const Eigen::VectorXd& vel) {
  xdot = vel[0];
  qdot = vel.tail(vel.size() - 1);
}

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("invalid " + field + ": must satisfy " + rule);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void validate_description(const RobotDescription& desc) {
  const auto& w = desc.wheel;
  require(finite(w.radius) && w.radius > 0, "wheel.radius", "> 0");
  require(finite(w.mass) && w.mass > 0, "wheel.mass", "> 0");
  require(finite(w.inertia) && w.inertia > 0, "wheel.inertia", "> 0");
  require(finite(desc.gravity) && desc.gravity >= 0, "world.gravity", ">= 0");
  require(!desc.links.empty(), "links", "n >= 1");
  for (std::size_t i = 0; i < desc.links.size(); ++i) {
    const auto& l = desc.links[i];
    const std::string p = "links[" + std::to_string(i) + "].";
    require(finite(l.mass) && l.mass > 0, p + "mass", "> 0");
    require(finite(l.length) && l.length > 0, p + "length", "> 0");
    require(finite(l.com_offset) && l.com_offset >= 0 && l.com_offset <= l.length,
            p + "com_offset", "0 <= com_offset <= length");
    require(finite(l.inertia_com) && l.inertia_com >= 0, p + "inertia_com", ">= 0");
    require(finite(l.damping) && l.damping >= 0, p + "damping", ">= 0");
    require(finite(l.torque_limit) && l.torque_limit > 0, p + "torque_limit", "> 0");
    require(!std::isnan(l.angle_min) && !std::isnan(l.angle_max) && l.angle_min < l.angle_max,
            p + "angle_min", "angle_min < angle_max");
  }
}

namespace {

double number(const pt::ptree& section, const std::string& section_name, const std::string& key) {
  auto node = section.get_child_optional(pt::ptree::path_type(key, '\0'));
  if (!node) throw ConfigError("missing key '" + key + "' in section [" + section_name + "]");
  const std::string raw = node->data();
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("malformed number '" + raw + "' for " + section_name + "." + key);
  }
}

double number_or(const pt::ptree& section, const std::string& section_name, const std::string& key,
                 double fallback) {
  if (!section.get_child_optional(pt::ptree::path_type(key, '\0'))) return fallback;
  return number(section, section_name, key);
}

}  // namespace

RobotDescription parse_description(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }

  RobotDescription desc;
  desc.links.clear();
  if (!tree.get_child_optional("wheel")) throw ConfigError("missing section [wheel]");
  std::map<int, LinkParams> links;

  for (const auto& [name, section] : tree) {
    if (name == "wheel") {
      desc.wheel.radius = number(section, name, "radius");
      desc.wheel.mass = number(section, name, "mass");
      desc.wheel.inertia = number(section, name, "inertia");
    } else if (name == "world") {
      desc.gravity = number_or(section, name, "gravity", desc.gravity);
    } else if (name.rfind("link.", 0) == 0) {
      int index = -1;
      try {
        std::size_t used = 0;
        index = std::stoi(name.substr(5), &used);
        if (used != name.size() - 5) index = -1;
      } catch (const std::exception&) {
        index = -1;
      }
      if (index < 0) throw ConfigError("malformed section name [" + name + "]");
      if (links.count(index)) throw ConfigError("duplicate section [" + name + "]");
      LinkParams l;
      l.mass = number(section, name, "mass");
      l.length = number(section, name, "length");
      l.com_offset = number(section, name, "com_offset");
      l.inertia_com = number(section, name, "inertia_com");
      l.damping = number_or(section, name, "damping", 0.0);
      l.torque_limit = number(section, name, "torque_limit");
      l.angle_min = number_or(section, name, "angle_min", -INFINITY);
      l.angle_max = number_or(section, name, "angle_max", INFINITY);
      links.emplace(index, l);
    } else if (!section.data().empty()) {
      throw ConfigError("unexpected top-level key '" + name + "'");
    }
    // Other sections ([sim], [controller], ...) belong to other consumers.
  }

  int expected = 0;
  for (const auto& [index, l] : links) {
    if (index != expected) throw ConfigError("link sections must be numbered 0..n-1 without gaps");
    desc.links.push_back(l);
    ++expected;
  }
  validate_description(desc);
  return desc;
}

RobotDescription load_description(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open robot config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_description(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_description(const RobotDescription& desc) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "[wheel]\n"
      << "radius = " << desc.wheel.radius << "\n"
      << "mass = " << desc.wheel.mass << "\n"
      << "inertia = " << desc.wheel.inertia << "\n\n";
  out << "[world]\n"
      << "gravity = " << desc.gravity << "\n";
  for (std::size_t i = 0; i < desc.links.size(); ++i) {
    const auto& l = desc.links[i];
    out << "\n[link." << i << "]\n"
        << "mass = " << l.mass << "\n"
        << "length = " << l.length << "\n"
        << "com_offset = " << l.com_offset << "\n"
        << "inertia_com = " << l.inertia_com << "\n"
        << "damping = " << l.damping << "\n"
        << "torque_limit = " << l.torque_limit << "\n";
    if (std::isfinite(l.angle_min)) out << "angle_min = " << l.angle_min << "\n";
    if (std::isfinite(l.angle_max)) out << "angle_max = " << l.angle_max << "\n";
  }
  return out.str();
}

std::vector<StateViolation> validate_state(const RobotDescription& desc, const RobotState& s) {
  std::vector<StateViolation> out;
  const int n = desc.dof();
  if (s.q.size() != n || s.qdot.size() != n) {
    out.push_back({"state dimension does not match n = " + std::to_string(n), -1});
    return out;
  }
  if (!std::isfinite(s.x)) out.push_back({"x non-finite", -1});
  if (!std::isfinite(s.xdot)) out.push_back({"xdot non-finite", -1});
  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(s.q[k])) {
      out.push_back({"q[" + std::to_string(k) + "] non-finite", k + 1});
    } else if (s.q[k] < desc.links[k].angle_min || s.q[k] > desc.links[k].angle_max) {
      out.push_back({"joint " + std::to_string(k + 1) + " outside [angle_min, angle_max]", k + 1});
    }
    if (!std::isfinite(s.qdot[k])) out.push_back({"qdot[" + std::to_string(k) + "] non-finite", k + 1});
  }
  return out;
}

namespace {

LinkParams slender(double mass, double length, double damping, double torque_limit, double lo,
                   double hi) {
  LinkParams l;
  l.mass = mass;
  l.length = length;
  l.com_offset = 0.5 * length;
  l.inertia_com = mass * length * length / 12.0;
  l.damping = damping;
  l.torque_limit = torque_limit;
  l.angle_min = lo;
  l.angle_max = hi;
  return l;
}

}  // namespace

RobotDescription default_one_link() {
  RobotDescription d;
  d.wheel = {0.1, 0.5, 0.0025};
  LinkParams l;
  l.mass = 2.0;
  l.length = 0.6;
  l.com_offset = 0.3;
  l.inertia_com = 0.06;
  l.damping = 0.0;
  l.torque_limit = 20.0;
  l.angle_min = -1.5;
  l.angle_max = 1.5;
  d.links = {l};
  return d;
}

RobotDescription default_three_link() {
  RobotDescription d;
  d.wheel = {0.1, 0.5, 0.0025};
  d.links = {
      slender(4.0, 0.4, 0.0, 30.0, -1.5, 1.5),
      slender(2.0, 0.3, 0.0, 15.0, -2.0, 2.0),
      slender(1.0, 0.25, 0.0, 8.0, -2.5, 2.5),
  };
  return d;
}

RobotDescription default_seven_link() {
  // Desk-scale torso + arm: 15 kg body, 1.35 m of links.
  RobotDescription d;
  d.wheel = {0.1, 0.5, 0.0025};
  d.links = {
      slender(5.0, 0.30, 0.02, 40.0, -1.2, 1.2),   // base link
      slender(4.0, 0.30, 0.02, 40.0, -1.0, 1.0),   // upper torso
      slender(2.0, 0.15, 0.02, 20.0, -1.0, 1.0),   // shoulder girdle
      slender(1.5, 0.22, 0.02, 15.0, -0.5, 3.0),   // upper arm
      slender(1.0, 0.20, 0.02, 10.0, -2.6, 0.6),   // forearm
      slender(0.8, 0.08, 0.02, 5.0, -2.0, 2.0),    // wrist
      slender(0.7, 0.10, 0.02, 5.0, -2.0, 2.0),    // hand + tray
  };
  return d;
}

}  // namespace wiphwbc
