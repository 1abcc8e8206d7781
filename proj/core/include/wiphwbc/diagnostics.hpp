#pragma once

#include "wiphwbc/robot_model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wiphwbc {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct CheckOptions {
  int samples = 200;
  double energy_duration = 5.0;
  double energy_dt = 1e-4;
  std::uint64_t seed = 1;
};

/// Random state with joint angles inside [-1, 1] clipped to the joint range.
RobotState random_state(const RobotDescription& desc, std::mt19937_64& rng, double max_rate = 2.0);

/// Invariant battery used by `wiphwbc check`: dynamics symmetry/PD, skew-symmetry, energy or
/// power balance, isolation round trip, WIPM one-link exactness, Jacobian finite differences and
/// QP KKT/enumeration agreement.
std::vector<CheckResult> run_checks(const RobotDescription& desc, const CheckOptions& opts = {});

}  // namespace wiphwbc
