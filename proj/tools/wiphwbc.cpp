// wiphwbc: plan, simulate and check from the command line.
//
// Exit codes: 0 success, 1 config error, 2 planner failure, 3 divergence, 4 check failure.

#include "wiphwbc/diagnostics.hpp"
#include "wiphwbc/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace wiphwbc;

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 1, kPlannerFailure = 2, kDivergence = 3, kCheckFailure = 4 };

struct Options {
  std::string robot;
  std::string sim;
  std::optional<double> goal;
  std::optional<double> tf;
  std::string out = ".";
  bool decoupled = false;
  std::optional<std::uint64_t> seed;
  int samples = 200;
};

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ostringstream ss;
  ss.precision(17);
  writer(ss);
  write_atomic(path, ss.str());
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json vec4(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }

json snapshot(const SimConfig& s, const ControllerConfig& c) {
  json sim = {{"dt_physics", s.dt_physics},   {"wbc_period", s.wbc_period}, {"mpc_period", s.mpc_period},
              {"duration", s.duration},       {"goal", s.goal},             {"tf", s.tf},
              {"seed", s.seed},               {"perturbation", s.perturbation},
              {"log_decimation", s.log_decimation}, {"balance_initial", s.balance_initial},
              {"decoupled", s.decoupled},     {"x0", s.initial.x},          {"xdot0", s.initial.xdot},
              {"q0", vec(s.initial.q)},       {"qdot0", vec(s.initial.qdot)}};
  const TaskGains& g = c.gains;
  json ctrl = {{"mpc_horizon", c.mpc.tH},
               {"mpc_dt", c.mpc.dt},
               {"mpc_G_run", vec4(c.mpc.cost.G_run)},
               {"mpc_g_run", c.mpc.cost.g_run},
               {"mpc_G_term", vec4(c.mpc.cost.G_term)},
               {"mpc_warm_start", c.mpc.warm_start},
               {"mpc_max_iters", c.mpc.ddp.max_iters},
               {"ddp_G_run", vec4(c.ddp_cost.G_run)},
               {"ddp_g_run", c.ddp_cost.g_run},
               {"ddp_G_term", vec4(c.ddp_cost.G_term)},
               {"ddp_max_iters", c.ddp.max_iters},
               {"w_theta", g.w_theta}, {"kp_theta", g.kp_theta}, {"kd_theta", g.kd_theta},
               {"w_ee", g.w_ee},       {"kp_ee", g.kp_ee},       {"kd_ee", g.kd_ee},
               {"w_phi", g.w_phi},     {"kp_phi", g.kp_phi},     {"kd_phi", g.kd_phi},
               {"w_reg", g.w_reg},     {"kd_reg", g.kd_reg},
               {"w_posture", g.w_posture}, {"kp_posture", g.kp_posture}, {"kd_posture", g.kd_posture},
               {"joint_limits", c.wbc.joint_limits},
               {"joint_limit_margin", c.wbc.joint_limit_margin}};
  return {{"sim", sim}, {"controller", ctrl}};
}

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt), dir_(opt.out) {
    fs::create_directories(dir_);
    manifest_ = {{"tool", "wiphwbc"},
                 {"version", WIPHWBC_VERSION},
                 {"command", command_},
                 {"robot_config", opt.robot.empty() ? json(nullptr) : json(fs::absolute(opt.robot).string())},
                 {"sim_config", opt.sim.empty() ? json(nullptr) : json(fs::absolute(opt.sim).string())},
                 {"output_dir", fs::absolute(dir_).string()},
                 {"outputs", json::array()}};
  }

  [[nodiscard]] const fs::path& dir() const { return dir_; }
  json& manifest() { return manifest_; }
  void output(const std::string& name) { manifest_["outputs"].push_back(name); }

  int finish(int code) {
    manifest_["exit_code"] = code;
    manifest_["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    return code;
  }

 private:
  std::string command_;
  const Options& opt_;
  fs::path dir_;
  json manifest_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Loaded {
  RobotDescription desc;
  SimConfig sim;
  ControllerConfig ctrl;
};

Loaded load(const Options& opt) {
  Loaded l;
  l.desc = load_description(opt.robot);
  if (!opt.sim.empty()) load_sim_config(opt.sim, l.sim, l.ctrl);
  if (opt.goal) l.sim.goal = *opt.goal;
  if (opt.tf) l.sim.tf = *opt.tf;
  if (opt.seed) l.sim.seed = *opt.seed;
  if (opt.decoupled) l.sim.decoupled = true;
  l.sim.validate(l.desc.dof());
  l.ctrl.mpc.validate();
  return l;
}

json summary_json(const SimSummary& s, const SimConfig& cfg) {
  return {{"goal", cfg.goal},
          {"duration", cfg.duration},
          {"decoupled", cfg.decoupled},
          {"terminal_x_error", s.terminal_x_error},
          {"terminal_theta", s.terminal_theta},
          {"peak_theta", s.peak_theta},
          {"peak_orientation_deviation", s.peak_orientation_deviation},
          {"peak_orientation_deviation_deg", s.peak_orientation_deviation * 180.0 / M_PI},
          {"completion_time", s.completion_time ? json(*s.completion_time) : json(nullptr)},
          {"torque_violations", s.torque_violations},
          {"non_optimal_qp", s.non_optimal_qp},
          {"mpc_calls", s.mpc_calls},
          {"wbc_calls", s.wbc_calls},
          {"diverged", s.diverged},
          {"reference_converged", s.reference_converged}};
}

int cmd_plan(const Options& opt) {
  const Loaded l = load(opt);
  Run run("plan", opt);
  run.manifest()["parameters"] = snapshot(l.sim, l.ctrl);
  run.manifest()["robot"] = serialize_description(l.desc);
  run.manifest()["seed"] = l.sim.seed;

  Trajectory traj;
  try {
    traj = plan_reference(l.desc, l.sim, l.ctrl);
  } catch (const DdpDivergence& e) {
    spdlog::error("planner diverged: {}", e.what());
    run.manifest()["planner"] = {{"converged", false}, {"error", e.what()}};
    return run.finish(kPlannerFailure);
  }
  write_file(run.dir() / "plan.csv", [&](std::ostream& o) { write_plan_csv(o, traj); });
  run.output("plan.csv");
  run.manifest()["planner"] = {{"converged", traj.converged},
                               {"iterations", traj.iterations},
                               {"cost", traj.cost},
                               {"partial", !traj.converged}};
  if (!traj.converged) {
    spdlog::error("planner did not converge after {} iterations; partial trajectory written", traj.iterations);
    return run.finish(kPlannerFailure);
  }
  std::cout << "plan: " << traj.controls.size() + 1 << " rows, cost " << traj.cost << ", " << traj.iterations
            << " iterations -> " << (run.dir() / "plan.csv").string() << "\n";
  return run.finish(kOk);
}

int cmd_simulate(const Options& opt) {
  const Loaded l = load(opt);
  Run run("simulate", opt);
  run.manifest()["parameters"] = snapshot(l.sim, l.ctrl);
  run.manifest()["robot"] = serialize_description(l.desc);
  run.manifest()["seed"] = l.sim.seed;

  SimLog log;
  try {
    log = run_closed_loop(l.desc, l.sim, l.ctrl);
  } catch (const DdpDivergence& e) {
    spdlog::error("reference planner diverged: {}", e.what());
    return run.finish(kPlannerFailure);
  }
  const SimSummary summary = summarize(log, l.desc, l.sim);
  json sj = summary_json(summary, l.sim);
  if (log.diverged) sj["divergence"] = log.divergence;

  write_file(run.dir() / "sim_log.csv", [&](std::ostream& o) { write_sim_csv(o, log, l.desc.dof()); });
  write_file(run.dir() / "plan.csv", [&](std::ostream& o) { write_plan_csv(o, log.reference); });
  write_atomic(run.dir() / "summary.json", sj.dump(2) + "\n");
  for (const char* f : {"sim_log.csv", "plan.csv", "summary.json"}) run.output(f);
  run.manifest()["simulation_wall_time_s"] = log.wall_time_s;

  std::cout << sj.dump(2) << "\n";
  if (log.diverged) {
    spdlog::error("simulation diverged: {}", log.divergence);
    return run.finish(kDivergence);
  }
  return run.finish(kOk);
}

int cmd_check(const Options& opt) {
  const RobotDescription desc = load_description(opt.robot);
  CheckOptions co;
  co.samples = opt.samples;
  if (opt.seed) co.seed = *opt.seed;

  bool all = true;
  json report = json::array();
  for (const CheckResult& r : run_checks(desc, co)) {
    all = all && r.passed;
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  measured " << r.measured << "  tolerance "
              << r.tolerance;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    report.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"measured", r.measured},
                      {"tolerance", r.tolerance},
                      {"detail", r.detail}});
  }
  if (opt.out != ".") {
    Run run("check", opt);
    run.manifest()["seed"] = co.seed;
    run.manifest()["samples"] = co.samples;
    write_atomic(run.dir() / "check.json", report.dump(2) + "\n");
    run.output("check.json");
    run.finish(all ? kOk : kCheckFailure);
  }
  return all ? kOk : kCheckFailure;
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("WIPHWBC_LOG")) {
    const std::string level = env;
    if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Whole-body control for planar wheeled inverted pendulum humanoids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", WIPHWBC_VERSION);
  Options opt;

  auto robot = [&](CLI::App* c) { c->add_option("--robot", opt.robot, "Robot description (INI)")->required(); };
  auto out = [&](CLI::App* c) { c->add_option("--out", opt.out, "Output directory"); };
  auto seed = [&](CLI::App* c) { c->add_option("--seed", opt.seed, "Random seed"); };

  CLI::App* plan = app.add_subcommand("plan", "Full-horizon DDP reference for the simplified model");
  robot(plan);
  plan->add_option("--sim", opt.sim, "Sim/controller config (INI) for initial state and weights");
  plan->add_option("--goal", opt.goal, "Heading goal, m");
  plan->add_option("--tf", opt.tf, "Planning horizon, s");
  out(plan);
  seed(plan);

  CLI::App* sim = app.add_subcommand("simulate", "Closed-loop simulation: reference, MPC, WBC, plant");
  robot(sim);
  sim->add_option("--sim", opt.sim, "Sim/controller config (INI)");
  sim->add_option("--goal", opt.goal, "Heading goal, m");
  sim->add_option("--tf", opt.tf, "Reference horizon, s");
  sim->add_flag("--decoupled", opt.decoupled, "Balance with the base only, arm held at a fixed pose");
  out(sim);
  seed(sim);

  CLI::App* check = app.add_subcommand("check", "Run the invariant diagnostics battery");
  robot(check);
  check->add_option("--samples", opt.samples, "Random samples per check")->check(CLI::PositiveNumber);
  out(check);
  seed(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (plan->parsed()) return cmd_plan(opt);
    if (sim->parsed()) return cmd_simulate(opt);
    return cmd_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DdpDivergence& e) {
    std::cerr << "planner failure: " << e.what() << "\n";
    return kPlannerFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  }
}
