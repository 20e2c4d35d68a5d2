#pragma once

// Evaluation harness: scripted benchmark flights (pose regulation, payload,
// box pushing, path tracking), an ablation training sweep, and deterministic
// CSV export of both the per-step logs and the derived metrics.
//
// All metric computations are pure functions of (log, spec): recomputing a
// report from an exported log reproduces it bit for bit.  Flights run the
// policy deterministically (mean action, frozen normalization) on the nominal
// plant with randomization disabled.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dsam/env.hpp"
#include "dsam/trainer.hpp"

namespace dsam {

// Reference path for the tracking benchmark, anchored at the gripper's hover
// point: the flight holds the path start for settle_seconds, then the clock
// runs and the goal is re-dispatched every policy tick with no look-ahead.
struct PathSpec {
  std::string kind = "figure8";  // "figure8" | "line"
  // figure8: planar lemniscate spanning width x height, one lap per period.
  double width = 1.0;    // m, x extent
  double height = 0.5;   // m, y extent
  double period = 12.0;  // s per lap
  double laps = 1.0;
  // line: straight segment between offsets from the anchor, constant speed.
  Vector3d line_from{0.0, 0.0, 0.0};
  Vector3d line_to{1.0, 0.0, 0.0};
  double line_speed = 0.1;      // m/s
  double settle_seconds = 2.0;  // hold at the path start before the clock runs
};

// One-dimensional box on the ground ahead of the gripper: a face spring
// resists penetration along +x and Coulomb friction resists sliding.  The
// reaction force is applied to the vehicle at the gripper CoM.
struct PushRigSpec {
  double box_mass = 0.59;    // kg
  bool immovable = false;    // infinite-mass limit: pure disturbance rejection
  double stiffness = 300.0;  // N/m face spring
  double damping = 10.0;     // N s/m face damping (relative normal speed)
  double mu_static = 0.3;
  double mu_kinetic = 0.25;
  double face_offset = 0.15;     // box face this far ahead (+x) of the EE start
  double drive_distance = 0.45;  // goal travel along +x
  double speed = 0.05;           // goal speed m/s
  double settle_seconds = 1.0;   // hover before the drive starts
  double hold_seconds = 10.0;    // keep pressing at the drive end
};

struct BenchmarkSpec {
  std::string task = "pose";  // pose | payload | push | path
  int goal_count = 10;
  double hold_seconds = 10.0;           // per goal
  double settle_window_seconds = 2.0;   // steady-state window at the end of a hold
  double payload_kg = 0.0;              // attached to the gripper at flight start
  double pos_threshold = 0.15;          // m, success bound on the window mean
  double ori_threshold_deg = 20.0;      // deg, success bound on the window mean
  unsigned seed = 0;
  // Goal workspace. Positions match the training box; the yaw range is
  // deliberately narrower than training's +-180 deg.
  double goal_xy_range = 1.0;
  double goal_z_min = 3.0;
  double goal_z_max = 5.0;
  double tilt_range = M_PI / 2.0;
  double yaw_range = 2.0 * M_PI / 3.0;

  PathSpec path;
  PushRigSpec push;

  void validate() const;
};

// One row per policy step. t is sim time after the step; box_x is NaN unless
// the push rig is active; crash marks the step a termination registered.
struct EvalLogRow {
  double t = 0.0;
  int goal = 0;
  Vector3d base_pos = Vector3d::Zero();
  Quat base_q;
  Vector2d theta = Vector2d::Zero();
  Pose ee;
  Pose target;
  double box_x = std::numeric_limits<double>::quiet_NaN();
  int crash = 0;
};

struct GoalMetrics {
  int goal = 0;
  double pos_err_mean = std::numeric_limits<double>::quiet_NaN();  // m, window mean
  double pos_err_std = std::numeric_limits<double>::quiet_NaN();
  double ori_err_mean_deg = std::numeric_limits<double>::quiet_NaN();
  double ori_err_std_deg = std::numeric_limits<double>::quiet_NaN();
  int success = 0;
  int crashed = 0;
};

struct MetricsReport {
  std::string task;
  std::vector<GoalMetrics> goals;
  // Aggregates over non-crashed goals: mean of window means, population std.
  double pos_err_mean = std::numeric_limits<double>::quiet_NaN();
  double pos_err_std = std::numeric_limits<double>::quiet_NaN();
  double ori_err_mean_deg = std::numeric_limits<double>::quiet_NaN();
  double ori_err_std_deg = std::numeric_limits<double>::quiet_NaN();
  int success_count = 0;
  int total = 0;
  double pos_rmse = std::numeric_limits<double>::quiet_NaN();      // m, path tasks
  double ori_rmse_deg = std::numeric_limits<double>::quiet_NaN();  // deg, path tasks
  double box_displacement = std::numeric_limits<double>::quiet_NaN();  // m, push task
  int stable = -1;                                                     // push: 1/0, -1 n/a
  std::string log_ref;  // exported per-step log this report was derived from
};

struct EvalResult {
  MetricsReport report;
  std::vector<EvalLogRow> log;
};

// Raw (pre-scaling) action chosen for the env's current state and goal.
using ActionFn =
    std::function<Eigen::Matrix<double, kActionDim, 1>(const DsamEnv&)>;

// Deterministic policy evaluation: mean action under the bundle's frozen
// normalization statistics.
ActionFn policy_action_fn(const PolicyBundle& b);

// Model-based PD reference: decomposes the goal orientation into base yaw plus
// differential joint targets and servos the base toward the matching hover
// point.  Exercises the harness with no learned weights involved.
Eigen::Matrix<double, kActionDim, 1> expert_action(const DsamEnv& env);

// The benchmark env: given base config with randomization off, joints starting
// at rest, and the episode clock effectively disabled (flights are
// bench-managed; only crashes terminate).
EnvConfig eval_env_config(EnvConfig base);

// Sequential goal holds in one flight; a crash marks the active goal failed,
// the vehicle re-spawns, and the run continues with the next goal.
// run_payload_benchmark is the same protocol with spec.payload_kg attached;
// at payload 0 the two produce identical results for identical specs.
EvalResult run_pose_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env);
EvalResult run_payload_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                                 const EnvConfig& base_env);
EvalResult run_push_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env);
EvalResult run_path_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env);

// Bundle-driven overloads: the env observation layout follows the bundle.
EvalResult run_pose_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env);
EvalResult run_payload_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                                 EnvConfig base_env);
EvalResult run_push_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env);
EvalResult run_path_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env);

// Pure metric recomputation from a log (used by every run_* internally).
MetricsReport compute_metrics(const std::vector<EvalLogRow>& log, const BenchmarkSpec& spec);

// The 1-D box integrator behind the push benchmark, exposed for direct tests.
class BoxRig {
 public:
  BoxRig(const PushRigSpec& spec, double gravity, double face_x)
      : spec_(spec), g_(gravity), x_(face_x) {}
  // Advances dt; returns the +x contact force on the box (reaction on the
  // gripper is its negative).
  double step(double ee_x, double ee_vx, double dt);
  double x() const { return x_; }
  double v() const { return v_; }

 private:
  PushRigSpec spec_;
  double g_;
  double x_;        // face plane world x
  double v_ = 0.0;  // box only ever driven +x; friction cannot reverse it
};

// Ablation sweep: named trainer configurations sharing the base seed.
struct AblationRun {
  std::string name;
  TrainerConfig cfg;
};
std::vector<AblationRun> ablation_matrix(const TrainerConfig& base);
// Trains each configuration into out_dir/<name>/ (train_log.csv, weights).
// Individual failures are recorded in <name>/FAILED.txt and the sweep
// continues; returns the names that completed.
std::vector<std::string> run_ablation_suite(const TrainerConfig& base,
                                            const std::string& out_dir, bool verbose = false);

// CSV plumbing. Fixed column order, shortest-round-trip float formatting,
// NaN as an empty cell; schemas are frozen by golden tests.
std::string eval_log_csv_header();
std::string report_csv_header();
void export_log(const std::vector<EvalLogRow>& log, const std::string& path);
std::vector<EvalLogRow> parse_log(const std::string& path);
// Reports carry context rows (hardware reference numbers) for the task; those
// are presentation only and are skipped on parse.
void export_report(const MetricsReport& r, const std::string& path);
MetricsReport parse_report(const std::string& path);

}  // namespace dsam
