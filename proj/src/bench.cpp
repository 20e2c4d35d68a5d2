#include "dsam/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dsam/dynamics.hpp"
#include "dsam/textio.hpp"

namespace dsam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRad2Deg = 180.0 / M_PI;

std::string fmt_opt(double v) { return std::isnan(v) ? std::string() : format_double(v); }

double parse_opt(const std::string& s) { return s.empty() ? kNaN : parse_double(s); }

EvalLogRow make_row(double t, int goal_idx, const DsamEnv& env, double box_x, int crash) {
  EvalLogRow r;
  r.t = t;
  r.goal = goal_idx;
  const SystemState& s = env.state();
  r.base_pos = s.p_b;
  r.base_q = rotmat_to_quat(s.R_wb);
  r.theta = s.theta;
  r.ee = forward_kinematics(s, env.plant());
  r.target = env.goal();
  r.box_x = box_x;
  r.crash = crash;
  return r;
}

// Time between consecutive log rows; the metric windows are counted in rows.
double log_dt(const std::vector<EvalLogRow>& log) {
  if (log.size() < 2) return 1.0;
  return log[1].t - log[0].t;
}

struct MeanStd {
  double mean = kNaN, std = kNaN;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  double q = 0.0;
  for (double x : xs) q += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(q / static_cast<double>(xs.size()));
  return out;
}

MetricsReport pose_metrics(const std::vector<EvalLogRow>& log, const BenchmarkSpec& spec) {
  MetricsReport rep;
  rep.task = spec.task;
  const double dt = log_dt(log);

  // Rows arrive grouped by goal in dispatch order.
  std::size_t i = 0;
  std::vector<double> agg_pos, agg_ori;
  while (i < log.size()) {
    const int gi = log[i].goal;
    std::size_t j = i;
    bool crashed = false;
    while (j < log.size() && log[j].goal == gi) {
      if (log[j].crash) crashed = true;
      ++j;
    }
    GoalMetrics gm;
    gm.goal = gi;
    if (crashed) {
      gm.crashed = 1;
    } else {
      const std::size_t n = j - i;
      std::size_t n_win = static_cast<std::size_t>(
          std::max<long long>(1, std::llround(spec.settle_window_seconds / dt)));
      n_win = std::min(n_win, n);
      std::vector<double> pe, oe;
      pe.reserve(n_win);
      oe.reserve(n_win);
      for (std::size_t k = j - n_win; k < j; ++k) {
        pe.push_back((log[k].ee.position - log[k].target.position).norm());
        oe.push_back(geodesic_angle(log[k].ee.orientation, log[k].target.orientation) * kRad2Deg);
      }
      const MeanStd p = mean_std(pe), o = mean_std(oe);
      gm.pos_err_mean = p.mean;
      gm.pos_err_std = p.std;
      gm.ori_err_mean_deg = o.mean;
      gm.ori_err_std_deg = o.std;
      gm.success = (p.mean < spec.pos_threshold && o.mean < spec.ori_threshold_deg) ? 1 : 0;
      agg_pos.push_back(p.mean);
      agg_ori.push_back(o.mean);
    }
    rep.goals.push_back(gm);
    rep.success_count += gm.success;
    i = j;
  }
  rep.total = static_cast<int>(rep.goals.size());
  const MeanStd ap = mean_std(agg_pos), ao = mean_std(agg_ori);
  rep.pos_err_mean = ap.mean;
  rep.pos_err_std = ap.std;
  rep.ori_err_mean_deg = ao.mean;
  rep.ori_err_std_deg = ao.std;
  return rep;
}

MetricsReport path_metrics(const std::vector<EvalLogRow>& log, const BenchmarkSpec& spec) {
  MetricsReport rep;
  rep.task = spec.task;
  const double dt = log_dt(log);
  // Rows whose goal was dispatched after the settle hold ended.
  const double t_on = spec.path.settle_seconds + 0.5 * dt;
  double sp = 0.0, so = 0.0;
  std::size_t n = 0;
  for (const auto& r : log) {
    if (r.t <= t_on) continue;
    sp += (r.ee.position - r.target.position).squaredNorm();
    const double a = geodesic_angle(r.ee.orientation, r.target.orientation) * kRad2Deg;
    so += a * a;
    ++n;
  }
  if (n > 0) {
    rep.pos_rmse = std::sqrt(sp / static_cast<double>(n));
    rep.ori_rmse_deg = std::sqrt(so / static_cast<double>(n));
  }
  return rep;
}

MetricsReport push_metrics(const std::vector<EvalLogRow>& log, const BenchmarkSpec& spec) {
  MetricsReport rep;
  rep.task = spec.task;
  if (log.empty()) return rep;
  rep.box_displacement = log.back().box_x - log.front().box_x;
  int crashed = 0;
  for (const auto& r : log) crashed |= r.crash;
  rep.stable = crashed ? 0 : 1;
  return rep;
}

// Flight phases share this clock: a hold phase of `settle` seconds, then a
// profile parameterized by the seconds elapsed since the hold ended.
double phase_clock(long long step, double dt, double settle) {
  return std::max(0.0, static_cast<double>(step - 1) * dt - settle);
}

Vector3d figure8_offset(const PathSpec& p, double clock) {
  const double s = 2.0 * M_PI * clock / p.period;
  const double den = 1.0 + std::sin(s) * std::sin(s);
  const double u = std::cos(s) / den;                 // in [-1, 1]
  const double v = std::sin(s) * std::cos(s) / den;   // in [-sqrt(2)/4, sqrt(2)/4]
  // Anisotropic scaling to the requested box; shifted so the path starts at 0.
  return {0.5 * p.width * (u - 1.0), p.height * std::sqrt(2.0) * v, 0.0};
}

}  // namespace

void BenchmarkSpec::validate() const {
  if (task != "pose" && task != "payload" && task != "push" && task != "path")
    throw std::invalid_argument("BenchmarkSpec: unknown task '" + task + "'");
  if (goal_count < 1) throw std::invalid_argument("BenchmarkSpec: goal_count must be >= 1");
  if (!(hold_seconds > 0.0)) throw std::invalid_argument("BenchmarkSpec: hold_seconds must be > 0");
  if (!(settle_window_seconds > 0.0) || settle_window_seconds > hold_seconds)
    throw std::invalid_argument("BenchmarkSpec: settle window must be in (0, hold]");
  if (!(pos_threshold > 0.0) || !(ori_threshold_deg > 0.0))
    throw std::invalid_argument("BenchmarkSpec: thresholds must be > 0");
  if (!(goal_xy_range >= 0.0) || !(goal_z_max >= goal_z_min))
    throw std::invalid_argument("BenchmarkSpec: bad goal workspace");
  if (path.kind != "figure8" && path.kind != "line")
    throw std::invalid_argument("BenchmarkSpec: unknown path kind '" + path.kind + "'");
  if (!(path.period > 0.0) || !(path.laps > 0.0) || !(path.line_speed > 0.0) ||
      path.width < 0.0 || path.height < 0.0 || path.settle_seconds < 0.0)
    throw std::invalid_argument("BenchmarkSpec: bad path descriptor");
  if (!(push.box_mass > 0.0) || !(push.stiffness > 0.0) || push.damping < 0.0 ||
      push.mu_static < 0.0 || push.mu_kinetic < 0.0 || !(push.speed > 0.0) ||
      push.drive_distance < 0.0 || push.settle_seconds < 0.0 || push.hold_seconds < 0.0)
    throw std::invalid_argument("BenchmarkSpec: bad push rig");
}

double BoxRig::step(double ee_x, double ee_vx, double dt) {
  const double delta = ee_x - x_;
  double F = 0.0;
  if (delta > 0.0)
    F = std::max(0.0, spec_.stiffness * delta + spec_.damping * (ee_vx - v_));
  if (!spec_.immovable) {
    const double fn = spec_.box_mass * g_;
    // Break away past static friction; once sliding, kinetic friction brakes.
    if (v_ > 0.0 || F > spec_.mu_static * fn) {
      const double a = (F - spec_.mu_kinetic * fn) / spec_.box_mass;
      v_ = std::max(0.0, v_ + a * dt);
    }
    x_ += v_ * dt;
  }
  return F;
}

ActionFn policy_action_fn(const PolicyBundle& b) {
  const RunningNorm::Snapshot snap = b.norm.snapshot();
  const Mlp<float> net = b.policy;  // the closure owns its own copy
  return [snap, net](const DsamEnv& env) {
    const MatX<float> x = RunningNorm::normalize(env.observation(), snap).cast<float>();
    const MatX<float> mu = net.forward(x);
    Eigen::Matrix<double, kActionDim, 1> a = mu.col(0).cast<double>();
    return a;
  };
}

Eigen::Matrix<double, kActionDim, 1> expert_action(const DsamEnv& env) {
  const ModelParams& m = env.config().model;
  const ActionScales& sc = env.config().scales;
  const SystemState& s = env.state();
  const Pose& g = env.goal();

  // The gripper frame factors as Rz(base yaw) * Ry(theta0) * Rx(theta1) when
  // the base flies level, so the goal orientation splits along exactly those
  // axes: yaw to the vehicle, pitch and roll to the differential.
  const Vector3d eul = euler_zyx_from_rotmat(quat_to_rotmat(g.orientation));
  const double yaw = eul(0);
  const Vector2d th_ref(std::clamp(eul(1), -m.joint_limit, m.joint_limit),
                        std::clamp(eul(2), -m.joint_limit, m.joint_limit));

  const Matrix3d Rz =
      Eigen::AngleAxisd(yaw, Vector3d::UnitZ()).toRotationMatrix();
  const Vector3d u_ee =
      m.mount_offset + arm_rotation(th_ref) * Vector3d(0.0, 0.0, -(m.link_length + m.ee_offset));
  const Vector3d p_des = g.position - Rz * u_ee;

  const double kp = 8.0, kd = 5.0;
  Vector3d acc = kp * (p_des - s.p_b) - kd * s.v_b;
  acc = acc.cwiseMax(-5.0).cwiseMin(5.0);

  Eigen::Matrix<double, kActionDim, 1> raw = Eigen::Matrix<double, kActionDim, 1>::Zero();
  raw.segment<3>(0) = acc / sc.accel;
  raw(6) = wrap_angle(yaw) / M_PI;
  raw(7) = th_ref(0) / sc.joint;
  raw(8) = th_ref(1) / sc.joint;
  return raw;
}

EnvConfig eval_env_config(EnvConfig base) {
  base.dr.payload = false;
  base.dr.stiffness = false;
  base.dr.friction = false;
  base.joint_init_range = 0.0;
  base.episode_seconds = 86400.0;  // flights are bench-managed; only crashes terminate
  return base;
}

EvalResult run_pose_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env) {
  spec.validate();
  const EnvConfig ec = eval_env_config(base_env);
  ec.validate();
  DsamEnv env(ec, static_cast<unsigned>(spec.seed));

  std::mt19937 grng(static_cast<unsigned>(spec.seed) ^ 0xb5297a4du);
  auto sym = [&grng](double r) {
    return r > 0.0 ? std::uniform_real_distribution<double>(-r, r)(grng) : 0.0;
  };
  std::vector<Pose> goals(static_cast<std::size_t>(spec.goal_count));
  for (auto& g : goals) {
    g.position = Vector3d(ec.spawn.x() + sym(spec.goal_xy_range),
                          ec.spawn.y() + sym(spec.goal_xy_range),
                          std::uniform_real_distribution<double>(spec.goal_z_min,
                                                                 spec.goal_z_max)(grng));
    const double yaw = sym(spec.yaw_range);
    const double pitch = sym(spec.tilt_range);
    const double roll = sym(spec.tilt_range);
    g.orientation = quat_from_euler_zyx(yaw, pitch, roll);
  }

  const int hold_steps = static_cast<int>(spec.hold_seconds * ec.policy_hz + 0.5);
  const double dt = 1.0 / ec.policy_hz;
  std::vector<EvalLogRow> log;
  log.reserve(goals.size() * static_cast<std::size_t>(hold_steps));

  env.reset();
  if (spec.payload_kg != 0.0) env.set_payload(spec.payload_kg);
  long long steps = 0;
  for (std::size_t gi = 0; gi < goals.size(); ++gi) {
    env.set_goal(goals[gi]);
    for (int k = 0; k < hold_steps; ++k) {
      const StepResult r = env.step(policy(env));
      ++steps;
      log.push_back(make_row(static_cast<double>(steps) * dt, static_cast<int>(gi), env, kNaN,
                             r.crashed ? 1 : 0));
      if (r.done) {
        // Goal recorded as failed; re-spawn and continue with the next one.
        env.reset();
        if (spec.payload_kg != 0.0) env.set_payload(spec.payload_kg);
        break;
      }
    }
  }

  EvalResult out;
  out.log = std::move(log);
  out.report = compute_metrics(out.log, spec);
  return out;
}

EvalResult run_payload_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                                 const EnvConfig& base_env) {
  return run_pose_benchmark(policy, spec, base_env);
}

EvalResult run_push_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env) {
  spec.validate();
  const EnvConfig ec = eval_env_config(base_env);
  ec.validate();
  DsamEnv env(ec, static_cast<unsigned>(spec.seed));
  env.reset();

  const Vector3d anchor = forward_kinematics(env.state(), env.plant()).position;
  BoxRig rig(spec.push, ec.model.gravity, anchor.x() + spec.push.face_offset);

  Pose goal;
  goal.orientation = Quat{};  // fixed gripper orientation throughout
  const double dt = 1.0 / ec.policy_hz;
  const double drive = spec.push.drive_distance / spec.push.speed;
  const long long total = std::llround((spec.push.settle_seconds + drive + spec.push.hold_seconds) /
                                       dt);
  std::vector<EvalLogRow> log;
  log.reserve(static_cast<std::size_t>(total));

  for (long long k = 1; k <= total; ++k) {
    const double clock = phase_clock(k, dt, spec.push.settle_seconds);
    goal.position =
        anchor + Vector3d(std::min(spec.push.speed * clock, spec.push.drive_distance), 0.0, 0.0);
    env.set_goal(goal);

    // Contact force from the pre-step state, held over the coming step.
    const double ee_x = forward_kinematics(env.state(), env.plant()).position.x();
    const double ee_vx = ee_velocity(env.state(), env.plant()).x();
    const double F = rig.step(ee_x, ee_vx, dt);
    ExternalWrench w;
    w.force = Vector3d(-F, 0.0, 0.0);
    env.set_external_wrench(w);

    const StepResult r = env.step(policy(env));
    log.push_back(
        make_row(static_cast<double>(k) * dt, 0, env, rig.x(), r.crashed ? 1 : 0));
    if (r.done) break;  // a crash ends the run; the report records instability
  }

  EvalResult out;
  out.log = std::move(log);
  out.report = compute_metrics(out.log, spec);
  return out;
}

EvalResult run_path_benchmark(const ActionFn& policy, const BenchmarkSpec& spec,
                              const EnvConfig& base_env) {
  spec.validate();
  const EnvConfig ec = eval_env_config(base_env);
  ec.validate();
  DsamEnv env(ec, static_cast<unsigned>(spec.seed));
  env.reset();

  const Vector3d anchor = forward_kinematics(env.state(), env.plant()).position;
  const PathSpec& p = spec.path;
  const Vector3d line_dir = p.line_to - p.line_from;
  const double line_len = line_dir.norm();

  double duration;
  if (p.kind == "figure8") {
    duration = p.laps * p.period;
  } else {
    // A zero-length line is a static goal; give it a hold to measure against.
    duration = line_len > 0.0 ? line_len / p.line_speed : spec.hold_seconds;
  }

  Pose goal;
  goal.orientation = Quat{};  // constant gripper orientation on the path
  const double dt = 1.0 / ec.policy_hz;
  const long long total = std::llround((p.settle_seconds + duration) / dt);
  std::vector<EvalLogRow> log;
  log.reserve(static_cast<std::size_t>(total));

  for (long long k = 1; k <= total; ++k) {
    const double clock = phase_clock(k, dt, p.settle_seconds);
    Vector3d off;
    if (p.kind == "figure8") {
      off = figure8_offset(p, clock);
    } else {
      off = line_len > 0.0
                ? Vector3d(line_dir * (std::min(p.line_speed * clock, line_len) / line_len))
                : Vector3d::Zero();
    }
    goal.position = anchor + off;
    env.set_goal(goal);

    const StepResult r = env.step(policy(env));
    log.push_back(make_row(static_cast<double>(k) * dt, 0, env, kNaN, r.crashed ? 1 : 0));
    if (r.done) break;
  }

  EvalResult out;
  out.log = std::move(log);
  out.report = compute_metrics(out.log, spec);
  return out;
}

EvalResult run_pose_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env) {
  base_env.obs = b.obs;
  base_env.scales = b.scales;
  return run_pose_benchmark(policy_action_fn(b), spec, base_env);
}
EvalResult run_payload_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                                 EnvConfig base_env) {
  base_env.obs = b.obs;
  base_env.scales = b.scales;
  return run_payload_benchmark(policy_action_fn(b), spec, base_env);
}
EvalResult run_push_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env) {
  base_env.obs = b.obs;
  base_env.scales = b.scales;
  return run_push_benchmark(policy_action_fn(b), spec, base_env);
}
EvalResult run_path_benchmark(const PolicyBundle& b, const BenchmarkSpec& spec,
                              EnvConfig base_env) {
  base_env.obs = b.obs;
  base_env.scales = b.scales;
  return run_path_benchmark(policy_action_fn(b), spec, base_env);
}

MetricsReport compute_metrics(const std::vector<EvalLogRow>& log, const BenchmarkSpec& spec) {
  if (spec.task == "push") return push_metrics(log, spec);
  if (spec.task == "path") return path_metrics(log, spec);
  return pose_metrics(log, spec);
}

std::vector<AblationRun> ablation_matrix(const TrainerConfig& base) {
  std::vector<AblationRun> runs;
  auto add = [&](const std::string& name, const std::function<void(TrainerConfig&)>& mod) {
    TrainerConfig c = base;
    mod(c);
    runs.push_back({name, c});
  };
  add("full", [](TrainerConfig&) {});
  add("no_joint_pos", [](TrainerConfig& c) { c.env.obs.joint_pos = false; });
  add("no_goal_in_body", [](TrainerConfig& c) { c.env.obs.goal_in_body = false; });
  add("no_body_rate", [](TrainerConfig& c) { c.env.obs.body_rate = false; });
  add("ctbr", [](TrainerConfig& c) { c.env.ctbr = true; });
  add("no_mass_dr", [](TrainerConfig& c) { c.env.dr.payload = false; });
  add("no_friction_dr", [](TrainerConfig& c) { c.env.dr.friction = false; });
  return runs;
}

std::vector<std::string> run_ablation_suite(const TrainerConfig& base, const std::string& out_dir,
                                            bool verbose) {
  std::vector<std::string> completed;
  for (const AblationRun& run : ablation_matrix(base)) {
    TrainerConfig c = run.cfg;
    c.out_dir = out_dir + "/" + run.name;
    c.verbose = verbose;
    if (verbose) std::printf("=== ablation %s ===\n", run.name.c_str());
    try {
      Trainer t(c);
      t.run();
      completed.push_back(run.name);
    } catch (const std::exception& e) {
      std::filesystem::create_directories(c.out_dir);
      std::ofstream f(c.out_dir + "/FAILED.txt");
      f << e.what() << "\n";
    }
  }
  return completed;
}

std::string eval_log_csv_header() {
  return "t,goal,base_px,base_py,base_pz,base_qw,base_qx,base_qy,base_qz,theta0,theta1,"
         "ee_px,ee_py,ee_pz,ee_qw,ee_qx,ee_qy,ee_qz,"
         "goal_px,goal_py,goal_pz,goal_qw,goal_qx,goal_qy,goal_qz,box_x,crash";
}

std::string report_csv_header() {
  return "row_type,label,pos_err_mean_m,pos_err_std_m,ori_err_mean_deg,ori_err_std_deg,"
         "success,crashed,total,pos_rmse_m,ori_rmse_deg,box_disp_m,stable,note";
}

void export_log(const std::vector<EvalLogRow>& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_log: cannot open '" + path + "'");
  f << eval_log_csv_header() << "\n";
  for (const auto& r : log) {
    std::vector<std::string> c;
    c.push_back(format_double(r.t));
    c.push_back(std::to_string(r.goal));
    for (int i = 0; i < 3; ++i) c.push_back(format_double(r.base_pos(i)));
    for (double v : {r.base_q.w, r.base_q.x, r.base_q.y, r.base_q.z})
      c.push_back(format_double(v));
    c.push_back(format_double(r.theta(0)));
    c.push_back(format_double(r.theta(1)));
    for (int i = 0; i < 3; ++i) c.push_back(format_double(r.ee.position(i)));
    for (double v : {r.ee.orientation.w, r.ee.orientation.x, r.ee.orientation.y,
                     r.ee.orientation.z})
      c.push_back(format_double(v));
    for (int i = 0; i < 3; ++i) c.push_back(format_double(r.target.position(i)));
    for (double v : {r.target.orientation.w, r.target.orientation.x,
                     r.target.orientation.y, r.target.orientation.z})
      c.push_back(format_double(v));
    c.push_back(fmt_opt(r.box_x));
    c.push_back(std::to_string(r.crash));
    f << join_csv(c) << "\n";
  }
  if (!f.good()) throw std::runtime_error("export_log: write failed for '" + path + "'");
}

std::vector<EvalLogRow> parse_log(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_log: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != eval_log_csv_header())
    throw std::runtime_error("parse_log: bad header in '" + path + "'");
  std::vector<EvalLogRow> log;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv_line(line);
    if (c.size() != 27)
      throw std::runtime_error("parse_log: bad column count in '" + path + "'");
    EvalLogRow r;
    r.t = parse_double(c[0]);
    r.goal = std::stoi(c[1]);
    for (int i = 0; i < 3; ++i) r.base_pos(i) = parse_double(c[2 + i]);
    r.base_q = Quat(parse_double(c[5]), parse_double(c[6]), parse_double(c[7]),
                    parse_double(c[8]));
    r.theta << parse_double(c[9]), parse_double(c[10]);
    for (int i = 0; i < 3; ++i) r.ee.position(i) = parse_double(c[11 + i]);
    r.ee.orientation = Quat(parse_double(c[14]), parse_double(c[15]), parse_double(c[16]),
                            parse_double(c[17]));
    for (int i = 0; i < 3; ++i) r.target.position(i) = parse_double(c[18 + i]);
    r.target.orientation = Quat(parse_double(c[21]), parse_double(c[22]), parse_double(c[23]),
                                parse_double(c[24]));
    r.box_x = parse_opt(c[25]);
    r.crash = std::stoi(c[26]);
    log.push_back(r);
  }
  return log;
}

namespace {

// Published flight-test numbers, emitted as presentation-only context rows.
std::vector<std::string> context_rows(const std::string& task) {
  const std::string note = "hardware flight reference";
  if (task == "pose")
    return {"context,hardware_0g,0.0536,0.0166,8.8078,7.1834,10,,10,,,,," + note};
  if (task == "payload")
    return {"context,hardware_0g,0.0536,0.0166,8.8078,7.1834,10,,10,,,,," + note,
            "context,hardware_50g,0.0995,0.0695,12.5020,3.0619,7,,7,,,,," + note,
            "context,hardware_140g,0.0954,0.0505,15.7006,4.8312,7,,7,,,,," + note};
  if (task == "push") return {"context,hardware_push,,,,,,,,,,0.30,1," + note};
  if (task == "path")
    return {"context,hardware_figure8,,,,,,,,0.8167,14.3915,,," + note,
            "context,hardware_line,,,,,,,,0.1960,5.5607,,," + note};
  return {};
}

std::string fmt_int(int v) { return std::to_string(v); }

}  // namespace

void export_report(const MetricsReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_report: cannot open '" + path + "'");
  f << report_csv_header() << "\n";
  f << join_csv({"meta", "task", "", "", "", "", "", "", "", "", "", "", "", r.task}) << "\n";
  f << join_csv({"meta", "log", "", "", "", "", "", "", "", "", "", "", "", r.log_ref}) << "\n";
  for (const auto& g : r.goals) {
    f << join_csv({"goal", "goal_" + std::to_string(g.goal), fmt_opt(g.pos_err_mean),
                   fmt_opt(g.pos_err_std), fmt_opt(g.ori_err_mean_deg),
                   fmt_opt(g.ori_err_std_deg), fmt_int(g.success), fmt_int(g.crashed), "", "", "",
                   "", "", ""})
      << "\n";
  }
  int crashed = 0;
  for (const auto& g : r.goals) crashed += g.crashed;
  f << join_csv({"aggregate", "all", fmt_opt(r.pos_err_mean), fmt_opt(r.pos_err_std),
                 fmt_opt(r.ori_err_mean_deg), fmt_opt(r.ori_err_std_deg),
                 fmt_int(r.success_count), fmt_int(crashed), fmt_int(r.total),
                 fmt_opt(r.pos_rmse), fmt_opt(r.ori_rmse_deg), fmt_opt(r.box_displacement),
                 r.stable < 0 ? "" : fmt_int(r.stable), ""})
    << "\n";
  for (const auto& row : context_rows(r.task)) f << row << "\n";
  if (!f.good()) throw std::runtime_error("export_report: write failed for '" + path + "'");
}

MetricsReport parse_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("parse_report: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != report_csv_header())
    throw std::runtime_error("parse_report: bad header in '" + path + "'");
  MetricsReport r;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv_line(line);
    if (c.size() != 14)
      throw std::runtime_error("parse_report: bad column count in '" + path + "'");
    if (c[0] == "context") continue;  // presentation only
    if (c[0] == "meta") {
      if (c[1] == "task") r.task = c[13];
      if (c[1] == "log") r.log_ref = c[13];
    } else if (c[0] == "goal") {
      GoalMetrics g;
      g.goal = std::stoi(c[1].substr(5));
      g.pos_err_mean = parse_opt(c[2]);
      g.pos_err_std = parse_opt(c[3]);
      g.ori_err_mean_deg = parse_opt(c[4]);
      g.ori_err_std_deg = parse_opt(c[5]);
      g.success = std::stoi(c[6]);
      g.crashed = std::stoi(c[7]);
      r.goals.push_back(g);
    } else if (c[0] == "aggregate") {
      r.pos_err_mean = parse_opt(c[2]);
      r.pos_err_std = parse_opt(c[3]);
      r.ori_err_mean_deg = parse_opt(c[4]);
      r.ori_err_std_deg = parse_opt(c[5]);
      r.success_count = std::stoi(c[6]);
      r.total = std::stoi(c[8]);
      r.pos_rmse = parse_opt(c[9]);
      r.ori_rmse_deg = parse_opt(c[10]);
      r.box_displacement = parse_opt(c[11]);
      r.stable = c[12].empty() ? -1 : std::stoi(c[12]);
    } else {
      throw std::runtime_error("parse_report: unknown row type '" + c[0] + "'");
    }
  }
  return r;
}

}  // namespace dsam
