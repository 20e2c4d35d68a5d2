#include "dsam/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dsam {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  const json& s = j.at(key);
  if (!s.is_object()) fail(std::string(key) + " must be an object");
  return s;
}

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) { ok = true; break; }
    if (!ok) fail(std::string("unknown key \"") + item.key() + "\" in " + where);
  }
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    fail(std::string("bad value for \"") + key + "\"");
  }
}

void get(const json& j, const char* key, Vector3d& out) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 3) fail(std::string("\"") + key + "\" must be a 3-array");
  for (int i = 0; i < 3; ++i) out[i] = a.at(i).get<double>();
}

// Inertia tensors accept either a 3-array diagonal or a 9-array row-major
// full matrix; diagonals serialize back as 3-arrays.
void get(const json& j, const char* key, Matrix3d& out) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (a.is_array() && a.size() == 3) {
    out = Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>())
              .asDiagonal();
    return;
  }
  if (a.is_array() && a.size() == 9) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r, c) = a.at(3 * r + c).get<double>();
    return;
  }
  fail(std::string("\"") + key + "\" must be a 3-array diagonal or 9-array row-major matrix");
}

json dump(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json dump(const Matrix3d& m) {
  const Matrix3d off = m - Matrix3d(m.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) return json::array({m(0, 0), m(1, 1), m(2, 2)});
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

void load_model(const json& j, ModelParams& m) {
  check_keys(j, "model",
             {"base_mass", "arm_mass", "ee_mass", "payload_mass", "base_inertia", "arm_inertia",
              "ee_inertia", "mount_offset", "link_length", "ee_offset", "arm_com_offset",
              "rotor_arm", "rotor_spin", "thrust_coeff", "drag_torque_coeff", "rotor_speed_min",
              "rotor_speed_max", "rotor_time_constant", "joint_limit", "joint_stiffness",
              "joint_damping", "joint_coulomb_friction", "joint_viscous_friction",
              "joint_torque_limit", "joint_kp", "joint_kd", "joint_ki", "gravity",
              "velocity_ceiling"});
  get(j, "base_mass", m.base_mass);
  get(j, "arm_mass", m.arm_mass);
  get(j, "ee_mass", m.ee_mass);
  get(j, "payload_mass", m.payload_mass);
  get(j, "base_inertia", m.base_inertia);
  get(j, "arm_inertia", m.arm_inertia);
  get(j, "ee_inertia", m.ee_inertia);
  get(j, "mount_offset", m.mount_offset);
  get(j, "link_length", m.link_length);
  get(j, "ee_offset", m.ee_offset);
  get(j, "arm_com_offset", m.arm_com_offset);
  get(j, "rotor_arm", m.rotor_arm);
  if (j.contains("rotor_spin")) {
    const json& a = j.at("rotor_spin");
    if (!a.is_array() || a.size() != 4) fail("\"rotor_spin\" must be a 4-array of +-1");
    for (int i = 0; i < 4; ++i) {
      const int s = a.at(i).get<int>();
      if (s != 1 && s != -1) fail("\"rotor_spin\" entries must be +-1");
      m.rotor_spin[static_cast<std::size_t>(i)] = s;
    }
  }
  get(j, "thrust_coeff", m.thrust_coeff);
  get(j, "drag_torque_coeff", m.drag_torque_coeff);
  get(j, "rotor_speed_min", m.rotor_speed_min);
  get(j, "rotor_speed_max", m.rotor_speed_max);
  get(j, "rotor_time_constant", m.rotor_time_constant);
  get(j, "joint_limit", m.joint_limit);
  get(j, "joint_stiffness", m.joint_stiffness);
  get(j, "joint_damping", m.joint_damping);
  get(j, "joint_coulomb_friction", m.joint_coulomb_friction);
  get(j, "joint_viscous_friction", m.joint_viscous_friction);
  get(j, "joint_torque_limit", m.joint_torque_limit);
  get(j, "joint_kp", m.joint_kp);
  get(j, "joint_kd", m.joint_kd);
  get(j, "joint_ki", m.joint_ki);
  get(j, "gravity", m.gravity);
  get(j, "velocity_ceiling", m.velocity_ceiling);
}

json dump_model(const ModelParams& m) {
  json j;
  j["base_mass"] = m.base_mass;
  j["arm_mass"] = m.arm_mass;
  j["ee_mass"] = m.ee_mass;
  j["payload_mass"] = m.payload_mass;
  j["base_inertia"] = dump(m.base_inertia);
  j["arm_inertia"] = dump(m.arm_inertia);
  j["ee_inertia"] = dump(m.ee_inertia);
  j["mount_offset"] = dump(m.mount_offset);
  j["link_length"] = m.link_length;
  j["ee_offset"] = m.ee_offset;
  j["arm_com_offset"] = dump(m.arm_com_offset);
  j["rotor_arm"] = m.rotor_arm;
  j["rotor_spin"] = json::array({m.rotor_spin[0], m.rotor_spin[1], m.rotor_spin[2], m.rotor_spin[3]});
  j["thrust_coeff"] = m.thrust_coeff;
  j["drag_torque_coeff"] = m.drag_torque_coeff;
  j["rotor_speed_min"] = m.rotor_speed_min;
  j["rotor_speed_max"] = m.rotor_speed_max;
  j["rotor_time_constant"] = m.rotor_time_constant;
  j["joint_limit"] = m.joint_limit;
  j["joint_stiffness"] = m.joint_stiffness;
  j["joint_damping"] = m.joint_damping;
  j["joint_coulomb_friction"] = m.joint_coulomb_friction;
  j["joint_viscous_friction"] = m.joint_viscous_friction;
  j["joint_torque_limit"] = m.joint_torque_limit;
  j["joint_kp"] = m.joint_kp;
  j["joint_kd"] = m.joint_kd;
  j["joint_ki"] = m.joint_ki;
  j["gravity"] = m.gravity;
  j["velocity_ceiling"] = m.velocity_ceiling;
  return j;
}

void load_env(const json& j, EnvConfig& e) {
  check_keys(j, "env",
             {"obs", "scales", "gains", "dr", "ctbr", "episode_seconds", "crash_height", "spawn",
              "goal_xy_range", "goal_z_min", "goal_z_max", "goal_tilt_range", "joint_init_range",
              "policy_hz", "ticks_per_step", "substeps_per_tick"});
  {
    const json& o = section(j, "obs");
    check_keys(o, "env.obs", {"body_rate", "joint_pos", "goal_in_body"});
    get(o, "body_rate", e.obs.body_rate);
    get(o, "joint_pos", e.obs.joint_pos);
    get(o, "goal_in_body", e.obs.goal_in_body);
  }
  {
    const json& o = section(j, "scales");
    check_keys(o, "env.scales", {"raw_clamp", "accel", "rate", "joint"});
    get(o, "raw_clamp", e.scales.raw_clamp);
    get(o, "accel", e.scales.accel);
    get(o, "rate", e.scales.rate);
    get(o, "joint", e.scales.joint);
  }
  {
    const json& o = section(j, "gains");
    check_keys(o, "env.gains", {"k_tilt", "k_yaw", "k_rate"});
    get(o, "k_tilt", e.gains.k_tilt);
    get(o, "k_yaw", e.gains.k_yaw);
    get(o, "k_rate", e.gains.k_rate);
  }
  {
    const json& o = section(j, "dr");
    check_keys(o, "env.dr",
               {"payload", "stiffness", "friction", "payload_min", "payload_max", "stiffness_min",
                "stiffness_max", "friction_min", "friction_max"});
    get(o, "payload", e.dr.payload);
    get(o, "stiffness", e.dr.stiffness);
    get(o, "friction", e.dr.friction);
    get(o, "payload_min", e.dr.payload_min);
    get(o, "payload_max", e.dr.payload_max);
    get(o, "stiffness_min", e.dr.stiffness_min);
    get(o, "stiffness_max", e.dr.stiffness_max);
    get(o, "friction_min", e.dr.friction_min);
    get(o, "friction_max", e.dr.friction_max);
  }
  get(j, "ctbr", e.ctbr);
  get(j, "episode_seconds", e.episode_seconds);
  get(j, "crash_height", e.crash_height);
  get(j, "spawn", e.spawn);
  get(j, "goal_xy_range", e.goal_xy_range);
  get(j, "goal_z_min", e.goal_z_min);
  get(j, "goal_z_max", e.goal_z_max);
  get(j, "goal_tilt_range", e.goal_tilt_range);
  get(j, "joint_init_range", e.joint_init_range);
  get(j, "policy_hz", e.policy_hz);
  get(j, "ticks_per_step", e.ticks_per_step);
  get(j, "substeps_per_tick", e.substeps_per_tick);
}

json dump_env(const EnvConfig& e) {
  json j;
  j["obs"] = {{"body_rate", e.obs.body_rate},
              {"joint_pos", e.obs.joint_pos},
              {"goal_in_body", e.obs.goal_in_body}};
  j["scales"] = {{"raw_clamp", e.scales.raw_clamp},
                 {"accel", e.scales.accel},
                 {"rate", e.scales.rate},
                 {"joint", e.scales.joint}};
  j["gains"] = {{"k_tilt", e.gains.k_tilt}, {"k_yaw", e.gains.k_yaw}, {"k_rate", e.gains.k_rate}};
  j["dr"] = {{"payload", e.dr.payload},
             {"stiffness", e.dr.stiffness},
             {"friction", e.dr.friction},
             {"payload_min", e.dr.payload_min},
             {"payload_max", e.dr.payload_max},
             {"stiffness_min", e.dr.stiffness_min},
             {"stiffness_max", e.dr.stiffness_max},
             {"friction_min", e.dr.friction_min},
             {"friction_max", e.dr.friction_max}};
  j["ctbr"] = e.ctbr;
  j["episode_seconds"] = e.episode_seconds;
  j["crash_height"] = e.crash_height;
  j["spawn"] = dump(e.spawn);
  j["goal_xy_range"] = e.goal_xy_range;
  j["goal_z_min"] = e.goal_z_min;
  j["goal_z_max"] = e.goal_z_max;
  j["goal_tilt_range"] = e.goal_tilt_range;
  j["joint_init_range"] = e.joint_init_range;
  j["policy_hz"] = e.policy_hz;
  j["ticks_per_step"] = e.ticks_per_step;
  j["substeps_per_tick"] = e.substeps_per_tick;
  return j;
}

void load_ppo(const json& j, PpoConfig& p) {
  check_keys(j, "ppo",
             {"gamma", "lam", "clip", "value_clip", "value_coef", "entropy_coef", "max_grad_norm",
              "epochs", "minibatches", "kl_target", "lr_init", "lr_min", "lr_max", "lr_scale"});
  get(j, "gamma", p.gamma);
  get(j, "lam", p.lam);
  get(j, "clip", p.clip);
  get(j, "value_clip", p.value_clip);
  get(j, "value_coef", p.value_coef);
  get(j, "entropy_coef", p.entropy_coef);
  get(j, "max_grad_norm", p.max_grad_norm);
  get(j, "epochs", p.epochs);
  get(j, "minibatches", p.minibatches);
  get(j, "kl_target", p.kl_target);
  get(j, "lr_init", p.lr_init);
  get(j, "lr_min", p.lr_min);
  get(j, "lr_max", p.lr_max);
  get(j, "lr_scale", p.lr_scale);
}

json dump_ppo(const PpoConfig& p) {
  json j;
  j["gamma"] = p.gamma;
  j["lam"] = p.lam;
  j["clip"] = p.clip;
  j["value_clip"] = p.value_clip;
  j["value_coef"] = p.value_coef;
  j["entropy_coef"] = p.entropy_coef;
  j["max_grad_norm"] = p.max_grad_norm;
  j["epochs"] = p.epochs;
  j["minibatches"] = p.minibatches;
  j["kl_target"] = p.kl_target;
  j["lr_init"] = p.lr_init;
  j["lr_min"] = p.lr_min;
  j["lr_max"] = p.lr_max;
  j["lr_scale"] = p.lr_scale;
  return j;
}

void load_bench(const json& j, BenchmarkSpec& b) {
  check_keys(j, "benchmark",
             {"task", "goal_count", "hold_seconds", "settle_window_seconds", "payload_kg",
              "pos_threshold", "ori_threshold_deg", "seed", "goal_xy_range", "goal_z_min",
              "goal_z_max", "tilt_range", "yaw_range", "path", "push"});
  get(j, "task", b.task);
  get(j, "goal_count", b.goal_count);
  get(j, "hold_seconds", b.hold_seconds);
  get(j, "settle_window_seconds", b.settle_window_seconds);
  get(j, "payload_kg", b.payload_kg);
  get(j, "pos_threshold", b.pos_threshold);
  get(j, "ori_threshold_deg", b.ori_threshold_deg);
  get(j, "seed", b.seed);
  get(j, "goal_xy_range", b.goal_xy_range);
  get(j, "goal_z_min", b.goal_z_min);
  get(j, "goal_z_max", b.goal_z_max);
  get(j, "tilt_range", b.tilt_range);
  get(j, "yaw_range", b.yaw_range);
  {
    const json& o = section(j, "path");
    check_keys(o, "benchmark.path",
               {"kind", "width", "height", "period", "laps", "line_from", "line_to", "line_speed",
                "settle_seconds"});
    get(o, "kind", b.path.kind);
    get(o, "width", b.path.width);
    get(o, "height", b.path.height);
    get(o, "period", b.path.period);
    get(o, "laps", b.path.laps);
    get(o, "line_from", b.path.line_from);
    get(o, "line_to", b.path.line_to);
    get(o, "line_speed", b.path.line_speed);
    get(o, "settle_seconds", b.path.settle_seconds);
  }
  {
    const json& o = section(j, "push");
    check_keys(o, "benchmark.push",
               {"box_mass", "immovable", "stiffness", "damping", "mu_static", "mu_kinetic",
                "face_offset", "drive_distance", "speed", "settle_seconds", "hold_seconds"});
    get(o, "box_mass", b.push.box_mass);
    get(o, "immovable", b.push.immovable);
    get(o, "stiffness", b.push.stiffness);
    get(o, "damping", b.push.damping);
    get(o, "mu_static", b.push.mu_static);
    get(o, "mu_kinetic", b.push.mu_kinetic);
    get(o, "face_offset", b.push.face_offset);
    get(o, "drive_distance", b.push.drive_distance);
    get(o, "speed", b.push.speed);
    get(o, "settle_seconds", b.push.settle_seconds);
    get(o, "hold_seconds", b.push.hold_seconds);
  }
}

json dump_bench(const BenchmarkSpec& b) {
  json j;
  j["task"] = b.task;
  j["goal_count"] = b.goal_count;
  j["hold_seconds"] = b.hold_seconds;
  j["settle_window_seconds"] = b.settle_window_seconds;
  j["payload_kg"] = b.payload_kg;
  j["pos_threshold"] = b.pos_threshold;
  j["ori_threshold_deg"] = b.ori_threshold_deg;
  j["seed"] = b.seed;
  j["goal_xy_range"] = b.goal_xy_range;
  j["goal_z_min"] = b.goal_z_min;
  j["goal_z_max"] = b.goal_z_max;
  j["tilt_range"] = b.tilt_range;
  j["yaw_range"] = b.yaw_range;
  j["path"] = {{"kind", b.path.kind},
               {"width", b.path.width},
               {"height", b.path.height},
               {"period", b.path.period},
               {"laps", b.path.laps},
               {"line_from", dump(b.path.line_from)},
               {"line_to", dump(b.path.line_to)},
               {"line_speed", b.path.line_speed},
               {"settle_seconds", b.path.settle_seconds}};
  j["push"] = {{"box_mass", b.push.box_mass},
               {"immovable", b.push.immovable},
               {"stiffness", b.push.stiffness},
               {"damping", b.push.damping},
               {"mu_static", b.push.mu_static},
               {"mu_kinetic", b.push.mu_kinetic},
               {"face_offset", b.push.face_offset},
               {"drive_distance", b.push.drive_distance},
               {"speed", b.push.speed},
               {"settle_seconds", b.push.settle_seconds},
               {"hold_seconds", b.push.hold_seconds}};
  return j;
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("JSON parse error: ") + e.what());
  }
  if (!j.is_object()) fail("top level must be an object");
  check_keys(j, "top level", {"trainer", "ppo", "env", "model", "benchmark"});

  RunConfig cfg;
  {
    const json& t = section(j, "trainer");
    check_keys(t, "trainer",
               {"num_envs", "horizon", "total_env_steps", "seed", "checkpoint_interval"});
    get(t, "num_envs", cfg.trainer.num_envs);
    get(t, "horizon", cfg.trainer.horizon);
    get(t, "total_env_steps", cfg.trainer.total_env_steps);
    get(t, "seed", cfg.trainer.seed);
    get(t, "checkpoint_interval", cfg.trainer.checkpoint_interval);
  }
  load_ppo(section(j, "ppo"), cfg.trainer.ppo);
  load_env(section(j, "env"), cfg.trainer.env);
  load_model(section(j, "model"), cfg.trainer.env.model);
  load_bench(section(j, "benchmark"), cfg.bench);

  try {
    cfg.trainer.validate();
    cfg.bench.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return cfg;
}

std::string config_to_json_text(const RunConfig& cfg) {
  json j;
  j["trainer"] = {{"num_envs", cfg.trainer.num_envs},
                  {"horizon", cfg.trainer.horizon},
                  {"total_env_steps", cfg.trainer.total_env_steps},
                  {"seed", cfg.trainer.seed},
                  {"checkpoint_interval", cfg.trainer.checkpoint_interval}};
  j["ppo"] = dump_ppo(cfg.trainer.ppo);
  j["env"] = dump_env(cfg.trainer.env);
  j["model"] = dump_model(cfg.trainer.env.model);
  j["benchmark"] = dump_bench(cfg.bench);
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path);
  if (!in) fail("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("config: cannot write \"" + path + "\"");
  out << config_to_json_text(cfg);
  if (!out) throw std::runtime_error("config: write failed for \"" + path + "\"");
}

}  // namespace dsam
