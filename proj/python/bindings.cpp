// Python surface: enough to train, fly, and score policies from scripts.
// Configuration crosses the boundary as JSON text (same schema as the CLI
// files); vectors cross as NumPy arrays via Eigen.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <memory>
#include <string>

#include "dsam/bench.hpp"
#include "dsam/config.hpp"
#include "dsam/dynamics.hpp"
#include "dsam/trainer.hpp"

namespace py = pybind11;
using namespace dsam;

namespace {

RunConfig parse_config(const std::string& json_text) {
  return json_text.empty() ? RunConfig{} : config_from_json_text(json_text);
}

Eigen::Vector4d quat_vec(const Quat& q) { return Eigen::Vector4d(q.w, q.x, q.y, q.z); }

Quat vec_quat(const Eigen::Vector4d& v) { return Quat(v[0], v[1], v[2], v[3]).normalized(); }

// Deterministic policy evaluation: frozen normalization, mean action.
Eigen::Matrix<double, kActionDim, 1> mean_action(const PolicyBundle& b,
                                                 const Eigen::VectorXd& obs) {
  if (obs.size() != b.obs.dim())
    throw std::invalid_argument("observation size does not match the policy");
  const RunningNorm::Snapshot snap = b.norm.snapshot();
  const VecX<float> x = RunningNorm::normalize(obs, snap).cast<float>();
  return b.policy.forward(x).col(0).cast<double>();
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["task"] = r.task;
  d["pos_err_mean"] = r.pos_err_mean;
  d["pos_err_std"] = r.pos_err_std;
  d["ori_err_mean_deg"] = r.ori_err_mean_deg;
  d["ori_err_std_deg"] = r.ori_err_std_deg;
  d["success_count"] = r.success_count;
  d["total"] = r.total;
  d["pos_rmse"] = r.pos_rmse;
  d["ori_rmse_deg"] = r.ori_rmse_deg;
  d["box_displacement"] = r.box_displacement;
  d["stable"] = r.stable;
  int crashed = 0;
  for (const auto& g : r.goals) crashed += g.crashed;
  d["crashed"] = crashed;
  py::list goals;
  for (const auto& g : r.goals) {
    py::dict gd;
    gd["goal"] = g.goal;
    gd["pos_err_mean"] = g.pos_err_mean;
    gd["pos_err_std"] = g.pos_err_std;
    gd["ori_err_mean_deg"] = g.ori_err_mean_deg;
    gd["ori_err_std_deg"] = g.ori_err_std_deg;
    gd["success"] = g.success;
    gd["crashed"] = g.crashed;
    goals.append(gd);
  }
  d["goals"] = goals;
  return d;
}

py::dict row_dict(const TrainLogRow& r) {
  py::dict d;
  d["env_steps"] = r.env_steps;
  d["update"] = r.update;
  d["episodes_done"] = r.episodes_done;
  d["ep_return"] = r.ep_return;
  d["ep_len"] = r.ep_len;
  d["crash_rate"] = r.crash_rate;
  d["r_pos"] = r.step_terms.pos;
  d["r_ori"] = r.step_terms.ori;
  d["r_action_smooth"] = r.step_terms.action_smooth;
  d["r_joint_smooth"] = r.step_terms.joint_smooth;
  d["r_action_mag"] = r.step_terms.action_mag;
  d["joint_osc"] = r.joint_osc;
  d["approx_kl"] = r.approx_kl;
  d["clip_fraction"] = r.clip_fraction;
  d["policy_loss"] = r.policy_loss;
  d["value_loss"] = r.value_loss;
  d["entropy"] = r.entropy;
  d["lr"] = r.lr;
  d["log_std_mean"] = r.log_std_mean;
  d["sps"] = r.sps;
  d["wall_s"] = r.wall_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "aerial manipulator simulator, trainer, and evaluation harness";

  m.def("default_config_json", [] { return config_to_json_text(RunConfig{}); },
        "Full JSON text of the compiled default configuration.");
  m.def(
      "normalize_config_json",
      [](const std::string& text) { return config_to_json_text(parse_config(text)); },
      py::arg("text"),
      "Validate a (possibly partial) config and return the fully resolved JSON.");

  py::class_<PolicyBundle>(m, "Policy")
      .def_static("load", &load_policy, py::arg("path"))
      .def("save", [](const PolicyBundle& b, const std::string& p) { save_policy(p, b); },
           py::arg("path"))
      .def("act", &mean_action, py::arg("observation"),
           "Deterministic raw action (pre-scaling) for one un-normalized observation.")
      .def_property_readonly("obs_dim", [](const PolicyBundle& b) { return b.obs.dim(); })
      .def_property_readonly_static("action_dim", [](py::object) { return kActionDim; });

  py::class_<DsamEnv>(m, "Env")
      .def(py::init([](const std::string& config_json, unsigned seed) {
             return std::make_unique<DsamEnv>(parse_config(config_json).trainer.env, seed);
           }),
           py::arg("config_json") = std::string(), py::arg("seed") = 0u)
      .def("reset", &DsamEnv::reset)
      .def(
          "step",
          [](DsamEnv& e, const Eigen::Matrix<double, kActionDim, 1>& raw) {
            const StepResult r = e.step(raw);
            py::dict info;
            info["crashed"] = r.crashed;
            info["timeout"] = r.timeout;
            info["r_pos"] = r.terms.pos;
            info["r_ori"] = r.terms.ori;
            info["r_action_smooth"] = r.terms.action_smooth;
            info["r_joint_smooth"] = r.terms.joint_smooth;
            info["r_action_mag"] = r.terms.action_mag;
            info["joint_ref_delta"] = r.joint_ref_delta;
            return py::make_tuple(r.obs, r.reward, r.done, info);
          },
          py::arg("raw_action"), "Advance one policy step; returns (obs, reward, done, info).")
      .def("set_goal",
           [](DsamEnv& e, const Vector3d& position, const Eigen::Vector4d& quat_wxyz) {
             e.set_goal(Pose{position, vec_quat(quat_wxyz)});
           },
           py::arg("position"), py::arg("quat_wxyz"))
      .def("set_payload", &DsamEnv::set_payload, py::arg("mass_kg"))
      .def_property_readonly("obs_dim", [](const DsamEnv& e) { return e.config().obs.dim(); })
      .def_property_readonly("steps_done", &DsamEnv::steps_done)
      .def_property_readonly("base_position", [](const DsamEnv& e) { return e.state().p_b; })
      .def_property_readonly("joint_angles", [](const DsamEnv& e) { return e.state().theta; })
      .def_property_readonly("goal_position", [](const DsamEnv& e) { return e.goal().position; })
      .def_property_readonly("goal_quat_wxyz",
                             [](const DsamEnv& e) { return quat_vec(e.goal().orientation); })
      .def_property_readonly("ee_position",
                             [](const DsamEnv& e) {
                               return forward_kinematics(e.state(), e.plant()).position;
                             })
      .def_property_readonly("ee_quat_wxyz", [](const DsamEnv& e) {
        return quat_vec(forward_kinematics(e.state(), e.plant()).orientation);
      });

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_json, const std::string& out_dir, long seed,
                       bool verbose) {
             RunConfig rc = parse_config(config_json);
             rc.trainer.out_dir = out_dir;
             rc.trainer.verbose = verbose;
             if (seed >= 0) rc.trainer.seed = static_cast<unsigned>(seed);
             return std::make_unique<Trainer>(rc.trainer);
           }),
           py::arg("config_json") = std::string(), py::arg("out_dir") = std::string(),
           py::arg("seed") = -1L, py::arg("verbose") = false)
      .def("run", &Trainer::run, py::call_guard<py::gil_scoped_release>())
      .def("step_update", &Trainer::step_update, py::call_guard<py::gil_scoped_release>(),
           "One rollout + one optimization pass; False once the budget is spent.")
      .def_property_readonly("env_steps", &Trainer::env_steps)
      .def_property_readonly("updates", &Trainer::updates)
      .def_property_readonly("policy",
                             [](const Trainer& t) { return t.bundle(); })  // copy on purpose
      .def("history",
           [](const Trainer& t) {
             py::list rows;
             for (const auto& r : t.history()) rows.append(row_dict(r));
             return rows;
           })
      .def("save_weights", &Trainer::save_weights, py::arg("path"))
      .def("save_checkpoint", &Trainer::save_checkpoint, py::arg("path"))
      .def("load_checkpoint", &Trainer::load_checkpoint, py::arg("path"));

  m.def(
      "run_benchmark",
      [](const PolicyBundle& policy, const std::string& task, const std::string& config_json,
         const std::string& out_dir) {
        RunConfig rc = parse_config(config_json);
        rc.bench.task = task;
        EvalResult res;
        {
          py::gil_scoped_release release;
          const BenchmarkSpec& s = rc.bench;
          const EnvConfig& e = rc.trainer.env;
          if (task == "pose") res = run_pose_benchmark(policy, s, e);
          else if (task == "payload") res = run_payload_benchmark(policy, s, e);
          else if (task == "push") res = run_push_benchmark(policy, s, e);
          else if (task == "path") res = run_path_benchmark(policy, s, e);
          else throw std::invalid_argument("unknown benchmark task \"" + task + "\"");
          if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            export_log(res.log, out_dir + "/eval_log.csv");
            res.report.log_ref = "eval_log.csv";
            export_report(res.report, out_dir + "/report.csv");
            save_config(rc, out_dir + "/spec.json");
          }
        }
        py::dict d = report_dict(res.report);
        d["log_rows"] = static_cast<long>(res.log.size());
        return d;
      },
      py::arg("policy"), py::arg("task"), py::arg("config_json") = std::string(),
      py::arg("out_dir") = std::string(),
      "Fly one benchmark deterministically; optionally write the CSV artifacts.");
}
