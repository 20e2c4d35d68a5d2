// Command-line front end: train a policy, fly it through the benchmark
// protocols, sweep the ablation matrix, or recompute a report from a stored
// flight log.  Every run is deterministic given (config, seed); the
// --deterministic flag documents that contract and is accepted everywhere.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dsam/bench.hpp"
#include "dsam/config.hpp"
#include "dsam/trainer.hpp"

namespace fs = std::filesystem;
using namespace dsam;

namespace {

struct CliOpts {
  std::string config;
  std::string weights;
  std::string out;
  unsigned long long seed = 0;
  bool seed_set = false;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CliOpts& o, const std::string& default_out) {
  o.out = default_out;
  cmd->add_option("--config", o.config, "JSON run configuration (absent keys keep defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the configured RNG seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_flag("--deterministic", o.deterministic,
                "assert bit-reproducible execution (always on; flag is an explicit contract)");
}

RunConfig load_run_config(const CliOpts& o) {
  RunConfig rc = load_config(o.config);
  if (o.seed_set) {
    rc.trainer.seed = static_cast<unsigned>(o.seed);
    rc.bench.seed = static_cast<unsigned>(o.seed);
  }
  return rc;
}

PolicyBundle load_weights_or_fail(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--weights is required for evaluation");
  try {
    return load_policy(path);
  } catch (const std::exception& e) {
    throw std::invalid_argument("weights: cannot load \"" + path + "\": " + e.what());
  }
}

void print_report(const MetricsReport& r) {
  if (r.task == "pose" || r.task == "payload") {
    std::printf("%s: %d/%d goals successful, %d crashed\n", r.task.c_str(), r.success_count,
                r.total, [&] {
                  int c = 0;
                  for (const auto& g : r.goals) c += g.crashed;
                  return c;
                }());
    std::printf("  position error %.4f +- %.4f m, orientation error %.4f +- %.4f deg\n",
                r.pos_err_mean, r.pos_err_std, r.ori_err_mean_deg, r.ori_err_std_deg);
  } else if (r.task == "push") {
    std::printf("push: box displacement %.4f m, contact %s\n", r.box_displacement,
                r.stable == 1 ? "stable" : "lost");
  } else if (r.task == "path") {
    std::printf("path: position RMSE %.4f m, orientation RMSE %.4f deg\n", r.pos_rmse,
                r.ori_rmse_deg);
  }
}

// One benchmark flight -> out/{eval_log.csv, report.csv, spec.json}.  The
// saved spec lets `export` later recompute the report from the log alone.
void write_eval_outputs(const RunConfig& rc, EvalResult res, const std::string& out) {
  fs::create_directories(out);
  export_log(res.log, out + "/eval_log.csv");
  res.report.log_ref = "eval_log.csv";
  export_report(res.report, out + "/report.csv");
  save_config(rc, out + "/spec.json");
  print_report(res.report);
  std::printf("  wrote %s/{eval_log.csv, report.csv, spec.json}\n", out.c_str());
}

EvalResult dispatch_benchmark(const PolicyBundle& b, const RunConfig& rc) {
  const BenchmarkSpec& s = rc.bench;
  const EnvConfig& e = rc.trainer.env;
  if (s.task == "pose") return run_pose_benchmark(b, s, e);
  if (s.task == "payload") return run_payload_benchmark(b, s, e);
  if (s.task == "push") return run_push_benchmark(b, s, e);
  if (s.task == "path") return run_path_benchmark(b, s, e);
  throw std::invalid_argument("unknown benchmark task \"" + s.task + "\"");
}

int cmd_train(const CliOpts& o) {
  RunConfig rc = load_run_config(o);
  rc.trainer.out_dir = o.out;
  rc.trainer.verbose = true;
  fs::create_directories(o.out);
  save_config(rc, o.out + "/config.json");
  Trainer t(rc.trainer);
  t.run();
  std::printf("trained %lld env steps (%d updates) -> %s/weights_final.dsamw\n", t.env_steps(),
              t.updates(), o.out.c_str());
  return 0;
}

int cmd_eval(const std::string& task, const CliOpts& o) {
  RunConfig rc = load_run_config(o);
  rc.bench.task = task;
  const PolicyBundle bundle = load_weights_or_fail(o.weights);

  if (task == "payload" && rc.bench.payload_kg == 0.0) {
    // Standard protocol: repeat the pose benchmark under each reference
    // payload.  A nonzero configured payload_kg runs that single mass.
    for (const double kg : {0.05, 0.14}) {
      RunConfig sub = rc;
      sub.bench.payload_kg = kg;
      char name[32];
      std::snprintf(name, sizeof(name), "payload_%dg", static_cast<int>(kg * 1000.0 + 0.5));
      std::printf("[payload %.0f g]\n", kg * 1000.0);
      write_eval_outputs(sub, dispatch_benchmark(bundle, sub), o.out + "/" + name);
    }
    return 0;
  }
  write_eval_outputs(rc, dispatch_benchmark(bundle, rc), o.out);
  return 0;
}

int cmd_ablate(const CliOpts& o) {
  RunConfig rc = load_run_config(o);
  rc.trainer.verbose = false;
  fs::create_directories(o.out);
  save_config(rc, o.out + "/config.json");
  const auto done = run_ablation_suite(rc.trainer, o.out, true);
  const auto matrix = ablation_matrix(rc.trainer);
  std::printf("ablation sweep: %zu/%zu runs completed\n", done.size(), matrix.size());
  for (const auto& run : matrix) {
    const bool ok = std::find(done.begin(), done.end(), run.name) != done.end();
    std::printf("  %-16s %s\n", run.name.c_str(), ok ? "ok" : "FAILED");
  }
  return 0;
}

// Rebuild report.csv from the stored flight log, proving the metrics are a
// pure function of (log, spec).  --config substitutes a different spec (for
// example tighter thresholds) without re-flying.
int cmd_export(const CliOpts& o) {
  const std::string spec_path = o.config.empty() ? o.out + "/spec.json" : o.config;
  RunConfig rc;
  try {
    rc = load_config(spec_path);
  } catch (const std::exception& e) {
    throw std::invalid_argument("export: cannot load spec from \"" + spec_path + "\": " + e.what());
  }
  const auto log = parse_log(o.out + "/eval_log.csv");
  MetricsReport r = compute_metrics(log, rc.bench);
  r.log_ref = "eval_log.csv";
  export_report(r, o.out + "/report.csv");
  print_report(r);
  std::printf("  recomputed %s/report.csv from eval_log.csv\n", o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aerial manipulator training and evaluation"};
  app.require_subcommand(1);

  CliOpts train_o, pose_o, payload_o, push_o, path_o, ablate_o, export_o;

  CLI::App* train = app.add_subcommand("train", "train a policy with the on-policy loop");
  add_common(train, train_o, "run");

  CLI::App* pose = app.add_subcommand("eval-pose", "sequential goal-hold benchmark");
  add_common(pose, pose_o, "eval_pose");
  pose->add_option("--weights", pose_o.weights, "policy weight file")->required();

  CLI::App* payload = app.add_subcommand("eval-payload", "goal holds with an attached payload");
  add_common(payload, payload_o, "eval_payload");
  payload->add_option("--weights", payload_o.weights, "policy weight file")->required();

  CLI::App* push = app.add_subcommand("eval-push", "drive a box along the ground");
  add_common(push, push_o, "eval_push");
  push->add_option("--weights", push_o.weights, "policy weight file")->required();

  CLI::App* path = app.add_subcommand("eval-path", "track a moving path goal");
  add_common(path, path_o, "eval_path");
  path->add_option("--weights", path_o.weights, "policy weight file")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "train the ablation matrix");
  add_common(ablate, ablate_o, "ablations");

  CLI::App* exp = app.add_subcommand("export", "recompute report.csv from a stored eval log");
  add_common(exp, export_o, "eval_pose");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_o);
    if (pose->parsed()) return cmd_eval("pose", pose_o);
    if (payload->parsed()) return cmd_eval("payload", payload_o);
    if (push->parsed()) return cmd_eval("push", push_o);
    if (path->parsed()) return cmd_eval("path", path_o);
    if (ablate->parsed()) return cmd_ablate(ablate_o);
    if (exp->parsed()) return cmd_export(export_o);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
