// On-policy training loop: a fleet of sequential environments feeding the
// clipped-surrogate updater, with CSV logging and resumable checkpoints.
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "dsam/env.hpp"
#include "dsam/ppo.hpp"

namespace dsam {

struct TrainerConfig {
  EnvConfig env;
  PpoConfig ppo;
  int num_envs = 256;
  int horizon = 150;  // env steps per environment between updates
  long long total_env_steps = 5'000'000;
  unsigned seed = 0;
  std::string out_dir;         // empty: no files, history kept in memory only
  int checkpoint_interval = 25;  // updates between checkpoints; 0 disables
  bool verbose = false;

  void validate() const;
};

struct TrainLogRow {
  long long env_steps = 0;
  int update = 0;
  int episodes_done = 0;     // episodes finished during this rollout
  double ep_return = 0.0;    // mean over finished episodes (carries last value if none)
  double ep_len = 0.0;
  double crash_rate = 0.0;
  RewardTerms step_terms;    // per-step reward component means over the rollout
  double joint_osc = 0.0;    // mean ||joint_ref - prev||_1 per step (drive chatter)
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double lr = 0.0;
  double log_std_mean = 0.0;
  double sps = 0.0;
  double wall_s = 0.0;
};

std::string train_log_header();
std::string train_log_csv(const TrainLogRow& r);

class Trainer {
 public:
  explicit Trainer(const TrainerConfig& cfg);

  // One rollout + one optimization pass; false once the step budget is spent.
  bool step_update();
  void run();  // step_update() until the budget is exhausted

  PolicyBundle& bundle() { return bundle_; }
  const PolicyBundle& bundle() const { return bundle_; }
  long long env_steps() const { return env_steps_; }
  int updates() const { return updates_; }
  const std::vector<TrainLogRow>& history() const { return history_; }

  void save_weights(const std::string& path) const { save_policy(path, bundle_); }
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  void collect();

  TrainerConfig cfg_;
  PolicyBundle bundle_;
  PpoUpdater updater_;
  std::vector<DsamEnv> envs_;
  std::vector<Eigen::VectorXd> obs_;  // current raw observation per env
  std::mt19937 rng_;                  // action sampling + minibatch shuffling

  PpoBatch<float> batch_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> done_;
  RunningNorm::Snapshot snap_;

  // Episode accumulators carried across rollout boundaries.
  std::vector<double> ep_ret_accum_;
  std::vector<int> ep_len_accum_;
  double last_ep_return_ = 0.0;
  double last_ep_len_ = 0.0;

  // Aggregates of the most recent rollout, consumed by the log row.
  double rollout_reward_mean_ = 0.0;
  RewardTerms rollout_terms_;
  double rollout_joint_osc_ = 0.0;
  int rollout_episodes_ = 0;
  int rollout_crashes_ = 0;

  long long env_steps_ = 0;
  int updates_ = 0;
  double wall_total_ = 0.0;
  std::vector<TrainLogRow> history_;
  std::ofstream log_file_;
};

}  // namespace dsam
