#include "dsam/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "dsam/textio.hpp"

namespace dsam {

namespace {

// Chunked value-net readout keeps peak activation memory small on the full
// rollout batch.
VecX<float> value_row(const Mlp<float>& net, const MatX<float>& X) {
  const Eigen::Index n = X.cols();
  VecX<float> out(n);
  const Eigen::Index chunk = 4096;
  for (Eigen::Index lo = 0; lo < n; lo += chunk) {
    const Eigen::Index k = std::min(chunk, n - lo);
    out.segment(lo, k) = net.forward(X.middleCols(lo, k)).row(0).transpose();
  }
  return out;
}

void put_mat(ArrayFile& f, const std::string& name, const MatX<float>& M) {
  std::vector<float> v(static_cast<std::size_t>(M.size()));
  for (long i = 0; i < M.rows(); ++i)
    for (long j = 0; j < M.cols(); ++j) v[static_cast<std::size_t>(i * M.cols() + j)] = M(i, j);
  f.put_f32(name, v, {M.rows(), M.cols()});
}

MatX<float> get_mat(const ArrayFile& f, const std::string& name) {
  const ArrayEntry& e = f.get(name);
  if (e.shape.size() != 2) throw std::runtime_error("checkpoint: bad shape for " + name);
  MatX<float> M(e.shape[0], e.shape[1]);
  for (long i = 0; i < M.rows(); ++i)
    for (long j = 0; j < M.cols(); ++j) M(i, j) = e.f32[static_cast<std::size_t>(i * M.cols() + j)];
  return M;
}

void put_vec(ArrayFile& f, const std::string& name, const VecX<float>& v) {
  f.put_f32(name, std::vector<float>(v.data(), v.data() + v.size()), {v.size()});
}

VecX<float> get_vec(const ArrayFile& f, const std::string& name) {
  const ArrayEntry& e = f.get(name);
  return Eigen::Map<const VecX<float>>(e.f32.data(), e.shape[0]);
}

void put_adam(ArrayFile& f, const std::string& prefix, const Adam<float>& opt) {
  for (std::size_t l = 0; l < opt.mW.size(); ++l) {
    put_mat(f, prefix + "_mW" + std::to_string(l), opt.mW[l]);
    put_mat(f, prefix + "_vW" + std::to_string(l), opt.vW[l]);
    put_vec(f, prefix + "_mb" + std::to_string(l), opt.mb[l]);
    put_vec(f, prefix + "_vb" + std::to_string(l), opt.vb[l]);
  }
  f.meta[prefix + "_t"] = opt.t;
}

void get_adam(const ArrayFile& f, const std::string& prefix, Adam<float>& opt) {
  for (std::size_t l = 0; l < opt.mW.size(); ++l) {
    opt.mW[l] = get_mat(f, prefix + "_mW" + std::to_string(l));
    opt.vW[l] = get_mat(f, prefix + "_vW" + std::to_string(l));
    opt.mb[l] = get_vec(f, prefix + "_mb" + std::to_string(l));
    opt.vb[l] = get_vec(f, prefix + "_vb" + std::to_string(l));
  }
  opt.t = f.meta.at(prefix + "_t").get<std::int64_t>();
}

}  // namespace

void TrainerConfig::validate() const {
  env.validate();
  ppo.validate();
  if (num_envs <= 0) throw std::invalid_argument("num_envs must be positive");
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (static_cast<long long>(num_envs) * horizon < ppo.minibatches)
    throw std::invalid_argument("rollout smaller than minibatch count");
  if (total_env_steps <= 0) throw std::invalid_argument("total_env_steps must be positive");
}

std::string train_log_header() {
  return "env_steps,update,episodes,ep_return,ep_len,crash_rate,"
         "r_pos,r_ori,r_act_smooth,r_joint_smooth,r_act_mag,"
         "approx_kl,clip_fraction,policy_loss,value_loss,entropy,lr,log_std_mean,sps,wall_s,"
         "joint_osc";
}

std::string train_log_csv(const TrainLogRow& r) {
  std::vector<std::string> f;
  f.push_back(std::to_string(r.env_steps));
  f.push_back(std::to_string(r.update));
  f.push_back(std::to_string(r.episodes_done));
  for (double v : {r.ep_return, r.ep_len, r.crash_rate, r.step_terms.pos, r.step_terms.ori,
                   r.step_terms.action_smooth, r.step_terms.joint_smooth, r.step_terms.action_mag,
                   r.approx_kl, r.clip_fraction, r.policy_loss, r.value_loss, r.entropy, r.lr,
                   r.log_std_mean, r.sps, r.wall_s, r.joint_osc}) {
    f.push_back(format_double(v));
  }
  return join_csv(f);
}

Trainer::Trainer(const TrainerConfig& cfg)
    : cfg_(cfg),
      bundle_(PolicyBundle::make(cfg.env.obs, cfg.seed)),
      updater_(bundle_, cfg.ppo),
      rng_(cfg.seed ^ 0x9e3779b9u) {
  cfg_.validate();
  bundle_.scales = cfg_.env.scales;

  envs_.reserve(static_cast<std::size_t>(cfg_.num_envs));
  for (int e = 0; e < cfg_.num_envs; ++e) {
    envs_.emplace_back(cfg_.env, cfg_.seed + 7919u * static_cast<unsigned>(e + 1));
    obs_.push_back(envs_.back().observation());
  }
  ep_ret_accum_.assign(static_cast<std::size_t>(cfg_.num_envs), 0.0);
  ep_len_accum_.assign(static_cast<std::size_t>(cfg_.num_envs), 0);

  const Eigen::Index n =
      static_cast<Eigen::Index>(cfg_.num_envs) * static_cast<Eigen::Index>(cfg_.horizon);
  const Eigen::Index dim = bundle_.obs.dim();
  batch_.obs.resize(dim, n);
  batch_.actions.resize(kActionDim, n);
  batch_.logp_old.resize(n);
  batch_.adv.resize(n);
  batch_.ret.resize(n);
  batch_.value_old.resize(n);
  rewards_.assign(static_cast<std::size_t>(n), 0.0);
  done_.assign(static_cast<std::size_t>(n), 0);

  if (!cfg_.out_dir.empty()) {
    std::filesystem::create_directories(cfg_.out_dir);
    log_file_.open(cfg_.out_dir + "/train_log.csv");
    log_file_ << train_log_header() << "\n";
  }
}

void Trainer::collect() {
  const int E = cfg_.num_envs;
  const int H = cfg_.horizon;
  const Eigen::Index dim = bundle_.obs.dim();
  snap_ = bundle_.norm.snapshot();

  MatX<float> obs_mat(dim, E);
  const Eigen::VectorXd log_std_d = bundle_.log_std.cast<double>();

  std::vector<Eigen::Index> timeout_idx;
  std::vector<VecX<float>> timeout_obs;

  int episodes = 0, crashes = 0;
  double ep_ret_sum = 0.0;
  long long ep_len_sum = 0;
  RewardTerms term_sum;
  double reward_sum = 0.0, josc_sum = 0.0;

  for (int t = 0; t < H; ++t) {
    for (int e = 0; e < E; ++e) {
      bundle_.norm.update(obs_[static_cast<std::size_t>(e)]);
      obs_mat.col(e) =
          RunningNorm::normalize(obs_[static_cast<std::size_t>(e)], snap_).cast<float>();
    }
    const MatX<float> mu = bundle_.policy.forward(obs_mat);

    for (int e = 0; e < E; ++e) {
      const Eigen::Index flat = static_cast<Eigen::Index>(t) * E + e;
      const Eigen::VectorXd mean = mu.col(e).cast<double>();
      const VecX<float> action_f = gaussian_sample(mean, log_std_d, rng_).cast<float>();
      const Eigen::VectorXd action_d = action_f.cast<double>();

      batch_.obs.col(flat) = obs_mat.col(e);
      batch_.actions.col(flat) = action_f;
      batch_.logp_old(flat) = static_cast<float>(gaussian_log_prob(action_d, mean, log_std_d));

      const StepResult r =
          envs_[static_cast<std::size_t>(e)].step(Eigen::Matrix<double, kActionDim, 1>(action_d));
      rewards_[static_cast<std::size_t>(flat)] = r.reward;
      done_[static_cast<std::size_t>(flat)] = r.done ? 1 : 0;

      reward_sum += r.reward;
      term_sum.pos += r.terms.pos;
      term_sum.ori += r.terms.ori;
      term_sum.action_smooth += r.terms.action_smooth;
      term_sum.joint_smooth += r.terms.joint_smooth;
      term_sum.action_mag += r.terms.action_mag;
      josc_sum += r.joint_ref_delta;

      ep_ret_accum_[static_cast<std::size_t>(e)] += r.reward;
      ep_len_accum_[static_cast<std::size_t>(e)] += 1;

      if (r.done) {
        ++episodes;
        if (r.crashed) ++crashes;
        ep_ret_sum += ep_ret_accum_[static_cast<std::size_t>(e)];
        ep_len_sum += ep_len_accum_[static_cast<std::size_t>(e)];
        ep_ret_accum_[static_cast<std::size_t>(e)] = 0.0;
        ep_len_accum_[static_cast<std::size_t>(e)] = 0;
        if (r.timeout) {
          timeout_idx.push_back(flat);
          timeout_obs.push_back(RunningNorm::normalize(r.obs, snap_).cast<float>());
        }
        obs_[static_cast<std::size_t>(e)] = envs_[static_cast<std::size_t>(e)].reset();
      } else {
        obs_[static_cast<std::size_t>(e)] = r.obs;
      }
    }
  }

  const Eigen::Index n = batch_.obs.cols();
  batch_.value_old = value_row(bundle_.value, batch_.obs);

  // Truncated episodes keep their tail value: credit the last step with the
  // discounted value of the state the clock cut off.
  if (!timeout_idx.empty()) {
    MatX<float> tmat(dim, static_cast<Eigen::Index>(timeout_obs.size()));
    for (std::size_t k = 0; k < timeout_obs.size(); ++k)
      tmat.col(static_cast<Eigen::Index>(k)) = timeout_obs[k];
    const VecX<float> tv = value_row(bundle_.value, tmat);
    for (std::size_t k = 0; k < timeout_idx.size(); ++k) {
      rewards_[static_cast<std::size_t>(timeout_idx[k])] +=
          cfg_.ppo.gamma * static_cast<double>(tv(static_cast<Eigen::Index>(k)));
    }
  }

  MatX<float> boot_mat(dim, E);
  for (int e = 0; e < E; ++e)
    boot_mat.col(e) = RunningNorm::normalize(obs_[static_cast<std::size_t>(e)], snap_).cast<float>();
  const VecX<float> boot_v = value_row(bundle_.value, boot_mat);

  std::vector<double> r_seq(static_cast<std::size_t>(H)), v_seq(static_cast<std::size_t>(H));
  std::vector<std::uint8_t> d_seq(static_cast<std::size_t>(H));
  std::vector<double> adv_seq, ret_seq;
  for (int e = 0; e < E; ++e) {
    for (int t = 0; t < H; ++t) {
      const Eigen::Index flat = static_cast<Eigen::Index>(t) * E + e;
      r_seq[static_cast<std::size_t>(t)] = rewards_[static_cast<std::size_t>(flat)];
      v_seq[static_cast<std::size_t>(t)] = static_cast<double>(batch_.value_old(flat));
      d_seq[static_cast<std::size_t>(t)] = done_[static_cast<std::size_t>(flat)];
    }
    compute_gae(r_seq, v_seq, d_seq, static_cast<double>(boot_v(e)), cfg_.ppo.gamma, cfg_.ppo.lam,
                &adv_seq, &ret_seq);
    for (int t = 0; t < H; ++t) {
      const Eigen::Index flat = static_cast<Eigen::Index>(t) * E + e;
      batch_.adv(flat) = static_cast<float>(adv_seq[static_cast<std::size_t>(t)]);
      batch_.ret(flat) = static_cast<float>(ret_seq[static_cast<std::size_t>(t)]);
    }
  }

  env_steps_ += n;

  // Stash rollout aggregates for the log row.
  const double inv_n = 1.0 / static_cast<double>(n);
  rollout_reward_mean_ = reward_sum * inv_n;
  rollout_terms_ = RewardTerms{term_sum.pos * inv_n, term_sum.ori * inv_n,
                               term_sum.action_smooth * inv_n, term_sum.joint_smooth * inv_n,
                               term_sum.action_mag * inv_n};
  rollout_joint_osc_ = josc_sum * inv_n;
  rollout_episodes_ = episodes;
  rollout_crashes_ = crashes;
  if (episodes > 0) {
    last_ep_return_ = ep_ret_sum / episodes;
    last_ep_len_ = static_cast<double>(ep_len_sum) / episodes;
  }
}

bool Trainer::step_update() {
  if (env_steps_ >= cfg_.total_env_steps) return false;
  const auto t0 = std::chrono::steady_clock::now();
  collect();
  const PpoUpdateStats stats = updater_.update(batch_, rng_);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  wall_total_ += seconds;
  ++updates_;

  TrainLogRow row;
  row.env_steps = env_steps_;
  row.update = updates_;
  row.episodes_done = rollout_episodes_;
  row.ep_return = last_ep_return_;
  row.ep_len = last_ep_len_;
  row.crash_rate = rollout_episodes_ > 0
                       ? static_cast<double>(rollout_crashes_) / rollout_episodes_
                       : 0.0;
  row.step_terms = rollout_terms_;
  row.joint_osc = rollout_joint_osc_;
  row.approx_kl = stats.approx_kl;
  row.clip_fraction = stats.clip_fraction;
  row.policy_loss = stats.policy_loss;
  row.value_loss = stats.value_loss;
  row.entropy = stats.entropy;
  row.lr = stats.aborted ? updater_.lr() : stats.lr;
  row.log_std_mean = static_cast<double>(bundle_.log_std.mean());
  row.sps = seconds > 0.0 ? static_cast<double>(cfg_.num_envs) * cfg_.horizon / seconds : 0.0;
  row.wall_s = wall_total_;
  history_.push_back(row);

  if (log_file_.is_open()) {
    log_file_ << train_log_csv(row) << "\n";
    log_file_.flush();
  }
  if (cfg_.verbose) {
    std::printf(
        "update %4d  steps %9lld  ep_ret %8.2f  len %6.1f  crash %.2f  kl %.4f  lr %.1e  sps %.0f\n",
        updates_, env_steps_, last_ep_return_, last_ep_len_, row.crash_rate, stats.approx_kl,
        stats.lr, row.sps);
    std::fflush(stdout);
  }

  if (!cfg_.out_dir.empty() && cfg_.checkpoint_interval > 0 &&
      updates_ % cfg_.checkpoint_interval == 0) {
    save_checkpoint(cfg_.out_dir + "/checkpoint.dsamc");
    save_weights(cfg_.out_dir + "/weights_latest.dsamw");
  }
  return true;
}

void Trainer::run() {
  while (step_update()) {
  }
  if (!cfg_.out_dir.empty()) {
    save_checkpoint(cfg_.out_dir + "/checkpoint.dsamc");
    save_weights(cfg_.out_dir + "/weights_final.dsamw");
  }
}

void Trainer::save_checkpoint(const std::string& path) const {
  ArrayFile f;
  policy_to_arrays(bundle_, f);
  f.meta["kind"] = "checkpoint";
  f.meta["env_steps"] = env_steps_;
  f.meta["updates"] = updates_;
  f.meta["lr"] = updater_.lr();
  std::ostringstream ss;
  ss << rng_;
  f.meta["sampler_rng"] = ss.str();
  put_adam(f, "adam_policy", updater_.opt_policy());
  put_adam(f, "adam_value", updater_.opt_value());
  const AdamVec<float>& ols = updater_.opt_log_std();
  put_vec(f, "adam_log_std_m", ols.m);
  put_vec(f, "adam_log_std_v", ols.v);
  f.meta["adam_log_std_t"] = ols.t;
  f.write(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  const ArrayFile f = ArrayFile::read(path);
  if (f.meta.value("kind", "") != "checkpoint")
    throw std::runtime_error("not a training checkpoint: " + path);
  PolicyBundle loaded = policy_from_arrays(f);
  if (loaded.obs.dim() != bundle_.obs.dim())
    throw std::runtime_error("checkpoint observation width disagrees with config");
  bundle_ = std::move(loaded);

  env_steps_ = f.meta.at("env_steps").get<long long>();
  updates_ = f.meta.at("updates").get<int>();
  updater_.set_lr(f.meta.at("lr").get<double>());
  get_adam(f, "adam_policy", updater_.opt_policy());
  get_adam(f, "adam_value", updater_.opt_value());
  AdamVec<float>& ols = updater_.opt_log_std();
  ols.m = get_vec(f, "adam_log_std_m");
  ols.v = get_vec(f, "adam_log_std_v");
  ols.t = f.meta.at("adam_log_std_t").get<std::int64_t>();
  std::istringstream ss(f.meta.at("sampler_rng").get<std::string>());
  ss >> rng_;

  // Episodes in flight are not part of the checkpoint; resume with fresh ones.
  for (int e = 0; e < cfg_.num_envs; ++e)
    obs_[static_cast<std::size_t>(e)] = envs_[static_cast<std::size_t>(e)].reset();
  std::fill(ep_ret_accum_.begin(), ep_ret_accum_.end(), 0.0);
  std::fill(ep_len_accum_.begin(), ep_len_accum_.end(), 0);
}

}  // namespace dsam
