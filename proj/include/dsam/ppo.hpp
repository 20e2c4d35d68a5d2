// Clipped-surrogate policy optimization on diagonal-Gaussian MLP policies.
// The loss is templated on the scalar so the production float path and the
// double finite-difference harness share one implementation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "dsam/net.hpp"
#include "dsam/policy.hpp"

namespace dsam {

struct PpoConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip = 0.2;
  double value_clip = 0.2;
  double value_coef = 1.0;
  double entropy_coef = 0.0;
  double max_grad_norm = 1.0;
  int epochs = 5;
  int minibatches = 4;
  // Learning rate adapts toward a KL budget instead of a fixed schedule.
  double kl_target = 0.01;
  double lr_init = 1e-3;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  double lr_scale = 1.5;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma out of range");
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("lam out of range");
    if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
    if (epochs <= 0 || minibatches <= 0) throw std::invalid_argument("epochs/minibatches");
    if (!(lr_min <= lr_init && lr_init <= lr_max)) throw std::invalid_argument("lr bounds");
    if (!(lr_scale > 1.0)) throw std::invalid_argument("lr_scale must exceed 1");
  }
};

// Generalized advantage estimation over one flattened sequence.  done[t]
// marks the state after step t terminal (no value flows through it); any
// timeout bootstrap must already be folded into rewards[t] by the caller.
// bootstrap is V(s_T) for a rollout cut mid-episode.
inline void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<std::uint8_t>& done, double bootstrap, double gamma,
                        double lam, std::vector<double>* adv, std::vector<double>* ret) {
  const std::size_t n = rewards.size();
  if (values.size() != n || done.size() != n) throw std::invalid_argument("gae size mismatch");
  adv->assign(n, 0.0);
  ret->assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = done[i] ? 0.0 : 1.0;
    const double v_next = (i + 1 < n) ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * not_done * v_next - values[i];
    running = delta + gamma * lam * not_done * running;
    (*adv)[i] = running;
    (*ret)[i] = running + values[i];
  }
}

// Experience minibatch, columns = samples.  Observations are stored already
// normalized; actions are the raw pre-scaling samples.
template <typename T>
struct PpoBatch {
  MatX<T> obs;
  MatX<T> actions;
  VecX<T> logp_old;
  VecX<T> adv;
  VecX<T> ret;
  VecX<T> value_old;

  Eigen::Index size() const { return obs.cols(); }
};

template <typename T>
struct PpoLossStats {
  T total = T(0);
  T policy = T(0);
  T value = T(0);
  T entropy = T(0);
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Forward loss, with optional analytic gradients (pass all three outputs or
// none).  Gradients accumulate the *mean*-loss derivative over the batch.
template <typename T>
PpoLossStats<T> ppo_loss(const Mlp<T>& policy, const VecX<T>& log_std, const Mlp<T>& value,
                         const PpoBatch<T>& mb, const PpoConfig& cfg,
                         MlpGrads<T>* g_policy = nullptr, VecX<T>* g_log_std = nullptr,
                         MlpGrads<T>* g_value = nullptr) {
  const Eigen::Index n = mb.size();
  const Eigen::Index act_dim = mb.actions.rows();
  if (n == 0) throw std::invalid_argument("empty minibatch");

  MlpCache<T> cache_p, cache_v;
  const MatX<T> mu = policy.forward(mb.obs, cache_p);
  const MatX<T> v_out = value.forward(mb.obs, cache_v);

  const VecX<T> inv_sigma = (-log_std.array()).exp().matrix();
  MatX<T> z = mb.actions - mu;
  z.array().colwise() *= inv_sigma.array();

  const T log_2pi = T(std::log(2.0 * M_PI));
  const T logp_const = -T(0.5) * T(act_dim) * log_2pi - log_std.sum();
  VecX<T> logp(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    logp(j) = logp_const - T(0.5) * z.col(j).squaredNorm();
  }

  PpoLossStats<T> out;
  const T clip_lo = T(1.0 - cfg.clip);
  const T clip_hi = T(1.0 + cfg.clip);
  VecX<T> ratio(n);
  VecX<T> grad_coef = VecX<T>::Zero(n);  // d(policy loss)/d logp_j
  T surr_sum = T(0);
  double kl_sum = 0.0;
  Eigen::Index clipped_count = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const T log_ratio = logp(j) - mb.logp_old(j);
    const T r = std::exp(log_ratio);
    ratio(j) = r;
    const T a = mb.adv(j);
    const T unclipped = r * a;
    const T clipped = std::clamp(r, clip_lo, clip_hi) * a;
    // Subgradient follows the branch the min selects, ties to the unclipped
    // branch; the clipped branch is constant in the parameters whenever it
    // is strictly smaller.
    if (unclipped <= clipped) {
      surr_sum += unclipped;
      grad_coef(j) = -r * a / T(n);
    } else {
      surr_sum += clipped;
    }
    if (std::abs(r - T(1)) > T(cfg.clip)) ++clipped_count;
    kl_sum += static_cast<double>(r) - 1.0 - static_cast<double>(log_ratio);
  }
  out.policy = -surr_sum / T(n);
  out.approx_kl = kl_sum / static_cast<double>(n);
  out.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(n);

  // Clipped value regression: pessimistic max of the clipped/unclipped error.
  const T vclip = T(cfg.value_clip);
  VecX<T> dv = VecX<T>::Zero(n);
  T vloss_sum = T(0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const T v = v_out(0, j);
    const T v_old = mb.value_old(j);
    const T v_cl = v_old + std::clamp(v - v_old, -vclip, vclip);
    const T e_un = v - mb.ret(j);
    const T e_cl = v_cl - mb.ret(j);
    if (e_un * e_un >= e_cl * e_cl) {
      vloss_sum += e_un * e_un;
      dv(j) = e_un / T(n);
    } else {
      vloss_sum += e_cl * e_cl;
      if (std::abs(v - v_old) < vclip) dv(j) = e_cl / T(n);
    }
  }
  out.value = T(0.5) * vloss_sum / T(n);

  // State-independent Gaussian: entropy depends on log_std only.
  out.entropy = log_std.sum() + T(0.5) * T(act_dim) * (T(1) + log_2pi);
  out.total = out.policy + T(cfg.value_coef) * out.value - T(cfg.entropy_coef) * out.entropy;

  if (g_policy != nullptr || g_log_std != nullptr || g_value != nullptr) {
    if (g_policy == nullptr || g_log_std == nullptr || g_value == nullptr)
      throw std::invalid_argument("pass all gradient outputs or none");

    // d logp / d mu_i = z_i / sigma_i, d logp / d log_std_i = z_i^2 - 1.
    MatX<T> d_mu = z;
    d_mu.array().colwise() *= inv_sigma.array();
    d_mu.array().rowwise() *= grad_coef.transpose().array();
    policy.backward(cache_p, d_mu, *g_policy);

    g_log_std->resize(act_dim);
    for (Eigen::Index i = 0; i < act_dim; ++i) {
      T s = T(0);
      for (Eigen::Index j = 0; j < n; ++j) {
        s += grad_coef(j) * (z(i, j) * z(i, j) - T(1));
      }
      (*g_log_std)(i) = s - T(cfg.entropy_coef);
    }

    MatX<T> d_v(1, n);
    d_v.row(0) = (T(cfg.value_coef) * dv).transpose();
    value.backward(cache_v, d_v, *g_value);
  }
  return out;
}

// Scales policy (including log_std) and value gradients to a shared norm cap,
// each treated as its own parameter group.
template <typename T>
double clip_gradients(MlpGrads<T>& g_net, VecX<T>* g_extra, double max_norm) {
  double sq = g_net.squaredNorm();
  if (g_extra != nullptr) sq += g_extra->template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T f = T(max_norm / norm);
    g_net.scale(f);
    if (g_extra != nullptr) *g_extra *= f;
  }
  return norm;
}

struct PpoUpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm_policy = 0.0;
  double grad_norm_value = 0.0;
  double lr = 0.0;
  int minibatches_done = 0;
  bool aborted = false;  // non-finite loss; parameters were rolled back
};

class PpoUpdater {
 public:
  PpoUpdater(PolicyBundle& bundle, const PpoConfig& cfg)
      : bundle_(&bundle),
        cfg_(cfg),
        lr_(cfg.lr_init),
        opt_policy_(bundle.policy, static_cast<float>(cfg.lr_init)),
        opt_value_(bundle.value, static_cast<float>(cfg.lr_init)),
        opt_log_std_(static_cast<int>(bundle.log_std.size()), static_cast<float>(cfg.lr_init)) {
    cfg_.validate();
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  Adam<float>& opt_policy() { return opt_policy_; }
  Adam<float>& opt_value() { return opt_value_; }
  AdamVec<float>& opt_log_std() { return opt_log_std_; }
  const Adam<float>& opt_policy() const { return opt_policy_; }
  const Adam<float>& opt_value() const { return opt_value_; }
  const AdamVec<float>& opt_log_std() const { return opt_log_std_; }

  // Runs the configured epoch/minibatch schedule over one rollout batch.
  // Advantages are normalized across the whole batch first.
  PpoUpdateStats update(PpoBatch<float>& batch, std::mt19937& rng) {
    const Eigen::Index n = batch.size();
    if (n < cfg_.minibatches) throw std::invalid_argument("batch smaller than minibatch count");

    double mean = 0.0, m2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x = static_cast<double>(batch.adv(j));
      const double d = x - mean;
      mean += d / static_cast<double>(j + 1);
      m2 += d * (x - mean);
    }
    const double stdev = std::sqrt(m2 / static_cast<double>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      batch.adv(j) = static_cast<float>((static_cast<double>(batch.adv(j)) - mean) /
                                        (stdev + 1e-8));
    }

    // Snapshot for rollback if an update step goes non-finite.
    const Mlp<float> policy_bak = bundle_->policy;
    const VecX<float> log_std_bak = bundle_->log_std;
    const Mlp<float> value_bak = bundle_->value;
    const Adam<float> opt_p_bak = opt_policy_;
    const Adam<float> opt_v_bak = opt_value_;
    const AdamVec<float> opt_ls_bak = opt_log_std_;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;

    MlpGrads<float> gp = bundle_->policy.zero_grads();
    MlpGrads<float> gv = bundle_->value.zero_grads();
    VecX<float> gls;

    PpoUpdateStats stats;
    PpoBatch<float> mb;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (int m = 0; m < cfg_.minibatches; ++m) {
        const Eigen::Index lo = n * m / cfg_.minibatches;
        const Eigen::Index hi = n * (m + 1) / cfg_.minibatches;
        gather(batch, order, lo, hi, &mb);

        gp.setZero();
        gv.setZero();
        const PpoLossStats<float> loss =
            ppo_loss(bundle_->policy, bundle_->log_std, bundle_->value, mb, cfg_, &gp, &gls, &gv);
        if (!std::isfinite(static_cast<double>(loss.total)) || !std::isfinite(loss.approx_kl)) {
          bundle_->policy = policy_bak;
          bundle_->log_std = log_std_bak;
          bundle_->value = value_bak;
          opt_policy_ = opt_p_bak;
          opt_value_ = opt_v_bak;
          opt_log_std_ = opt_ls_bak;
          stats.aborted = true;
          return stats;
        }

        // Adapt the step size from the pre-step KL of this minibatch.
        if (loss.approx_kl > 2.0 * cfg_.kl_target) {
          lr_ = std::max(cfg_.lr_min, lr_ / cfg_.lr_scale);
        } else if (loss.approx_kl < 0.5 * cfg_.kl_target) {
          lr_ = std::min(cfg_.lr_max, lr_ * cfg_.lr_scale);
        }

        stats.grad_norm_policy += clip_gradients(gp, &gls, cfg_.max_grad_norm);
        stats.grad_norm_value += clip_gradients(gv, static_cast<VecX<float>*>(nullptr),
                                                cfg_.max_grad_norm);

        opt_policy_.lr = opt_value_.lr = opt_log_std_.lr = static_cast<float>(lr_);
        opt_policy_.step(bundle_->policy, gp);
        opt_log_std_.step(bundle_->log_std, gls);
        opt_value_.step(bundle_->value, gv);

        stats.policy_loss += static_cast<double>(loss.policy);
        stats.value_loss += static_cast<double>(loss.value);
        stats.entropy += static_cast<double>(loss.entropy);
        stats.approx_kl += loss.approx_kl;
        stats.clip_fraction += loss.clip_fraction;
        ++stats.minibatches_done;
      }
    }
    const double k = std::max(1, stats.minibatches_done);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    stats.grad_norm_policy /= k;
    stats.grad_norm_value /= k;
    stats.lr = lr_;
    return stats;
  }

 private:
  static void gather(const PpoBatch<float>& batch, const std::vector<Eigen::Index>& order,
                     Eigen::Index lo, Eigen::Index hi, PpoBatch<float>* mb) {
    const Eigen::Index k = hi - lo;
    mb->obs.resize(batch.obs.rows(), k);
    mb->actions.resize(batch.actions.rows(), k);
    mb->logp_old.resize(k);
    mb->adv.resize(k);
    mb->ret.resize(k);
    mb->value_old.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = order[static_cast<std::size_t>(lo + j)];
      mb->obs.col(j) = batch.obs.col(src);
      mb->actions.col(j) = batch.actions.col(src);
      mb->logp_old(j) = batch.logp_old(src);
      mb->adv(j) = batch.adv(src);
      mb->ret(j) = batch.ret(src);
      mb->value_old(j) = batch.value_old(src);
    }
  }

  PolicyBundle* bundle_;
  PpoConfig cfg_;
  double lr_;
  Adam<float> opt_policy_;
  Adam<float> opt_value_;
  AdamVec<float> opt_log_std_;
};

}  // namespace dsam
