#include "dsam/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "dsam/arrayfile.hpp"
#include "dsam/dynamics.hpp"

namespace dsam {

Eigen::VectorXd build_observation(const SystemState& s, const Pose& goal, const ModelParams& m,
                                  const ObsConfig& cfg) {
  Eigen::VectorXd o(cfg.dim());
  int k = 0;
  const Matrix3d Rt = s.R_wb.transpose();
  o.segment<3>(k) = Rt * s.v_b;
  k += 3;
  if (cfg.body_rate) {
    o.segment<3>(k) = s.omega_b;
    k += 3;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) o[k++] = s.R_wb(i, j);
  if (cfg.joint_pos) {
    o[k++] = s.theta[0] / (M_PI / 2.0);
    o[k++] = s.theta[1] / (M_PI / 2.0);
  }
  if (cfg.goal_in_body) {
    o.segment<3>(k) = Rt * (goal.position - s.p_b);
    k += 3;
  }
  const Pose ee = forward_kinematics(s, m);
  const Pose rel = pose_in_frame(goal, ee);
  o.segment<3>(k) = rel.position;
  k += 3;
  o.segment<6>(k) = rotmat_6d_encode(quat_to_rotmat(rel.orientation));
  k += 6;
  if (k != cfg.dim()) throw std::logic_error("observation layout does not match configured width");
  return o;
}

OuterCommand scale_actions(const Eigen::Matrix<double, kActionDim, 1>& raw,
                           const ActionScales& sc) {
  auto clamp = [&](double v) { return std::clamp(v, -sc.raw_clamp, sc.raw_clamp); };
  OuterCommand cmd;
  for (int i = 0; i < 3; ++i) cmd.accel_des[i] = clamp(raw[i]) * sc.accel;
  for (int i = 0; i < 3; ++i) cmd.bodyrate_ff[i] = clamp(raw[3 + i]) * sc.rate;
  cmd.yaw_ref = wrap_angle(raw[6] * M_PI);
  cmd.joint_ref[0] = clamp(raw[7]) * sc.joint;
  cmd.joint_ref[1] = clamp(raw[8]) * sc.joint;
  return cmd;
}

void RunningNorm::update(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("running norm: dimension mismatch");
  count_ += 1.0;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / count_;
  m2_ += delta.cwiseProduct(x - mean_);
}

void RunningNorm::restore(double count, Eigen::VectorXd mean, Eigen::VectorXd m2) {
  count_ = count;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
}

RunningNorm::Snapshot RunningNorm::snapshot() const {
  Snapshot s;
  s.mean = mean_;
  if (count_ < 2.0)
    s.var = Eigen::VectorXd::Ones(mean_.size());
  else
    s.var = m2_ / count_;
  return s;
}

Eigen::VectorXd RunningNorm::normalize(const Eigen::VectorXd& x, const Snapshot& s) {
  return ((x - s.mean).array() / (s.var.array() + 1e-8).sqrt()).cwiseMax(-10.0).cwiseMin(10.0);
}

double gaussian_log_prob(const Eigen::VectorXd& a, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  double lp = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + 0.5 * log_std.size() * (1.0 + std::log(2.0 * M_PI));
}

Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                std::mt19937& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd a(mean.size());
  for (int i = 0; i < mean.size(); ++i) a[i] = mean[i] + std::exp(log_std[i]) * nd(rng);
  return a;
}

PolicyBundle PolicyBundle::make(const ObsConfig& cfg, unsigned seed) {
  std::mt19937 rng(seed);
  PolicyBundle b;
  b.obs = cfg;
  const int in = cfg.dim();
  b.policy = Mlp<float>({in, 512, 256, 128, kActionDim}, rng, std::sqrt(2.0f), 0.01f);
  b.log_std = VecX<float>::Zero(kActionDim);
  b.value = Mlp<float>({in, 512, 256, 128, 1}, rng, std::sqrt(2.0f), 1.0f);
  b.norm = RunningNorm(in);
  return b;
}

namespace {

std::vector<float> flatten_rowmajor(const MatX<float>& M) {
  std::vector<float> out(static_cast<size_t>(M.size()));
  for (long i = 0; i < M.rows(); ++i)
    for (long j = 0; j < M.cols(); ++j) out[static_cast<size_t>(i * M.cols() + j)] = M(i, j);
  return out;
}

MatX<float> unflatten_rowmajor(const std::vector<float>& v, long rows, long cols) {
  MatX<float> M(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) M(i, j) = v[static_cast<size_t>(i * cols + j)];
  return M;
}

}  // namespace

void put_net_arrays(ArrayFile& f, const std::string& prefix, const Mlp<float>& net) {
  for (size_t l = 0; l < net.W.size(); ++l) {
    const auto& W = net.W[l];
    f.put_f32(prefix + "_W" + std::to_string(l), flatten_rowmajor(W), {W.rows(), W.cols()});
    const auto& b = net.b[l];
    f.put_f32(prefix + "_b" + std::to_string(l),
              std::vector<float>(b.data(), b.data() + b.size()), {b.size()});
  }
}

Mlp<float> get_net_arrays(const ArrayFile& f, const std::string& prefix) {
  Mlp<float> net;
  for (int l = 0;; ++l) {
    const std::string wname = prefix + "_W" + std::to_string(l);
    if (!f.has(wname)) break;
    const ArrayEntry& we = f.get(wname);
    if (we.shape.size() != 2) throw std::runtime_error("weight file: bad shape for " + wname);
    net.W.push_back(unflatten_rowmajor(we.f32, we.shape[0], we.shape[1]));
    const ArrayEntry& be = f.get(prefix + "_b" + std::to_string(l));
    net.b.push_back(Eigen::Map<const VecX<float>>(be.f32.data(), be.shape[0]));
  }
  if (net.W.empty()) throw std::runtime_error("weight file: no layers under prefix " + prefix);
  net.set_sizes_from_weights();
  return net;
}

void policy_to_arrays(const PolicyBundle& b, ArrayFile& f) {
  f.meta["kind"] = "policy";
  f.meta["action_dim"] = kActionDim;
  f.meta["obs"] = {{"body_rate", b.obs.body_rate},
                   {"joint_pos", b.obs.joint_pos},
                   {"goal_in_body", b.obs.goal_in_body}};
  f.meta["scales"] = {{"raw_clamp", b.scales.raw_clamp},
                      {"accel", b.scales.accel},
                      {"rate", b.scales.rate},
                      {"joint", b.scales.joint}};
  f.meta["norm_count"] = b.norm.count();
  const Eigen::VectorXd& mean = b.norm.mean();
  const Eigen::VectorXd& m2 = b.norm.m2();
  f.put_f64("norm_mean", std::vector<double>(mean.data(), mean.data() + mean.size()),
            {mean.size()});
  f.put_f64("norm_m2", std::vector<double>(m2.data(), m2.data() + m2.size()), {m2.size()});
  put_net_arrays(f, "policy", b.policy);
  f.put_f32("log_std", std::vector<float>(b.log_std.data(), b.log_std.data() + b.log_std.size()),
            {b.log_std.size()});
  put_net_arrays(f, "value", b.value);
}

void save_policy(const std::string& path, const PolicyBundle& b) {
  ArrayFile f;
  policy_to_arrays(b, f);
  f.write(path);
}

PolicyBundle policy_from_arrays(const ArrayFile& f) {
  PolicyBundle b;
  const auto& obs = f.meta.at("obs");
  b.obs.body_rate = obs.at("body_rate").get<bool>();
  b.obs.joint_pos = obs.at("joint_pos").get<bool>();
  b.obs.goal_in_body = obs.at("goal_in_body").get<bool>();
  const auto& sc = f.meta.at("scales");
  b.scales.raw_clamp = sc.at("raw_clamp").get<double>();
  b.scales.accel = sc.at("accel").get<double>();
  b.scales.rate = sc.at("rate").get<double>();
  b.scales.joint = sc.at("joint").get<double>();

  const ArrayEntry& mean = f.get("norm_mean");
  const ArrayEntry& m2 = f.get("norm_m2");
  b.norm = RunningNorm(static_cast<int>(mean.shape[0]));
  b.norm.restore(f.meta.value("norm_count", 0.0),
                 Eigen::Map<const Eigen::VectorXd>(mean.f64.data(), mean.shape[0]),
                 Eigen::Map<const Eigen::VectorXd>(m2.f64.data(), m2.shape[0]));

  b.policy = get_net_arrays(f, "policy");
  const ArrayEntry& ls = f.get("log_std");
  b.log_std = Eigen::Map<const VecX<float>>(ls.f32.data(), ls.shape[0]);
  b.value = get_net_arrays(f, "value");

  if (b.policy.input_size() != b.obs.dim() || b.value.input_size() != b.obs.dim())
    throw std::runtime_error("weight file: layer widths disagree with observation flags");
  if (b.policy.output_size() != kActionDim || b.log_std.size() != kActionDim)
    throw std::runtime_error("weight file: action head width mismatch");
  return b;
}

PolicyBundle load_policy(const std::string& path) {
  const ArrayFile f = ArrayFile::read(path);
  if (f.meta.value("kind", "") != "policy")
    throw std::runtime_error("weight file: not a policy file: " + path);
  return policy_from_arrays(f);
}

}  // namespace dsam
