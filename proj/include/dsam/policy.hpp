#pragma once

// Policy runtime: observation assembly, running normalization, action scaling
// into inner-loop commands, Gaussian head math, and the weight file.

#include <Eigen/Dense>
#include <random>
#include <string>

#include "dsam/arrayfile.hpp"
#include "dsam/inner_loop.hpp"
#include "dsam/model.hpp"
#include "dsam/net.hpp"
#include "dsam/se3.hpp"

namespace dsam {

constexpr int kActionDim = 9;  // accel xyz, body rates xyz, yaw, two joints

struct ActionScales {
  double raw_clamp = 2.0;      // raw network outputs are clamped to +-raw_clamp
  double accel = 2.5;          // m/s^2 per raw unit  -> +-5 m/s^2
  double rate = 1.5;           // rad/s per raw unit  -> +-3 rad/s
  double joint = M_PI / 4.0;   // rad per raw unit    -> +-pi/2
  // Yaw is periodic: raw * pi wrapped into (-pi, pi], never clamped.
};

// Which observation blocks are present; widths shrink when blocks drop out.
struct ObsConfig {
  bool body_rate = true;     // 3
  bool joint_pos = true;     // 2
  bool goal_in_body = true;  // 3

  int dim() const {
    return 29 - (body_rate ? 0 : 3) - (joint_pos ? 0 : 2) - (goal_in_body ? 0 : 3);
  }
};

// Observation layout, in order (blocks dropped per config):
//   linear velocity in body frame (3), body rates (3), attitude as the
//   row-major rotation matrix (9), joint angles / (pi/2) (2), goal position in
//   the body frame (3), goal pose in the gripper frame: position (3) and the
//   first-two-columns attitude encoding (6).
Eigen::VectorXd build_observation(const SystemState& s, const Pose& goal, const ModelParams& m,
                                  const ObsConfig& cfg);

// Maps clamped raw actions to physical inner-loop commands.
OuterCommand scale_actions(const Eigen::Matrix<double, kActionDim, 1>& raw,
                           const ActionScales& sc);

// Streaming mean/variance (Welford, double accumulators). Training updates it
// every step; consumers normalize against an explicit frozen snapshot.
class RunningNorm {
 public:
  struct Snapshot {
    Eigen::VectorXd mean, var;
  };

  RunningNorm() = default;
  explicit RunningNorm(int dim)
      : count_(0.0), mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}

  void update(const Eigen::VectorXd& x);
  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& m2() const { return m2_; }
  void restore(double count, Eigen::VectorXd mean, Eigen::VectorXd m2);

  // Population statistics; unit variance until two samples exist.
  Snapshot snapshot() const;

  static Eigen::VectorXd normalize(const Eigen::VectorXd& x, const Snapshot& s);

 private:
  double count_ = 0.0;
  Eigen::VectorXd mean_, m2_;
};

// Diagonal Gaussian head over raw actions.
double gaussian_log_prob(const Eigen::VectorXd& a, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);
double gaussian_entropy(const Eigen::VectorXd& log_std);
// Draws the components in index order so random streams stay aligned.
Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                std::mt19937& rng);

// Everything needed to run (and keep training) a policy.
struct PolicyBundle {
  ObsConfig obs;
  ActionScales scales;
  Mlp<float> policy;       // obs.dim() -> 512 -> 256 -> 128 -> kActionDim
  VecX<float> log_std;     // state independent, init 0
  Mlp<float> value;        // obs.dim() -> 512 -> 256 -> 128 -> 1
  RunningNorm norm;        // running obs statistics (frozen into snapshots)

  static PolicyBundle make(const ObsConfig& cfg, unsigned seed);
};

// Weight file: JSON manifest line + little-endian arrays. Layout and flags are
// self-describing; loading restores the exact float parameters.
void save_policy(const std::string& path, const PolicyBundle& b);
PolicyBundle load_policy(const std::string& path);

// Array-level pieces of the weight format, shared with training checkpoints
// (which add optimizer state on top of the same layout).
void policy_to_arrays(const PolicyBundle& b, ArrayFile& f);
PolicyBundle policy_from_arrays(const ArrayFile& f);
void put_net_arrays(ArrayFile& f, const std::string& prefix, const Mlp<float>& net);
Mlp<float> get_net_arrays(const ArrayFile& f, const std::string& prefix);

}  // namespace dsam
