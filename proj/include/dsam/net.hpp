#pragma once

// Minimal dense-network kit: ELU MLPs with cached forward / explicit backward,
// orthogonal initialization, and Adam. Templated on the scalar so the same
// code runs float in production and double under finite-difference checks.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace dsam {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
inline T elu(T x) {
  return x > T(0) ? x : T(std::expm1(static_cast<double>(x)));
}

template <typename T>
inline T elu_grad(T pre) {
  return pre > T(0) ? T(1) : T(std::exp(static_cast<double>(pre)));
}

// Random matrix with orthonormal rows (rows <= cols) or columns (rows >= cols),
// scaled by `gain`. Gaussian draws happen in a fixed row-major order so the
// construction is reproducible across configurations.
template <typename T>
MatX<T> orthogonal_matrix(int rows, int cols, T gain, std::mt19937& rng) {
  const int r = std::max(rows, cols), c = std::min(rows, cols);
  Eigen::MatrixXd A(r, c);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) A(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (int j = 0; j < c; ++j)
    if (d[j] < 0.0) Q.col(j) = -Q.col(j);
  Eigen::MatrixXd M = (rows >= cols) ? Q : Eigen::MatrixXd(Q.transpose());
  return (static_cast<double>(gain) * M).template cast<T>();
}

template <typename T>
struct MlpGrads {
  std::vector<MatX<T>> W;
  std::vector<VecX<T>> b;

  void setZero() {
    for (auto& w : W) w.setZero();
    for (auto& v : b) v.setZero();
  }
  double squaredNorm() const {
    double s = 0.0;
    for (const auto& w : W) s += static_cast<double>(w.template cast<double>().squaredNorm());
    for (const auto& v : b) s += static_cast<double>(v.template cast<double>().squaredNorm());
    return s;
  }
  void scale(T f) {
    for (auto& w : W) w *= f;
    for (auto& v : b) v *= f;
  }
};

template <typename T>
struct MlpCache {
  MatX<T> input;
  std::vector<MatX<T>> pre;  // pre-activation of every layer
};

// Fully connected net: ELU on hidden layers, identity output.
template <typename T>
class Mlp {
 public:
  std::vector<MatX<T>> W;  // W[l] maps sizes[l] -> sizes[l+1]
  std::vector<VecX<T>> b;

  Mlp() = default;

  Mlp(std::vector<int> sizes, std::mt19937& rng, T hidden_gain, T out_gain) : sizes_(sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least two layer sizes");
    const int L = static_cast<int>(sizes.size()) - 1;
    for (int l = 0; l < L; ++l) {
      const T gain = (l == L - 1) ? out_gain : hidden_gain;
      W.push_back(orthogonal_matrix<T>(sizes[l + 1], sizes[l], gain, rng));
      b.push_back(VecX<T>::Zero(sizes[l + 1]));
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }

  // Rebuilds the size list after weights were loaded from storage.
  void set_sizes_from_weights() {
    sizes_.clear();
    if (W.empty()) return;
    sizes_.push_back(static_cast<int>(W.front().cols()));
    for (const auto& w : W) sizes_.push_back(static_cast<int>(w.rows()));
  }

  // X holds one sample per column.
  MatX<T> forward(const MatX<T>& X) const {
    MatX<T> a = X;
    const int L = static_cast<int>(W.size());
    for (int l = 0; l < L; ++l) {
      MatX<T> h = (W[l] * a).colwise() + b[l];
      if (l < L - 1) h = h.unaryExpr([](T v) { return elu(v); });
      a = std::move(h);
    }
    return a;
  }

  MatX<T> forward(const MatX<T>& X, MlpCache<T>& cache) const {
    cache.input = X;
    cache.pre.clear();
    MatX<T> a = X;
    const int L = static_cast<int>(W.size());
    for (int l = 0; l < L; ++l) {
      MatX<T> h = (W[l] * a).colwise() + b[l];
      cache.pre.push_back(h);
      if (l < L - 1) h = h.unaryExpr([](T v) { return elu(v); });
      a = std::move(h);
    }
    return a;
  }

  MlpGrads<T> zero_grads() const {
    MlpGrads<T> g;
    for (const auto& w : W) g.W.push_back(MatX<T>::Zero(w.rows(), w.cols()));
    for (const auto& v : b) g.b.push_back(VecX<T>::Zero(v.size()));
    return g;
  }

  // Accumulates parameter gradients for upstream dY (same shape as the
  // output). Gradients sum over the batch; divide dY beforehand for means.
  void backward(const MlpCache<T>& cache, const MatX<T>& dY, MlpGrads<T>& g) const {
    const int L = static_cast<int>(W.size());
    MatX<T> delta = dY;
    for (int l = L - 1; l >= 0; --l) {
      if (l < L - 1)
        delta = delta.cwiseProduct(cache.pre[l].unaryExpr([](T v) { return elu_grad(v); }));
      const MatX<T> a_prev =
          (l == 0) ? cache.input
                   : MatX<T>(cache.pre[l - 1].unaryExpr([](T v) { return elu(v); }));
      g.W[l].noalias() += delta * a_prev.transpose();
      g.b[l].noalias() += delta.rowwise().sum();
      if (l > 0) delta = MatX<T>(W[l].transpose() * delta);
    }
  }

 private:
  std::vector<int> sizes_;
};

// Adam over an Mlp's parameters. Moments are public so checkpoints can carry
// them; `lr` may be adjusted between steps.
template <typename T>
class Adam {
 public:
  T lr{};
  T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
  std::int64_t t = 0;
  std::vector<MatX<T>> mW, vW;
  std::vector<VecX<T>> mb, vb;

  Adam() = default;
  Adam(const Mlp<T>& net, T lr_in) : lr(lr_in) {
    for (const auto& w : net.W) {
      mW.push_back(MatX<T>::Zero(w.rows(), w.cols()));
      vW.push_back(MatX<T>::Zero(w.rows(), w.cols()));
    }
    for (const auto& v : net.b) {
      mb.push_back(VecX<T>::Zero(v.size()));
      vb.push_back(VecX<T>::Zero(v.size()));
    }
  }

  void step(Mlp<T>& net, const MlpGrads<T>& g) {
    ++t;
    const T c1 = T(1) - T(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
    const T c2 = T(1) - T(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
    auto upd = [&](auto& p, auto& m, auto& v, const auto& grad) {
      m = beta1 * m + (T(1) - beta1) * grad;
      v = beta2 * v + (T(1) - beta2) * grad.cwiseProduct(grad);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (size_t l = 0; l < net.W.size(); ++l) upd(net.W[l], mW[l], vW[l], g.W[l]);
    for (size_t l = 0; l < net.b.size(); ++l) upd(net.b[l], mb[l], vb[l], g.b[l]);
  }
};

// Adam for a bare parameter vector (the state-independent log std).
template <typename T>
class AdamVec {
 public:
  T lr{};
  T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
  std::int64_t t = 0;
  VecX<T> m, v;

  AdamVec() = default;
  AdamVec(int dim, T lr_in) : lr(lr_in), m(VecX<T>::Zero(dim)), v(VecX<T>::Zero(dim)) {}

  void step(VecX<T>& p, const VecX<T>& g) {
    ++t;
    const T c1 = T(1) - T(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
    const T c2 = T(1) - T(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
    m = beta1 * m + (T(1) - beta1) * g;
    v = beta2 * v + (T(1) - beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace dsam
