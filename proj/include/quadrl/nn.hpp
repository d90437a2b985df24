#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrl/rng.hpp"

namespace quadrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using Matrix = Eigen::MatrixXd;  // batches are row-per-sample
using Vector = Eigen::VectorXd;

enum class OutputHead { kLinear = 0, kTanh = 1 };

struct MlpGrads {
  std::vector<Matrix> dW;
  std::vector<Vector> db;

  void add(const MlpGrads& o) {
    for (size_t l = 0; l < dW.size(); ++l) {
      dW[l] += o.dW[l];
      db[l] += o.db[l];
    }
  }

  double global_norm() const {
    double sq = 0.0;
    for (size_t l = 0; l < dW.size(); ++l) {
      sq += dW[l].squaredNorm() + db[l].squaredNorm();
    }
    return std::sqrt(sq);
  }

  void scale(double s) {
    for (size_t l = 0; l < dW.size(); ++l) {
      dW[l] *= s;
      db[l] *= s;
    }
  }
};

// If the combined L2 norm exceeds max_norm, scales all gradients down to it.
// Returns the pre-clip norm.
inline double clip_global_norm(MlpGrads& g, double max_norm) {
  double n = g.global_norm();
  if (n > max_norm) {
    g.scale(max_norm / n);
  }
  return n;
}

struct MlpCache {
  Matrix input;
  std::vector<Matrix> act;  // post-activation per layer, last = output
};

// Fully connected network with ReLU hidden layers and a linear or tanh
// output head. All math is double precision; forward/backward operate on
// row-major batches so the heavy lifting is plain GEMM.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<int> sizes, OutputHead head)
      : sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) {
      throw std::invalid_argument("Mlp needs at least input and output sizes");
    }
    int n = num_layers();
    W_.resize(n);
    b_.resize(n);
    for (int l = 0; l < n; ++l) {
      W_[l] = Matrix::Zero(sizes_[l + 1], sizes_[l]);
      b_[l] = Vector::Zero(sizes_[l + 1]);
    }
    reset_adam();
  }

  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  OutputHead head() const { return head_; }

  std::vector<Matrix>& weights() { return W_; }
  std::vector<Vector>& biases() { return b_; }
  const std::vector<Matrix>& weights() const { return W_; }
  const std::vector<Vector>& biases() const { return b_; }
  long adam_step() const { return adam_step_; }

  // Uniform init in +-1/sqrt(fan_in), biases zero.
  void init(Rng& rng) {
    for (int l = 0; l < num_layers(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      for (Eigen::Index i = 0; i < W_[l].rows(); ++i) {
        for (Eigen::Index j = 0; j < W_[l].cols(); ++j) {
          W_[l](i, j) = rng.uniform(-bound, bound);
        }
      }
      b_[l].setZero();
    }
    reset_adam();
  }

  Matrix forward(const Matrix& X, MlpCache* cache = nullptr) const {
    if (X.cols() != input_dim()) {
      throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    }
    if (cache) {
      cache->input = X;
      cache->act.resize(num_layers());
    }
    Matrix A = X;
    for (int l = 0; l < num_layers(); ++l) {
      Matrix Z = A * W_[l].transpose();
      Z.rowwise() += b_[l].transpose();
      if (l + 1 < num_layers()) {
        A = Z.cwiseMax(0.0);  // ReLU
      } else if (head_ == OutputHead::kTanh) {
        A = Z.array().tanh().matrix();
      } else {
        A = std::move(Z);
      }
      if (cache) {
        cache->act[l] = A;
      }
    }
    return A;
  }

  Vector forward1(const Vector& x) const {
    return forward(x.transpose()).row(0).transpose();
  }

  // Reverse-mode gradients for a batch. dY is the loss gradient w.r.t. the
  // network output; the input gradient is written to dX when requested.
  MlpGrads backward(const MlpCache& cache, const Matrix& dY,
                    Matrix* dX = nullptr) const {
    int n = num_layers();
    MlpGrads g;
    g.dW.resize(n);
    g.db.resize(n);

    Matrix delta;  // gradient w.r.t. pre-activation of layer l
    const Matrix& out = cache.act[n - 1];
    if (head_ == OutputHead::kTanh) {
      delta = dY.cwiseProduct(Matrix::Ones(out.rows(), out.cols()) -
                              out.cwiseProduct(out));
    } else {
      delta = dY;
    }
    for (int l = n - 1; l >= 0; --l) {
      const Matrix& prev = l == 0 ? cache.input : cache.act[l - 1];
      g.dW[l].noalias() = delta.transpose() * prev;
      g.db[l] = delta.colwise().sum().transpose();
      if (l > 0) {
        Matrix dA = delta * W_[l];
        // ReLU mask from the cached post-activation
        delta = dA.cwiseProduct(
            (cache.act[l - 1].array() > 0.0).cast<double>().matrix());
      } else if (dX) {
        dX->noalias() = delta * W_[0];
      }
    }
    return g;
  }

  // One AdamW step: bias-corrected moments, decoupled weight decay applied
  // directly to the parameters.
  void adamw_step(const MlpGrads& g, double lr, double beta1, double beta2,
                  double eps, double weight_decay) {
    adam_step_ += 1;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step_));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step_));
    for (int l = 0; l < num_layers(); ++l) {
      mW_[l] = beta1 * mW_[l] + (1.0 - beta1) * g.dW[l];
      vW_[l] = beta2 * vW_[l] + (1.0 - beta2) * g.dW[l].cwiseProduct(g.dW[l]);
      mb_[l] = beta1 * mb_[l] + (1.0 - beta1) * g.db[l];
      vb_[l] = beta2 * vb_[l] + (1.0 - beta2) * g.db[l].cwiseProduct(g.db[l]);
      W_[l] -= lr * ((mW_[l] / c1).cwiseQuotient(
                         ((vW_[l] / c2).cwiseSqrt().array() + eps).matrix()) +
                     weight_decay * W_[l]);
      b_[l] -= lr * ((mb_[l] / c1).cwiseQuotient(
                         ((vb_[l] / c2).cwiseSqrt().array() + eps).matrix()) +
                     weight_decay * b_[l]);
    }
  }

  void reset_adam() {
    int n = num_layers();
    mW_.resize(n);
    vW_.resize(n);
    mb_.resize(n);
    vb_.resize(n);
    for (int l = 0; l < n; ++l) {
      mW_[l] = Matrix::Zero(W_[l].rows(), W_[l].cols());
      vW_[l] = Matrix::Zero(W_[l].rows(), W_[l].cols());
      mb_[l] = Vector::Zero(b_[l].size());
      vb_[l] = Vector::Zero(b_[l].size());
    }
    adam_step_ = 0;
  }

  // --- checkpoint serialization --------------------------------------------
  // Byte layout (all integers and floats little-endian):
  //   bytes 0..7    magic "QRLNET1\0"
  //   u32           format version (1)
  //   u32           output head tag (0 = linear, 1 = tanh)
  //   u32           L, number of weight layers
  //   u32 x (L+1)   layer widths (input, hidden..., output)
  //   u64           optimizer step counter
  //   then per layer l = 0..L-1, as f64 arrays:
  //     W[l] row-major (out x in), b[l] (out),
  //     Adam mW[l], mb[l], vW[l], vb[l] with matching shapes.
  void save(std::ostream& os) const {
    os.write(kMagic, 8);
    write_u32(os, 1);
    write_u32(os, static_cast<uint32_t>(head_));
    write_u32(os, static_cast<uint32_t>(num_layers()));
    for (int s : sizes_) {
      write_u32(os, static_cast<uint32_t>(s));
    }
    uint64_t step = static_cast<uint64_t>(adam_step_);
    os.write(reinterpret_cast<const char*>(&step), 8);
    for (int l = 0; l < num_layers(); ++l) {
      write_matrix(os, W_[l]);
      write_vector(os, b_[l]);
      write_matrix(os, mW_[l]);
      write_vector(os, mb_[l]);
      write_matrix(os, vW_[l]);
      write_vector(os, vb_[l]);
    }
    if (!os) {
      throw std::runtime_error("Mlp::save: write failed");
    }
  }

  static Mlp load(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kMagic, 8)) {
      throw std::runtime_error("Mlp::load: bad magic");
    }
    uint32_t version = read_u32(is);
    if (version != 1) {
      throw std::runtime_error("Mlp::load: unsupported version");
    }
    uint32_t head = read_u32(is);
    uint32_t n_layers = read_u32(is);
    std::vector<int> sizes(n_layers + 1);
    for (auto& s : sizes) {
      s = static_cast<int>(read_u32(is));
    }
    Mlp net(sizes, static_cast<OutputHead>(head));
    uint64_t step = 0;
    is.read(reinterpret_cast<char*>(&step), 8);
    net.adam_step_ = static_cast<long>(step);
    for (int l = 0; l < net.num_layers(); ++l) {
      read_matrix(is, net.W_[l]);
      read_vector(is, net.b_[l]);
      read_matrix(is, net.mW_[l]);
      read_vector(is, net.mb_[l]);
      read_matrix(is, net.vW_[l]);
      read_vector(is, net.vb_[l]);
    }
    if (!is) {
      throw std::runtime_error("Mlp::load: truncated file");
    }
    return net;
  }

  void save_file(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
      throw std::runtime_error("cannot open for write: " + path.string());
    }
    save(os);
  }

  static Mlp load_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
      throw std::runtime_error("cannot open checkpoint: " + path.string());
    }
    return load(is);
  }

 private:
  static constexpr const char kMagic[9] = "QRLNET1";

  static void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  static uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  static void write_matrix(std::ostream& os, const Matrix& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        double v = M(i, j);
        os.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  }
  static void write_vector(std::ostream& os, const Vector& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * 8));
  }
  static void read_matrix(std::istream& is, Matrix& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        double v;
        is.read(reinterpret_cast<char*>(&v), 8);
        M(i, j) = v;
      }
    }
  }
  static void read_vector(std::istream& is, Vector& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * 8));
  }

  std::vector<int> sizes_;
  OutputHead head_ = OutputHead::kLinear;
  std::vector<Matrix> W_;
  std::vector<Vector> b_;
  std::vector<Matrix> mW_, vW_;
  std::vector<Vector> mb_, vb_;
  long adam_step_ = 0;
};

// Polyak averaging of the target parameters: theta' <- rho theta + (1-rho) theta'.
inline void soft_update(Mlp& target, const Mlp& online, double rho) {
  for (int l = 0; l < target.num_layers(); ++l) {
    target.weights()[l] = rho * online.weights()[l] + (1.0 - rho) * target.weights()[l];
    target.biases()[l] = rho * online.biases()[l] + (1.0 - rho) * target.biases()[l];
  }
}

// Cosine annealing with warm restarts. The rate starts each cycle at
// base_lr, reaches min_lr at the cycle end, and restarts.
struct SgdrSchedule {
  double base_lr = 1e-4;
  double min_lr = 1e-6;
  long cycle_steps = 500000;
};

inline double sgdr_lr(const SgdrSchedule& s, long t) {
  if (t < 0) {
    throw std::invalid_argument("sgdr_lr: negative step");
  }
  long tc = s.cycle_steps > 0 ? t % s.cycle_steps : 0;
  double frac = s.cycle_steps > 0
                    ? static_cast<double>(tc) / static_cast<double>(s.cycle_steps)
                    : 0.0;
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(M_PI * frac));
}

}  // namespace quadrl
