#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "quadrl/env.hpp"
#include "quadrl/nn.hpp"
#include "quadrl/rng.hpp"

namespace quadrl {

// One replay record. Observations are stored for every framing so a single
// buffer layout serves SARL, DTDE and CTDE; each learner reads only its own
// fields.
struct Transition {
  Vector s, o1, o2;  // normalized observations
  Vector a;          // joint normalized action
  double r = 0.0, r1 = 0.0, r2 = 0.0;
  Vector s_next, o1_next, o2_next;
  bool done = false;  // terminal for bootstrapping (time-limit cuts excluded)
};

struct TransitionDims {
  int state = 0;
  int o1 = 0;
  int o2 = 0;
  int action = 0;
};

struct Batch {
  Matrix s, o1, o2, a, s_next, o1_next, o2_next;
  Vector r, r1, r2, done;

  void resize(const TransitionDims& d, int n) {
    s.resize(n, d.state);
    o1.resize(n, d.o1);
    o2.resize(n, d.o2);
    a.resize(n, d.action);
    s_next.resize(n, d.state);
    o1_next.resize(n, d.o1);
    o2_next.resize(n, d.o2);
    r.resize(n);
    r1.resize(n);
    r2.resize(n);
    done.resize(n);
  }
};

// Uniform-sampling FIFO replay buffer. Storage grows on demand up to the
// configured capacity, then wraps.
class ReplayBuffer {
 public:
  ReplayBuffer(TransitionDims dims, size_t capacity)
      : dims_(dims), capacity_(capacity) {}

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  const TransitionDims& dims() const { return dims_; }

  void push(const Transition& t) {
    if (t.s.size() != dims_.state || t.o1.size() != dims_.o1 ||
        t.o2.size() != dims_.o2 || t.a.size() != dims_.action) {
      throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
    }
    size_t row = head_;
    if (size_ < capacity_) {
      grow_to(size_ + 1);
    }
    copy_row(s_, row, t.s, dims_.state);
    copy_row(o1_, row, t.o1, dims_.o1);
    copy_row(o2_, row, t.o2, dims_.o2);
    copy_row(a_, row, t.a, dims_.action);
    copy_row(s_next_, row, t.s_next, dims_.state);
    copy_row(o1_next_, row, t.o1_next, dims_.o1);
    copy_row(o2_next_, row, t.o2_next, dims_.o2);
    scalars_[3 * row] = t.r;
    scalars_[3 * row + 1] = t.r1;
    scalars_[3 * row + 2] = t.r2;
    done_[row] = t.done ? 1.0 : 0.0;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  // Uniform sampling with replacement.
  void sample(Rng& rng, int batch, Batch* out) const {
    if (size_ < static_cast<size_t>(batch)) {
      throw std::runtime_error("ReplayBuffer::sample: not enough transitions");
    }
    out->resize(dims_, batch);
    for (int i = 0; i < batch; ++i) {
      size_t k = rng.integer(size_);
      load_row(s_, k, out->s, i, dims_.state);
      load_row(o1_, k, out->o1, i, dims_.o1);
      load_row(o2_, k, out->o2, i, dims_.o2);
      load_row(a_, k, out->a, i, dims_.action);
      load_row(s_next_, k, out->s_next, i, dims_.state);
      load_row(o1_next_, k, out->o1_next, i, dims_.o1);
      load_row(o2_next_, k, out->o2_next, i, dims_.o2);
      out->r(i) = scalars_[3 * k];
      out->r1(i) = scalars_[3 * k + 1];
      out->r2(i) = scalars_[3 * k + 2];
      out->done(i) = done_[k];
    }
  }

 private:
  void grow_to(size_t n) {
    s_.resize(n * dims_.state);
    o1_.resize(n * dims_.o1);
    o2_.resize(n * dims_.o2);
    a_.resize(n * dims_.action);
    s_next_.resize(n * dims_.state);
    o1_next_.resize(n * dims_.o1);
    o2_next_.resize(n * dims_.o2);
    scalars_.resize(n * 3);
    done_.resize(n);
  }

  static void copy_row(std::vector<double>& dst, size_t row, const Vector& v,
                       int dim) {
    for (int j = 0; j < dim; ++j) {
      dst[row * dim + j] = v(j);
    }
  }

  static void load_row(const std::vector<double>& src, size_t row, Matrix& dst,
                       int out_row, int dim) {
    for (int j = 0; j < dim; ++j) {
      dst(out_row, j) = src[row * dim + j];
    }
  }

  TransitionDims dims_;
  size_t capacity_;
  size_t size_ = 0;
  size_t head_ = 0;
  std::vector<double> s_, o1_, o2_, a_, s_next_, o1_next_, o2_next_;
  std::vector<double> scalars_;  // (r, r1, r2) triples
  std::vector<double> done_;
};

struct NoiseSchedule {
  double expl_start = 0.3;
  double expl_end = 0.05;
  double decay_fraction = 0.8;  // of total steps
  double target_sigma = 0.2;
  double target_clip = 0.5;

  // Linear decay over the first decay_fraction of the run, then constant.
  double exploration_sigma(long t, long total_steps) const {
    double horizon = decay_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0) {
      return expl_end;
    }
    double frac = std::min(1.0, static_cast<double>(t) / horizon);
    return expl_start + frac * (expl_end - expl_start);
  }
};

struct TrainHp {
  double gamma = 0.99;
  int batch_size = 256;
  int policy_delay = 3;
  double rho = 0.005;  // target smoothing coefficient
  double max_grad_norm = 100.0;
  double lambda_t = 0.1;
  double lambda_s = 0.1;
  double lambda_m = 0.1;
  double sigma_s = 0.05;
  NoiseSchedule noise;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
};

// Actor plus twin critics with target copies.
struct TwinCriticAgent {
  Mlp actor, q_a, q_b;
  Mlp actor_target, q_a_target, q_b_target;
  int obs_dim = 0;
  int act_dim = 0;

  static TwinCriticAgent make(int obs_dim, int act_dim, int critic_input_dim,
                              const std::vector<int>& actor_hidden,
                              const std::vector<int>& critic_hidden, Rng& rng) {
    TwinCriticAgent a;
    a.obs_dim = obs_dim;
    a.act_dim = act_dim;
    std::vector<int> as{obs_dim};
    as.insert(as.end(), actor_hidden.begin(), actor_hidden.end());
    as.push_back(act_dim);
    std::vector<int> cs{critic_input_dim};
    cs.insert(cs.end(), critic_hidden.begin(), critic_hidden.end());
    cs.push_back(1);
    a.actor = Mlp(as, OutputHead::kTanh);
    a.q_a = Mlp(cs, OutputHead::kLinear);
    a.q_b = Mlp(cs, OutputHead::kLinear);
    a.actor.init(rng);
    a.q_a.init(rng);
    a.q_b.init(rng);
    a.actor_target = a.actor;
    a.q_a_target = a.q_a;
    a.q_b_target = a.q_b;
    return a;
  }
};

enum class ObsField { kState, kO1, kO2 };

struct AgentSpec {
  ObsField obs = ObsField::kState;
  int obs_dim = 0;
  int act_offset = 0;
  int act_dim = 0;
  int reward_index = 0;       // 0 -> r, 1 -> r1, 2 -> r2
  bool joint_critic = false;  // critic consumes (o1, o2, a1, a2)
};

// Agent wiring per framework. The joint critic input column order is
// fixed as (o1, o2, a1, a2).
inline std::vector<AgentSpec> agent_specs(Framework fw) {
  switch (fw) {
    case Framework::kSarl:
      return {{ObsField::kState, kStateDim, 0, kActSarlDim, 0, false}};
    case Framework::kDtde:
      return {{ObsField::kO1, kObs1Dim, 0, kAct1Dim, 1, false},
              {ObsField::kO2, kObs2Dim, kAct1Dim, kAct2Dim, 2, false}};
    case Framework::kCtde:
      return {{ObsField::kO1, kObs1Dim, 0, kAct1Dim, 1, true},
              {ObsField::kO2, kObs2Dim, kAct1Dim, kAct2Dim, 2, true}};
  }
  throw std::logic_error("unreachable");
}

inline int critic_input_dim(const AgentSpec& spec, int joint_obs_dim,
                            int joint_act_dim) {
  return spec.joint_critic ? joint_obs_dim + joint_act_dim
                           : spec.obs_dim + spec.act_dim;
}

// Deterministic actor output plus clamped Gaussian exploration noise.
inline Vector select_action(const Mlp& actor, const Vector& obs, double sigma,
                            Rng& rng) {
  Vector a = actor.forward1(obs);
  if (sigma > 0.0) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) += rng.normal(0.0, sigma);
    }
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

struct ActorLosses {
  double q_mean = 0.0;
  double l_t = 0.0;
  double l_s = 0.0;
  double l_m = 0.0;
};

struct UpdateStats {
  std::vector<double> critic_loss;         // per agent, mean of twin losses
  std::vector<ActorLosses> actor;          // filled on delayed updates only
  bool actor_updated = false;

  bool finite() const {
    for (double v : critic_loss) {
      if (!std::isfinite(v)) return false;
    }
    for (const auto& a : actor) {
      if (!std::isfinite(a.q_mean) || !std::isfinite(a.l_t) ||
          !std::isfinite(a.l_s) || !std::isfinite(a.l_m)) {
        return false;
      }
    }
    return true;
  }
};

// TD3 / MATD3 learner over an arbitrary agent wiring. One instance owns the
// networks and optimizer state for every agent of a framework; updates are
// driven externally with sampled batches. RNG draws happen in a fixed order
// (target noise per agent, then spatial-smoothing noise per agent), which
// keeps training bit-reproducible for a given seed.
class Td3Session {
 public:
  Td3Session(std::vector<AgentSpec> specs, TransitionDims dims, TrainHp hp,
             const std::vector<int>& actor_hidden,
             const std::vector<int>& critic_hidden, const Vector& nominal_action,
             Rng& init_rng)
      : specs_(std::move(specs)), dims_(dims), hp_(hp),
        nominal_action_(nominal_action) {
    int joint_obs = 0;
    for (const auto& s : specs_) {
      joint_obs += s.obs_dim;
    }
    for (const auto& s : specs_) {
      agents_.push_back(TwinCriticAgent::make(
          s.obs_dim, s.act_dim, critic_input_dim(s, joint_obs, dims_.action),
          actor_hidden, critic_hidden, init_rng));
    }
  }

  const std::vector<AgentSpec>& specs() const { return specs_; }
  std::vector<TwinCriticAgent>& agents() { return agents_; }
  const std::vector<TwinCriticAgent>& agents() const { return agents_; }
  const TrainHp& hp() const { return hp_; }
  long critic_updates() const { return critic_updates_; }
  void set_critic_updates(long n) { critic_updates_ = n; }

  const Matrix& obs_of(const Batch& b, ObsField f, bool next) const {
    switch (f) {
      case ObsField::kState: return next ? b.s_next : b.s;
      case ObsField::kO1: return next ? b.o1_next : b.o1;
      case ObsField::kO2: return next ? b.o2_next : b.o2;
    }
    throw std::logic_error("unreachable");
  }

  const Vector& reward_of(const Batch& b, int index) const {
    return index == 0 ? b.r : (index == 1 ? b.r1 : b.r2);
  }

  // Joint normalized action for execution. Noise is drawn agent by agent in
  // wiring order.
  Vector act(const std::vector<const Vector*>& obs, double sigma,
             Rng& rng) const {
    Vector a(dims_.action);
    for (size_t i = 0; i < specs_.size(); ++i) {
      a.segment(specs_[i].act_offset, specs_[i].act_dim) =
          select_action(agents_[i].actor, *obs[i], sigma, rng);
    }
    return a;
  }

  Vector act_deterministic(const std::vector<const Vector*>& obs) const {
    Vector a(dims_.action);
    for (size_t i = 0; i < specs_.size(); ++i) {
      a.segment(specs_[i].act_offset, specs_[i].act_dim) =
          agents_[i].actor.forward1(*obs[i]);
    }
    return a;
  }

  // One learner iteration: critic regression on every agent, plus the
  // delayed actor and target updates every policy_delay-th call.
  UpdateStats update(const Batch& batch, double lr, Rng& rng) {
    critic_updates_ += 1;
    UpdateStats stats;

    // Smoothed target actions, one per agent:
    // a~ = clamp(pi'(o') + clamp(eps, -c, c), -1, 1).
    std::vector<Matrix> target_actions(specs_.size());
    for (size_t i = 0; i < specs_.size(); ++i) {
      const Matrix& on = obs_of(batch, specs_[i].obs, true);
      Matrix ta = agents_[i].actor_target.forward(on);
      for (Eigen::Index r = 0; r < ta.rows(); ++r) {
        for (Eigen::Index c = 0; c < ta.cols(); ++c) {
          double eps = std::clamp(rng.normal(0.0, hp_.noise.target_sigma),
                                  -hp_.noise.target_clip, hp_.noise.target_clip);
          ta(r, c) = std::clamp(ta(r, c) + eps, -1.0, 1.0);
        }
      }
      target_actions[i] = std::move(ta);
    }

    for (size_t i = 0; i < specs_.size(); ++i) {
      stats.critic_loss.push_back(
          update_critics(i, batch, target_actions, lr));
    }

    if (critic_updates_ % hp_.policy_delay == 0) {
      stats.actor_updated = true;
      for (size_t i = 0; i < specs_.size(); ++i) {
        stats.actor.push_back(update_actor(i, batch, lr, rng));
      }
      for (auto& a : agents_) {
        soft_update(a.actor_target, a.actor, hp_.rho);
        soft_update(a.q_a_target, a.q_a, hp_.rho);
        soft_update(a.q_b_target, a.q_b, hp_.rho);
      }
    }
    return stats;
  }

  // Clipped double-Q regression targets for one agent, exposed for testing:
  // y = r_i + gamma (1 - done) min(Q'_A, Q'_B).
  Vector critic_targets(size_t i, const Batch& batch,
                        const std::vector<Matrix>& target_actions) const {
    Matrix zt = assemble_critic_input(i, batch, target_actions, true);
    Vector qa = agents_[i].q_a_target.forward(zt).col(0);
    Vector qb = agents_[i].q_b_target.forward(zt).col(0);
    Vector q_min = qa.cwiseMin(qb);
    const Vector& r = reward_of(batch, specs_[i].reward_index);
    return (r.array() +
            hp_.gamma * (1.0 - batch.done.array()) * q_min.array())
        .matrix();
  }

  double update_critics(size_t i, const Batch& batch,
                        const std::vector<Matrix>& target_actions, double lr) {
    Vector y = critic_targets(i, batch, target_actions);
    Matrix z = assemble_critic_input(i, batch, {}, false);
    double n = static_cast<double>(batch.done.size());
    double loss = 0.0;
    for (Mlp* critic : {&agents_[i].q_a, &agents_[i].q_b}) {
      MlpCache cache;
      Vector q = critic->forward(z, &cache).col(0);
      Vector err = q - y;
      loss += err.squaredNorm() / n;
      Matrix dY = (2.0 / n) * err;
      MlpGrads g = critic->backward(cache, dY);
      clip_global_norm(g, hp_.max_grad_norm);
      critic->adamw_step(g, lr, hp_.adam_beta1, hp_.adam_beta2, hp_.adam_eps,
                         hp_.weight_decay);
    }
    return 0.5 * loss;
  }

  // Deterministic policy gradient on Q_A plus the smoothness and magnitude
  // regularizers:
  //   L = -mean Q_A(z(pi(o)))
  //       + lambda_T mean ||pi(o) - pi(o')||
  //       + lambda_S mean ||pi(o) - pi(o + sigma_S eps)||
  //       + lambda_M mean ||pi(o) - a_nominal||.
  // Gradients flow through every actor evaluation. A zero lambda skips its
  // term entirely (no RNG draws), so the unregularized gradient is recovered
  // bit-exactly.
  ActorLosses update_actor(size_t i, const Batch& batch, double lr, Rng& rng) {
    ActorLosses out;
    const AgentSpec& spec = specs_[i];
    const Matrix& obs = obs_of(batch, spec.obs, false);
    double n = static_cast<double>(obs.rows());

    MlpCache cache_t;
    Matrix a_pi = agents_[i].actor.forward(obs, &cache_t);

    // dQ/da at a_i = pi(o_i), other agents' actions fixed from the batch.
    Matrix z = assemble_actor_input(i, batch, a_pi);
    MlpCache cq;
    Matrix q = agents_[i].q_a.forward(z, &cq);
    out.q_mean = q.col(0).mean();
    Matrix dz;
    Matrix dq = Matrix::Constant(q.rows(), 1, -1.0 / n);
    agents_[i].q_a.backward(cq, dq, &dz);
    int a_col = action_col_in_critic_input(i);
    Matrix d_a = dz.middleCols(a_col, spec.act_dim);

    MlpGrads g_extra;
    bool has_extra = false;

    if (hp_.lambda_t > 0.0) {
      const Matrix& obs_next = obs_of(batch, spec.obs, true);
      MlpCache cache_n;
      Matrix a_next = agents_[i].actor.forward(obs_next, &cache_n);
      Matrix diff = a_pi - a_next;
      out.l_t = mean_row_norm(diff);
      Matrix dn = row_norm_grad(diff);
      d_a += (hp_.lambda_t / n) * dn;
      MlpGrads g = agents_[i].actor.backward(cache_n, (-hp_.lambda_t / n) * dn);
      accumulate(g_extra, has_extra, std::move(g));
    }

    if (hp_.lambda_s > 0.0) {
      Matrix obs_s = obs;
      for (Eigen::Index r = 0; r < obs_s.rows(); ++r) {
        for (Eigen::Index c = 0; c < obs_s.cols(); ++c) {
          obs_s(r, c) += rng.normal(0.0, hp_.sigma_s);
        }
      }
      MlpCache cache_s;
      Matrix a_s = agents_[i].actor.forward(obs_s, &cache_s);
      Matrix diff = a_pi - a_s;
      out.l_s = mean_row_norm(diff);
      Matrix dn = row_norm_grad(diff);
      d_a += (hp_.lambda_s / n) * dn;
      MlpGrads g = agents_[i].actor.backward(cache_s, (-hp_.lambda_s / n) * dn);
      accumulate(g_extra, has_extra, std::move(g));
    }

    if (hp_.lambda_m > 0.0) {
      Matrix diff = a_pi;
      diff.rowwise() -=
          nominal_action_.segment(spec.act_offset, spec.act_dim).transpose();
      out.l_m = mean_row_norm(diff);
      d_a += (hp_.lambda_m / n) * row_norm_grad(diff);
    }

    MlpGrads g = agents_[i].actor.backward(cache_t, d_a);
    if (has_extra) {
      g.add(g_extra);
    }
    clip_global_norm(g, hp_.max_grad_norm);
    agents_[i].actor.adamw_step(g, lr, hp_.adam_beta1, hp_.adam_beta2,
                                hp_.adam_eps, hp_.weight_decay);
    return out;
  }

  // Critic input rows for agent i. For target inputs the actions come from
  // the smoothed target policies; otherwise from the batch.
  Matrix assemble_critic_input(size_t i, const Batch& batch,
                               const std::vector<Matrix>& target_actions,
                               bool next) const {
    const AgentSpec& spec = specs_[i];
    if (!spec.joint_critic) {
      const Matrix& o = obs_of(batch, spec.obs, next);
      Matrix z(o.rows(), spec.obs_dim + spec.act_dim);
      z.leftCols(spec.obs_dim) = o;
      z.rightCols(spec.act_dim) =
          next ? target_actions[i]
               : batch.a.middleCols(spec.act_offset, spec.act_dim);
      return z;
    }
    int joint_obs = 0;
    for (const auto& s : specs_) {
      joint_obs += s.obs_dim;
    }
    Matrix z(batch.done.size(), joint_obs + dims_.action);
    int col = 0;
    for (const auto& s : specs_) {
      z.middleCols(col, s.obs_dim) = obs_of(batch, s.obs, next);
      col += s.obs_dim;
    }
    for (size_t j = 0; j < specs_.size(); ++j) {
      z.middleCols(col + specs_[j].act_offset, specs_[j].act_dim) =
          next ? target_actions[j]
               : batch.a.middleCols(specs_[j].act_offset, specs_[j].act_dim);
    }
    return z;
  }

  // Critic input with agent i's action replaced by the online policy output;
  // other agents keep their batch actions.
  Matrix assemble_actor_input(size_t i, const Batch& batch,
                              const Matrix& a_pi) const {
    const AgentSpec& spec = specs_[i];
    if (!spec.joint_critic) {
      const Matrix& o = obs_of(batch, spec.obs, false);
      Matrix z(o.rows(), spec.obs_dim + spec.act_dim);
      z.leftCols(spec.obs_dim) = o;
      z.rightCols(spec.act_dim) = a_pi;
      return z;
    }
    Matrix z = assemble_critic_input(i, batch, {}, false);
    z.middleCols(action_col_in_critic_input(i), spec.act_dim) = a_pi;
    return z;
  }

  int action_col_in_critic_input(size_t i) const {
    const AgentSpec& spec = specs_[i];
    if (!spec.joint_critic) {
      return spec.obs_dim;
    }
    int joint_obs = 0;
    for (const auto& s : specs_) {
      joint_obs += s.obs_dim;
    }
    return joint_obs + spec.act_offset;
  }

 private:
  static double mean_row_norm(const Matrix& m) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      sum += m.row(r).norm();
    }
    return sum / static_cast<double>(m.rows());
  }

  // d(||row||)/d(row) = row / ||row||, zero at the origin.
  static Matrix row_norm_grad(const Matrix& m) {
    Matrix g = Matrix::Zero(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double nrm = m.row(r).norm();
      if (nrm > 0.0) {
        g.row(r) = m.row(r) / nrm;
      }
    }
    return g;
  }

  static void accumulate(MlpGrads& acc, bool& has, MlpGrads&& g) {
    if (!has) {
      acc = std::move(g);
      has = true;
    } else {
      acc.add(g);
    }
  }

  std::vector<AgentSpec> specs_;
  TransitionDims dims_;
  TrainHp hp_;
  Vector nominal_action_;
  std::vector<TwinCriticAgent> agents_;
  long critic_updates_ = 0;
};

}  // namespace quadrl
