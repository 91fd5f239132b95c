#pragma once

// Cycle-consistent training: the network's joint output is mapped back to
// Cartesian space through forward kinematics and scored there with a weighted
// multi-objective cost. The noise-conditioned generator adds a variance term
// that spreads solutions of one pose over its nullspace.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cycleik/chain.hpp"
#include "cycleik/dataset.hpp"
#include "cycleik/kinematics.hpp"
#include "cycleik/neural.hpp"
#include "json.hpp"

namespace cycleik {

enum class GoalKind { PositionMae, RotationMae, ZeroController };

inline const char* to_string(GoalKind k) {
  switch (k) {
    case GoalKind::PositionMae: return "position_mae";
    case GoalKind::RotationMae: return "rotation_mae";
    case GoalKind::ZeroController: return "zero_controller";
  }
  return "?";
}

struct CartesianGoal {
  GoalKind kind = GoalKind::PositionMae;
  double weight = 1.0;
};

struct JointGoal {
  GoalKind kind = GoalKind::ZeroController;
  std::vector<int> joint_indices;
  double weight = 0.05;
};

/// Weighted Cartesian and joint-space goals.
struct GoalSet {
  std::vector<CartesianGoal> cartesian;
  std::vector<JointGoal> joint;

  void validate(int dof) const {
    for (const auto& g : cartesian) {
      if (!(g.weight > 0.0)) throw Error("goal weights must be positive");
      if (g.kind == GoalKind::ZeroController) throw Error("zero-controller is a joint-space goal");
    }
    for (const auto& g : joint) {
      if (!(g.weight > 0.0)) throw Error("goal weights must be positive");
      if (g.kind != GoalKind::ZeroController) throw Error("joint goals must be zero-controller goals");
      if (g.joint_indices.empty()) throw Error("zero-controller goal needs at least one joint");
      for (int i : g.joint_indices)
        if (i < 0 || i >= dof) throw Error("zero-controller joint index " + std::to_string(i) + " out of range");
    }
  }

  static GoalSet cartesian_only(double position_weight = 1.0, double rotation_weight = 0.5) {
    GoalSet g;
    g.cartesian.push_back({GoalKind::PositionMae, position_weight});
    if (rotation_weight > 0.0) g.cartesian.push_back({GoalKind::RotationMae, rotation_weight});
    return g;
  }

  /// Position 1.0, rotation 0.5, plus a 0.05 zero-controller on the trailing
  /// dof - 6 (redundant) joints when the chain has more than six joints.
  static GoalSet defaults(const KinematicChain& chain) {
    GoalSet g = cartesian_only();
    if (chain.dof() > 6) {
      JointGoal z;
      for (int i = 6; i < chain.dof(); ++i) z.joint_indices.push_back(i);
      g.joint.push_back(z);
    }
    return g;
  }

  GoalSet scaled(double c) const {
    GoalSet g = *this;
    for (auto& x : g.cartesian) x.weight *= c;
    for (auto& x : g.joint) x.weight *= c;
    return g;
  }
};

inline nlohmann::json goals_to_json(const GoalSet& g) {
  nlohmann::json j;
  j["cartesian"] = nlohmann::json::array();
  for (const auto& c : g.cartesian) j["cartesian"].push_back({{"kind", to_string(c.kind)}, {"weight", c.weight}});
  j["joint"] = nlohmann::json::array();
  for (const auto& c : g.joint)
    j["joint"].push_back({{"kind", to_string(c.kind)}, {"joints", c.joint_indices}, {"weight", c.weight}});
  return j;
}

inline GoalSet goals_from_json(const nlohmann::json& j) {
  GoalSet g;
  try {
    for (const auto& c : j.value("cartesian", nlohmann::json::array())) {
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "position_mae")
        g.cartesian.push_back({GoalKind::PositionMae, c.at("weight").get<double>()});
      else if (kind == "rotation_mae")
        g.cartesian.push_back({GoalKind::RotationMae, c.at("weight").get<double>()});
      else
        throw Error("unknown Cartesian goal kind '" + kind + "'");
    }
    for (const auto& c : j.value("joint", nlohmann::json::array())) {
      if (c.value("kind", std::string("zero_controller")) != "zero_controller")
        throw Error("unknown joint goal kind");
      g.joint.push_back({GoalKind::ZeroController, c.at("joints").get<std::vector<int>>(), c.at("weight").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed goal set: ") + e.what());
  }
  return g;
}

struct SampleCost {
  double total = 0.0;
  double position = 0.0;  // weighted terms
  double rotation = 0.0;
  double joint = 0.0;
};

namespace detail {
inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }
}  // namespace detail

/// Weighted cost of one reached pose/config against its target.
///
/// position: mean |dp| over 3 axes (m); rotation: mean |s*q_reached - q_target|
/// over 4 components with the sign s resolving the double cover; zero
/// controller: mean squared joint angle (rad^2) over the selected joints.
/// Optional outputs receive the gradient w.r.t. the 7-D reached pose and the
/// configuration (joint-goal part only).
inline SampleCost sample_cost(const GoalSet& goals, const Pose& target, const Pose& reached,
                              const Eigen::Ref<const Eigen::VectorXd>& config,
                              Eigen::Matrix<double, 7, 1>* d_pose = nullptr,
                              Eigen::VectorXd* d_config = nullptr) {
  SampleCost c;
  if (d_pose) d_pose->setZero();
  if (d_config) d_config->setZero(config.size());
  for (const auto& g : goals.cartesian) {
    if (g.kind == GoalKind::PositionMae) {
      const Eigen::Vector3d d = reached.position - target.position;
      const double v = g.weight * d.cwiseAbs().sum() / 3.0;
      c.position += v;
      if (d_pose)
        for (int i = 0; i < 3; ++i) (*d_pose)[i] += g.weight * detail::sgn(d[i]) / 3.0;
    } else if (g.kind == GoalKind::RotationMae) {
      const double s = resolve_quat_sign(target.orientation, reached.orientation);
      const Eigen::Vector4d d = s * reached.orientation.coeffs() - target.orientation.coeffs();
      c.rotation += g.weight * d.cwiseAbs().sum() / 4.0;
      if (d_pose)
        for (int i = 0; i < 4; ++i) (*d_pose)[3 + i] += g.weight * s * detail::sgn(d[i]) / 4.0;
    }
  }
  for (const auto& g : goals.joint) {
    const double n = static_cast<double>(g.joint_indices.size());
    double sq = 0.0;
    for (int i : g.joint_indices) {
      sq += config[i] * config[i];
      if (d_config) (*d_config)[i] += g.weight * 2.0 * config[i] / n;
    }
    c.joint += g.weight * sq / n;
  }
  c.total = c.position + c.rotation + c.joint;
  return c;
}

struct CycleLoss {
  double loss = 0.0;
  double position = 0.0;
  double rotation = 0.0;
  double joint = 0.0;
  NetGradients grads;
  bool finite = true;
};

/// Batch-mean weighted cost of FK(denormalize(net(inputs))) against `targets`,
/// with gradients for every network parameter. Column b of `inputs` is the
/// network input for targets[b].
inline CycleLoss cycle_loss(const KinematicChain& chain, const DenseNet& net, const Normalizer& norm,
                            const Eigen::MatrixXd& inputs, const std::vector<Pose>& targets,
                            const GoalSet& goals) {
  if (targets.empty() || inputs.cols() != static_cast<Eigen::Index>(targets.size()))
    throw Error("cycle loss needs a non-empty batch with one input column per target");
  ForwardResult fr = forward(net, inputs);
  const Eigen::Index batch = inputs.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const Eigen::VectorXd half = norm.joint_half_range();
  Eigen::MatrixXd d_out(fr.output.rows(), batch);
  CycleLoss res;
  PoseJacobian jac;
  Eigen::Matrix<double, 7, 1> d_pose;
  Eigen::VectorXd d_cfg;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::VectorXd q = norm.denormalize_joints(fr.output.col(b));
    const Pose reached = fk_with_jacobian(chain, q, jac);
    const SampleCost c = sample_cost(goals, targets[b], reached, q, &d_pose, &d_cfg);
    res.loss += c.total;
    res.position += c.position;
    res.rotation += c.rotation;
    res.joint += c.joint;
    d_out.col(b) = ((jac.transpose() * d_pose + d_cfg).array() * half.array() * inv_b).matrix();
  }
  res.loss *= inv_b;
  res.position *= inv_b;
  res.rotation *= inv_b;
  res.joint *= inv_b;
  res.finite = std::isfinite(res.loss);
  res.grads = backward(net, fr.tape, d_out);
  return res;
}

/// Mean over dimensions of the per-dimension population variance (divide by N)
/// of the columns of `m`.
inline double mean_dimension_variance(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd mean = m.rowwise().mean();
  return ((m.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(m.cols())).mean();
}

/// (meanvar(solutions) - meanvar(noise))^2 with columns as samples.
/// `solutions` holds normalized joint values. When `d_solutions` is given it
/// receives the gradient w.r.t. `solutions`.
inline double variance_loss(const Eigen::MatrixXd& solutions, const Eigen::MatrixXd& noise,
                            Eigen::MatrixXd* d_solutions = nullptr) {
  if (solutions.cols() < 2) throw Error("variance loss needs a batch of at least 2");
  if (noise.cols() != solutions.cols()) throw Error("noise and solution batches differ in size");
  const double vs = mean_dimension_variance(solutions);
  const double vz = mean_dimension_variance(noise);
  const double diff = vs - vz;
  if (d_solutions) {
    const Eigen::VectorXd mean = solutions.rowwise().mean();
    const double scale = 2.0 * diff * 2.0 /
                         (static_cast<double>(solutions.rows()) * static_cast<double>(solutions.cols()));
    *d_solutions = scale * (solutions.colwise() - mean);
  }
  return diff * diff;
}

struct TrainConfig {
  int batch_size = 150;
  double lr0 = 1.6e-4;
  int epochs = 30;
  std::optional<double> grad_clip;
  int restarts = 2;
  std::uint64_t rng_seed = 0;
  double variance_weight = 0.5;  // generator only
  int noise_dim = 0;             // generator only
  double divergence_grad_norm = 1e6;

  void validate() const {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (!(lr0 >= 0.0)) throw Error("learning rate must be >= 0");
    if (epochs < 1) throw Error("epochs must be >= 1");
    if (restarts < 0) throw Error("restarts must be >= 0");
    if (grad_clip && !(*grad_clip > 0.0)) throw Error("grad_clip must be positive");
  }

  /// Linear decay applied at the end of each epoch: lr0 * (1 - e / epochs).
  double learning_rate(int epoch) const {
    return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs));
  }
};

/// Batch size and learning rate of the full-scale layout tables.
inline TrainConfig full_scale_train_config(ModelKind kind, Workspace ws) {
  const PresetLayout l = kind == ModelKind::Mlp ? mlp_layout(ws) : gan_layout(ws);
  TrainConfig c;
  c.batch_size = l.batch_size;
  c.lr0 = l.learning_rate;
  c.noise_dim = l.noise_dim;
  c.restarts = kind == ModelKind::Mlp ? 2 : 9;
  return c;
}

/// Settings for the width-scaled desk nets on ~50k samples. The table
/// learning rates are tuned for 10x wider nets trained ten times longer and
/// underfit here. The generator needs more epochs, and a lighter variance
/// weight keeps its mean error down at this size.
inline TrainConfig desk_train_config(ModelKind kind, Workspace ws = Workspace::Small) {
  TrainConfig c = full_scale_train_config(kind, ws);
  c.batch_size = 100;
  c.lr0 = 1e-3;
  if (kind == ModelKind::Gan) {
    c.epochs = 120;
    c.variance_weight = 0.2;
  }
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j = {{"batch_size", c.batch_size},   {"lr0", c.lr0},
                      {"epochs", c.epochs},           {"restarts", c.restarts},
                      {"rng_seed", c.rng_seed},       {"variance_weight", c.variance_weight},
                      {"noise_dim", c.noise_dim},     {"divergence_grad_norm", c.divergence_grad_norm}};
  j["grad_clip"] = c.grad_clip ? nlohmann::json(*c.grad_clip) : nlohmann::json(nullptr);
  return j;
}

struct EpochMetrics {
  int attempt = 0;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_pos_mm = 0.0;
  double val_rot_deg = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;  // every attempt, in order
  bool diverged = false;             // some attempt hit a non-finite loss or exploding gradient
  bool success = false;
  int restarts_used = 0;
  int best_epoch = -1;
  double best_val_pos_mm = 0.0;
  double wall_time_s = 0.0;
  std::string init_hash;
  std::string final_hash;
};

inline nlohmann::json report_to_json(const TrainReport& r, bool include_timing = true) {
  nlohmann::json j = {{"success", r.success},         {"diverged", r.diverged},
                      {"restarts_used", r.restarts_used}, {"best_epoch", r.best_epoch},
                      {"best_val_pos_mm", r.best_val_pos_mm}, {"init_hash", r.init_hash},
                      {"final_hash", r.final_hash},   {"epochs_recorded", r.epochs.size()}};
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

inline std::string report_metrics_csv(const TrainReport& r) {
  std::string s = "attempt,epoch,lr,train_loss,val_pos_mm,val_rot_deg\n";
  char buf[256];
  for (const auto& e : r.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", e.attempt, e.epoch, e.lr, e.train_loss,
                  e.val_pos_mm, e.val_rot_deg);
    s += buf;
  }
  return s;
}

class TrainingFailed : public Error {
 public:
  TrainingFailed(const std::string& what, TrainReport report) : Error(what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

namespace detail {

inline Eigen::MatrixXd normalized_poses(const Normalizer& norm, const std::vector<SampleRecord>& recs) {
  Eigen::MatrixXd m(7, static_cast<Eigen::Index>(recs.size()));
  for (std::size_t i = 0; i < recs.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = norm.normalize_pose(recs[i].pose);
  return m;
}

struct ValMetrics {
  double pos_mm = 0.0;
  double rot_deg = 0.0;
};

inline ValMetrics validate_model(const KinematicChain& chain, const IkModel& model,
                                 const std::vector<SampleRecord>& val, std::uint64_t noise_seed) {
  if (val.empty()) return {};
  std::vector<Pose> poses;
  poses.reserve(val.size());
  for (const auto& r : val) poses.push_back(r.pose);
  Eigen::MatrixXd noise;
  if (model.noise_dim > 0) {
    std::mt19937_64 rng(noise_seed);
    noise = uniform_noise(model.noise_dim, static_cast<Eigen::Index>(poses.size()), rng);
  }
  const auto configs = model.solve(poses, noise);
  ValMetrics m;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const PoseError e = pose_error(poses[i], fk(chain, configs[i]));
    m.pos_mm += e.pos_err_mm;
    m.rot_deg += e.rot_err_deg;
  }
  m.pos_mm /= static_cast<double>(poses.size());
  m.rot_deg /= static_cast<double>(poses.size());
  return m;
}

inline void clip_gradients(NetGradients& g, double max_norm) {
  const double n = std::sqrt(g.squared_norm());
  if (n > max_norm) g.scale(max_norm / n);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

/// Shared epoch/restart driver. `step` computes the gradient for one batch of
/// training indices and returns the loss; it must not modify the network.
template <typename StepFn>
TrainReport run_training(const KinematicChain& chain, const std::vector<SampleRecord>& val, IkModel& model,
                         const TrainConfig& cfg, std::size_t n_train, StepFn&& step) {
  cfg.validate();
  if (n_train == 0) throw Error("training set is empty");
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.init_hash = parameter_hash(model.net);
  const DenseNet initial = model.net;
  const std::vector<int> sizes = model.net.layer_sizes();
  const int tanh_tail = model.net.tanh_tail();

  for (int attempt = 0; attempt <= cfg.restarts; ++attempt) {
    if (attempt > 0) model.net = DenseNet::create(sizes, tanh_tail, mix_seed(cfg.rng_seed, 1000 + attempt));
    report.restarts_used = attempt;
    Adam adam(model.net);
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(attempt)));
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    DenseNet best = model.net;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    bool diverged = false;

    for (int epoch = 0; epoch < cfg.epochs && !diverged; ++epoch) {
      const double lr = cfg.learning_rate(epoch);
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
        NetGradients grads;
        const double loss = step(idx, rng, grads);
        const double gnorm = std::sqrt(grads.squared_norm());
        if (!std::isfinite(loss) || !std::isfinite(gnorm) || gnorm > cfg.divergence_grad_norm) {
          diverged = true;
          break;
        }
        adam.step(model.net, grads, lr);
        if (!model.net.all_finite()) {
          diverged = true;
          break;
        }
        loss_sum += loss;
        ++batches;
      }
      if (diverged) break;
      const ValMetrics vm = validate_model(chain, model, val, mix_seed(cfg.rng_seed, 77));
      report.epochs.push_back({attempt, epoch, lr, loss_sum / static_cast<double>(std::max<std::size_t>(1, batches)),
                               vm.pos_mm, vm.rot_deg});
      if (!std::isfinite(vm.pos_mm)) {
        diverged = true;
        break;
      }
      if (vm.pos_mm < best_val || best_epoch < 0) {
        best_val = vm.pos_mm;
        best_epoch = epoch;
        best = model.net;
      }
    }
    if (diverged) {
      report.diverged = true;
      continue;
    }
    model.net = std::move(best);
    report.success = true;
    report.best_epoch = best_epoch;
    report.best_val_pos_mm = best_val;
    break;
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!report.success) {
    model.net = initial;
    report.final_hash = parameter_hash(model.net);
    throw TrainingFailed("training diverged in all " + std::to_string(cfg.restarts + 1) + " attempts", report);
  }
  report.final_hash = parameter_hash(model.net);
  return report;
}

}  // namespace detail

/// Mini-batch training of a single-solution model on the cycle loss. On
/// divergence the network is re-initialized and training restarts, up to
/// cfg.restarts times. The parameters with the best validation position error
/// are kept.
inline TrainReport train_mlp(const KinematicChain& chain, const std::vector<SampleRecord>& train,
                             const std::vector<SampleRecord>& val, IkModel& model, const TrainConfig& cfg,
                             const GoalSet& goals) {
  goals.validate(chain.dof());
  if (model.noise_dim != 0) throw Error("train_mlp expects a model without noise input");
  model.net.validate_ik_layout(chain.dof());
  const Eigen::MatrixXd inputs = detail::normalized_poses(model.normalizer, train);
  auto step = [&](const std::vector<std::size_t>& idx, std::mt19937_64&, NetGradients& grads) {
    Eigen::MatrixXd in(7, static_cast<Eigen::Index>(idx.size()));
    std::vector<Pose> targets;
    targets.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      in.col(static_cast<Eigen::Index>(k)) = inputs.col(static_cast<Eigen::Index>(idx[k]));
      targets.push_back(train[idx[k]].pose);
    }
    CycleLoss cl = cycle_loss(chain, model.net, model.normalizer, in, targets, goals);
    grads = std::move(cl.grads);
    if (cfg.grad_clip && grads.all_finite()) detail::clip_gradients(grads, *cfg.grad_clip);
    return cl.loss;
  };
  return detail::run_training(chain, val, model, cfg, train.size(), step);
}

/// Training of the noise-conditioned generator. Each step combines the cycle
/// loss on a batch with fresh noise per row and, weighted by
/// cfg.variance_weight, the variance loss on one randomly chosen pose of the
/// batch repeated batch-size times with fresh noise. Clipping (if configured)
/// applies to the cycle term only.
inline TrainReport train_gan(const KinematicChain& chain, const std::vector<SampleRecord>& train,
                             const std::vector<SampleRecord>& val, IkModel& model, const TrainConfig& cfg,
                             const GoalSet& goals) {
  goals.validate(chain.dof());
  if (model.noise_dim < 1) throw Error("train_gan expects a model with noise input");
  if (cfg.noise_dim != 0 && cfg.noise_dim != model.noise_dim)
    throw Error("config noise_dim does not match the model");
  model.net.validate_ik_layout(chain.dof());
  const int nz = model.noise_dim;
  const Eigen::MatrixXd poses = detail::normalized_poses(model.normalizer, train);
  auto step = [&](const std::vector<std::size_t>& idx, std::mt19937_64& rng, NetGradients& grads) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd in(7 + nz, b);
    std::vector<Pose> targets;
    targets.reserve(idx.size());
    for (Eigen::Index k = 0; k < b; ++k) {
      in.block(0, k, 7, 1) = poses.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]));
      targets.push_back(train[idx[static_cast<std::size_t>(k)]].pose);
    }
    in.bottomRows(nz) = uniform_noise(nz, b, rng);
    CycleLoss cl = cycle_loss(chain, model.net, model.normalizer, in, targets, goals);
    grads = std::move(cl.grads);
    if (cfg.grad_clip && grads.all_finite()) detail::clip_gradients(grads, *cfg.grad_clip);
    double loss = cl.loss;
    if (cfg.variance_weight > 0.0 && b >= 2) {
      std::uniform_int_distribution<Eigen::Index> pick(0, b - 1);
      const Eigen::Index chosen = pick(rng);
      Eigen::MatrixXd tiled(7 + nz, b);
      tiled.topRows(7) = in.block(0, chosen, 7, 1).replicate(1, b);
      const Eigen::MatrixXd z = uniform_noise(nz, b, rng);
      tiled.bottomRows(nz) = z;
      ForwardResult fr = forward(model.net, tiled);
      Eigen::MatrixXd d_theta;
      const double lv = variance_loss(fr.output, z, &d_theta);
      const NetGradients gv = backward(model.net, fr.tape, d_theta);
      grads.add_scaled(gv, cfg.variance_weight);
      loss += cfg.variance_weight * lv;
    }
    return loss;
  };
  return detail::run_training(chain, val, model, cfg, train.size(), step);
}

}  // namespace cycleik
