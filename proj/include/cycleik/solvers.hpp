#pragma once

// Hybrid neuro-genetic IK: neural seeding, an elitist genetic algorithm over
// the weighted cost and damped least-squares refinement.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cycleik/chain.hpp"
#include "cycleik/kinematics.hpp"
#include "cycleik/neural.hpp"
#include "cycleik/training.hpp"

namespace cycleik {

/// Same per-sample term the training loss averages over a batch.
inline double weighted_cost(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& config,
                            const Pose& target, const GoalSet& goals) {
  return sample_cost(goals, target, fk(chain, config), config).total;
}

struct SolutionBatch {
  std::vector<JointConfig> configs;
  std::vector<double> pos_err_mm;
  std::vector<double> rot_err_deg;
  std::vector<double> cost;

  std::size_t size() const { return configs.size(); }
  bool empty() const { return configs.empty(); }

  void add(const KinematicChain& chain, const Pose& target, const GoalSet& goals, JointConfig q) {
    const Pose reached = fk(chain, q);
    const PoseError e = pose_error(target, reached);
    cost.push_back(sample_cost(goals, target, reached, q).total);
    pos_err_mm.push_back(e.pos_err_mm);
    rot_err_deg.push_back(e.rot_err_deg);
    configs.push_back(std::move(q));
  }

  void add_evaluated(JointConfig q, double pos_mm, double rot_deg, double c) {
    configs.push_back(std::move(q));
    pos_err_mm.push_back(pos_mm);
    rot_err_deg.push_back(rot_deg);
    cost.push_back(c);
  }

  /// Stable ascending sort by cost.
  void sort_by_cost() {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
    SolutionBatch s;
    for (std::size_t i : idx) s.add_evaluated(configs[i], pos_err_mm[i], rot_err_deg[i], cost[i]);
    *this = std::move(s);
  }

  std::size_t best_index() const {
    if (empty()) throw Error("empty solution batch");
    std::size_t best = 0;
    for (std::size_t i = 1; i < size(); ++i)
      if (cost[i] < cost[best]) best = i;
    return best;
  }
};

inline SolutionBatch evaluate_solutions(const KinematicChain& chain, const Pose& target, const GoalSet& goals,
                                        const std::vector<JointConfig>& configs) {
  SolutionBatch s;
  for (const auto& q : configs) s.add(chain, target, goals, q);
  return s;
}

struct GaConfig {
  int population = 256;
  int generations = 100;
  double seed_fraction = 0.5;
  int elitism = 2;
  int tournament_k = 3;
  double crossover_rate = 0.7;
  /// Largest mutation step, as a fraction of each joint's range.
  double mutation_sigma = 0.05;
  /// Each mutation scales sigma by 10^-u with u ~ U(0, mutation_decades); 0
  /// gives a fixed step.
  double mutation_decades = 3.0;
  /// Per-gene mutation probability; unset means 1/dof.
  std::optional<double> mutation_prob;
  std::optional<double> timeout_ms;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (population < 2) throw Error("GA population must be >= 2");
    if (generations < 0) throw Error("GA generations must be >= 0");
    if (elitism < 0 || elitism >= population) throw Error("GA elitism must be in [0, population)");
    if (tournament_k < 1) throw Error("GA tournament size must be >= 1");
    if (!(seed_fraction >= 0.0 && seed_fraction <= 1.0)) throw Error("GA seed fraction must be in [0, 1]");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw Error("GA crossover rate must be in [0, 1]");
    if (!(mutation_sigma >= 0.0)) throw Error("GA mutation sigma must be >= 0");
    if (!(mutation_decades >= 0.0)) throw Error("GA mutation decades must be >= 0");
  }

  int max_seeds() const { return static_cast<int>(std::floor(seed_fraction * population)); }
};

struct GaTrace {
  /// Entry 0 is the initial population, entry g the population after generation g.
  std::vector<double> best_cost;
  std::vector<long> evaluations;  // cumulative cost evaluations
  bool timed_out = false;
};

/// Elitist GA over joint configurations. The initial population holds the
/// (clamped) seeds followed by uniform random configurations. Each generation
/// carries the `elitism` best unchanged and fills the rest by tournament
/// selection, uniform crossover and Gaussian mutation with clamping to the
/// joint limits. Returns the final population sorted by cost.
inline SolutionBatch ga_solve(const KinematicChain& chain, const Pose& target, const GoalSet& goals,
                              const GaConfig& cfg, const std::vector<JointConfig>& seeds = {},
                              GaTrace* trace = nullptr) {
  cfg.validate();
  goals.validate(chain.dof());
  if (static_cast<int>(seeds.size()) > cfg.max_seeds())
    throw Error("GA got " + std::to_string(seeds.size()) + " seeds, at most " + std::to_string(cfg.max_seeds()) +
                " allowed");
  const auto t0 = std::chrono::steady_clock::now();
  const int dof = chain.dof();
  const Eigen::VectorXd lo = chain.lower_limits(), hi = chain.upper_limits();
  const Eigen::VectorXd range = hi - lo;
  const double gene_prob = cfg.mutation_prob ? *cfg.mutation_prob : 1.0 / dof;
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, cfg.population - 1);

  std::vector<JointConfig> pop;
  std::vector<double> cost;
  pop.reserve(static_cast<std::size_t>(cfg.population));
  long evals = 0;
  auto eval = [&](const JointConfig& q) {
    ++evals;
    return weighted_cost(chain, q, target, goals);
  };
  for (const auto& s : seeds) {
    if (s.size() != dof) throw Error("GA seed has wrong dof");
    pop.push_back(chain.clamp(s));
  }
  while (static_cast<int>(pop.size()) < cfg.population) {
    JointConfig q(dof);
    for (int i = 0; i < dof; ++i) q[i] = lo[i] + unit(rng) * range[i];
    pop.push_back(std::move(q));
  }
  for (const auto& q : pop) cost.push_back(eval(q));

  auto ranked = [&]() {
    std::vector<int> idx(pop.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return cost[a] < cost[b]; });
    return idx;
  };
  auto record = [&]() {
    if (!trace) return;
    trace->best_cost.push_back(*std::min_element(cost.begin(), cost.end()));
    trace->evaluations.push_back(evals);
  };
  if (trace) *trace = {};
  record();

  auto tournament = [&]() {
    int best = pick(rng);
    for (int k = 1; k < cfg.tournament_k; ++k) {
      const int c = pick(rng);
      if (cost[c] < cost[best] || (cost[c] == cost[best] && c < best)) best = c;
    }
    return best;
  };

  for (int gen = 1; gen <= cfg.generations; ++gen) {
    if (cfg.timeout_ms) {
      const double el = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (el >= *cfg.timeout_ms) {
        if (trace) trace->timed_out = true;
        break;
      }
    }
    const auto order = ranked();
    std::vector<JointConfig> next;
    std::vector<double> next_cost;
    next.reserve(pop.size());
    for (int e = 0; e < cfg.elitism; ++e) {
      next.push_back(pop[order[e]]);
      next_cost.push_back(cost[order[e]]);
    }
    while (static_cast<int>(next.size()) < cfg.population) {
      const int a = tournament();
      JointConfig child = pop[a];
      if (unit(rng) < cfg.crossover_rate) {
        const int b = tournament();
        for (int i = 0; i < dof; ++i)
          if (unit(rng) < 0.5) child[i] = pop[b][i];
      }
      for (int i = 0; i < dof; ++i) {
        if (unit(rng) >= gene_prob) continue;
        const double scale = cfg.mutation_sigma * std::pow(10.0, -cfg.mutation_decades * unit(rng));
        child[i] += gauss(rng) * scale * range[i];
      }
      child = chain.clamp(std::move(child));
      next_cost.push_back(eval(child));
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    cost = std::move(next_cost);
    record();
  }

  SolutionBatch out;
  for (int i : ranked()) {
    const PoseError e = pose_error(target, fk(chain, pop[i]));
    out.add_evaluated(pop[i], e.pos_err_mm, e.rot_err_deg, cost[i]);
  }
  return out;
}

struct RefineTrace {
  std::vector<double> residual;  // squared weighted residual of each accepted iterate, start included
};

/// Damped least-squares (lambda = 1e-4) steps on the weighted 7-D pose
/// residual. A step that does not lower the residual is halved until it does;
/// when no halving helps the current iterate is returned. Every iterate is
/// clamped to the joint limits. Stops at 1e-6 m / 1e-4 rad or after max_iters.
inline JointConfig refine(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& config,
                          const Pose& target, const GoalSet& goals, int max_iters, RefineTrace* trace = nullptr) {
  constexpr double kLambda = 1e-4;
  double wp = 0.0, wr = 0.0;
  for (const auto& g : goals.cartesian) (g.kind == GoalKind::PositionMae ? wp : wr) += g.weight;
  if (wp == 0.0 && wr == 0.0) wp = 1.0;
  const double sp = std::sqrt(wp), sr = std::sqrt(wr);
  const int dof = chain.dof();

  auto residual = [&](const JointConfig& q, PoseJacobian* jac, Eigen::Matrix<double, 7, 1>& r) {
    PoseJacobian j;
    const Pose p = fk_with_jacobian(chain, q, j);
    const double s = resolve_quat_sign(target.orientation, p.orientation);
    r.head<3>() = sp * (p.position - target.position);
    r.tail<4>() = sr * (s * p.orientation.coeffs() - target.orientation.coeffs());
    if (jac) {
      j.topRows<3>() *= sp;
      j.bottomRows<4>() *= sr * s;
      *jac = std::move(j);
    }
    return p;
  };
  auto converged = [&](const Pose& p) {
    const bool pos_ok = wp == 0.0 || (p.position - target.position).norm() < 1e-6;
    const bool rot_ok = wr == 0.0 || quat_angle_deg(p.orientation, target.orientation) / kRadToDeg < 1e-4;
    return pos_ok && rot_ok;
  };

  JointConfig q = chain.clamp(config);
  Eigen::Matrix<double, 7, 1> r;
  PoseJacobian jac;
  Pose p = residual(q, &jac, r);
  double c = r.squaredNorm();
  if (trace) trace->residual = {c};
  for (int it = 0; it < max_iters && !converged(p); ++it) {
    const Eigen::MatrixXd a = jac.transpose() * jac + kLambda * Eigen::MatrixXd::Identity(dof, dof);
    Eigen::VectorXd step = a.ldlt().solve(-(jac.transpose() * r));
    bool accepted = false;
    for (int h = 0; h < 40 && !accepted; ++h, step *= 0.5) {
      const JointConfig cand = chain.clamp(q + step);
      Eigen::Matrix<double, 7, 1> rc;
      residual(cand, nullptr, rc);
      if (rc.squaredNorm() < c) {
        q = cand;
        accepted = true;
      }
    }
    if (!accepted) break;
    p = residual(q, &jac, r);
    c = r.squaredNorm();
    if (trace) trace->residual.push_back(c);
  }
  return q;
}

enum class Pipeline { NeuralOnly, NeuralGa, NeuralGaRefine };

inline Pipeline pipeline_from_string(const std::string& s) {
  if (s == "neural" || s == "neural-only") return Pipeline::NeuralOnly;
  if (s == "neural-ga") return Pipeline::NeuralGa;
  if (s == "neural-ga-refine") return Pipeline::NeuralGaRefine;
  throw Error("unknown pipeline '" + s + "' (expected neural, neural-ga or neural-ga-refine)");
}

inline const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::NeuralOnly: return "neural";
    case Pipeline::NeuralGa: return "neural-ga";
    case Pipeline::NeuralGaRefine: return "neural-ga-refine";
  }
  return "?";
}

struct HybridConfig {
  GaConfig ga;
  int samples = 500;  // generator draws per pose
  int refine_iters = 50;
  std::uint64_t noise_seed = 0;
};

/// Neural solutions for one target: one for an MLP, `samples` noise draws for
/// a generator. Not sorted.
inline std::vector<JointConfig> neural_solutions(const IkModel& model, const Pose& target, int samples,
                                                 std::uint64_t noise_seed) {
  if (model.kind == ModelKind::Mlp) return model.solve({target});
  if (samples < 1) throw Error("generator sample count must be >= 1");
  std::mt19937_64 rng(noise_seed);
  const Eigen::MatrixXd z = uniform_noise(model.noise_dim, samples, rng);
  return model.solve(std::vector<Pose>(static_cast<std::size_t>(samples), target), z);
}

inline SolutionBatch hybrid_solve(const KinematicChain& chain, const Pose& target, const GoalSet& goals,
                                  const IkModel& model, Pipeline pipeline, const HybridConfig& cfg,
                                  GaTrace* trace = nullptr) {
  if (model.dof() != chain.dof())
    throw Error("model dof " + std::to_string(model.dof()) + " does not match chain dof " +
                std::to_string(chain.dof()));
  SolutionBatch neural = evaluate_solutions(chain, target, goals, neural_solutions(model, target, cfg.samples, cfg.noise_seed));
  neural.sort_by_cost();
  if (pipeline == Pipeline::NeuralOnly) return neural;

  const std::size_t n_seeds = std::min<std::size_t>(neural.size(), static_cast<std::size_t>(cfg.ga.max_seeds()));
  std::vector<JointConfig> seeds(neural.configs.begin(), neural.configs.begin() + static_cast<std::ptrdiff_t>(n_seeds));
  SolutionBatch out = ga_solve(chain, target, goals, cfg.ga, seeds, trace);
  if (pipeline == Pipeline::NeuralGaRefine) {
    JointConfig q = refine(chain, out.configs.front(), target, goals, cfg.refine_iters);
    SolutionBatch refined;
    refined.add(chain, target, goals, std::move(q));
    if (refined.cost.front() <= out.cost.front()) {
      out.configs.front() = refined.configs.front();
      out.pos_err_mm.front() = refined.pos_err_mm.front();
      out.rot_err_deg.front() = refined.rot_err_deg.front();
      out.cost.front() = refined.cost.front();
    }
  }
  return out;
}

}  // namespace cycleik
