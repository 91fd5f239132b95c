#include <gtest/gtest.h>

#include "support.hpp"

using namespace cycleik;
using namespace testing_support;

namespace {

GaConfig small_ga(std::uint64_t seed, int population = 64, int generations = 30) {
  GaConfig cfg;
  cfg.population = population;
  cfg.generations = generations;
  cfg.rng_seed = seed;
  return cfg;
}

/// An untrained but well-formed model for the chain.
IkModel untrained(const KinematicChain& chain, ModelKind kind, std::uint64_t seed) {
  IkModel m;
  m.kind = kind;
  m.normalizer = Normalizer::from(chain, reach_bounds(chain, 2000));
  m.noise_dim = kind == ModelKind::Gan ? 3 : 0;
  m.net = DenseNet::create({7 + m.noise_dim, 16, chain.dof()}, 1, seed);
  return m;
}

bool all_within_limits(const KinematicChain& c, const SolutionBatch& s) {
  for (const auto& q : s.configs)
    if (!c.within_limits(q)) return false;
  return true;
}

}  // namespace

TEST(WeightedCost, ZeroAtExactSolution) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd q = random_config(c, rng);
    EXPECT_EQ(weighted_cost(c, q, fk(c, q), GoalSet::cartesian_only()), 0.0);
  }
}

TEST(WeightedCost, MatchesSingleSampleCycleLoss) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  const GoalSet goals = GoalSet::defaults(c);
  const Normalizer norm = Normalizer::from(c, WorkspaceBounds::small_workspace());
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    // A bias-only output layer makes the net emit the normalized config exactly.
    const Eigen::VectorXd q = random_config(c, rng);
    const Eigen::VectorXd y = norm.normalize_joints(q);
    DenseNet net = DenseNet::create({7, 4, 8}, 1, 1);
    net.layers[1].weight.setZero();
    net.layers[1].bias = y.array().atanh().matrix();
    const JointConfig emitted = norm.denormalize_joints(infer(net, Eigen::MatrixXd::Zero(7, 1)).col(0));
    const Pose target = fk(c, random_config(c, rng));
    const CycleLoss cl = cycle_loss(c, net, norm, Eigen::MatrixXd::Zero(7, 1), {target}, goals);
    ASSERT_EQ(cl.loss, weighted_cost(c, emitted, target, goals));
  }
}

TEST(WeightedCost, ScalingWeightsScalesCostAndKeepsArgmin) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  const GoalSet goals = GoalSet::defaults(c);
  std::mt19937_64 rng(3);
  const Pose target = fk(c, random_config(c, rng));
  std::vector<JointConfig> cands;
  for (int i = 0; i < 200; ++i) cands.push_back(random_config(c, rng));
  for (double scale : {2.0, 0.37, 11.0}) {
    const GoalSet scaled = goals.scaled(scale);
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double base = weighted_cost(c, cands[i], target, goals);
      const double s = weighted_cost(c, cands[i], target, scaled);
      ASSERT_NEAR(s, scale * base, 1e-12 * std::max(1.0, s));
      if (base < weighted_cost(c, cands[a], target, goals)) a = i;
      if (s < weighted_cost(c, cands[b], target, scaled)) b = i;
    }
    EXPECT_EQ(a, b);
  }
}

TEST(SolutionBatch, RowsConsistentWithGoalsAndErrors) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const GoalSet goals = GoalSet::cartesian_only();
  std::mt19937_64 rng(4);
  const Pose target = fk(c, random_config(c, rng));
  const SolutionBatch s = ga_solve(c, target, goals, small_ga(4));
  ASSERT_EQ(s.size(), 64u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const PoseError e = pose_error(target, fk(c, s.configs[i]));
    EXPECT_NEAR(s.cost[i], weighted_cost(c, s.configs[i], target, goals), 1e-9);
    EXPECT_NEAR(s.pos_err_mm[i], e.pos_err_mm, 1e-9);
    EXPECT_NEAR(s.rot_err_deg[i], e.rot_err_deg, 1e-9);
    if (i > 0) EXPECT_LE(s.cost[i - 1], s.cost[i]);
  }
}

TEST(SolutionBatch, StableSortKeepsInsertionOrderOnTies) {
  SolutionBatch s;
  for (int i = 0; i < 6; ++i) s.add_evaluated(Eigen::VectorXd::Constant(1, i), 0, 0, i % 2 ? 1.0 : 2.0);
  s.sort_by_cost();
  std::vector<double> order;
  for (const auto& q : s.configs) order.push_back(q[0]);
  EXPECT_EQ(order, (std::vector<double>{1, 3, 5, 0, 2, 4}));
}

TEST(Ga, ExactSeedSurvivesWithElitism) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd q = random_config(c, rng);
    GaConfig cfg = small_ga(t, 32, t * 3);
    cfg.elitism = 1;
    const SolutionBatch s = ga_solve(c, fk(c, q), GoalSet::cartesian_only(), cfg, {q});
    EXPECT_EQ(s.cost.front(), 0.0);
  }
}

TEST(Ga, PlanarChainReachesSubMillimetre) {
  const KinematicChain c = load_chain(chain_path("planar2"));
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Pose target = fk(c, random_config(c, rng));
    // Grid search oracle: the target is reachable to well under a millimetre.
    double grid_best = 1e9;
    const int n = 400;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        Eigen::Vector2d q(c.joint(0).lower + (c.joint(0).upper - c.joint(0).lower) * i / n,
                          c.joint(1).lower + (c.joint(1).upper - c.joint(1).lower) * j / n);
        grid_best = std::min(grid_best, (fk(c, q).position - target.position).norm() * 1e3);
      }
    ASSERT_LT(grid_best, 5.0);
    const SolutionBatch s = ga_solve(c, target, GoalSet::cartesian_only(), small_ga(t, 128, 100));
    EXPECT_LT(s.pos_err_mm.front(), 1.0);
  }
}

TEST(Ga, BestCostNeverIncreases) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    GaConfig cfg = small_ga(t, 8 + t % 9, 15);
    cfg.elitism = 1 + t % 3;
    GaTrace trace;
    ga_solve(c, fk(c, random_config(c, rng)), GoalSet::cartesian_only(), cfg, {}, &trace);
    ASSERT_EQ(trace.best_cost.size(), 16u);
    for (std::size_t g = 1; g < trace.best_cost.size(); ++g) ASSERT_LE(trace.best_cost[g], trace.best_cost[g - 1]);
    ASSERT_EQ(trace.evaluations.front(), cfg.population);
  }
}

TEST(Ga, DeterministicForSeed) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  std::mt19937_64 rng(8);
  const Pose target = fk(c, random_config(c, rng));
  const SolutionBatch a = ga_solve(c, target, GoalSet::defaults(c), small_ga(3));
  const SolutionBatch b = ga_solve(c, target, GoalSet::defaults(c), small_ga(3));
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_NE(a.cost, ga_solve(c, target, GoalSet::defaults(c), small_ga(4)).cost);
}

TEST(Ga, ClampsSeedsAndAllOutputs) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  std::vector<JointConfig> seeds{Eigen::VectorXd::Constant(8, 50.0), Eigen::VectorXd::Constant(8, -50.0)};
  GaConfig cfg = small_ga(1, 16, 0);
  const SolutionBatch s = ga_solve(c, fk(c, Eigen::VectorXd::Zero(8)), GoalSet::cartesian_only(), cfg, seeds);
  EXPECT_TRUE(all_within_limits(c, s));
  bool upper = false;
  for (const auto& q : s.configs) upper |= q == c.upper_limits();
  EXPECT_TRUE(upper);
  cfg.generations = 40;
  cfg.mutation_sigma = 5.0;  // steps far outside the range must still be clamped
  cfg.mutation_decades = 0.0;
  EXPECT_TRUE(all_within_limits(c, ga_solve(c, fk(c, Eigen::VectorXd::Zero(8)), GoalSet::cartesian_only(), cfg, seeds)));
}

TEST(Ga, RejectsBadConfigsAndTooManySeeds) {
  const KinematicChain c = load_chain(chain_path("planar2"));
  const Pose t = fk(c, Eigen::Vector2d(0.1, 0.5));
  GaConfig cfg = small_ga(1, 10, 2);
  cfg.seed_fraction = 0.25;
  EXPECT_EQ(cfg.max_seeds(), 2);
  EXPECT_NO_THROW(ga_solve(c, t, GoalSet::cartesian_only(), cfg, {Eigen::Vector2d(0, 1), Eigen::Vector2d(0, 1)}));
  EXPECT_THROW(ga_solve(c, t, GoalSet::cartesian_only(), cfg, std::vector<JointConfig>(3, Eigen::Vector2d(0, 1))), Error);
  cfg.population = 1;
  EXPECT_THROW(ga_solve(c, t, GoalSet::cartesian_only(), cfg), Error);
  cfg = small_ga(1);
  cfg.elitism = cfg.population;
  EXPECT_THROW(ga_solve(c, t, GoalSet::cartesian_only(), cfg), Error);
}

TEST(Ga, TimeoutStillReturnsSolutions) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  GaConfig cfg = small_ga(1, 256, 1000000);
  cfg.timeout_ms = 20.0;
  GaTrace trace;
  const SolutionBatch s = ga_solve(c, fk(c, Eigen::VectorXd::Zero(8)), GoalSet::defaults(c), cfg, {}, &trace);
  EXPECT_TRUE(trace.timed_out);
  EXPECT_EQ(s.size(), 256u);
}

TEST(Refine, ExactStartIsReturnedUnchanged) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  std::mt19937_64 rng(9);
  const Eigen::VectorXd q = random_config(c, rng);
  EXPECT_EQ(refine(c, q, fk(c, q), GoalSet::cartesian_only(), 50), q);
}

TEST(Refine, ConvergesFromNearbyStartOnTwoJointChain) {
  const KinematicChain c = load_chain(chain_path("planar2"));
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd q = random_config(c, rng);
    q = q.cwiseMax((c.lower_limits().array() + 0.05).matrix()).cwiseMin((c.upper_limits().array() - 0.05).matrix());
    const Pose target = fk(c, q);
    RefineTrace trace;
    const Eigen::VectorXd start = q + Eigen::Vector2d(0.01, -0.01);
    const JointConfig r = refine(c, start, target, GoalSet::cartesian_only(), 20, &trace);
    EXPECT_LT((fk(c, r).position - target.position).norm(), 1e-6);
    EXPECT_LE(trace.residual.size(), 21u);
  }
}

TEST(Refine, UnreachableTargetGivesNonIncreasingResidual) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const Pose target{{3.0, 1.0, 2.0}, Quaternion::from_rpy(0.3, 0.2, 0.1)};
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    RefineTrace trace;
    const JointConfig r = refine(c, random_config(c, rng), target, GoalSet::cartesian_only(), 50, &trace);
    EXPECT_TRUE(c.within_limits(r));
    for (std::size_t i = 1; i < trace.residual.size(); ++i) ASSERT_LE(trace.residual[i], trace.residual[i - 1]);
  }
}

TEST(Hybrid, NeuralOnlySolutionCounts) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const Pose t = fk(c, Eigen::Vector4d(0.1, 0.2, 0.5, -0.2));
  HybridConfig cfg;
  EXPECT_EQ(hybrid_solve(c, t, GoalSet::cartesian_only(), untrained(c, ModelKind::Mlp, 1), Pipeline::NeuralOnly, cfg).size(), 1u);
  const SolutionBatch g = hybrid_solve(c, t, GoalSet::cartesian_only(), untrained(c, ModelKind::Gan, 1), Pipeline::NeuralOnly, cfg);
  EXPECT_EQ(g.size(), 500u);
  EXPECT_TRUE(all_within_limits(c, g));
}

TEST(Hybrid, GaStagesNeverWorsenTheNeuralBest) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  const GoalSet goals = GoalSet::defaults(c);
  std::mt19937_64 rng(12);
  HybridConfig cfg;
  cfg.ga = small_ga(2, 32, 10);
  cfg.samples = 40;
  for (ModelKind kind : {ModelKind::Mlp, ModelKind::Gan}) {
    const IkModel m = untrained(c, kind, 3);
    for (int t = 0; t < 5; ++t) {
      const Pose target = fk(c, random_config(c, rng));
      const double neural = hybrid_solve(c, target, goals, m, Pipeline::NeuralOnly, cfg).cost.front();
      const SolutionBatch ga = hybrid_solve(c, target, goals, m, Pipeline::NeuralGa, cfg);
      const SolutionBatch full = hybrid_solve(c, target, goals, m, Pipeline::NeuralGaRefine, cfg);
      EXPECT_LE(ga.cost.front(), neural);
      EXPECT_LE(full.cost.front(), ga.cost.front());
      EXPECT_TRUE(all_within_limits(c, full));
    }
  }
}

TEST(Hybrid, DofMismatchAndPipelineNames) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const IkModel m = untrained(load_chain(chain_path("planar2")), ModelKind::Mlp, 1);
  EXPECT_THROW(hybrid_solve(c, fk(c, Eigen::Vector4d::Zero()), GoalSet::cartesian_only(), m, Pipeline::NeuralOnly, {}),
               Error);
  for (Pipeline p : {Pipeline::NeuralOnly, Pipeline::NeuralGa, Pipeline::NeuralGaRefine})
    EXPECT_EQ(pipeline_from_string(to_string(p)), p);
  EXPECT_THROW(pipeline_from_string("slsqp"), Error);
}

TEST(Hybrid, SeedsFromTrainedModelDominateRandomStarts) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const GoalSet goals = GoalSet::defaults(c);
  const WorkspaceBounds b = reach_bounds(c, 5000);
  const auto data = split(generate(c, b, 11100, 4), 0.1, 0.01, 4);
  IkModel m;
  m.normalizer = Normalizer::from(c, b);
  m.net = DenseNet::create({7, 64, 64, 4}, 1, 4);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 50;
  cfg.lr0 = 3e-3;
  const TrainReport rep = train_mlp(c, data.train, data.val, m, cfg, goals);
  ASSERT_LT(rep.best_val_pos_mm, 20.0);

  // Same rng seed and budget; the only difference is the seed rows.
  int dominated = 0;
  for (int t = 0; t < 100; ++t) {
    const Pose target = data.test[static_cast<std::size_t>(t)].pose;
    const GaConfig ga = small_ga(static_cast<std::uint64_t>(t), 64, 10);
    const double seeded = ga_solve(c, target, goals, ga, m.solve({target})).cost.front();
    const double unseeded = ga_solve(c, target, goals, ga).cost.front();
    dominated += seeded <= unseeded;
  }
  EXPECT_GE(dominated, 90);
  std::cout << "seeded run at least as good on " << dominated << " of 100 targets\n";
}
