#include <gtest/gtest.h>

#include "support.hpp"

using namespace cycleik;
using namespace testing_support;

namespace {

std::vector<Pose> test_poses(const KinematicChain& c, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Pose> out;
  for (int i = 0; i < n; ++i) out.push_back(fk(c, random_config(c, rng)));
  return out;
}

IkModel generator(const KinematicChain& c, std::uint64_t seed) {
  IkModel m;
  m.kind = ModelKind::Gan;
  m.noise_dim = 3;
  m.normalizer = Normalizer::from(c, reach_bounds(c, 2000));
  m.net = DenseNet::create({10, 24, c.dof()}, 1, seed);
  return m;
}

}  // namespace

TEST(Success, BoundaryCasesCount) {
  const SuccessThresholds thr;
  EXPECT_TRUE(thr.success(10.0, 20.0));
  EXPECT_TRUE(thr.success(5.0, 10.0));
  EXPECT_FALSE(thr.success(15.0, 5.0));
  EXPECT_FALSE(thr.success(std::nextafter(10.0, 11.0), 0.0));
  EXPECT_FALSE(thr.success(0.0, std::nextafter(20.0, 21.0)));
}

TEST(Success, ExactThresholdErrorsThroughEvaluation) {
  const KinematicChain c = rotor_chain();
  const Pose at_ten = boundary_target(10.0, 0.0);
  const Pose at_twenty = boundary_target(0.0, 20.0);
  const Pose both = boundary_target(10.0, 20.0);
  const PoseSolver origin = [&](const Pose&) { return evaluate_solutions(c, Pose{}, GoalSet::cartesian_only(), {Eigen::VectorXd::Zero(1)}); };
  const EvalReport r = evaluate_single(c, origin, {at_ten, at_twenty, both});
  ASSERT_EQ(r.rows[0].pos_mm, 10.0);
  ASSERT_EQ(r.rows[1].rot_deg, 20.0);
  ASSERT_EQ(r.rows[2].pos_mm, 10.0);
  ASSERT_EQ(r.rows[2].rot_deg, 20.0);
  EXPECT_EQ(r.success_rate, 100.0);
  const Pose over{{std::nextafter(at_ten.position.x(), 1.0), 0, 0}, Quaternion::identity()};
  EXPECT_EQ(evaluate_single(c, origin, {over}).success_rate, 0.0);
}

TEST(EvaluateSingle, PerfectOracle) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  std::mt19937_64 rng(1);
  std::vector<Pose> poses;
  std::vector<JointConfig> truth;
  for (int i = 0; i < 50; ++i) {
    truth.push_back(random_config(c, rng));
    poses.push_back(fk(c, truth.back()));
  }
  std::size_t k = 0;
  const PoseSolver oracle = [&](const Pose& p) { return evaluate_solutions(c, p, GoalSet::cartesian_only(), {truth[k++]}); };
  const EvalReport r = evaluate_single(c, oracle, poses);
  EXPECT_EQ(r.avg_pos_mm, 0.0);
  EXPECT_LT(r.avg_rot_deg, 1e-6);
  EXPECT_EQ(r.success_rate, 100.0);
}

TEST(EvaluateSingle, FixedErrorsGiveAllOrNothing) {
  const KinematicChain c = rotor_chain();
  const PoseSolver origin = [&](const Pose&) { return evaluate_solutions(c, Pose{}, GoalSet::cartesian_only(), {Eigen::VectorXd::Zero(1)}); };
  const Pose good{{0.005, 0, 0}, Quaternion::from_axis_angle(Eigen::Vector3d::UnitZ(), 10.0 / kRadToDeg)};
  const Pose bad{{0.015, 0, 0}, Quaternion::from_axis_angle(Eigen::Vector3d::UnitZ(), 5.0 / kRadToDeg)};
  const EvalReport g = evaluate_single(c, origin, std::vector<Pose>(20, good));
  EXPECT_EQ(g.success_rate, 100.0);
  EXPECT_NEAR(g.avg_pos_mm, 5.0, 1e-12);
  EXPECT_NEAR(g.avg_rot_deg, 10.0, 1e-9);
  EXPECT_EQ(evaluate_single(c, origin, std::vector<Pose>(20, bad)).success_rate, 0.0);
  EXPECT_THROW(evaluate_single(c, origin, {}), Error);
}

TEST(EvaluateSingle, AggregatesMatchBruteForce) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const auto poses = test_poses(c, 100, 2);
  const GoalSet goals = GoalSet::cartesian_only();
  GaConfig ga;
  ga.population = 16;
  ga.generations = 3;
  const PoseSolver solver = [&](const Pose& p) { return ga_solve(c, p, goals, ga); };
  const EvalReport r = evaluate_single(c, solver, poses);
  ASSERT_EQ(r.rows.size(), 100u);
  double sp = 0, sr = 0, mn = 1e300, mx = -1, rmn = 1e300, rmx = -1;
  int ok = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const SolutionBatch s = solver(poses[i]);
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.size(); ++k)
      if (s.cost[k] < s.cost[best]) best = k;
    const PoseError e = pose_error(poses[i], fk(c, s.configs[best]));
    ASSERT_EQ(r.rows[i].pos_mm, e.pos_err_mm);
    ASSERT_EQ(r.rows[i].rot_deg, e.rot_err_deg);
    sp += e.pos_err_mm;
    sr += e.rot_err_deg;
    mn = std::min(mn, e.pos_err_mm);
    mx = std::max(mx, e.pos_err_mm);
    rmn = std::min(rmn, e.rot_err_deg);
    rmx = std::max(rmx, e.rot_err_deg);
    ok += e.pos_err_mm <= 10.0 && e.rot_err_deg <= 20.0;
  }
  EXPECT_EQ(r.avg_pos_mm, sp / 100.0);
  EXPECT_EQ(r.avg_rot_deg, sr / 100.0);
  EXPECT_EQ(r.min_pos_mm, mn);
  EXPECT_EQ(r.max_pos_mm, mx);
  EXPECT_EQ(r.min_rot_deg, rmn);
  EXPECT_EQ(r.max_rot_deg, rmx);
  EXPECT_EQ(r.success_rate, 100.0 * ok / 100.0);
  EXPECT_LE(r.min_pos_mm, r.avg_pos_mm);
  EXPECT_LE(r.avg_pos_mm, r.max_pos_mm);
}

TEST(EvaluateSingle, SuccessMonotoneInThresholds) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const auto poses = test_poses(c, 100, 3);
  GaConfig ga;
  ga.population = 8;
  ga.generations = 2;
  const PoseSolver solver = [&](const Pose& p) { return ga_solve(c, p, GoalSet::cartesian_only(), ga); };
  double prev = -1.0;
  for (double s : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    const double rate = evaluate_single(c, solver, poses, {10.0 * s, 20.0 * s}).success_rate;
    EXPECT_GE(rate, prev);
    prev = rate;
  }
}

TEST(EvaluateSingle, BestOfNNoWorseThanFirstOfN) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  const auto poses = test_poses(c, 40, 4);
  std::mt19937_64 rng(5);
  std::vector<std::vector<JointConfig>> sets;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    std::vector<JointConfig> s;
    for (int k = 0; k < 10; ++k) s.push_back(random_config(c, rng));
    sets.push_back(s);
  }
  std::size_t a = 0, b = 0;
  const PoseSolver all = [&](const Pose& p) { return evaluate_solutions(c, p, GoalSet::cartesian_only(), sets[a++]); };
  const PoseSolver first = [&](const Pose& p) { return evaluate_solutions(c, p, GoalSet::cartesian_only(), {sets[b++][0]}); };
  EXPECT_LE(evaluate_single(c, all, poses).avg_pos_mm, evaluate_single(c, first, poses).avg_pos_mm);
}

TEST(EvaluateMulti, ConstantGeneratorMatchesSingleSolution) {
  const KinematicChain c = load_chain(chain_path("spatial4"));
  IkModel m = generator(c, 1);
  m.net.layers[0].weight.rightCols(3).setZero();  // noise has no effect
  const auto poses = test_poses(c, 20, 6);
  const EvalReport multi = evaluate_multi(c, m, poses, 50, 1);
  const PoseSolver single = [&](const Pose& p) {
    return evaluate_solutions(c, p, GoalSet::cartesian_only(), m.solve({p}, Eigen::MatrixXd::Zero(3, 1)));
  };
  const EvalReport one = evaluate_single(c, single, poses);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_NEAR(multi.rows[i].pos_mm, one.rows[i].pos_mm, 1e-9);
    EXPECT_NEAR(multi.rows[i].min_pos_mm, one.rows[i].pos_mm, 1e-9);
    EXPECT_EQ(multi.rows[i].solutions, 50u);
  }
}

TEST(EvaluateMulti, RowsMatchBruteForce) {
  const KinematicChain c = load_chain(chain_path("planar4"));
  const IkModel m = generator(c, 2);
  const auto poses = test_poses(c, 100, 7);
  const EvalReport r = evaluate_multi(c, m, poses, 30, 9);
  std::mt19937_64 rng(9);
  double sum_mean = 0.0, sum_min = 0.0;
  int ok = 0, ok_best = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto sols = m.solve(std::vector<Pose>(30, poses[i]), uniform_noise(3, 30, rng));
    double mean = 0.0, mean_rot = 0.0, mn = 1e300, mn_rot = 1e300;
    for (const auto& q : sols) {
      const PoseError e = pose_error(poses[i], fk(c, q));
      mean += e.pos_err_mm;
      mean_rot += e.rot_err_deg;
      mn = std::min(mn, e.pos_err_mm);
      mn_rot = std::min(mn_rot, e.rot_err_deg);
    }
    mean /= 30.0;
    mean_rot /= 30.0;
    ASSERT_EQ(r.rows[i].pos_mm, mean);
    ASSERT_EQ(r.rows[i].rot_deg, mean_rot);
    ASSERT_EQ(r.rows[i].min_pos_mm, mn);
    ASSERT_EQ(r.rows[i].min_rot_deg, mn_rot);
    sum_mean += mean;
    sum_min += mn;
    ok += mean <= 10.0 && mean_rot <= 20.0;
    ok_best += mn <= 10.0 && mn_rot <= 20.0;
  }
  EXPECT_EQ(r.avg_pos_mm, sum_mean / 100.0);
  EXPECT_EQ(r.avg_min_pos_mm, sum_min / 100.0);
  EXPECT_EQ(r.success_rate, ok);
  EXPECT_EQ(evaluate_multi(c, m, poses, 30, 9, {}, true).success_rate, ok_best);
  EXPECT_THROW(evaluate_multi(c, m, poses, 1, 9), Error);
}

TEST(EvaluateMulti, DeterministicForSeed) {
  const KinematicChain c = load_chain(chain_path("planar4"));
  const IkModel m = generator(c, 3);
  const auto poses = test_poses(c, 10, 8);
  EXPECT_EQ(report_rows_csv(evaluate_multi(c, m, poses, 20, 4)), report_rows_csv(evaluate_multi(c, m, poses, 20, 4)));
  EXPECT_EQ(report_summary(evaluate_multi(c, m, poses, 20, 4)).dump(), report_summary(evaluate_multi(c, m, poses, 20, 4)).dump());
}

TEST(Bench, PreconditionsAndStats) {
  std::vector<Pose> poses(4);
  int calls = 0;
  auto solve = [&](const Pose&) { ++calls; };
  EXPECT_THROW(bench_runtime(solve, poses, 1), Error);
  EXPECT_THROW(bench_runtime(solve, {}, 5), Error);
  calls = 0;
  const TimingStats s = bench_runtime(solve, poses, 5);
  EXPECT_EQ(calls, 21);  // warm-up plus 4 x 5
  EXPECT_EQ(s.samples, 20u);
  EXPECT_LE(s.median_ms, s.p95_ms);
}

TEST(Bench, DeskNetworksAreFast) {
  const KinematicChain c = load_chain(chain_path("arm8"));
  IkModel mlp;
  mlp.normalizer = Normalizer::from(c, WorkspaceBounds::small_workspace());
  mlp.net = mlp_preset(Workspace::Small, 8, 0.1, 1);
  IkModel gan = mlp;
  gan.kind = ModelKind::Gan;
  std::tie(gan.net, gan.noise_dim) = gan_preset(Workspace::Small, 8, 0.1, 1);
  const auto poses = test_poses(c, 20, 9);
  const TimingStats m = bench_runtime([&](const Pose& p) { mlp.solve({p}); }, poses, 5);
  EXPECT_LT(m.median_ms, 1.0);
  std::mt19937_64 rng(1);
  const TimingStats g = bench_runtime([&](const Pose& p) { neural_solutions(gan, p, 500, 1); }, poses, 3);
  EXPECT_LT(g.median_ms, 10.0);
}
