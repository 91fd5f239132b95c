#pragma once

// Test-set evaluation (error aggregation, success rate) and solve-time
// benchmarking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cycleik/chain.hpp"
#include "cycleik/kinematics.hpp"
#include "cycleik/neural.hpp"
#include "cycleik/solvers.hpp"
#include "json.hpp"

namespace cycleik {

/// A pose counts as solved when both errors are at or below the thresholds.
struct SuccessThresholds {
  double pos_mm = 10.0;
  double rot_deg = 20.0;

  bool success(double pos, double rot) const { return pos <= pos_mm && rot <= rot_deg; }
};

struct PoseEvalRow {
  std::size_t index = 0;
  double pos_mm = 0.0;   // single: best solution; multi: batch mean
  double rot_deg = 0.0;
  double min_pos_mm = 0.0;  // multi only: batch minimum
  double min_rot_deg = 0.0;
  std::size_t solutions = 1;
  bool success = false;
};

struct EvalReport {
  bool multi = false;
  double avg_pos_mm = 0.0, min_pos_mm = 0.0, max_pos_mm = 0.0;
  double avg_rot_deg = 0.0, min_rot_deg = 0.0, max_rot_deg = 0.0;
  double avg_min_pos_mm = 0.0, avg_min_rot_deg = 0.0;  // multi only
  double success_rate = 0.0;                           // percent
  std::optional<double> mean_solve_time_ms;
  std::vector<PoseEvalRow> rows;
};

using PoseSolver = std::function<SolutionBatch(const Pose&)>;

namespace detail {

inline void aggregate(EvalReport& r) {
  if (r.rows.empty()) throw Error("empty test set");
  r.min_pos_mm = r.min_rot_deg = std::numeric_limits<double>::infinity();
  r.max_pos_mm = r.max_rot_deg = -std::numeric_limits<double>::infinity();
  double sp = 0.0, sr = 0.0, smp = 0.0, smr = 0.0;
  std::size_t ok = 0;
  for (const auto& row : r.rows) {
    sp += row.pos_mm;
    sr += row.rot_deg;
    smp += row.min_pos_mm;
    smr += row.min_rot_deg;
    r.min_pos_mm = std::min(r.min_pos_mm, row.pos_mm);
    r.max_pos_mm = std::max(r.max_pos_mm, row.pos_mm);
    r.min_rot_deg = std::min(r.min_rot_deg, row.rot_deg);
    r.max_rot_deg = std::max(r.max_rot_deg, row.rot_deg);
    ok += row.success ? 1 : 0;
  }
  const double n = static_cast<double>(r.rows.size());
  r.avg_pos_mm = sp / n;
  r.avg_rot_deg = sr / n;
  r.avg_min_pos_mm = smp / n;
  r.avg_min_rot_deg = smr / n;
  r.success_rate = 100.0 * static_cast<double>(ok) / n;
}

}  // namespace detail

/// Runs `solver` on every test pose and scores the lowest-cost solution.
/// Errors are recomputed from the returned configuration via fk.
inline EvalReport evaluate_single(const KinematicChain& chain, const PoseSolver& solver,
                                  const std::vector<Pose>& test_set, const SuccessThresholds& thr = {},
                                  bool measure_time = false) {
  if (test_set.empty()) throw Error("empty test set");
  EvalReport r;
  double total_ms = 0.0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const SolutionBatch sols = solver(test_set[i]);
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (sols.empty()) throw Error("solver returned no solution for test pose " + std::to_string(i));
    const PoseError e = pose_error(test_set[i], fk(chain, sols.configs[sols.best_index()]));
    PoseEvalRow row;
    row.index = i;
    row.pos_mm = row.min_pos_mm = e.pos_err_mm;
    row.rot_deg = row.min_rot_deg = e.rot_err_deg;
    row.solutions = sols.size();
    row.success = thr.success(e.pos_err_mm, e.rot_err_deg);
    r.rows.push_back(row);
  }
  detail::aggregate(r);
  if (measure_time) r.mean_solve_time_ms = total_ms / static_cast<double>(test_set.size());
  return r;
}

/// Generator evaluation: `samples_per_pose` noise draws per pose. The row's
/// main columns are the batch-mean errors; the min columns are the smallest
/// position and rotation errors within the batch. Success is judged on the
/// batch mean unless `success_on_best` is set.
inline EvalReport evaluate_multi(const KinematicChain& chain, const IkModel& model, const std::vector<Pose>& test_set,
                                 int samples_per_pose = 500, std::uint64_t noise_seed = 0,
                                 const SuccessThresholds& thr = {}, bool success_on_best = false,
                                 bool measure_time = false) {
  if (test_set.empty()) throw Error("empty test set");
  if (samples_per_pose < 2) throw Error("samples_per_pose must be >= 2");
  if (model.dof() != chain.dof()) throw Error("model dof does not match chain dof");
  EvalReport r;
  r.multi = true;
  double total_ms = 0.0;
  std::mt19937_64 rng(noise_seed);
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd z = uniform_noise(std::max(model.noise_dim, 1), samples_per_pose, rng);
    const auto configs = model.solve(std::vector<Pose>(static_cast<std::size_t>(samples_per_pose), test_set[i]),
                                     model.noise_dim > 0 ? z : Eigen::MatrixXd());
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    PoseEvalRow row;
    row.index = i;
    row.solutions = configs.size();
    row.min_pos_mm = row.min_rot_deg = std::numeric_limits<double>::infinity();
    for (const auto& q : configs) {
      const PoseError e = pose_error(test_set[i], fk(chain, q));
      row.pos_mm += e.pos_err_mm;
      row.rot_deg += e.rot_err_deg;
      row.min_pos_mm = std::min(row.min_pos_mm, e.pos_err_mm);
      row.min_rot_deg = std::min(row.min_rot_deg, e.rot_err_deg);
    }
    row.pos_mm /= static_cast<double>(configs.size());
    row.rot_deg /= static_cast<double>(configs.size());
    row.success = success_on_best ? thr.success(row.min_pos_mm, row.min_rot_deg) : thr.success(row.pos_mm, row.rot_deg);
    r.rows.push_back(row);
  }
  detail::aggregate(r);
  if (measure_time) r.mean_solve_time_ms = total_ms / static_cast<double>(test_set.size());
  return r;
}

inline std::string report_rows_csv(const EvalReport& r) {
  std::string s = r.multi ? "index,mean_pos_mm,mean_rot_deg,min_pos_mm,min_rot_deg,solutions,success\n"
                          : "index,pos_mm,rot_deg,solutions,success\n";
  char buf[256];
  for (const auto& row : r.rows) {
    if (r.multi)
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%zu,%d\n", row.index, row.pos_mm, row.rot_deg,
                    row.min_pos_mm, row.min_rot_deg, row.solutions, row.success ? 1 : 0);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%zu,%d\n", row.index, row.pos_mm, row.rot_deg, row.solutions,
                    row.success ? 1 : 0);
    s += buf;
  }
  return s;
}

/// Summary with the columns of the usual results table.
inline nlohmann::json report_summary(const EvalReport& r) {
  nlohmann::json j = {
      {"poses", r.rows.size()},
      {"position_mm", {{"avg", r.avg_pos_mm}, {"min", r.min_pos_mm}, {"max", r.max_pos_mm}}},
      {"orientation_deg", {{"avg", r.avg_rot_deg}, {"min", r.min_rot_deg}, {"max", r.max_rot_deg}}},
      {"success_rate_percent", r.success_rate},
      {"multi_solution", r.multi}};
  if (r.multi) j["avg_min"] = {{"position_mm", r.avg_min_pos_mm}, {"orientation_deg", r.avg_min_rot_deg}};
  if (r.mean_solve_time_ms) j["mean_solve_time_ms"] = *r.mean_solve_time_ms;
  return j;
}

struct TimingStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  std::size_t samples = 0;
};

/// Times `solve` on every pose `repetitions` times after one untimed warm-up
/// call. Percentiles use the nearest-rank method.
inline TimingStats bench_runtime(const std::function<void(const Pose&)>& solve, const std::vector<Pose>& poses,
                                 int repetitions) {
  if (repetitions < 3) throw Error("bench_runtime needs at least 3 repetitions");
  if (poses.empty()) throw Error("bench_runtime needs at least one pose");
  solve(poses.front());
  std::vector<double> times;
  times.reserve(poses.size() * static_cast<std::size_t>(repetitions));
  for (int rep = 0; rep < repetitions; ++rep) {
    for (const auto& p : poses) {
      const auto t0 = std::chrono::steady_clock::now();
      solve(p);
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
  }
  std::sort(times.begin(), times.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(times.size())));
    return times[std::clamp<std::size_t>(k, 1, times.size()) - 1];
  };
  TimingStats s;
  s.samples = times.size();
  s.median_ms = rank(0.5);
  s.p95_ms = rank(0.95);
  double sum = 0.0;
  for (double t : times) sum += t;
  s.mean_ms = sum / static_cast<double>(times.size());
  return s;
}

}  // namespace cycleik
