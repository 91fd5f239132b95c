#pragma once

// Dataset generation by uniform joint-space sampling, train/test/validation
// splitting, hull volume estimation and CSV storage with a JSON sidecar.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cycleik/chain.hpp"
#include "cycleik/convex_hull.hpp"
#include "cycleik/kinematics.hpp"
#include "json.hpp"

namespace cycleik {

class DatasetError : public Error {
 public:
  using Error::Error;
};

struct WorkspaceBounds {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1e9);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1e9);

  void validate() const {
    static const char* axis[3] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i)
      if (!(min[i] < max[i]))
        throw DatasetError(std::string("workspace bounds: min must be < max on the ") + axis[i] +
                           " axis");
  }

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }

  double box_volume_cm3() const { return (max - min).prod() * 1e6; }

  /// Shrinks the box by the given margin on each selected face.
  WorkspaceBounds with_margins(const Eigen::Vector3d& low_margin, const Eigen::Vector3d& high_margin) const {
    WorkspaceBounds b{min + low_margin, max - high_margin};
    b.validate();
    return b;
  }

  /// The right-arm tabletop region used for the small workspace.
  static WorkspaceBounds small_workspace() { return {{0.2, -0.9, 0.8}, {0.85, 0.0, 1.4}}; }
  static WorkspaceBounds full_workspace() { return {{0.2, -0.9, 0.8}, {0.85, 0.48, 1.4}}; }
};

struct SampleRecord {
  JointConfig config;
  Pose pose;
};

struct DatasetMeta {
  std::string chain_hash;
  WorkspaceBounds bounds;
  std::int64_t count = 0;
  std::uint64_t rng_seed = 0;
  double volume_cm3 = 0.0;
  double density = 0.0;  // samples per cm^3
  int dof = 0;
};

using ValidityPredicate = std::function<bool(const JointConfig&)>;

namespace detail {

/// Independent stream per record so output does not depend on worker count.
inline std::mt19937_64 record_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Draws `count` configurations uniformly within joint limits, keeping those
/// whose tip position falls inside `bounds` and that pass `validity`.
/// Aborts if fewer than 0.1% of attempts are accepted after 1e6 attempts.
inline std::vector<SampleRecord> generate(const KinematicChain& chain, const WorkspaceBounds& bounds,
                                          std::int64_t count, std::uint64_t rng_seed,
                                          const ValidityPredicate& validity = {}, int workers = 1) {
  if (count <= 0) throw DatasetError("sample count must be positive");
  bounds.validate();
  workers = std::max(1, workers);
  std::vector<SampleRecord> out(static_cast<std::size_t>(count));
  std::atomic<std::int64_t> attempts{0}, accepted{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const Eigen::VectorXd lo = chain.lower_limits(), hi = chain.upper_limits();

  auto worker = [&](int w) {
    try {
      for (std::int64_t k = w; k < count && !abort; k += workers) {
        auto rng = detail::record_stream(rng_seed, static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        JointConfig q(chain.dof());
        while (true) {
          if (abort) return;
          for (int i = 0; i < chain.dof(); ++i) q[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
          const std::int64_t n = ++attempts;
          const Pose p = fk(chain, q);
          if (bounds.contains(p.position) && (!validity || validity(q))) {
            ++accepted;
            out[static_cast<std::size_t>(k)] = {q, {p.position, p.orientation.canonical()}};
            break;
          }
          if (n >= 1000000 && static_cast<double>(accepted) < 1e-3 * static_cast<double>(n)) {
            std::ostringstream msg;
            msg << "acceptance rate " << static_cast<double>(accepted) / static_cast<double>(n)
                << " after " << n << " attempts is below 0.1%; workspace bounds are likely unreachable";
            throw DatasetError(msg.str());
          }
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      abort = true;
    }
  };

  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Axis-aligned box around the tip positions of `samples` random
/// configurations, padded by `margin` on every face. Used to pick bounds that
/// accept everything a test chain can reach.
inline WorkspaceBounds reach_bounds(const KinematicChain& chain, int samples = 20000, std::uint64_t rng_seed = 0,
                                    double margin = 0.01) {
  if (samples < 1) throw DatasetError("reach_bounds needs at least one sample");
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd lo = chain.lower_limits(), hi = chain.upper_limits();
  WorkspaceBounds b{Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity()),
                    Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity())};
  JointConfig q(chain.dof());
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < chain.dof(); ++i) q[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    const Eigen::Vector3d p = fk(chain, q).position;
    b.min = b.min.cwiseMin(p);
    b.max = b.max.cwiseMax(p);
  }
  b.min.array() -= margin;
  b.max.array() += margin;
  return b;
}

struct DatasetSplit {
  std::vector<SampleRecord> train, test, val;
};

/// Shuffled disjoint partition. Test and validation sizes are rounded down;
/// the remainder goes to training.
inline DatasetSplit split(const std::vector<SampleRecord>& records, double test_frac, double val_frac,
                          std::uint64_t rng_seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0 && val_frac > 0.0 && val_frac < 1.0) ||
      !(test_frac + val_frac < 1.0))
    throw DatasetError("split fractions must lie in (0,1) and sum to less than 1");
  const auto n = records.size();
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_frac));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_frac));
  if (n_test == 0 || n_val == 0 || n_test + n_val >= n)
    throw DatasetError("too few records (" + std::to_string(n) + ") for non-empty splits");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(rng_seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  DatasetSplit s;
  s.test.reserve(n_test);
  s.val.reserve(n_val);
  s.train.reserve(n - n_test - n_val);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[idx[i]];
    if (i < n_test)
      s.test.push_back(r);
    else if (i < n_test + n_val)
      s.val.push_back(r);
    else
      s.train.push_back(r);
  }
  return s;
}

/// Convex-hull volume of the sample positions in cm^3.
inline double estimate_volume(const std::vector<SampleRecord>& records) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(records.size());
  for (const auto& r : records) pts.push_back(r.pose.position);
  return convex_hull_volume(pts) * 1e6;
}

inline DatasetMeta make_meta(const KinematicChain& chain, const WorkspaceBounds& bounds,
                             const std::vector<SampleRecord>& records, std::uint64_t seed) {
  DatasetMeta m;
  m.chain_hash = chain_hash(chain);
  m.bounds = bounds;
  m.count = static_cast<std::int64_t>(records.size());
  m.rng_seed = seed;
  m.dof = chain.dof();
  try {
    m.volume_cm3 = estimate_volume(records);
  } catch (const DegenerateHullError&) {
    m.volume_cm3 = 0.0;
  }
  m.density = m.volume_cm3 > 0.0 ? static_cast<double>(m.count) / m.volume_cm3 : 0.0;
  return m;
}

/// "data/train.csv" -> "data/train.meta.json"
inline std::string meta_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".meta.json");
  return p.string();
}

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
  return {{"chain_hash", m.chain_hash},
          {"bounds",
           {{"min", {m.bounds.min.x(), m.bounds.min.y(), m.bounds.min.z()}},
            {"max", {m.bounds.max.x(), m.bounds.max.y(), m.bounds.max.z()}}}},
          {"count", m.count},
          {"rng_seed", m.rng_seed},
          {"volume_cm3", m.volume_cm3},
          {"density", m.density},
          {"dof", m.dof}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  try {
    DatasetMeta m;
    m.chain_hash = j.at("chain_hash").get<std::string>();
    for (int i = 0; i < 3; ++i) {
      m.bounds.min[i] = j.at("bounds").at("min").at(i).get<double>();
      m.bounds.max[i] = j.at("bounds").at("max").at(i).get<double>();
    }
    m.count = j.at("count").get<std::int64_t>();
    m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    m.volume_cm3 = j.at("volume_cm3").get<double>();
    m.density = j.at("density").get<double>();
    m.dof = j.at("dof").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed dataset metadata: ") + e.what());
  }
}

inline void write_dataset(const std::vector<SampleRecord>& records, const DatasetMeta& meta,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write dataset '" + path + "'");
  const int dof = meta.dof;
  for (int i = 0; i < dof; ++i) out << 'j' << i << ',';
  out << "px,py,pz,qx,qy,qz,qw\n";
  char buf[32];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << sep;
  };
  for (const auto& r : records) {
    if (r.config.size() != dof) throw DatasetError("record dof does not match metadata dof");
    for (int i = 0; i < dof; ++i) put(r.config[i], ',');
    const auto v = r.pose.vector();
    for (int i = 0; i < 7; ++i) put(v[i], i == 6 ? '\n' : ',');
  }
  if (!out) throw DatasetError("failed writing dataset '" + path + "'");
  std::ofstream mo(meta_path_for(path), std::ios::binary);
  if (!mo) throw DatasetError("cannot write dataset metadata for '" + path + "'");
  mo << meta_to_json(meta).dump(2) << '\n';
}

struct Dataset {
  std::vector<SampleRecord> records;
  DatasetMeta meta;
};

/// Reads a dataset and its sidecar. When `chain` is given the stored chain
/// hash must match; with `verify` every pose is recomputed via fk and must
/// agree within 1e-10 (quaternion sign-resolved).
inline Dataset read_dataset(const std::string& path, const KinematicChain* chain = nullptr,
                            bool verify = false) {
  std::ifstream mi(meta_path_for(path));
  if (!mi) throw DatasetError("missing dataset metadata for '" + path + "'");
  nlohmann::json mj;
  try {
    mi >> mj;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed dataset metadata: ") + e.what());
  }
  Dataset ds;
  ds.meta = meta_from_json(mj);
  if (chain) {
    if (ds.meta.chain_hash != chain_hash(*chain))
      throw DatasetError("chain hash mismatch: dataset '" + path + "' was generated for chain " +
                         ds.meta.chain_hash + ", got " + chain_hash(*chain));
    if (ds.meta.dof != chain->dof()) throw DatasetError("dataset dof does not match chain dof");
  }
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  const int dof = ds.meta.dof;
  const std::size_t cols = static_cast<std::size_t>(dof) + 7;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("dataset '" + path + "' is empty");
  std::size_t line_no = 1;
  std::vector<double> vals;
  vals.reserve(cols);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    vals.clear();
    const char* s = line.c_str();
    while (*s) {
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s) throw DatasetError("malformed row " + std::to_string(line_no) + ": bad number");
      vals.push_back(v);
      s = end;
      if (*s == ',') ++s;
      else if (*s != '\0' && *s != '\r')
        throw DatasetError("malformed row " + std::to_string(line_no) + ": bad separator");
      else if (*s == '\r') ++s;
    }
    if (vals.size() != cols)
      throw DatasetError("malformed row " + std::to_string(line_no) + ": expected " +
                         std::to_string(cols) + " columns, got " + std::to_string(vals.size()));
    SampleRecord r;
    r.config = Eigen::Map<const Eigen::VectorXd>(vals.data(), dof);
    r.pose = Pose::from_vector(Eigen::Map<const Eigen::VectorXd>(vals.data() + dof, 7));
    ds.records.push_back(std::move(r));
  }
  if (static_cast<std::int64_t>(ds.records.size()) != ds.meta.count)
    throw DatasetError("dataset '" + path + "' has " + std::to_string(ds.records.size()) +
                       " rows, metadata says " + std::to_string(ds.meta.count));
  if (verify) {
    if (!chain) throw DatasetError("verification requires a chain");
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& r = ds.records[i];
      const Pose p = fk(*chain, r.config);
      const double s = resolve_quat_sign(r.pose.orientation, p.orientation);
      const double dp = (p.position - r.pose.position).cwiseAbs().maxCoeff();
      const double dq = (s * p.orientation.coeffs() - r.pose.orientation.coeffs()).cwiseAbs().maxCoeff();
      if (dp > 1e-10 || dq > 1e-10)
        throw DatasetError("row " + std::to_string(i + 2) + ": stored pose does not match fk");
    }
  }
  return ds;
}

}  // namespace cycleik
