#pragma once

// Incremental 3-D convex hull, used to estimate the Cartesian volume covered
// by a dataset.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cycleik/chain.hpp"

namespace cycleik {

class DegenerateHullError : public Error {
 public:
  using Error::Error;
};

class ConvexHull3 {
 public:
  struct Face {
    int a, b, c;
    Eigen::Vector3d normal;  // unit, outward
    double offset;           // normal . x = offset on the plane
  };

  /// Throws DegenerateHullError when all points are (within eps) coplanar.
  explicit ConvexHull3(const std::vector<Eigen::Vector3d>& points, double eps = 1e-9)
      : pts_(points), eps_(eps) {
    build();
  }

  const std::vector<Face>& faces() const { return faces_; }

  double volume() const {
    double v = 0.0;
    for (const auto& f : faces_) v += pts_[f.a].dot(pts_[f.b].cross(pts_[f.c]));
    return v / 6.0;
  }

  bool contains(const Eigen::Vector3d& p, double tol = 1e-9) const {
    for (const auto& f : faces_)
      if (f.normal.dot(p) - f.offset > tol) return false;
    return true;
  }

 private:
  struct WorkFace {
    Face face;
    bool alive = true;
  };

  std::uint64_t key(int a, int b) const {
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(pts_.size()) +
           static_cast<std::uint64_t>(b);
  }

  bool make_face(int a, int b, int c, Face& f) const {
    const Eigen::Vector3d n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    if (len == 0.0) return false;
    f = {a, b, c, n / len, (n / len).dot(pts_[a])};
    return true;
  }

  void add_face(int a, int b, int c, std::vector<WorkFace>& work,
                std::unordered_map<std::uint64_t, int>& edges) {
    Face f;
    if (!make_face(a, b, c, f)) {
      // Sliver face from an on-plane point; keep topology with the previous normal direction.
      f = {a, b, c, Eigen::Vector3d::Zero(), 0.0};
    }
    const int idx = static_cast<int>(work.size());
    work.push_back({f, true});
    edges[key(a, b)] = idx;
    edges[key(b, c)] = idx;
    edges[key(c, a)] = idx;
  }

  void build() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw DegenerateHullError("convex hull needs at least 4 points");

    int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).norm();
      if (d > best) best = d, i1 = i;
    }
    if (i1 < 0 || best <= eps_) throw DegenerateHullError("degenerate point set: all points coincide");
    best = 0.0;
    const Eigen::Vector3d dir = (pts_[i1] - pts_[i0]).normalized();
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).cross(dir).norm();
      if (d > best) best = d, i2 = i;
    }
    if (i2 < 0 || best <= eps_) throw DegenerateHullError("degenerate point set: all points collinear");
    best = 0.0;
    const Eigen::Vector3d nrm = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    for (int i = 0; i < n; ++i) {
      const double d = std::abs((pts_[i] - pts_[i0]).dot(nrm));
      if (d > best) best = d, i3 = i;
    }
    if (i3 < 0 || best <= eps_) throw DegenerateHullError("degenerate point set: all points coplanar");

    std::vector<WorkFace> work;
    std::unordered_map<std::uint64_t, int> edges;
    if ((pts_[i3] - pts_[i0]).dot(nrm) > 0.0) std::swap(i1, i2);
    add_face(i0, i1, i2, work, edges);
    add_face(i0, i3, i1, work, edges);
    add_face(i1, i3, i2, work, edges);
    add_face(i2, i3, i0, work, edges);

    std::vector<int> alive = {0, 1, 2, 3};
    std::vector<int> visible;
    for (int p = 0; p < n; ++p) {
      if (p == i0 || p == i1 || p == i2 || p == i3) continue;
      visible.clear();
      for (int fi : alive) {
        const Face& f = work[fi].face;
        if (f.normal.dot(pts_[p]) - f.offset > eps_) visible.push_back(fi);
      }
      if (visible.empty()) continue;
      for (int fi : visible) work[fi].alive = false;

      std::vector<std::pair<int, int>> horizon;
      for (int fi : visible) {
        const Face& f = work[fi].face;
        const int vs[3] = {f.a, f.b, f.c};
        for (int e = 0; e < 3; ++e) {
          const int a = vs[e], b = vs[(e + 1) % 3];
          const auto it = edges.find(key(b, a));
          if (it != edges.end() && work[it->second].alive) horizon.emplace_back(a, b);
        }
      }
      for (int fi : visible) {
        const Face& f = work[fi].face;
        for (auto [a, b] : {std::pair{f.a, f.b}, std::pair{f.b, f.c}, std::pair{f.c, f.a}}) {
          const auto it = edges.find(key(a, b));
          if (it != edges.end() && it->second == fi) edges.erase(it);
        }
      }
      for (auto [a, b] : horizon) add_face(a, b, p, work, edges);

      std::vector<int> next;
      next.reserve(alive.size() + horizon.size());
      for (int fi : alive)
        if (work[fi].alive) next.push_back(fi);
      for (std::size_t k = work.size() - horizon.size(); k < work.size(); ++k)
        next.push_back(static_cast<int>(k));
      alive.swap(next);
    }
    for (int fi : alive) faces_.push_back(work[fi].face);
  }

  std::vector<Eigen::Vector3d> pts_;
  double eps_;
  std::vector<Face> faces_;
};

/// Volume of the convex hull of `points` in the input units cubed.
inline double convex_hull_volume(const std::vector<Eigen::Vector3d>& points) {
  return ConvexHull3(points).volume();
}

}  // namespace cycleik
