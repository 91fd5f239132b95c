#pragma once

// Kinematic chain data model: quaternions, rigid transforms, revolute joints
// and the JSON chain-definition format.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cycleik {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChainError : public Error {
 public:
  using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kRadToDeg = 180.0 / kPi;

/// Hamilton quaternion stored scalar-last as (x, y, z, w).
struct Quaternion {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;

  static Quaternion identity() { return {}; }

  static Quaternion from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double s = std::sin(0.5 * angle);
    return {axis.x() * s, axis.y() * s, axis.z() * s, std::cos(0.5 * angle)};
  }

  /// Fixed-axis X-Y-Z roll/pitch/yaw, i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Quaternion from_rpy(double roll, double pitch, double yaw) {
    const double cr = std::cos(0.5 * roll), sr = std::sin(0.5 * roll);
    const double cp = std::cos(0.5 * pitch), sp = std::sin(0.5 * pitch);
    const double cy = std::cos(0.5 * yaw), sy = std::sin(0.5 * yaw);
    return {sr * cp * cy - cr * sp * sy, cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy, cr * cp * cy + sr * sp * sy};
  }

  static Quaternion from_coeffs(const Eigen::Vector4d& c) { return {c[0], c[1], c[2], c[3]}; }

  Eigen::Vector4d coeffs() const { return {x, y, z, w}; }

  double dot(const Quaternion& o) const { return x * o.x + y * o.y + z * o.z + w * o.w; }
  double norm() const { return std::sqrt(dot(*this)); }

  Quaternion normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n, w / n};
  }

  Quaternion conjugate() const { return {-x, -y, -z, w}; }
  Quaternion operator-() const { return {-x, -y, -z, -w}; }

  /// Representative with w >= 0 (ties broken on the first non-zero vector part).
  Quaternion canonical() const {
    if (w > 0.0) return *this;
    if (w < 0.0) return -*this;
    for (double c : {x, y, z}) {
      if (c > 0.0) return *this;
      if (c < 0.0) return -*this;
    }
    return *this;
  }

  Eigen::Matrix3d to_matrix() const {
    Eigen::Matrix3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return m;
  }

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const {
    // v + 2 u x (u x v + w v), u = vector part
    const Eigen::Vector3d u(x, y, z);
    const Eigen::Vector3d t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  /// Inverse of from_rpy; pitch in [-pi/2, pi/2].
  Eigen::Vector3d to_rpy() const {
    const double sinp = std::clamp(2.0 * (w * y - z * x), -1.0, 1.0);
    const double roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
    const double pitch = std::asin(sinp);
    const double yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
    return {roll, pitch, yaw};
  }
};

/// Raw Hamilton product, no renormalization.
inline Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
          a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
}

/// Hamilton product of unit quaternions. The result is renormalized once its
/// norm drifts by more than 1e-12, so products with the identity stay exact.
inline Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  const Quaternion p = hamilton(a, b);
  const double n = p.norm();
  if (std::abs(n - 1.0) > 1e-12) return {p.x / n, p.y / n, p.z / n, p.w / n};
  return p;
}

/// Geodesic angle between two rotations in degrees, in [0, 180].
/// Uses atan2 on the relative rotation, which stays accurate for tiny angles
/// where acos(|a.b|) loses about half the digits.
inline double quat_angle_deg(const Quaternion& a, const Quaternion& b) {
  // Vector and scalar parts of conj(a) * b, grouped so a == +-b cancels exactly.
  const double vx = (a.w * b.x - b.w * a.x) - (a.y * b.z - a.z * b.y);
  const double vy = (a.w * b.y - b.w * a.y) - (a.z * b.x - a.x * b.z);
  const double vz = (a.w * b.z - b.w * a.z) - (a.x * b.y - a.y * b.x);
  const double w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  return 2.0 * std::atan2(std::sqrt(vx * vx + vy * vy + vz * vz), std::abs(w)) * kRadToDeg;
}

struct Transform {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Quaternion rotation;

  static Transform identity() { return {}; }

  static Transform from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
    return {xyz, Quaternion::from_rpy(rpy[0], rpy[1], rpy[2])};
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return translation + rotation.rotate(p); }

  Eigen::Matrix4d to_matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.to_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// a * b: first apply b, then a.
inline Transform compose(const Transform& a, const Transform& b) {
  return {a.translation + a.rotation.rotate(b.translation), quat_mul(a.rotation, b.rotation)};
}

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Quaternion orientation;

  /// (px, py, pz, qx, qy, qz, qw)
  Eigen::Matrix<double, 7, 1> vector() const {
    Eigen::Matrix<double, 7, 1> v;
    v << position, orientation.x, orientation.y, orientation.z, orientation.w;
    return v;
  }

  static Pose from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() != 7) throw Error("pose vector must have 7 components");
    return {v.head<3>(), {v[3], v[4], v[5], v[6]}};
  }
};

/// Revolute joint: child frame = origin * Rot(axis, angle).
struct JointSpec {
  std::string name;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Transform origin;
  double lower = -kPi;
  double upper = kPi;
};

class KinematicChain {
 public:
  KinematicChain() = default;

  KinematicChain(std::string name, std::vector<JointSpec> joints, Transform tip)
      : name_(std::move(name)), joints_(std::move(joints)), tip_(std::move(tip)) {
    validate();
  }

  const std::string& name() const { return name_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const JointSpec& joint(std::size_t i) const { return joints_.at(i); }
  const Transform& tip() const { return tip_; }
  int dof() const { return static_cast<int>(joints_.size()); }

  Eigen::VectorXd lower_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[i].lower;
    return v;
  }

  Eigen::VectorXd upper_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[i].upper;
    return v;
  }

  bool within_limits(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    if (q.size() != dof()) return false;
    for (int i = 0; i < dof(); ++i)
      if (!(q[i] >= joints_[i].lower && q[i] <= joints_[i].upper)) return false;
    return true;
  }

  Eigen::VectorXd clamp(Eigen::VectorXd q) const {
    for (int i = 0; i < dof(); ++i) q[i] = std::clamp(q[i], joints_[i].lower, joints_[i].upper);
    return q;
  }

 private:
  void validate() const {
    if (joints_.empty()) throw ChainError("chain '" + name_ + "': needs at least one joint");
    std::set<std::string> names;
    for (const auto& j : joints_) {
      if (!names.insert(j.name).second)
        throw ChainError("joint '" + j.name + "': duplicate joint name");
      if (std::abs(j.axis.norm() - 1.0) > 1e-9)
        throw ChainError("joint '" + j.name + "': axis: non-unit axis");
      if (!(j.lower < j.upper))
        throw ChainError("joint '" + j.name + "': limits: lower must be < upper");
    }
  }

  std::string name_;
  std::vector<JointSpec> joints_;
  Transform tip_;
};

namespace detail {

inline Eigen::Vector3d read_vec3(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ChainError(where + ": expected array of 3 numbers");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ChainError(where + ": expected array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline Transform read_xyz_rpy(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ChainError(where + ": expected object with xyz/rpy");
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero(), rpy = Eigen::Vector3d::Zero();
  if (j.contains("xyz")) xyz = read_vec3(j["xyz"], where + ".xyz");
  if (j.contains("rpy")) rpy = read_vec3(j["rpy"], where + ".rpy");
  return Transform::from_xyz_rpy(xyz, rpy);
}

inline nlohmann::json write_xyz_rpy(const Transform& t) {
  const Eigen::Vector3d rpy = t.rotation.to_rpy();
  return {{"xyz", {t.translation.x(), t.translation.y(), t.translation.z()}},
          {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
}

}  // namespace detail

inline KinematicChain parse_chain(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ChainError(std::string("malformed chain document: ") + e.what());
  }
  if (!doc.is_object()) throw ChainError("malformed chain document: top level must be an object");
  if (!doc.contains("joints") || !doc["joints"].is_array())
    throw ChainError("malformed chain document: missing 'joints' array");

  std::vector<JointSpec> joints;
  for (std::size_t i = 0; i < doc["joints"].size(); ++i) {
    const auto& jj = doc["joints"][i];
    JointSpec spec;
    if (!jj.is_object() || !jj.contains("name") || !jj["name"].is_string())
      throw ChainError("joint #" + std::to_string(i) + ": name: missing or not a string");
    spec.name = jj["name"].get<std::string>();
    const std::string where = "joint '" + spec.name + "'";
    if (!jj.contains("axis")) throw ChainError(where + ": axis: missing");
    spec.axis = detail::read_vec3(jj["axis"], where + ": axis");
    if (std::abs(spec.axis.norm() - 1.0) > 1e-9) throw ChainError(where + ": axis: non-unit axis");
    if (jj.contains("origin")) spec.origin = detail::read_xyz_rpy(jj["origin"], where + ": origin");
    if (!jj.contains("limits") || !jj["limits"].is_object())
      throw ChainError(where + ": limits: missing");
    const auto& lim = jj["limits"];
    if (!lim.contains("lower") || !lim["lower"].is_number() || !lim.contains("upper") ||
        !lim["upper"].is_number())
      throw ChainError(where + ": limits: lower/upper must be numbers");
    spec.lower = lim["lower"].get<double>();
    spec.upper = lim["upper"].get<double>();
    joints.push_back(std::move(spec));
  }
  Transform tip;
  if (doc.contains("tip")) tip = detail::read_xyz_rpy(doc["tip"], "tip");
  const std::string name = doc.value("name", std::string("chain"));
  return KinematicChain(name, std::move(joints), tip);
}

inline KinematicChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ChainError("cannot open chain file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_chain(ss.str());
}

inline std::string serialize_chain(const KinematicChain& chain) {
  nlohmann::json doc;
  doc["name"] = chain.name();
  doc["joints"] = nlohmann::json::array();
  for (const auto& j : chain.joints()) {
    doc["joints"].push_back({{"name", j.name},
                             {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                             {"origin", detail::write_xyz_rpy(j.origin)},
                             {"limits", {{"lower", j.lower}, {"upper", j.upper}}}});
  }
  doc["tip"] = detail::write_xyz_rpy(chain.tip());
  return doc.dump(2);
}

/// 64-bit FNV-1a, used for content digests of chains, configs and parameters.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Digest of the canonical serialization, so formatting changes do not alter it.
inline std::string chain_hash(const KinematicChain& chain) {
  return hex64(fnv1a64(serialize_chain(chain)));
}

}  // namespace cycleik
