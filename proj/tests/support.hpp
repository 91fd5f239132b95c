#pragma once

// Shared test helpers and independent oracles. The oracles avoid the library's
// quaternion code: rotations are built as 3x3 matrices from elementary axis
// rotations and Rodrigues' formula.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cycleik/cycleik.hpp"

namespace testing_support {

using namespace cycleik;

inline std::string chain_path(const std::string& name) {
  return std::string(CYCLEIK_DATA_DIR) + "/chains/" + name + ".json";
}

inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
  Eigen::Matrix3d k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

inline Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
inline Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

inline Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Origin transform from the raw xyz/rpy numbers of a chain document.
inline Eigen::Matrix4d xyz_rpy_matrix(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
  return homogeneous(rot_z(rpy[2]) * rot_y(rpy[1]) * rot_x(rpy[0]), xyz);
}

/// Chain description kept as raw numbers so the oracle never touches the
/// library's quaternion conversion.
struct RawJoint {
  Eigen::Vector3d axis, xyz, rpy;
  double lower, upper;
};

struct RawChain {
  std::vector<RawJoint> joints;
  Eigen::Vector3d tip_xyz, tip_rpy;

  std::string json() const {
    nlohmann::json doc;
    doc["name"] = "random";
    doc["joints"] = nlohmann::json::array();
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const auto& j = joints[i];
      doc["joints"].push_back({{"name", "j" + std::to_string(i)},
                               {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                               {"origin", {{"xyz", {j.xyz.x(), j.xyz.y(), j.xyz.z()}},
                                           {"rpy", {j.rpy.x(), j.rpy.y(), j.rpy.z()}}}},
                               {"limits", {{"lower", j.lower}, {"upper", j.upper}}}});
    }
    doc["tip"] = {{"xyz", {tip_xyz.x(), tip_xyz.y(), tip_xyz.z()}}, {"rpy", {tip_rpy.x(), tip_rpy.y(), tip_rpy.z()}}};
    return doc.dump();
  }

  KinematicChain chain() const { return parse_chain(json()); }
};

inline RawChain raw_chain_from_file(const std::string& path) {
  std::ifstream in(path);
  const nlohmann::json doc = nlohmann::json::parse(in);
  auto vec = [](const nlohmann::json& j) { return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()); };
  RawChain c;
  for (const auto& j : doc["joints"])
    c.joints.push_back({vec(j["axis"]), vec(j["origin"]["xyz"]), vec(j["origin"]["rpy"]), j["limits"]["lower"].get<double>(),
                        j["limits"]["upper"].get<double>()});
  c.tip_xyz = vec(doc["tip"]["xyz"]);
  c.tip_rpy = vec(doc["tip"]["rpy"]);
  return c;
}

inline RawChain random_raw_chain(int dof, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  RawChain c;
  for (int i = 0; i < dof; ++i) {
    RawJoint j;
    Eigen::Vector3d a(n(rng), n(rng), n(rng));
    j.axis = a.normalized();
    j.xyz = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.3;
    j.rpy = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
    j.lower = -2.0 + 0.5 * u(rng);
    j.upper = 2.0 + 0.5 * u(rng);
    c.joints.push_back(j);
  }
  c.tip_xyz = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.2;
  c.tip_rpy = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return c;
}

/// Tip frame as a product of 4x4 homogeneous matrices.
inline Eigen::Matrix4d oracle_fk(const RawChain& c, const Eigen::VectorXd& q) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < c.joints.size(); ++i) {
    const auto& j = c.joints[i];
    t = t * xyz_rpy_matrix(j.xyz, j.rpy) * homogeneous(rodrigues(j.axis, q[static_cast<Eigen::Index>(i)]),
                                                       Eigen::Vector3d::Zero());
  }
  return t * xyz_rpy_matrix(c.tip_xyz, c.tip_rpy);
}

/// Rotation matrix of a unit quaternion written out from its definition.
inline Eigen::Matrix3d quat_matrix(double x, double y, double z, double w) {
  Eigen::Matrix3d m;
  m << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return m;
}

inline Eigen::Matrix3d quat_matrix(const Quaternion& q) { return quat_matrix(q.x, q.y, q.z, q.w); }

/// Angle of the rotation log of R in degrees: atan2(|vee(R - R^T)| / 2, (tr R - 1) / 2).
inline double log_angle_deg(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (r.trace() - 1.0)) * 180.0 / M_PI;
}

inline Quaternion random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

inline Eigen::VectorXd random_config(const KinematicChain& chain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd q(chain.dof());
  for (int i = 0; i < chain.dof(); ++i) q[i] = chain.joint(i).lower + u(rng) * (chain.joint(i).upper - chain.joint(i).lower);
  return q;
}

/// Planar chain with z axes and the given link lengths; joint limits +-pi.
inline KinematicChain planar_chain(const std::vector<double>& links, double lower = -M_PI, double upper = M_PI) {
  std::vector<JointSpec> joints;
  double offset = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    JointSpec j;
    j.name = "j" + std::to_string(i);
    j.axis = Eigen::Vector3d::UnitZ();
    j.origin.translation = Eigen::Vector3d(offset, 0, 0);
    j.lower = lower;
    j.upper = upper;
    joints.push_back(j);
    offset = links[i];
  }
  Transform tip;
  tip.translation = Eigen::Vector3d(offset, 0, 0);
  return KinematicChain("planar", joints, tip);
}

/// One z-axis joint with the tip on the axis: the tip stays at the origin and
/// only turns.
inline KinematicChain rotor_chain() {
  JointSpec j;
  j.name = "rotor";
  j.axis = Eigen::Vector3d::UnitZ();
  j.lower = -M_PI;
  j.upper = M_PI;
  return KinematicChain("rotor", {j}, Transform::identity());
}

/// Target whose error against the identity pose at the origin is exactly
/// `mm` and `deg` as computed by pose_error (found by stepping through
/// neighbouring doubles).
inline Pose boundary_target(double mm, double deg) {
  const Pose origin{Eigen::Vector3d::Zero(), Quaternion::identity()};
  auto make = [](double d, double a) {
    return Pose{{d, 0, 0}, Quaternion::from_axis_angle(Eigen::Vector3d::UnitZ(), a)};
  };
  double d = mm / 1000.0, a = deg / kRadToDeg;
  for (int k = 0; k < 1000 && pose_error(make(d, a), origin).pos_err_mm != mm; ++k)
    d = std::nextafter(d, pose_error(make(d, a), origin).pos_err_mm < mm ? 1.0 : -1.0);
  for (int k = 0; k < 1000 && pose_error(make(d, a), origin).rot_err_deg != deg; ++k)
    a = std::nextafter(a, pose_error(make(d, a), origin).rot_err_deg < deg ? 4.0 : -4.0);
  return make(d, a);
}

}  // namespace testing_support
