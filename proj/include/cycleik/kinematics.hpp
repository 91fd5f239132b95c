#pragma once

// Forward kinematics, analytic pose Jacobian and Cartesian error measures.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>

#include "cycleik/chain.hpp"

namespace cycleik {

using JointConfig = Eigen::VectorXd;

/// 7 x dof partials of (px, py, pz, qx, qy, qz, qw) w.r.t. each joint angle.
using PoseJacobian = Eigen::Matrix<double, 7, Eigen::Dynamic>;

namespace detail {

inline void check_dof(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (q.size() != chain.dof())
    throw Error("joint config has " + std::to_string(q.size()) + " entries, chain '" +
                chain.name() + "' has dof " + std::to_string(chain.dof()));
}

}  // namespace detail

inline Pose fk(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& q) {
  detail::check_dof(chain, q);
  Transform t;
  for (int i = 0; i < chain.dof(); ++i) {
    const JointSpec& j = chain.joints()[i];
    t = compose(t, j.origin);
    t = compose(t, {Eigen::Vector3d::Zero(), Quaternion::from_axis_angle(j.axis, q[i])});
  }
  t = compose(t, chain.tip());
  return {t.translation, t.rotation};
}

/// Forward kinematics plus the analytic Jacobian in one pass.
///
/// Positional column i is w_i x (p_tip - p_i) where w_i is the joint axis in
/// the base frame and p_i the joint origin. Because the rotation of joint i
/// enters the tip orientation as q_pre * exp(theta a / 2) * q_post, its
/// derivative is 0.5 * (w_i, 0) * q_tip.
inline Pose fk_with_jacobian(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& q,
                             PoseJacobian& jac) {
  detail::check_dof(chain, q);
  const int n = chain.dof();
  jac.resize(7, n);
  Eigen::Matrix<double, 3, Eigen::Dynamic> axes(3, n), origins(3, n);
  Transform t;
  for (int i = 0; i < n; ++i) {
    const JointSpec& j = chain.joints()[i];
    t = compose(t, j.origin);
    axes.col(i) = t.rotation.rotate(j.axis);
    origins.col(i) = t.translation;
    t = compose(t, {Eigen::Vector3d::Zero(), Quaternion::from_axis_angle(j.axis, q[i])});
  }
  t = compose(t, chain.tip());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d w = axes.col(i);
    jac.block<3, 1>(0, i) = w.cross(t.translation - origins.col(i));
    const Quaternion dq = hamilton({w.x(), w.y(), w.z(), 0.0}, t.rotation);
    jac(3, i) = 0.5 * dq.x;
    jac(4, i) = 0.5 * dq.y;
    jac(5, i) = 0.5 * dq.z;
    jac(6, i) = 0.5 * dq.w;
  }
  return {t.translation, t.rotation};
}

inline PoseJacobian fk_jacobian(const KinematicChain& chain, const Eigen::Ref<const Eigen::VectorXd>& q) {
  PoseJacobian jac;
  fk_with_jacobian(chain, q, jac);
  return jac;
}

struct PoseError {
  double pos_err_mm = 0.0;
  double rot_err_deg = 0.0;
  /// |dx|, |dy|, |dz| in mm followed by |roll|, |pitch|, |yaw| of the relative
  /// rotation in degrees. Reporting only.
  std::array<double, 6> per_axis{};

  double axis_mean_pos_mm() const { return (per_axis[0] + per_axis[1] + per_axis[2]) / 3.0; }
  double axis_mean_rot_deg() const { return (per_axis[3] + per_axis[4] + per_axis[5]) / 3.0; }
};

inline PoseError pose_error(const Pose& target, const Pose& reached) {
  PoseError e;
  const Eigen::Vector3d d = reached.position - target.position;
  e.pos_err_mm = d.norm() * 1000.0;
  e.rot_err_deg = quat_angle_deg(target.orientation, reached.orientation);
  const Eigen::Vector3d rpy =
      hamilton(target.orientation.conjugate(), reached.orientation).canonical().to_rpy();
  for (int i = 0; i < 3; ++i) {
    e.per_axis[i] = std::abs(d[i]) * 1000.0;
    e.per_axis[3 + i] = std::abs(rpy[i]) * kRadToDeg;
  }
  return e;
}

/// Sign (+1 or -1) applied to `reached` that minimizes the L1 distance of its
/// quaternion components to `target`. Ties resolve to +1.
inline double resolve_quat_sign(const Quaternion& target, const Quaternion& reached) {
  const Eigen::Vector4d t = target.coeffs(), r = reached.coeffs();
  return (r + t).lpNorm<1>() < (r - t).lpNorm<1>() ? -1.0 : 1.0;
}

/// Mean absolute position difference over the three axes, in meters.
inline double position_mae(const Pose& target, const Pose& reached) {
  return (reached.position - target.position).cwiseAbs().sum() / 3.0;
}

/// Mean absolute quaternion component difference with double-cover resolution.
inline double rotation_mae(const Pose& target, const Pose& reached) {
  const double s = resolve_quat_sign(target.orientation, reached.orientation);
  return (s * reached.orientation.coeffs() - target.orientation.coeffs()).cwiseAbs().sum() / 4.0;
}

}  // namespace cycleik
