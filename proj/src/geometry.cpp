#include "vda/geometry.h"

#include <Eigen/SVD>
#include <cmath>

namespace vda {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d W;
  W << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return W;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d W = skew(w);
  if (theta2 < 1e-16) {
    // I + W + W^2/2, accurate to O(theta^3)
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  }
  const double theta = std::sqrt(theta2);
  return Eigen::Matrix3d::Identity() + W * (std::sin(theta) / theta) +
         W * W * ((1.0 - std::cos(theta)) / theta2);
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0),
                          R(1, 0) - R(0, 1));
  if (theta < 1e-8) {
    return 0.5 * w;
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the off-diagonal difference degenerates; recover the axis
    // from the symmetric part instead.
    Eigen::Matrix3d S = 0.5 * (R + Eigen::Matrix3d::Identity());
    Eigen::Vector3d axis(std::sqrt(std::max(S(0, 0), 0.0)),
                         std::sqrt(std::max(S(1, 1), 0.0)),
                         std::sqrt(std::max(S(2, 2), 0.0)));
    // Fix signs against the skew part.
    if (w.x() < 0) axis.x() = -axis.x();
    if (w.y() < 0) axis.y() = -axis.y();
    if (w.z() < 0) axis.z() = -axis.z();
    if (axis.norm() > 0) axis.normalize();
    return theta * axis;
  }
  return (0.5 * theta / std::sin(theta)) * w;
}

void Pose::renormalize_rotation() {
  if (orthonormality_error() < 1e-12) return;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  rotation = R;
}

CameraPoint reproject(const CameraPoint& c, const Pose& pose_i,
                      const Pose& pose_j, const Intrinsics& K_i,
                      const Intrinsics& K_j) {
  if (c.behind_camera()) {
    throw std::invalid_argument("reproject: source point has non-positive z");
  }
  const Eigen::Vector3d x_i = K_i.apply_inverse(c.vec());
  const Eigen::Vector3d world = pose_i.rotation * x_i + pose_i.translation;
  const Eigen::Vector3d x_j =
      pose_j.rotation.transpose() * (world - pose_j.translation);
  return CameraPoint::from(K_j.apply(x_j));
}

}  // namespace vda
