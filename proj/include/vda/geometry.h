#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>

#include "vda/raster.h"

namespace vda {

// Continuous 2D coordinate. Used both for raster pixel positions and for
// normalized image-plane positions; the surrounding call site fixes the unit.
struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

// Point in a frame's K-applied camera space. The z component is the depth.
struct CameraPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static CameraPoint from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool behind_camera() const { return !(z > 0.0); }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

// Rodrigues formula with the small-angle series below 1e-8.
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

// Rigid camera-to-world transform: x_world = R * x_cam + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Pose inverse() const {
    Pose p;
    p.rotation = rotation.transpose();
    p.translation = -(rotation.transpose() * translation);
    return p;
  }

  // this ∘ other: first apply other, then this.
  Pose compose(const Pose& other) const {
    Pose p;
    p.rotation = rotation * other.rotation;
    p.translation = rotation * other.translation + translation;
    return p;
  }

  double orthonormality_error() const {
    return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
        .cwiseAbs()
        .maxCoeff();
  }

  // Projects the rotation back onto SO(3). Cheap no-op when already clean.
  void renormalize_rotation();
};

// Pinhole intrinsics. The only degree of freedom is the focal length,
// expressed in units of the image long-side half-width. The principal point
// is pinned to the image center ((W-1)/2, (H-1)/2) and never optimized.
struct Intrinsics {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double norm_scale = 1.0;  // (max(W,H)-1)/2, raster pixels per plane unit

  static Intrinsics for_image(int width, int height, double focal) {
    if (width < 2 || height < 2) {
      throw std::invalid_argument("Intrinsics: image must be at least 2x2");
    }
    if (!(focal > 0.0)) {
      throw std::invalid_argument("Intrinsics: focal must be positive");
    }
    Intrinsics k;
    k.focal = focal;
    k.cx = (width - 1) / 2.0;
    k.cy = (height - 1) / 2.0;
    k.norm_scale = (std::max(width, height) - 1) / 2.0;
    return k;
  }

  // Raster pixels -> centered normalized image plane (the p of the lift).
  PixelCoord plane_from_raster(const PixelCoord& p) const {
    return {(p.x - cx) / norm_scale, (p.y - cy) / norm_scale};
  }
  PixelCoord raster_from_plane(const PixelCoord& p) const {
    return {p.x * norm_scale + cx, p.y * norm_scale + cy};
  }

  // K c and K^-1 c with K = diag(u, u, 1).
  Eigen::Vector3d apply(const Eigen::Vector3d& c) const {
    return {focal * c.x(), focal * c.y(), c.z()};
  }
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& c) const {
    return {c.x() / focal, c.y() / focal, c.z()};
  }
};

// Lifts an image-plane coordinate with its (scaled) depth into the frame's
// K-applied camera space: scale * depth * [p_x, p_y, 1].
inline CameraPoint lift(const PixelCoord& p, double depth, double scale) {
  if (!(depth > 0.0) || !(scale > 0.0)) {
    throw std::invalid_argument("lift: depth and scale must be positive");
  }
  double z = scale * depth;
  return {p.x * z, p.y * z, z};
}

// Transfers a K-applied camera point of frame i into frame j's K-applied
// camera space: K_j R_j^T (R_i K_i^-1 c + t_i - t_j). The result may land
// behind the camera; the caller must test and discard.
CameraPoint reproject(const CameraPoint& c, const Pose& pose_i,
                      const Pose& pose_j, const Intrinsics& K_i,
                      const Intrinsics& K_j);

// Perspective divide back to the image plane.
inline PixelCoord to_pixel(const CameraPoint& c) {
  if (c.behind_camera()) {
    throw std::invalid_argument("to_pixel: point is behind the camera");
  }
  return {c.x / c.z, c.y / c.z};
}

}  // namespace vda
