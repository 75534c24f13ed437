#pragma once

#include <Eigen/Core>
#include <vector>

#include "vda/geometry.h"
#include "vda/raster.h"

namespace vda {

struct Trajectory {
  std::vector<Pose> poses;

  int size() const { return int(poses.size()); }
  Eigen::Vector3d position(int i) const { return poses[i].translation; }
};

// Similarity transform x -> scale * R x + t.
struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  bool degenerate = false;  // < 3 frames: translation+scale only

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
  Pose apply(const Pose& p) const {
    Pose out;
    out.rotation = rotation * p.rotation;
    out.translation = apply(p.translation);
    return out;
  }
};

// Closed-form similarity minimizing sum ||s R x_pred + t - x_gt||^2
// (Umeyama). Fewer than 3 frames degrade to translation+scale alignment.
Similarity align_trajectory(const Trajectory& pred, const Trajectory& gt);

Trajectory apply_alignment(const Similarity& sim, const Trajectory& traj);

// RMSE over per-frame position differences.
double ate(const Trajectory& aligned, const Trajectory& gt);

// Per-pair relative pose errors E = (Q_i^-1 Q_{i+d})^-1 (P_i^-1 P_{i+d});
// translation error is ||trans(E)||, rotation error the angle of rot(E).
struct RpeResult {
  std::vector<double> translation;
  std::vector<double> rotation_deg;

  double mean_translation() const;
  double mean_rotation_deg() const;
};
RpeResult rpe(const Trajectory& pred, const Trajectory& gt, int delta = 1);

// Depth metrics after per-sequence median scaling, with ground-truth values
// above `cap` excluded. Also carries every pixel's absolute relative error,
// sorted ascending, for error-curve export.
struct DepthMetrics {
  double scale = 1.0;  // median(gt) / median(pred)
  double abs_rel = 0.0;
  double rmse = 0.0;
  double delta_125 = 0.0;
  double delta_125_2 = 0.0;
  double delta_125_3 = 0.0;
  int64_t pixels = 0;
  std::vector<float> sorted_abs_rel;
};
DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& gt, double cap = 80.0);

}  // namespace vda
