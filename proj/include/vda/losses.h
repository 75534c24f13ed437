#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <vector>

#include "vda/deformation.h"
#include "vda/geometry.h"
#include "vda/raster.h"

namespace vda {

// Regularizer weights and balance coefficients for the joint objective.
struct RegWeights {
  double lambda1 = 0.1;         // base deformation-smoothness weight
  double lambda2 = 10.0;        // dynamic-fraction boost
  double lambda_deform = 1.0;   // global balance of the smoothness term
  double lambda_focal = 1.0;    // global balance of the focal prior
  double focal_prior = 2.7474774194546225;  // 1/tan(20 deg): a true 40° FOV
  // The handle weight can either be the dynamic fraction of the handle's
  // support mass (default) or the raw dynamic mass sum; the switch
  // selects the unnormalized variant.
  bool normalize_handle_weights = true;
  // Count each unordered neighbor pair once (default) or twice.
  bool count_pairs_twice = false;
  // Solver-side smoothness residual on log-handle differences instead of
  // raw differences. The raw form favors shrinking the whole scene (its
  // value scales with the square of the gauge-free global scale while the
  // similarity losses are scale-invariant); the log form measures the same
  // local variation without the scale pressure.
  bool deform_log_space = true;
};

// Which similarity loss drives the reprojection residual.
enum class LossKind {
  Euclidean,         // ||a - b||^2
  SpatialDisparity,  // image-space + inverse-depth split
  SpatialRatio,      // image-space + depth-ratio (the default)
};

double loss_euclidean(const CameraPoint& a, const CameraPoint& b);
double loss_spatial(const CameraPoint& a, const CameraPoint& b);
double loss_disparity(const CameraPoint& a, const CameraPoint& b);
double loss_ratio(const CameraPoint& a, const CameraPoint& b);
double loss_sim(const CameraPoint& a, const CameraPoint& b);

// One pairwise match ready for residual evaluation: pixel p in frame i, its
// flow correspondent q in frame j, the raw depths sampled at both ends and
// the spline supports of both grids.
struct MatchContext {
  int frame_i = -1;
  int frame_j = -1;
  PixelCoord p_plane;  // normalized image-plane coordinate of p
  PixelCoord q_plane;  // normalized image-plane coordinate of q
  double depth_i = 0.0;
  double depth_j = 0.0;
  SplineSupport support_i;
  SplineSupport support_j;
};

// Signed residual vector (squares sum to the chosen loss) together with the
// partials w.r.t. every local parameter it touches. Pose columns are ordered
// [rotation increment, translation]; handle partials are taken w.r.t.
// log-handles, matching the solver's positivity parameterization.
struct ReproResidual {
  Eigen::Vector3d values = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 3, 6> d_pose_i;
  Eigen::Matrix<double, 3, 6> d_pose_j;
  Eigen::Vector3d d_focal_i;
  Eigen::Vector3d d_focal_j;
  Eigen::Matrix<double, 3, 4> d_handles_i;
  Eigen::Matrix<double, 3, 4> d_handles_j;
};

// Evaluates the reprojection residual for one match. Returns
// nullopt when the geometric reprojection lands behind the camera (the
// caller drops and counts it).
std::optional<ReproResidual> residual_repro(
    const MatchContext& m, const Pose& pose_i, const Pose& pose_j,
    const Intrinsics& K_i, const Intrinsics& K_j, const DeformationGrid& grid_i,
    const DeformationGrid& grid_j, LossKind kind, bool with_jacobian = true);

// Per-handle smoothness weights from the dynamic mask: lambda1 plus lambda2
// times the fraction of dynamic pixels in the handle's influence region.
std::vector<double> handle_weights(const BinaryMask& m_dyn,
                                   const DeformationGrid& grid,
                                   const RegWeights& w);

// Smoothness penalty over horizontally/vertically adjacent handle pairs of
// every frame, with its gradient w.r.t. the raw handle values.
struct DeformLoss {
  double value = 0.0;
  std::vector<std::vector<double>> gradients;  // per frame, per handle
};
DeformLoss loss_deform(const std::vector<DeformationGrid>& grids,
                       const std::vector<std::vector<double>>& weights,
                       const RegWeights& w);

// Focal prior sum_i (u_i - u_hat)^2 with per-frame gradient.
struct FocalLoss {
  double value = 0.0;
  std::vector<double> gradients;
};
FocalLoss loss_focal(const std::vector<double>& focals, double focal_prior);

}  // namespace vda
