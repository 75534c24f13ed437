#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "vda/correspondence.h"
#include "vda/deformation.h"
#include "vda/geometry.h"
#include "vda/losses.h"

namespace vda {

// All optimization variables: per-frame pose, focal length, and deformation
// grid. Frame 0's pose is the gauge anchor and stays identity.
struct CameraParamBlock {
  int width = 0;
  int height = 0;
  std::vector<Pose> poses;
  std::vector<double> focals;
  std::vector<DeformationGrid> grids;

  int n_frames() const { return int(poses.size()); }
  Intrinsics intrinsics(int frame) const {
    return Intrinsics::for_image(width, height, focals[frame]);
  }
};

struct SolveOptions {
  int max_iterations = 200;
  double function_tolerance = 1e-8;   // relative cost decrease
  double gradient_tolerance = 1e-10;  // max-norm of the gradient
  double parameter_tolerance = 1e-12;
  double cost_floor = 1e-12;  // total cost below this is converged
  double init_damping = 1e-4;
  double damping_increase = 10.0;
  double damping_decrease = 0.5;
  double max_damping = 1e12;

  enum class LinearSolver { Auto, Dense, SparseCholesky, ConjugateGradient };
  LinearSolver linear_solver = LinearSolver::Auto;
  int dense_threshold = 1000;  // Auto switches to sparse above this

  LossKind loss_kind = LossKind::SpatialRatio;
  double huber_delta = 0.0;      // robustify repro residuals; 0 = off
  bool fix_scale_handle = true;  // pin one frame-0 handle (scale gauge)
  bool shared_focal = false;     // tie all focal lengths to one variable
  int threads = 0;               // 0 = hardware concurrency
  uint64_t seed = 0;
};

// One directed pairwise constraint with its raster endpoints and the raw
// depths sampled once at setup (integer p, bilinear q).
struct SolverMatch {
  int frame_i = -1;
  int frame_j = -1;
  PixelCoord p_raster;
  PixelCoord q_raster;
  double depth_i = 0.0;
  double depth_j = 0.0;
};

struct SolveInputs {
  int width = 0;
  int height = 0;
  int n_frames = 0;
  std::vector<SolverMatch> matches;
  // Per-frame dynamic masks for the deformation weights; empty = all static.
  std::vector<BinaryMask> dyn_masks;
};

struct LevelReport {
  int cols = 0;
  int rows = 0;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int64_t residuals_used = 0;
  int64_t residuals_dropped = 0;
  std::string termination;
  double wall_time_s = 0.0;
};

struct SolveReport {
  std::vector<LevelReport> levels;
  double total_wall_time_s = 0.0;

  double final_cost() const {
    return levels.empty() ? 0.0 : levels.back().final_cost;
  }
  int64_t residuals_dropped() const {
    int64_t n = 0;
    for (const auto& l : levels) n += l.residuals_dropped;
    return n;
  }
};

// SO(3) x R^3 retraction: rotation <- rotation * exp([dw]x),
// translation <- translation + dt. delta is [dw, dt].
Pose local_update(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

// Identity poses, focals at the prior, and constant 1x1 grids scaled so
// frame 0's median deformed depth is 1.
CameraParamBlock init_params(const std::vector<DepthMap>& depths,
                             int n_frames, double focal_prior);

// Levenberg-Marquardt over all parameters at the grids' current resolution.
LevelReport solve_level(const SolveInputs& inputs, CameraParamBlock& params,
                        const SolveOptions& opts, const RegWeights& reg);

// Runs solve_level at every schedule resolution, subdividing the grids
// between levels.
SolveReport coarse_to_fine_solve(const SolveInputs& inputs,
                                 CameraParamBlock& params,
                                 const GridSchedule& schedule,
                                 const SolveOptions& opts,
                                 const RegWeights& reg);

// Normal-equation matrix at the current parameters (diagnostic; used to
// verify that the block pattern matches the frame-pair graph).
Eigen::SparseMatrix<double> normal_matrix(const SolveInputs& inputs,
                                          const CameraParamBlock& params,
                                          const SolveOptions& opts,
                                          const RegWeights& reg);

// Total objective (residual squared norm) at the current parameters,
// including the regularizer terms. Exposed for tests and diagnostics.
double evaluate_cost(const SolveInputs& inputs, const CameraParamBlock& params,
                     const SolveOptions& opts, const RegWeights& reg,
                     int64_t* used = nullptr, int64_t* dropped = nullptr);

}  // namespace vda
