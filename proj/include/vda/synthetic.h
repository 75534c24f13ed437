#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "vda/deformation.h"
#include "vda/geometry.h"
#include "vda/raster.h"

namespace vda {

enum class SceneKind { Plane, TwoPlane, PointCloud, Heightfield };
enum class TrajectoryKind { Orbit, Arc, Forward, HandheldJitter };

struct SceneSpec {
  SceneKind scene = SceneKind::Heightfield;
  TrajectoryKind trajectory = TrajectoryKind::Orbit;
  int n_frames = 12;
  int width = 160;
  int height = 96;
  double focal = 2.7474774194546225;
  double extent = 4.0;       // lateral extent of the surface (world units)
  double base_depth = 3.0;   // nominal camera-to-surface distance
  double motion_scale = 1.0; // trajectory amplitude multiplier
  // Pure-translation rig (keeps plane scenes fronto-parallel, so rendered
  // depth is constant per frame and resampling is exact).
  bool allow_rotation = true;
  int point_count = 3000;        // PointCloud
  double height_amplitude = 0.4; // Heightfield relief
  double near_depth = 1.0;       // TwoPlane: depth of the x<0 half
  double far_depth = 10.0;       // TwoPlane: depth of the x>=0 half
  uint64_t seed = 1;
};

// Fully deterministic ground-truth bundle for one scene specification.
struct GroundTruth {
  SceneSpec spec;
  std::vector<Pose> poses;  // camera-to-world
  Intrinsics intrinsics;
  // Heightfield parameters (random phases per seed).
  Eigen::Matrix<double, 4, 3> height_waves;  // rows: (freq_x, freq_y, phase)
  // Point cloud (world space).
  std::vector<Eigen::Vector3d> points;

  int n_frames() const { return int(poses.size()); }
};

GroundTruth gen_scene(const SceneSpec& spec);

// Exact per-pixel depth of the nearest surface, plus the world-space point
// visible at each pixel (the flow renderer reprojects these).
struct GeometryBuffer {
  DepthMap depth;
  std::vector<Eigen::Vector3d> world_points;  // row-major, per pixel
};
GeometryBuffer render_geometry(const GroundTruth& gt, int frame);

DepthMap render_depth(const GroundTruth& gt, int frame);

// Exact camera-space depth along the ray through an arbitrary (subpixel)
// raster position. Not available for point-cloud scenes (returns the
// backdrop depth there).
double exact_depth(const GroundTruth& gt, int frame, const PixelCoord& raster);

// Exact projection displacement of the point visible at each pixel of frame
// i, with a visibility mask (in-frame and un-occluded by frame j's surface).
std::pair<FlowField, BinaryMask> render_flow(const GroundTruth& gt, int i,
                                             int j);

// Controlled depth corruption: a multiplicative low-frequency field whose
// reciprocal is a bilinear spline (so the solver's grid can represent it),
// per-pixel multiplicative noise, and an optional per-frame scale factor.
struct CorruptionSpec {
  int field_cols = 0;  // 0 disables the field
  int field_rows = 0;
  double field_amplitude = 0.2;  // reciprocal handles in e^[-a, a] roughly
  double noise_sigma = 0.0;
  double frame_scale = 1.0;  // constant per-frame factor
};

// Returns the corrupted map; when field_out is given, stores the reciprocal
// spline grid g (the corruption divides depth by g, so a perfect solve
// recovers phi = g up to one global scale).
DepthMap corrupt_depth(const DepthMap& depth, const CorruptionSpec& spec,
                       uint64_t seed, DeformationGrid* field_out = nullptr);

}  // namespace vda
