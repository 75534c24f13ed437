#pragma once

#include <functional>
#include <vector>

#include "vda/correspondence.h"
#include "vda/losses.h"
#include "vda/solver.h"

namespace vda {

struct FilterConfig {
  int tau = 4;            // temporal radius in frames
  int radius = 1;         // spatial window half-size (1 -> 3x3)
  double lambda_f = 3.0;  // edge weight falloff
  // An unnormalized weighted sum cannot reproduce constant inputs, so
  // the weights are normalized to sum 1 by default. The switch exposes
  // the raw sum for auditing.
  bool normalize = true;
  int threads = 0;
};

// Edge-preserving sample weight exp(-lambda_f * ratio loss of the two
// depths).
double filter_weight(double z_reference, double z_sample, double lambda_f);
double filter_weight(const CameraPoint& reference, const CameraPoint& sample,
                     double lambda_f);

// Chained-flow lookup for the filter: returns the chain i -> j, or null if
// unavailable. i == j is handled internally and never queried.
using ChainLookup = std::function<const ChainedFlow*(int i, int j)>;

struct FilterStats {
  int64_t fallback_pixels = 0;  // no valid sample: input copied through
  int64_t samples_used = 0;
  int64_t samples_rejected = 0;
};

// Geometry-aware spatio-temporal filter for one frame: blends reprojected
// depths from frames within the temporal radius along chained flow
// trajectories, weighted by depth-ratio similarity and normalized over the
// valid samples. Inputs are the deformation-applied depths.
DepthMap filter_depth(int frame, const std::vector<DepthMap>& deformed,
                      const CameraParamBlock& params, const ChainLookup& chains,
                      const FilterConfig& cfg, FilterStats* stats = nullptr);

// Filters every frame, building the chained flows from consecutive-frame
// flows and their consistency masks. consecutive[t] must hold the flow
// t -> t+1 at index (t, forward) and t+1 -> t at (t, backward).
struct ConsecutiveFlows {
  std::vector<FlowField> forward;   // [t]: t -> t+1
  std::vector<FlowField> backward;  // [t]: t+1 -> t
  std::vector<BinaryMask> forward_mask;
  std::vector<BinaryMask> backward_mask;
};

std::vector<DepthMap> filter_video(const std::vector<DepthMap>& deformed,
                                   const CameraParamBlock& params,
                                   const ConsecutiveFlows& flows,
                                   const FilterConfig& cfg,
                                   FilterStats* stats = nullptr);

}  // namespace vda
