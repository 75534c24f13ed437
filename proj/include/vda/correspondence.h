#pragma once

#include <cstdint>
#include <vector>

#include "vda/geometry.h"
#include "vda/raster.h"

namespace vda {

// Unordered frame pair (i < j). Every pair feeds residuals in both
// directions.
struct FramePair {
  int i = 0;
  int j = 0;
  bool operator==(const FramePair&) const = default;
};

// Hierarchical pair set: all (i, j) with |i - j| = k, i mod k = 0 for
// k = 1, 2, 4, ... capped at the largest power of two below n_frames.
std::vector<FramePair> build_pair_set(int n_frames);

// Marks pixels whose forward flow, chased through the backward flow,
// returns within `threshold` pixels. Pixels whose flow target cannot be
// sampled in the reverse field are unset.
BinaryMask fb_consistency_mask(const FlowField& flow_ij,
                               const FlowField& flow_ji, double threshold);

// Long-range flow composed from consecutive-frame flows by bilinear
// resampling at each hop.
struct ChainedFlow {
  FlowField flow;
  BinaryMask valid;
};

// hop_flows[t] is the flow leaving the t-th intermediate frame toward the
// target (frame order i, i±1, ..., j). hop_masks entries may be null (no
// consistency gating for that hop). A null hop flow is an error.
ChainedFlow chain_flow(const std::vector<const FlowField*>& hop_flows,
                       const std::vector<const BinaryMask*>& hop_masks);

// One solver constraint: integer pixel p in the source frame and its flow
// correspondent q = p + f(p) in the target frame (raster coordinates).
struct Match {
  PixelCoord p;
  PixelCoord q;
};

struct MatchStats {
  int cells = 0;
  int accepted = 0;
  int rejected_mask = 0;
  int rejected_distance = 0;
};

// Grid-stratified Poisson-disk sampling of matches: at most one point per
// min_dist-sized cell, jittered, rejected against already-accepted
// neighbors. Every accepted p passes m_flow, is outside m_dyn, and keeps a
// distance of at least min_dist to every other accepted point.
// Deterministic for a fixed seed.
std::vector<Match> sample_matches(const FlowField& flow,
                                  const BinaryMask& m_flow,
                                  const BinaryMask& m_dyn, double min_dist,
                                  uint64_t seed,
                                  MatchStats* stats = nullptr);

}  // namespace vda
