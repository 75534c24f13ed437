#pragma once

#include "vda/depth_filter.h"
#include "vda/project.h"
#include "vda/synthetic.h"

namespace vda {

// Oracle project generation options: scene + controlled corruption, plus an
// optional screen-space moving box that exercises the dynamic masks.
struct SynthOptions {
  SceneSpec scene;
  CorruptionSpec corruption;
  bool dynamic_box = false;
  double box_size = 0.2;       // fraction of min(W, H)
  double box_depth_factor = 0.4;  // box depth relative to base_depth
  double box_speed = 1.5;      // pixels per frame
};

// Writes a complete ingestible project (depth/, flow/, masks/dyn_*, gt/)
// from the synthetic oracle.
void stage_synth(const fs::path& root, const SynthOptions& opts,
                 const PipelineConfig& config);

// Forward-backward consistency masks for every pair with flow on disk.
void stage_masks(const ProjectPaths& paths, const PipelineConfig& config);

// Joint coarse-to-fine optimization; writes trajectory, focals, grids and
// the report into out/.
SolveReport stage_solve(const ProjectPaths& paths,
                        const PipelineConfig& config,
                        CameraParamBlock* params_out = nullptr);

// Geometry-aware depth filtering of the solved video; writes out/depth/.
FilterStats stage_filter(const ProjectPaths& paths,
                         const PipelineConfig& config);

struct EvalSummary {
  double ate = 0.0;
  double rpe_t_mean = 0.0;
  double rpe_r_mean_deg = 0.0;
  DepthMetrics depth;
  bool has_depth = false;
};

// Metrics of out/ against gt/; writes out/metrics.txt and the sorted
// error curve.
EvalSummary stage_eval(const ProjectPaths& paths,
                       const PipelineConfig& config);

// masks -> solve -> filter.
void stage_run(const ProjectPaths& paths, const PipelineConfig& config);

// Loads config file (if present) then applies key=value overrides.
PipelineConfig load_config(const ProjectPaths& paths,
                           const std::vector<std::string>& overrides);

}  // namespace vda
