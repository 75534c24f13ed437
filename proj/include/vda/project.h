#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vda/evaluation.h"
#include "vda/losses.h"
#include "vda/solver.h"

namespace vda {

namespace fs = std::filesystem;

// On-disk layout of one video project. Frame files carry zero-padded
// 6-digit indices; pair files are named {i}_{j}.
struct ProjectPaths {
  fs::path root;

  explicit ProjectPaths(fs::path r) : root(std::move(r)) {}

  fs::path config() const { return root / "pipeline.cfg"; }
  fs::path depth_dir() const { return root / "depth"; }
  fs::path flow_dir() const { return root / "flow"; }
  fs::path mask_dir() const { return root / "masks"; }
  fs::path out_dir() const { return root / "out"; }
  fs::path gt_dir() const { return root / "gt"; }

  fs::path depth(int frame) const;
  fs::path flow(int i, int j) const;
  fs::path dyn_mask(int frame) const;
  fs::path flow_mask(int i, int j) const;

  fs::path out_trajectory() const { return out_dir() / "trajectory.txt"; }
  fs::path out_focals() const { return out_dir() / "focals.txt"; }
  fs::path out_grids() const { return out_dir() / "grids.txt"; }
  fs::path out_depth_dir() const { return out_dir() / "depth"; }
  fs::path out_depth(int frame) const;
  fs::path out_report() const { return out_dir() / "report.json"; }
  fs::path out_match_stats() const { return out_dir() / "match_stats.txt"; }
  fs::path out_metrics() const { return out_dir() / "metrics.txt"; }
  fs::path out_error_curve() const {
    return out_dir() / "depth_abs_rel_sorted.bin";
  }

  fs::path gt_trajectory() const { return gt_dir() / "trajectory.txt"; }
  fs::path gt_focals() const { return gt_dir() / "focals.txt"; }
  fs::path gt_depth_dir() const { return gt_dir() / "depth"; }
  fs::path gt_depth(int frame) const;
  fs::path gt_fields() const { return gt_dir() / "corruption_fields.txt"; }

  // Number of consecutive depth frames starting at index 0.
  int count_frames() const;
};

// Every tunable of the pipeline, parsed from flat key=value text with typed
// range validation. Precedence: built-in defaults < config file < overrides.
struct PipelineConfig {
  double fb_threshold = 1.0;
  double min_match_dist = 10.0;
  double lambda1 = 0.1;
  double lambda2 = 10.0;
  double lambda_deform = 1.0;
  double lambda_focal = 1.0;
  double lambda_f = 3.0;
  int tau = 4;
  int filter_radius = 1;
  bool filter_normalize = true;
  int grid_long_max = 17;
  double focal_prior = 2.7474774194546225;  // 1/tan(20 deg)
  bool normalize_handle_weights = true;
  bool count_pairs_twice = false;
  bool deform_log_space = true;
  std::string loss_kind = "spatial_ratio";
  int max_iterations = 200;
  double function_tolerance = 1e-8;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-12;
  double cost_floor = 1e-12;
  double init_damping = 1e-4;
  std::string linear_solver = "auto";
  bool fix_scale_handle = true;
  bool shared_focal = false;
  double huber_delta = 0.0;  // 0 = plain squared residuals
  uint64_t seed = 0;
  int threads = 0;

  static PipelineConfig defaults() { return {}; }

  // Applies `key=value`; unknown keys and out-of-range values throw with an
  // explicit message.
  void apply(const std::string& key, const std::string& value);
  void load_file(const fs::path& path);  // missing file is not an error
  void save_file(const fs::path& path) const;

  LossKind parsed_loss_kind() const;
  SolveOptions solve_options() const;
  RegWeights reg_weights() const;
};

// Result-bundle pieces. All text is written with %.17g so identical inputs
// produce identical bytes.
void write_trajectory(const fs::path& path, const std::vector<Pose>& poses);
std::vector<Pose> read_trajectory(const fs::path& path);

void write_focals(const fs::path& path, const std::vector<double>& focals);
std::vector<double> read_focals(const fs::path& path);

void write_grids(const fs::path& path,
                 const std::vector<DeformationGrid>& grids);
std::vector<DeformationGrid> read_grids(const fs::path& path);

void write_result_bundle(const ProjectPaths& paths,
                         const CameraParamBlock& params,
                         const std::vector<DepthMap>& filtered_depths,
                         const SolveReport& report,
                         const PipelineConfig& config);
CameraParamBlock read_param_bundle(const ProjectPaths& paths);

}  // namespace vda
