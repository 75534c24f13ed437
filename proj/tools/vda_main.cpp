#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "vda/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNonConverged = 3;

// Shared per-subcommand state.
struct Args {
  std::string project;
  std::vector<std::string> overrides;  // key=value config overrides
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("project", args.project, "project directory")->required();
  cmd->add_option("--set", args.overrides,
                  "config override key=value (repeatable)");
  // Frequently used knobs as first-class flags, mirroring the config keys.
  for (const char* key :
       {"seed", "threads", "loss-kind", "fb-threshold", "min-match-dist",
        "grid-long-max", "tau", "lambda-f", "focal-prior"}) {
    std::string opt = std::string("--") + key;
    std::string cfg_key = key;
    for (auto& c : cfg_key) {
      if (c == '-') c = '_';
    }
    cmd->add_option_function<std::string>(
        opt,
        [&args, cfg_key](const std::string& v) {
          args.overrides.push_back(cfg_key + "=" + v);
        },
        "config key " + cfg_key);
  }
  cmd->add_flag_callback(
      "--paper-focal-prior",
      [&args]() { args.overrides.push_back("paper_focal_prior=true"); },
      "set the focal prior to the literal constant 0.35");
}

bool solve_converged(const vda::SolveReport& report) {
  for (const auto& l : report.levels) {
    if (l.termination == "max_iterations" || l.termination == "damping_limit") {
      return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "joint camera-pose / depth-deformation estimation and filtering for "
      "monocular video depth"};
  app.require_subcommand(1);

  Args synth_args, masks_args, solve_args, filter_args, eval_args, run_args;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic oracle project");
  std::string scene_kind = "heightfield", traj_kind = "orbit";
  int frames = 12, width = 160, height = 96;
  double focal = 2.7474774194546225, motion = 1.0;
  bool no_rotation = false, dyn_box = false;
  int field_cols = 0, field_rows = 0;
  double field_amplitude = 0.2, noise_sigma = 0.0;
  uint64_t scene_seed = 1;
  add_common(synth, synth_args);
  synth->add_option("--scene", scene_kind,
                    "plane|two_plane|point_cloud|heightfield");
  synth->add_option("--trajectory", traj_kind, "orbit|arc|forward|handheld");
  synth->add_option("--frames", frames, "frame count")->check(CLI::Range(2, 10000));
  synth->add_option("--width", width)->check(CLI::Range(4, 8192));
  synth->add_option("--height", height)->check(CLI::Range(4, 8192));
  synth->add_option("--focal", focal, "true focal (long-side half-width units)");
  synth->add_option("--motion-scale", motion);
  synth->add_flag("--no-rotation", no_rotation, "pure-translation rig");
  synth->add_flag("--dynamic-box", dyn_box, "add a moving dynamic box");
  synth->add_option("--field-cols", field_cols, "corruption field handles (x)");
  synth->add_option("--field-rows", field_rows, "corruption field handles (y)");
  synth->add_option("--field-amplitude", field_amplitude);
  synth->add_option("--noise-sigma", noise_sigma);
  synth->add_option("--scene-seed", scene_seed);

  auto* masks = app.add_subcommand("masks", "forward-backward consistency masks");
  add_common(masks, masks_args);

  auto* solve = app.add_subcommand("solve", "coarse-to-fine joint optimization");
  add_common(solve, solve_args);

  auto* filter = app.add_subcommand("filter", "geometry-aware depth filtering");
  add_common(filter, filter_args);

  auto* eval = app.add_subcommand("eval", "metrics against ground truth");
  add_common(eval, eval_args);

  auto* run = app.add_subcommand("run", "masks -> solve -> filter");
  add_common(run, run_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      vda::SynthOptions opts;
      if (scene_kind == "plane") {
        opts.scene.scene = vda::SceneKind::Plane;
      } else if (scene_kind == "two_plane") {
        opts.scene.scene = vda::SceneKind::TwoPlane;
      } else if (scene_kind == "point_cloud") {
        opts.scene.scene = vda::SceneKind::PointCloud;
      } else if (scene_kind == "heightfield") {
        opts.scene.scene = vda::SceneKind::Heightfield;
      } else {
        std::cerr << "unknown scene kind: " << scene_kind << "\n";
        return kExitUsage;
      }
      if (traj_kind == "orbit") {
        opts.scene.trajectory = vda::TrajectoryKind::Orbit;
      } else if (traj_kind == "arc") {
        opts.scene.trajectory = vda::TrajectoryKind::Arc;
      } else if (traj_kind == "forward") {
        opts.scene.trajectory = vda::TrajectoryKind::Forward;
      } else if (traj_kind == "handheld") {
        opts.scene.trajectory = vda::TrajectoryKind::HandheldJitter;
      } else {
        std::cerr << "unknown trajectory kind: " << traj_kind << "\n";
        return kExitUsage;
      }
      opts.scene.n_frames = frames;
      opts.scene.width = width;
      opts.scene.height = height;
      opts.scene.focal = focal;
      opts.scene.motion_scale = motion;
      opts.scene.allow_rotation = !no_rotation;
      opts.scene.seed = scene_seed;
      opts.corruption.field_cols = field_cols;
      opts.corruption.field_rows = field_rows;
      opts.corruption.field_amplitude = field_amplitude;
      opts.corruption.noise_sigma = noise_sigma;
      opts.dynamic_box = dyn_box;

      vda::ProjectPaths paths{synth_args.project};
      vda::PipelineConfig config;
      for (const auto& kv : synth_args.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "bad override: " << kv << "\n";
          return kExitUsage;
        }
        config.apply(kv.substr(0, eq), kv.substr(eq + 1));
      }
      vda::stage_synth(paths.root, opts, config);
      std::cout << "synth ok frames=" << frames << "\n";
      return kExitOk;
    }

    auto with_project = [](const Args& args) {
      vda::ProjectPaths paths{args.project};
      vda::PipelineConfig config = vda::load_config(paths, args.overrides);
      return std::pair{paths, config};
    };

    if (masks->parsed()) {
      auto [paths, config] = with_project(masks_args);
      vda::stage_masks(paths, config);
      std::cout << "masks ok\n";
      return kExitOk;
    }
    if (solve->parsed()) {
      auto [paths, config] = with_project(solve_args);
      const vda::SolveReport report = vda::stage_solve(paths, config);
      std::printf("solve %s final_cost=%.17g levels=%zu\n",
                  solve_converged(report) ? "ok" : "non-converged",
                  report.final_cost(), report.levels.size());
      return solve_converged(report) ? kExitOk : kExitNonConverged;
    }
    if (filter->parsed()) {
      auto [paths, config] = with_project(filter_args);
      const vda::FilterStats stats = vda::stage_filter(paths, config);
      std::cout << "filter ok fallback_pixels=" << stats.fallback_pixels
                << "\n";
      return kExitOk;
    }
    if (eval->parsed()) {
      auto [paths, config] = with_project(eval_args);
      const vda::EvalSummary s = vda::stage_eval(paths, config);
      std::printf("eval ok ate=%.17g rpe_t=%.17g rpe_r_deg=%.17g", s.ate,
                  s.rpe_t_mean, s.rpe_r_mean_deg);
      if (s.has_depth) {
        std::printf(" abs_rel=%.17g rmse=%.17g", s.depth.abs_rel,
                    s.depth.rmse);
      }
      std::printf("\n");
      return kExitOk;
    }
    if (run->parsed()) {
      auto [paths, config] = with_project(run_args);
      vda::stage_masks(paths, config);
      const vda::SolveReport report = vda::stage_solve(paths, config);
      vda::stage_filter(paths, config);
      std::printf("run %s final_cost=%.17g\n",
                  solve_converged(report) ? "ok" : "non-converged",
                  report.final_cost());
      return solve_converged(report) ? kExitOk : kExitNonConverged;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
