#include "vda/pipeline.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "vda/image_io.h"

namespace vda {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
  h ^= a + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

struct BoxRect {
  int x0, y0, x1, y1;  // half-open
  double cx, cy;
};

BoxRect box_at_frame(const SynthOptions& opts, int width, int height,
                     int frame) {
  const double half = 0.5 * opts.box_size * std::min(width, height);
  const double cx = 0.3 * width + opts.box_speed * frame;
  const double cy = 0.4 * height + 0.6 * opts.box_speed * frame;
  BoxRect r;
  r.cx = cx;
  r.cy = cy;
  r.x0 = std::max(0, int(std::floor(cx - half)));
  r.y0 = std::max(0, int(std::floor(cy - half)));
  r.x1 = std::min(width, int(std::ceil(cx + half)));
  r.y1 = std::min(height, int(std::ceil(cy + half)));
  return r;
}

void progress(const std::string& msg) { std::cerr << msg << "\n"; }

[[noreturn]] void missing_input(const fs::path& p) {
  throw std::runtime_error("missing input: " + p.string());
}

}  // namespace

void stage_synth(const fs::path& root, const SynthOptions& opts,
                 const PipelineConfig& config) {
  const GroundTruth gt = gen_scene(opts.scene);
  const int n = gt.n_frames();
  const int w = opts.scene.width, h = opts.scene.height;

  ProjectPaths paths(root);
  fs::create_directories(paths.depth_dir());
  fs::create_directories(paths.flow_dir());
  fs::create_directories(paths.mask_dir());
  fs::create_directories(paths.gt_depth_dir());

  progress("synth: rendering " + std::to_string(n) + " frames");
  std::vector<DeformationGrid> fields;
  std::vector<BoxRect> boxes;
  for (int f = 0; f < n; ++f) {
    DepthMap gt_depth = render_depth(gt, f);
    write_depth(paths.gt_depth(f), gt_depth);

    DeformationGrid field;
    DepthMap corrupted =
        corrupt_depth(gt_depth, opts.corruption,
                      mix_seed(opts.scene.seed, 0x5eedull, uint64_t(f)),
                      &field);
    fields.push_back(field);

    BinaryMask dyn(w, h, false);
    if (opts.dynamic_box) {
      const BoxRect box = box_at_frame(opts, w, h, f);
      boxes.push_back(box);
      const float box_depth =
          float(opts.box_depth_factor * opts.scene.base_depth);
      for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
          corrupted.at(x, y) = box_depth;
        }
      }
      const int margin = 2;
      for (int y = std::max(0, box.y0 - margin);
           y < std::min(h, box.y1 + margin); ++y) {
        for (int x = std::max(0, box.x0 - margin);
             x < std::min(w, box.x1 + margin); ++x) {
          dyn.set(x, y, true);
        }
      }
    }
    write_depth(paths.depth(f), corrupted);
    write_mask(paths.dyn_mask(f), dyn);
  }

  const auto pairs = build_pair_set(n);
  progress("synth: rendering flow for " + std::to_string(pairs.size()) +
           " pairs");
  for (const FramePair& pr : pairs) {
    for (const auto& [i, j] : {std::pair{pr.i, pr.j}, std::pair{pr.j, pr.i}}) {
      auto [flow, vis] = render_flow(gt, i, j);
      if (opts.dynamic_box) {
        const BoxRect bi = boxes[i], bj = boxes[j];
        const float du = float(bj.cx - bi.cx), dv = float(bj.cy - bi.cy);
        for (int y = bi.y0; y < bi.y1; ++y) {
          for (int x = bi.x0; x < bi.x1; ++x) {
            flow.u.at(x, y) = du;
            flow.v.at(x, y) = dv;
          }
        }
      }
      write_flow(paths.flow(i, j), flow);
    }
  }

  write_trajectory(paths.gt_trajectory(), gt.poses);
  write_focals(paths.gt_focals(),
               std::vector<double>(size_t(n), opts.scene.focal));
  write_grids(paths.gt_fields(), fields);
  config.save_file(paths.config());
  progress("synth: project written to " + root.string());
}

void stage_masks(const ProjectPaths& paths, const PipelineConfig& config) {
  const int n = paths.count_frames();
  if (n < 2) missing_input(paths.depth(n == 0 ? 0 : 1));
  fs::create_directories(paths.mask_dir());

  const auto pairs = build_pair_set(n);
  int written = 0;
  for (const FramePair& pr : pairs) {
    const fs::path fwd_path = paths.flow(pr.i, pr.j);
    const fs::path bwd_path = paths.flow(pr.j, pr.i);
    if (!fs::exists(fwd_path) || !fs::exists(bwd_path)) {
      if (pr.j - pr.i == 1) missing_input(fwd_path);
      continue;  // flow for distant pairs is optional
    }
    const FlowField fwd = read_flow(fwd_path);
    const FlowField bwd = read_flow(bwd_path);
    write_mask(paths.flow_mask(pr.i, pr.j),
               fb_consistency_mask(fwd, bwd, config.fb_threshold));
    write_mask(paths.flow_mask(pr.j, pr.i),
               fb_consistency_mask(bwd, fwd, config.fb_threshold));
    written += 2;
  }
  progress("masks: wrote " + std::to_string(written) + " consistency masks");
}

namespace {

struct ProjectData {
  int n_frames = 0;
  std::vector<DepthMap> depths;
  std::vector<BinaryMask> dyn_masks;
};

ProjectData load_depths_and_masks(const ProjectPaths& paths) {
  ProjectData data;
  data.n_frames = paths.count_frames();
  if (data.n_frames < 2) {
    missing_input(paths.depth(data.n_frames == 0 ? 0 : 1));
  }
  for (int f = 0; f < data.n_frames; ++f) {
    data.depths.push_back(read_depth(paths.depth(f)));
    data.depths.back().frame = f;
    if (fs::exists(paths.dyn_mask(f))) {
      data.dyn_masks.push_back(read_mask(paths.dyn_mask(f)));
    } else {
      data.dyn_masks.emplace_back();  // empty = all static
    }
  }
  return data;
}

}  // namespace

SolveReport stage_solve(const ProjectPaths& paths, const PipelineConfig& config,
                        CameraParamBlock* params_out) {
  ProjectData data = load_depths_and_masks(paths);
  const int n = data.n_frames;
  const int w = data.depths[0].width(), h = data.depths[0].height();

  SolveInputs inputs;
  inputs.width = w;
  inputs.height = h;
  inputs.n_frames = n;
  inputs.dyn_masks = std::move(data.dyn_masks);

  const auto pairs = build_pair_set(n);
  const BinaryMask all_static(w, h, false);
  int64_t skipped_pairs = 0;
  fs::create_directories(paths.out_dir());
  std::ofstream stats_out(paths.out_match_stats());
  stats_out << "# src dst matches rejected_mask rejected_distance\n";
  for (const FramePair& pr : pairs) {
    for (const auto& [i, j] : {std::pair{pr.i, pr.j}, std::pair{pr.j, pr.i}}) {
      const fs::path flow_path = paths.flow(i, j);
      const fs::path mask_path = paths.flow_mask(i, j);
      if (!fs::exists(flow_path)) {
        if (std::abs(i - j) == 1) missing_input(flow_path);
        ++skipped_pairs;
        continue;
      }
      if (!fs::exists(mask_path)) missing_input(mask_path);
      const FlowField flow = read_flow(flow_path);
      const BinaryMask m_flow = read_mask(mask_path);
      const BinaryMask& m_dyn =
          inputs.dyn_masks[i].empty() ? all_static : inputs.dyn_masks[i];
      MatchStats stats;
      const auto matches =
          sample_matches(flow, m_flow, m_dyn, config.min_match_dist,
                         mix_seed(config.seed, uint64_t(i) << 20, uint64_t(j)),
                         &stats);
      stats_out << i << " " << j << " " << matches.size() << " "
                << stats.rejected_mask << " " << stats.rejected_distance
                << "\n";
      if (matches.empty()) {
        progress("solve: warning: no matches for pair " + std::to_string(i) +
                 "->" + std::to_string(j));
        continue;
      }
      for (const Match& m : matches) {
        SolverMatch sm;
        sm.frame_i = i;
        sm.frame_j = j;
        sm.p_raster = m.p;
        sm.q_raster = m.q;
        sm.depth_i = data.depths[i].at(int(m.p.x), int(m.p.y));
        sm.depth_j = data.depths[j].sample(m.q.x, m.q.y);
        inputs.matches.push_back(sm);
      }
    }
  }
  progress("solve: " + std::to_string(inputs.matches.size()) +
           " matches from " + std::to_string(pairs.size()) + " pairs (" +
           std::to_string(skipped_pairs) + " directions skipped)");

  CameraParamBlock params =
      init_params(data.depths, n, config.focal_prior);
  const GridSchedule schedule = grid_schedule(w, h, config.grid_long_max);
  const SolveOptions opts = config.solve_options();
  const RegWeights reg = config.reg_weights();

  SolveReport report = coarse_to_fine_solve(inputs, params, schedule, opts, reg);
  for (const LevelReport& l : report.levels) {
    progress("solve: level " + std::to_string(l.cols) + "x" +
             std::to_string(l.rows) + ": " + std::to_string(l.iterations) +
             " iterations, cost " + std::to_string(l.initial_cost) + " -> " +
             std::to_string(l.final_cost) + " (" + l.termination + ")");
  }

  fs::create_directories(paths.out_dir());
  write_result_bundle(paths, params, {}, report, config);
  if (params_out) *params_out = params;
  return report;
}

FilterStats stage_filter(const ProjectPaths& paths,
                         const PipelineConfig& config) {
  if (!fs::exists(paths.out_trajectory())) {
    missing_input(paths.out_trajectory());
  }
  ProjectData data = load_depths_and_masks(paths);
  const int n = data.n_frames;
  CameraParamBlock params = read_param_bundle(paths);
  if (params.n_frames() != n) {
    throw std::runtime_error("filter: solve output frame count mismatch");
  }

  ConsecutiveFlows flows;
  for (int t = 0; t + 1 < n; ++t) {
    const fs::path f = paths.flow(t, t + 1), b = paths.flow(t + 1, t);
    if (!fs::exists(f)) missing_input(f);
    if (!fs::exists(b)) missing_input(b);
    flows.forward.push_back(read_flow(f));
    flows.backward.push_back(read_flow(b));
    const fs::path fm = paths.flow_mask(t, t + 1);
    const fs::path bm = paths.flow_mask(t + 1, t);
    if (!fs::exists(fm)) missing_input(fm);
    if (!fs::exists(bm)) missing_input(bm);
    flows.forward_mask.push_back(read_mask(fm));
    flows.backward_mask.push_back(read_mask(bm));
  }

  std::vector<DepthMap> deformed;
  deformed.reserve(n);
  for (int f = 0; f < n; ++f) {
    deformed.push_back(apply_deformation(data.depths[f], params.grids[f]));
  }

  FilterConfig fc;
  fc.tau = config.tau;
  fc.radius = config.filter_radius;
  fc.lambda_f = config.lambda_f;
  fc.normalize = config.filter_normalize;
  fc.threads = config.threads;

  FilterStats stats;
  const auto filtered = filter_video(deformed, params, flows, fc, &stats);
  fs::create_directories(paths.out_depth_dir());
  for (int f = 0; f < n; ++f) {
    write_depth(paths.out_depth(f), filtered[f]);
  }
  progress("filter: " + std::to_string(n) + " frames, " +
           std::to_string(stats.fallback_pixels) + " fallback pixels");
  return stats;
}

EvalSummary stage_eval(const ProjectPaths& paths,
                       const PipelineConfig& config) {
  (void)config;
  if (!fs::exists(paths.out_trajectory())) missing_input(paths.out_trajectory());
  if (!fs::exists(paths.gt_trajectory())) missing_input(paths.gt_trajectory());

  Trajectory pred{read_trajectory(paths.out_trajectory())};
  Trajectory gt{read_trajectory(paths.gt_trajectory())};
  if (pred.size() != gt.size()) {
    throw std::runtime_error("eval: trajectory length mismatch");
  }

  EvalSummary s;
  const Similarity sim = align_trajectory(pred, gt);
  const Trajectory aligned = apply_alignment(sim, pred);
  s.ate = ate(aligned, gt);
  if (pred.size() > 1) {
    const RpeResult r = rpe(aligned, gt, 1);
    s.rpe_t_mean = r.mean_translation();
    s.rpe_r_mean_deg = r.mean_rotation_deg();
  }

  // Depth metrics when both filtered output and ground truth exist.
  if (fs::exists(paths.out_depth(0)) && fs::exists(paths.gt_depth(0))) {
    std::vector<DepthMap> pred_d, gt_d;
    for (int f = 0; f < pred.size(); ++f) {
      if (!fs::exists(paths.out_depth(f)) || !fs::exists(paths.gt_depth(f))) {
        break;
      }
      pred_d.push_back(read_depth(paths.out_depth(f)));
      gt_d.push_back(read_depth(paths.gt_depth(f)));
    }
    if (!pred_d.empty() && pred_d.size() == size_t(pred.size())) {
      s.depth = depth_metrics(pred_d, gt_d, 80.0);
      s.has_depth = true;
    }
  }

  fs::create_directories(paths.out_dir());
  {
    std::ofstream out(paths.out_metrics());
    char buf[64];
    auto put = [&](const char* key, double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << key << " = " << buf << "\n";
    };
    put("ate", s.ate);
    put("rpe_t_mean", s.rpe_t_mean);
    put("rpe_r_mean_deg", s.rpe_r_mean_deg);
    put("align_scale", sim.scale);
    if (s.has_depth) {
      put("abs_rel", s.depth.abs_rel);
      put("rmse", s.depth.rmse);
      put("delta_1.25", s.depth.delta_125);
      put("delta_1.25^2", s.depth.delta_125_2);
      put("delta_1.25^3", s.depth.delta_125_3);
      put("median_scale", s.depth.scale);
      out << "pixels = " << s.depth.pixels << "\n";
    }
  }
  if (s.has_depth) {
    std::ofstream bin(paths.out_error_curve(), std::ios::binary);
    bin.write(reinterpret_cast<const char*>(s.depth.sorted_abs_rel.data()),
              std::streamsize(s.depth.sorted_abs_rel.size()) * 4);
  }
  progress("eval: ate=" + std::to_string(s.ate) +
           " rpe_r=" + std::to_string(s.rpe_r_mean_deg) + " deg");
  return s;
}

void stage_run(const ProjectPaths& paths, const PipelineConfig& config) {
  stage_masks(paths, config);
  stage_solve(paths, config);
  stage_filter(paths, config);
}

PipelineConfig load_config(const ProjectPaths& paths,
                           const std::vector<std::string>& overrides) {
  PipelineConfig config;
  config.load_file(paths.config());
  for (const std::string& kv : overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override '" + kv + "': expected key=value");
    }
    config.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

}  // namespace vda
