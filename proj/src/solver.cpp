#include "vda/solver.h"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "vda/parallel.h"

namespace vda {

namespace {

using Triplet = Eigen::Triplet<double>;
using SpMat = Eigen::SparseMatrix<double>;

// Per-frame parameter block: [6 pose][1 focal][handles...], frames packed
// by index. Gauge-fixed parameters stay in the vector and are pinned by
// clearing their Jacobian columns and unit-pinning the Hessian diagonal.
struct ParamLayout {
  int n_frames = 0;
  int handles_per_frame = 0;
  int per_frame = 0;
  int total = 0;
  bool shared_focal = false;
  std::vector<char> fixed;

  static ParamLayout build(const CameraParamBlock& params,
                           const SolveOptions& opts, bool with_gauge_pins) {
    ParamLayout l;
    l.n_frames = params.n_frames();
    l.handles_per_frame = params.grids.empty() ? 0 : params.grids[0].handle_count();
    l.per_frame = 6 + 1 + l.handles_per_frame;
    l.total = l.n_frames * l.per_frame;
    l.shared_focal = opts.shared_focal;
    l.fixed.assign(l.total, 0);
    if (with_gauge_pins) {
      for (int k = 0; k < 6; ++k) l.fixed[k] = 1;  // frame-0 pose
    }
    if (l.shared_focal) {
      // Redirected to frame 0's slot; own slots are pinned.
      for (int f = 1; f < l.n_frames; ++f) l.fixed[f * l.per_frame + 6] = 1;
    }
    return l;
  }

  int pose_offset(int f) const { return f * per_frame; }
  int focal_offset(int f) const {
    return (shared_focal ? 0 : f) * per_frame + 6;
  }
  int handle_offset(int f) const { return f * per_frame + 7; }
};

struct Evaluation {
  double cost = 0.0;
  Eigen::VectorXd residuals;
  SpMat jacobian;
  int64_t used = 0;
  int64_t dropped = 0;
};

// Support geometry and plane coordinates are constant within a level;
// cache one MatchContext per directed match.
std::vector<MatchContext> build_level_contexts(const SolveInputs& inputs,
                                               const CameraParamBlock& params) {
  const Intrinsics K = Intrinsics::for_image(inputs.width, inputs.height, 1.0);
  std::vector<MatchContext> ctxs(inputs.matches.size());
  for (size_t m = 0; m < inputs.matches.size(); ++m) {
    const SolverMatch& sm = inputs.matches[m];
    MatchContext& c = ctxs[m];
    c.frame_i = sm.frame_i;
    c.frame_j = sm.frame_j;
    c.p_plane = K.plane_from_raster(sm.p_raster);
    c.q_plane = K.plane_from_raster(sm.q_raster);
    c.depth_i = sm.depth_i;
    c.depth_j = sm.depth_j;
    c.support_i = params.grids[sm.frame_i].support(sm.p_raster);
    c.support_j = params.grids[sm.frame_j].support(sm.q_raster);
  }
  return ctxs;
}

// Per-frame smoothness weights at the current grid resolution.
std::vector<std::vector<double>> level_weights(const SolveInputs& inputs,
                                               const CameraParamBlock& params,
                                               const RegWeights& reg) {
  std::vector<std::vector<double>> weights(params.n_frames());
  for (int f = 0; f < params.n_frames(); ++f) {
    if (f < int(inputs.dyn_masks.size()) && !inputs.dyn_masks[f].empty()) {
      weights[f] = handle_weights(inputs.dyn_masks[f], params.grids[f], reg);
    } else {
      weights[f].assign(params.grids[f].handle_count(), reg.lambda1);
    }
  }
  return weights;
}

struct DeformPair {
  int frame;
  int k;
  int r;
  double weight;  // includes lambda_deform and the pair multiplicity
};

std::vector<DeformPair> build_deform_pairs(
    const CameraParamBlock& params,
    const std::vector<std::vector<double>>& weights, const RegWeights& reg) {
  std::vector<DeformPair> pairs;
  const double mult = (reg.count_pairs_twice ? 2.0 : 1.0) * reg.lambda_deform;
  if (mult == 0.0) return pairs;
  for (int f = 0; f < params.n_frames(); ++f) {
    const DeformationGrid& g = params.grids[f];
    for (int cy = 0; cy < g.rows; ++cy) {
      for (int cx = 0; cx < g.cols; ++cx) {
        const int k = cy * g.cols + cx;
        if (cx + 1 < g.cols) {
          pairs.push_back({f, k, k + 1,
                           mult * std::max(weights[f][k], weights[f][k + 1])});
        }
        if (cy + 1 < g.rows) {
          pairs.push_back({f, k, k + g.cols,
                           mult * std::max(weights[f][k],
                                           weights[f][k + g.cols])});
        }
      }
    }
  }
  return pairs;
}

Evaluation evaluate(const SolveInputs& inputs, const CameraParamBlock& params,
                    const std::vector<MatchContext>& ctxs,
                    const std::vector<DeformPair>& deform_pairs,
                    const ParamLayout& layout, const SolveOptions& opts,
                    const RegWeights& reg, bool with_jacobian) {
  const size_t n_matches = ctxs.size();
  const size_t deform_row0 = 3 * n_matches;
  const size_t focal_row0 = deform_row0 + deform_pairs.size();
  const size_t n_rows = focal_row0 + (reg.lambda_focal > 0.0 ? params.n_frames() : 0);

  Evaluation ev;
  ev.residuals = Eigen::VectorXd::Zero(n_rows);

  std::vector<Intrinsics> K(params.n_frames());
  for (int f = 0; f < params.n_frames(); ++f) K[f] = params.intrinsics(f);

  // Residual rows are per-match slots, so chunked parallel evaluation is
  // bitwise deterministic for any thread count.
  constexpr size_t kChunk = 512;
  const size_t n_chunks = n_matches == 0 ? 0 : (n_matches + kChunk - 1) / kChunk;
  std::vector<std::vector<Triplet>> chunk_triplets(n_chunks);
  std::vector<std::pair<int64_t, int64_t>> chunk_counts(n_chunks, {0, 0});

  parallel_chunks(n_matches, kChunk, opts.threads, [&](size_t begin, size_t end) {
    const size_t chunk = begin / kChunk;
    std::vector<Triplet>* trips = with_jacobian ? &chunk_triplets[chunk] : nullptr;
    if (trips) trips->reserve((end - begin) * 66);
    for (size_t m = begin; m < end; ++m) {
      const MatchContext& c = ctxs[m];
      auto res = residual_repro(c, params.poses[c.frame_i],
                                params.poses[c.frame_j], K[c.frame_i],
                                K[c.frame_j], params.grids[c.frame_i],
                                params.grids[c.frame_j], opts.loss_kind,
                                with_jacobian);
      if (!res) {
        ++chunk_counts[chunk].second;
        continue;
      }
      ++chunk_counts[chunk].first;
      if (opts.huber_delta > 0.0) {
        // Sqrt-reweighting of the whole block against its squared norm.
        const double s = res->values.squaredNorm();
        const double d2 = opts.huber_delta * opts.huber_delta;
        if (s > d2) {
          const double rho = 2.0 * opts.huber_delta * std::sqrt(s) - d2;
          const double f = std::sqrt(rho / s);
          res->values *= f;
          res->d_pose_i *= f;
          res->d_pose_j *= f;
          res->d_focal_i *= f;
          res->d_focal_j *= f;
          res->d_handles_i *= f;
          res->d_handles_j *= f;
        }
      }
      const int row = int(3 * m);
      ev.residuals.segment<3>(row) = res->values;
      if (!trips) continue;
      auto add_block = [&](int col0, const auto& block, int cols,
                           const int* col_map) {
        for (int cc = 0; cc < cols; ++cc) {
          const int col = col_map ? col_map[cc] : col0 + cc;
          if (layout.fixed[col]) continue;
          for (int rr = 0; rr < 3; ++rr) {
            const double v = block(rr, cc);
            if (v != 0.0) trips->emplace_back(row + rr, col, v);
          }
        }
      };
      add_block(layout.pose_offset(c.frame_i), res->d_pose_i, 6, nullptr);
      add_block(layout.pose_offset(c.frame_j), res->d_pose_j, 6, nullptr);
      add_block(layout.focal_offset(c.frame_i), res->d_focal_i, 1, nullptr);
      add_block(layout.focal_offset(c.frame_j), res->d_focal_j, 1, nullptr);
      int cols_i[4], cols_j[4];
      for (int k = 0; k < c.support_i.count; ++k) {
        cols_i[k] = layout.handle_offset(c.frame_i) + c.support_i.index[k];
      }
      for (int k = 0; k < c.support_j.count; ++k) {
        cols_j[k] = layout.handle_offset(c.frame_j) + c.support_j.index[k];
      }
      add_block(0, res->d_handles_i, c.support_i.count, cols_i);
      add_block(0, res->d_handles_j, c.support_j.count, cols_j);
    }
  });

  for (const auto& [used, dropped] : chunk_counts) {
    ev.used += used;
    ev.dropped += dropped;
  }

  std::vector<Triplet> triplets;
  if (with_jacobian) {
    size_t total = 0;
    for (const auto& t : chunk_triplets) total += t.size();
    triplets.reserve(total + deform_pairs.size() * 2 + params.n_frames());
    for (const auto& t : chunk_triplets) {
      triplets.insert(triplets.end(), t.begin(), t.end());
    }
  }

  // Deformation smoothness rows against the log-handle variables; either
  // sqrt(w) * (s_k - s_r) or the scale-invariant sqrt(w) * log(s_k / s_r).
  for (size_t d = 0; d < deform_pairs.size(); ++d) {
    const DeformPair& dp = deform_pairs[d];
    const DeformationGrid& g = params.grids[dp.frame];
    const double sw = std::sqrt(dp.weight);
    const int row = int(deform_row0 + d);
    const int col_k = layout.handle_offset(dp.frame) + dp.k;
    const int col_r = layout.handle_offset(dp.frame) + dp.r;
    if (reg.deform_log_space) {
      ev.residuals(row) = sw * std::log(g.handles[dp.k] / g.handles[dp.r]);
      if (with_jacobian) {
        if (!layout.fixed[col_k]) triplets.emplace_back(row, col_k, sw);
        if (!layout.fixed[col_r]) triplets.emplace_back(row, col_r, -sw);
      }
    } else {
      ev.residuals(row) = sw * (g.handles[dp.k] - g.handles[dp.r]);
      if (with_jacobian) {
        if (!layout.fixed[col_k]) {
          triplets.emplace_back(row, col_k, sw * g.handles[dp.k]);
        }
        if (!layout.fixed[col_r]) {
          triplets.emplace_back(row, col_r, -sw * g.handles[dp.r]);
        }
      }
    }
  }

  // Focal prior rows.
  if (reg.lambda_focal > 0.0) {
    const double sf = std::sqrt(reg.lambda_focal);
    for (int f = 0; f < params.n_frames(); ++f) {
      const int row = int(focal_row0 + f);
      ev.residuals(row) = sf * (params.focals[f] - reg.focal_prior);
      if (with_jacobian) {
        const int col = layout.focal_offset(f);
        if (!layout.fixed[col]) triplets.emplace_back(row, col, sf);
      }
    }
  }

  if (with_jacobian) {
    ev.jacobian.resize(int(n_rows), layout.total);
    ev.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  }
  ev.cost = ev.residuals.squaredNorm();
  return ev;
}

double mean_log_handle(const CameraParamBlock& params) {
  double sum = 0.0;
  size_t n = 0;
  for (const DeformationGrid& g : params.grids) {
    for (double h : g.handles) sum += std::log(h);
    n += g.handles.size();
  }
  return n > 0 ? sum / double(n) : 0.0;
}

CameraParamBlock retract(const CameraParamBlock& params,
                         const Eigen::VectorXd& delta,
                         const ParamLayout& layout, bool fix_scale_gauge) {
  CameraParamBlock out = params;
  for (int f = 0; f < layout.n_frames; ++f) {
    if (f > 0) {
      Eigen::Matrix<double, 6, 1> d =
          delta.segment<6>(layout.pose_offset(f));
      out.poses[f] = local_update(params.poses[f], d);
      out.poses[f].renormalize_rotation();
    }
    const double du = delta(layout.focal_offset(f));
    out.focals[f] = std::max(params.focals[f] + du, 1e-4);
    DeformationGrid& g = out.grids[f];
    for (int k = 0; k < g.handle_count(); ++k) {
      const int col = layout.handle_offset(f) + k;
      if (layout.fixed[col]) continue;
      const double dv = std::clamp(delta(col), -5.0, 5.0);
      g.handles[k] = params.grids[f].handles[k] * std::exp(dv);
    }
  }
  if (layout.shared_focal) {
    for (int f = 1; f < layout.n_frames; ++f) out.focals[f] = out.focals[0];
  }
  if (fix_scale_gauge) {
    // Project the scale gauge: the similarity losses and the reprojection
    // residuals are exactly invariant under scaling every handle and every
    // translation together, while the smoothness term alone would keep
    // shrinking the scene along that orbit. Keep the global log-mean handle
    // where the step started.
    const double gamma =
        std::exp(mean_log_handle(params) - mean_log_handle(out));
    if (gamma != 1.0) {
      for (DeformationGrid& g : out.grids) {
        for (double& h : g.handles) h *= gamma;
      }
      for (Pose& p : out.poses) p.translation *= gamma;
    }
  }
  return out;
}

SpMat damped_normal(const SpMat& H, const Eigen::VectorXd& diag,
                    const std::vector<char>& fixed, double lambda) {
  const int n = int(diag.size());
  SpMat D(n, n);
  std::vector<Triplet> dt;
  dt.reserve(n);
  for (int i = 0; i < n; ++i) {
    double v = fixed[i] ? 1.0 : lambda * std::max(diag(i), 1e-12);
    dt.emplace_back(i, i, v);
  }
  D.setFromTriplets(dt.begin(), dt.end());
  return H + D;
}

enum class SolverPath { Dense, Sparse, Cg };

SolverPath pick_path(const SolveOptions& opts, int n_params) {
  switch (opts.linear_solver) {
    case SolveOptions::LinearSolver::Dense:
      return SolverPath::Dense;
    case SolveOptions::LinearSolver::SparseCholesky:
      return SolverPath::Sparse;
    case SolveOptions::LinearSolver::ConjugateGradient:
      return SolverPath::Cg;
    case SolveOptions::LinearSolver::Auto:
      break;
  }
  return n_params < opts.dense_threshold ? SolverPath::Dense
                                         : SolverPath::Sparse;
}

std::optional<Eigen::VectorXd> solve_normal(const SpMat& damped,
                                            const Eigen::VectorXd& rhs,
                                            SolverPath path) {
  Eigen::VectorXd x;
  switch (path) {
    case SolverPath::Dense: {
      Eigen::MatrixXd Hd(damped);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
      if (ldlt.info() != Eigen::Success) return std::nullopt;
      x = ldlt.solve(rhs);
      break;
    }
    case SolverPath::Sparse: {
      Eigen::SimplicialLDLT<SpMat> ldlt(damped);
      if (ldlt.info() != Eigen::Success) return std::nullopt;
      x = ldlt.solve(rhs);
      break;
    }
    case SolverPath::Cg: {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(damped);
      cg.setTolerance(1e-12);
      x = cg.solve(rhs);
      if (cg.info() != Eigen::Success && cg.error() > 1e-6) {
        return std::nullopt;
      }
      break;
    }
  }
  if (!x.allFinite()) return std::nullopt;
  return x;
}

}  // namespace

Pose local_update(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  out.rotation = pose.rotation * so3_exp(delta.head<3>());
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

CameraParamBlock init_params(const std::vector<DepthMap>& depths,
                             int n_frames, double focal_prior) {
  if (n_frames < 1 || int(depths.size()) < n_frames) {
    throw std::invalid_argument("init_params: missing depth maps");
  }
  const DepthMap& d0 = depths[0];
  if (d0.size() == 0) throw std::invalid_argument("init_params: empty depth");

  std::vector<float> values(d0.data(), d0.data() + d0.size());
  const size_t n = values.size();
  const size_t mid = (n - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double median = values[mid];
  if (n % 2 == 0) {
    std::nth_element(values.begin(), values.begin() + mid + 1, values.end());
    median = 0.5 * (median + values[mid + 1]);
  }
  if (!(median > 0.0)) {
    throw std::invalid_argument("init_params: non-positive median depth");
  }

  CameraParamBlock block;
  block.width = d0.width();
  block.height = d0.height();
  block.poses.assign(n_frames, Pose::identity());
  block.focals.assign(n_frames, focal_prior);
  block.grids.assign(n_frames, DeformationGrid(1, 1, d0.width(), d0.height(),
                                               1.0 / median));
  return block;
}

LevelReport solve_level(const SolveInputs& inputs, CameraParamBlock& params,
                        const SolveOptions& opts, const RegWeights& reg) {
  if (inputs.matches.empty()) {
    throw std::invalid_argument("solve_level: no matches to optimize");
  }
  for (const DeformationGrid& g : params.grids) {
    if (g.cols != params.grids[0].cols || g.rows != params.grids[0].rows) {
      throw std::invalid_argument(
          "solve_level: grids must share one resolution");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();

  const ParamLayout layout = ParamLayout::build(params, opts, true);
  const auto ctxs = build_level_contexts(inputs, params);
  const auto weights = level_weights(inputs, params, reg);
  const auto deform_pairs = build_deform_pairs(params, weights, reg);

  LevelReport report;
  report.cols = params.grids[0].cols;
  report.rows = params.grids[0].rows;

  Evaluation ev = evaluate(inputs, params, ctxs, deform_pairs, layout, opts,
                           reg, true);
  report.initial_cost = ev.cost;
  report.residuals_used = ev.used;
  report.residuals_dropped = ev.dropped;

  const SolverPath path = pick_path(opts, layout.total);
  double cost = ev.cost;
  double lambda = opts.init_damping;
  std::optional<std::string> termination;

  while (report.iterations < opts.max_iterations && !termination) {
    ++report.iterations;

    if (cost <= opts.cost_floor) {
      termination = "cost_floor";
      break;
    }
    const Eigen::VectorXd gradient = ev.jacobian.transpose() * ev.residuals;
    if (gradient.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
      termination = "gradient_tolerance";
      break;
    }
    const SpMat H = SpMat(ev.jacobian.transpose() * ev.jacobian);
    const Eigen::VectorXd diag = H.diagonal();

    bool accepted = false;
    while (lambda <= opts.max_damping) {
      const SpMat damped = damped_normal(H, diag, layout.fixed, lambda);
      const auto step = solve_normal(damped, -gradient, path);
      if (!step) {
        lambda *= opts.damping_increase;
        continue;
      }
      CameraParamBlock candidate = retract(params, *step, layout, opts.fix_scale_handle);
      Evaluation cand = evaluate(inputs, candidate, ctxs, deform_pairs, layout,
                                 opts, reg, false);
      if (cand.cost <= cost) {
        params = std::move(candidate);
        const double rel_decrease =
            (cost - cand.cost) / std::max(cost, 1e-300);
        cost = cand.cost;
        report.residuals_used = cand.used;
        report.residuals_dropped = cand.dropped;
        lambda = std::max(lambda * opts.damping_decrease, 1e-14);
        accepted = true;
        if (rel_decrease < opts.function_tolerance) {
          termination = "function_tolerance";
        } else if (step->lpNorm<Eigen::Infinity>() <
                   opts.parameter_tolerance) {
          termination = "parameter_tolerance";
        }
        break;
      }
      lambda *= opts.damping_increase;
    }
    if (!accepted) {
      termination = "damping_limit";
      break;
    }
    if (!termination) {
      ev = evaluate(inputs, params, ctxs, deform_pairs, layout, opts, reg,
                    true);
    }
  }

  report.termination = termination.value_or("max_iterations");
  report.final_cost = cost;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

SolveReport coarse_to_fine_solve(const SolveInputs& inputs,
                                 CameraParamBlock& params,
                                 const GridSchedule& schedule,
                                 const SolveOptions& opts,
                                 const RegWeights& reg) {
  if (schedule.levels.empty()) {
    throw std::invalid_argument("coarse_to_fine_solve: empty schedule");
  }
  SolveReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (size_t level = 0; level < schedule.levels.size(); ++level) {
    const auto [cols, rows] = schedule.levels[level];
    if (params.grids[0].cols != cols || params.grids[0].rows != rows) {
      for (auto& g : params.grids) g = subdivide(g, cols, rows);
    }
    report.levels.push_back(solve_level(inputs, params, opts, reg));
  }
  report.total_wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

Eigen::SparseMatrix<double> normal_matrix(const SolveInputs& inputs,
                                          const CameraParamBlock& params,
                                          const SolveOptions& opts,
                                          const RegWeights& reg) {
  const ParamLayout layout = ParamLayout::build(params, opts, false);
  const auto ctxs = build_level_contexts(inputs, params);
  const auto weights = level_weights(inputs, params, reg);
  const auto deform_pairs = build_deform_pairs(params, weights, reg);
  Evaluation ev =
      evaluate(inputs, params, ctxs, deform_pairs, layout, opts, reg, true);
  return SpMat(ev.jacobian.transpose() * ev.jacobian);
}

double evaluate_cost(const SolveInputs& inputs, const CameraParamBlock& params,
                     const SolveOptions& opts, const RegWeights& reg,
                     int64_t* used, int64_t* dropped) {
  const ParamLayout layout = ParamLayout::build(params, opts, true);
  const auto ctxs = build_level_contexts(inputs, params);
  const auto weights = level_weights(inputs, params, reg);
  const auto deform_pairs = build_deform_pairs(params, weights, reg);
  Evaluation ev =
      evaluate(inputs, params, ctxs, deform_pairs, layout, opts, reg, false);
  if (used) *used = ev.used;
  if (dropped) *dropped = ev.dropped;
  return ev.cost;
}

}  // namespace vda
