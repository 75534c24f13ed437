#include "vda/depth_filter.h"

#include <cmath>
#include <map>
#include <stdexcept>

#include "vda/parallel.h"

namespace vda {

double filter_weight(double z_reference, double z_sample, double lambda_f) {
  if (!(z_reference > 0.0) || !(z_sample > 0.0)) return 0.0;
  const double ratio =
      std::max(z_reference, z_sample) / std::min(z_reference, z_sample) - 1.0;
  return std::exp(-lambda_f * ratio);
}

double filter_weight(const CameraPoint& reference, const CameraPoint& sample,
                     double lambda_f) {
  if (reference.behind_camera() || sample.behind_camera()) return 0.0;
  return std::exp(-lambda_f * loss_ratio(reference, sample));
}

DepthMap filter_depth(int frame, const std::vector<DepthMap>& deformed,
                      const CameraParamBlock& params, const ChainLookup& chains,
                      const FilterConfig& cfg, FilterStats* stats) {
  const int n_frames = int(deformed.size());
  if (frame < 0 || frame >= n_frames) {
    throw std::invalid_argument("filter_depth: frame out of range");
  }
  const DepthMap& ref = deformed[frame];
  const int w = ref.width(), h = ref.height();
  const Intrinsics K_i = params.intrinsics(frame);

  std::vector<Intrinsics> K(n_frames);
  for (int f = 0; f < n_frames; ++f) K[f] = params.intrinsics(f);

  DepthMap out(w, h);
  out.frame = frame;

  const int j_lo = std::max(0, frame - cfg.tau);
  const int j_hi = std::min(n_frames - 1, frame + cfg.tau);

  std::vector<FilterStats> row_stats(h);

  parallel_chunks(size_t(h), 1, cfg.threads, [&](size_t row, size_t) {
    const int y = int(row);
    FilterStats& st = row_stats[row];
    for (int x = 0; x < w; ++x) {
      const double z_ref = ref.at(x, y);
      double sum_wz = 0.0, sum_w = 0.0;
      int64_t used = 0;
      for (int qy = y - cfg.radius; qy <= y + cfg.radius; ++qy) {
        for (int qx = x - cfg.radius; qx <= x + cfg.radius; ++qx) {
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
          for (int j = j_lo; j <= j_hi; ++j) {
            double z_sample;
            if (j == frame) {
              z_sample = ref.at(qx, qy);
            } else {
              const ChainedFlow* chain = chains(frame, j);
              if (chain == nullptr || !chain->valid.get(qx, qy)) {
                ++st.samples_rejected;
                continue;
              }
              const double tx = qx + chain->flow.u.at(qx, qy);
              const double ty = qy + chain->flow.v.at(qx, qy);
              if (!deformed[j].in_bounds(tx, ty)) {
                ++st.samples_rejected;
                continue;
              }
              const double d_j = deformed[j].sample(tx, ty);
              const PixelCoord plane =
                  K[j].plane_from_raster(PixelCoord{tx, ty});
              const CameraPoint lifted = lift(plane, d_j, 1.0);
              const CameraPoint back =
                  reproject(lifted, params.poses[j], params.poses[frame],
                            K[j], K_i);
              if (back.behind_camera()) {
                ++st.samples_rejected;
                continue;
              }
              z_sample = back.z;
            }
            const double wgt = filter_weight(z_ref, z_sample, cfg.lambda_f);
            sum_wz += wgt * z_sample;
            sum_w += wgt;
            ++used;
          }
        }
      }
      st.samples_used += used;
      if (used == 0 || !(sum_w > 0.0)) {
        out.at(x, y) = ref.at(x, y);
        ++st.fallback_pixels;
      } else {
        out.at(x, y) = float(cfg.normalize ? sum_wz / sum_w : sum_wz);
      }
    }
  });

  if (stats) {
    for (const FilterStats& st : row_stats) {
      stats->fallback_pixels += st.fallback_pixels;
      stats->samples_used += st.samples_used;
      stats->samples_rejected += st.samples_rejected;
    }
  }
  return out;
}

std::vector<DepthMap> filter_video(const std::vector<DepthMap>& deformed,
                                   const CameraParamBlock& params,
                                   const ConsecutiveFlows& flows,
                                   const FilterConfig& cfg,
                                   FilterStats* stats) {
  const int n_frames = int(deformed.size());
  if (n_frames == 0) throw std::invalid_argument("filter_video: no frames");
  if (int(flows.forward.size()) < n_frames - 1 ||
      int(flows.backward.size()) < n_frames - 1) {
    throw std::invalid_argument("filter_video: missing consecutive flows");
  }

  std::vector<DepthMap> result(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    // Incrementally chained flows from frame i to every frame within tau.
    std::map<int, ChainedFlow> chain_store;
    auto extend = [&](int dir) {
      const int last = i + dir * cfg.tau;
      for (int j = i + dir; dir > 0 ? j <= last : j >= last; j += dir) {
        if (j < 0 || j >= n_frames) break;
        std::vector<const FlowField*> hop_flows;
        std::vector<const BinaryMask*> hop_masks;
        for (int t = i; t != j; t += dir) {
          if (dir > 0) {
            hop_flows.push_back(&flows.forward[t]);
            hop_masks.push_back(t < int(flows.forward_mask.size()) &&
                                        !flows.forward_mask[t].empty()
                                    ? &flows.forward_mask[t]
                                    : nullptr);
          } else {
            hop_flows.push_back(&flows.backward[t - 1]);
            hop_masks.push_back(t - 1 < int(flows.backward_mask.size()) &&
                                        !flows.backward_mask[t - 1].empty()
                                    ? &flows.backward_mask[t - 1]
                                    : nullptr);
          }
        }
        chain_store.emplace(j, chain_flow(hop_flows, hop_masks));
      }
    };
    extend(+1);
    extend(-1);
    auto lookup = [&](int, int j) -> const ChainedFlow* {
      auto it = chain_store.find(j);
      return it == chain_store.end() ? nullptr : &it->second;
    };
    result[i] = filter_depth(i, deformed, params, lookup, cfg, stats);
  }
  return result;
}

}  // namespace vda
