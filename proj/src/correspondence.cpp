#include "vda/correspondence.h"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vda {

std::vector<FramePair> build_pair_set(int n_frames) {
  if (n_frames < 2) {
    throw std::invalid_argument("build_pair_set: need at least two frames");
  }
  std::vector<FramePair> pairs;
  for (int k = 1; k < n_frames; k *= 2) {
    for (int i = 0; i + k < n_frames; i += k) {
      pairs.push_back({i, i + k});
    }
  }
  return pairs;
}

BinaryMask fb_consistency_mask(const FlowField& flow_ij,
                               const FlowField& flow_ji, double threshold) {
  if (!flow_ij.u.same_size(flow_ji.u)) {
    throw std::invalid_argument("fb_consistency_mask: dimension mismatch");
  }
  const int w = flow_ij.width(), h = flow_ij.height();
  BinaryMask mask(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fx = flow_ij.u.at(x, y);
      const double fy = flow_ij.v.at(x, y);
      const double qx = x + fx, qy = y + fy;
      if (!flow_ji.u.in_bounds(qx, qy)) continue;
      const double rx = fx + flow_ji.u.sample(qx, qy);
      const double ry = fy + flow_ji.v.sample(qx, qy);
      mask.set(x, y, std::sqrt(rx * rx + ry * ry) < threshold);
    }
  }
  return mask;
}

ChainedFlow chain_flow(const std::vector<const FlowField*>& hop_flows,
                       const std::vector<const BinaryMask*>& hop_masks) {
  if (hop_flows.empty()) {
    throw std::invalid_argument("chain_flow: no hops");
  }
  if (hop_masks.size() != hop_flows.size()) {
    throw std::invalid_argument("chain_flow: mask/flow count mismatch");
  }
  for (const FlowField* f : hop_flows) {
    if (f == nullptr) {
      throw std::invalid_argument("chain_flow: missing intermediate flow");
    }
  }
  const int w = hop_flows[0]->width(), h = hop_flows[0]->height();

  ChainedFlow out;
  out.flow = FlowField(w, h);
  out.flow.src = hop_flows.front()->src;
  out.flow.dst = hop_flows.back()->dst;
  out.valid = BinaryMask(w, h, false);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double cx = x, cy = y;
      bool ok = true;
      for (size_t t = 0; t < hop_flows.size(); ++t) {
        const FlowField& f = *hop_flows[t];
        if (!f.u.in_bounds(cx, cy)) {
          ok = false;
          break;
        }
        if (hop_masks[t] != nullptr) {
          const int mx = int(std::lround(cx)), my = int(std::lround(cy));
          if (!hop_masks[t]->get(std::clamp(mx, 0, w - 1),
                                 std::clamp(my, 0, h - 1))) {
            ok = false;
            break;
          }
        }
        const double du = f.u.sample(cx, cy);
        const double dv = f.v.sample(cx, cy);
        cx += du;
        cy += dv;
      }
      if (ok && !hop_flows.back()->u.in_bounds(cx, cy)) ok = false;
      out.flow.u.at(x, y) = float(cx - x);
      out.flow.v.at(x, y) = float(cy - y);
      out.valid.set(x, y, ok);
    }
  }
  return out;
}

std::vector<Match> sample_matches(const FlowField& flow,
                                  const BinaryMask& m_flow,
                                  const BinaryMask& m_dyn, double min_dist,
                                  uint64_t seed, MatchStats* stats) {
  if (flow.width() != m_flow.width() || flow.height() != m_flow.height() ||
      flow.width() != m_dyn.width() || flow.height() != m_dyn.height()) {
    throw std::invalid_argument("sample_matches: dimension mismatch");
  }
  if (!(min_dist >= 1.0)) {
    throw std::invalid_argument("sample_matches: min_dist must be >= 1");
  }
  const int w = flow.width(), h = flow.height();
  const int cell = std::max(1, int(std::lround(min_dist)));
  const int cells_x = (w + cell - 1) / cell;
  const int cells_y = (h + cell - 1) / cell;
  const double min_dist2 = min_dist * min_dist;

  std::mt19937_64 rng(seed);
  // One accepted pixel per cell, indexed for the neighbor distance check.
  std::vector<int> cell_point(size_t(cells_x) * cells_y, -1);
  std::vector<Match> matches;
  MatchStats st;
  st.cells = cells_x * cells_y;

  constexpr int kAttempts = 8;
  for (int gy = 0; gy < cells_y; ++gy) {
    for (int gx = 0; gx < cells_x; ++gx) {
      const int x0 = gx * cell, y0 = gy * cell;
      const int x1 = std::min(x0 + cell, w), y1 = std::min(y0 + cell, h);
      std::uniform_int_distribution<int> dx(x0, x1 - 1), dy(y0, y1 - 1);
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const int px = dx(rng), py = dy(rng);
        if (!m_flow.get(px, py) || m_dyn.get(px, py)) {
          ++st.rejected_mask;
          continue;
        }
        bool clear = true;
        for (int ny = std::max(0, gy - 1); ny <= std::min(cells_y - 1, gy + 1);
             ++ny) {
          for (int nx = std::max(0, gx - 1);
               nx <= std::min(cells_x - 1, gx + 1); ++nx) {
            const int idx = cell_point[size_t(ny) * cells_x + nx];
            if (idx < 0) continue;
            const double ddx = matches[idx].p.x - px;
            const double ddy = matches[idx].p.y - py;
            if (ddx * ddx + ddy * ddy < min_dist2) {
              clear = false;
              break;
            }
          }
          if (!clear) break;
        }
        if (!clear) {
          ++st.rejected_distance;
          continue;
        }
        Match m;
        m.p = {double(px), double(py)};
        m.q = {px + double(flow.u.at(px, py)), py + double(flow.v.at(px, py))};
        cell_point[size_t(gy) * cells_x + gx] = int(matches.size());
        matches.push_back(m);
        ++st.accepted;
        break;
      }
    }
  }
  if (stats) *stats = st;
  return matches;
}

}  // namespace vda
