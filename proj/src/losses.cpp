#include "vda/losses.h"

#include <cmath>
#include <stdexcept>

namespace vda {

namespace {

void require_positive_z(const CameraPoint& a, const CameraPoint& b,
                        const char* what) {
  if (a.behind_camera() || b.behind_camera()) {
    throw std::invalid_argument(std::string(what) +
                                ": points must have positive z");
  }
}

}  // namespace

double loss_euclidean(const CameraPoint& a, const CameraPoint& b) {
  return (a.vec() - b.vec()).squaredNorm();
}

double loss_spatial(const CameraPoint& a, const CameraPoint& b) {
  require_positive_z(a, b, "loss_spatial");
  Eigen::Vector2d pa(a.x / a.z, a.y / a.z);
  Eigen::Vector2d pb(b.x / b.z, b.y / b.z);
  return (pa - pb).squaredNorm();
}

double loss_disparity(const CameraPoint& a, const CameraPoint& b) {
  require_positive_z(a, b, "loss_disparity");
  double d = 1.0 / a.z - 1.0 / b.z;
  return d * d;
}

double loss_ratio(const CameraPoint& a, const CameraPoint& b) {
  require_positive_z(a, b, "loss_ratio");
  return std::max(a.z, b.z) / std::min(a.z, b.z) - 1.0;
}

double loss_sim(const CameraPoint& a, const CameraPoint& b) {
  return loss_spatial(a, b) + loss_ratio(a, b);
}

std::optional<ReproResidual> residual_repro(
    const MatchContext& m, const Pose& pose_i, const Pose& pose_j,
    const Intrinsics& K_i, const Intrinsics& K_j, const DeformationGrid& grid_i,
    const DeformationGrid& grid_j, LossKind kind, bool with_jacobian) {
  // Deformed depths at both endpoints.
  double phi_i = 0.0, phi_j = 0.0;
  for (int k = 0; k < m.support_i.count; ++k) {
    phi_i += m.support_i.weight[k] * grid_i.handles[m.support_i.index[k]];
  }
  for (int k = 0; k < m.support_j.count; ++k) {
    phi_j += m.support_j.weight[k] * grid_j.handles[m.support_j.index[k]];
  }
  const double z_i = phi_i * m.depth_i;
  const double z_j = phi_j * m.depth_j;
  if (!(z_i > 0.0) || !(z_j > 0.0)) return std::nullopt;

  // Geometric reprojection of p into frame j.
  const Eigen::Vector3d dir_i(m.p_plane.x / K_i.focal, m.p_plane.y / K_i.focal,
                              1.0);
  const Eigen::Vector3d x_i = z_i * dir_i;
  const Eigen::Vector3d world = pose_i.rotation * x_i + pose_i.translation;
  const Eigen::Vector3d x_j =
      pose_j.rotation.transpose() * (world - pose_j.translation);
  const Eigen::Vector3d a(K_j.focal * x_j.x(), K_j.focal * x_j.y(), x_j.z());
  if (!(a.z() > 0.0)) return std::nullopt;

  // Flow endpoint lifted in frame j.
  const Eigen::Vector3d b(m.q_plane.x * z_j, m.q_plane.y * z_j, z_j);

  ReproResidual out;

  // Residual head r(a, b) and its 3x3 partials.
  Eigen::Matrix3d J_a = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d J_b = Eigen::Matrix3d::Zero();
  auto spatial_head = [&](Eigen::Vector3d& r, Eigen::Matrix3d& Ja,
                          Eigen::Matrix3d& Jb) {
    r.x() = a.x() / a.z() - b.x() / b.z();
    r.y() = a.y() / a.z() - b.y() / b.z();
    Ja(0, 0) = 1.0 / a.z();
    Ja(0, 2) = -a.x() / (a.z() * a.z());
    Ja(1, 1) = 1.0 / a.z();
    Ja(1, 2) = -a.y() / (a.z() * a.z());
    Jb(0, 0) = -1.0 / b.z();
    Jb(0, 2) = b.x() / (b.z() * b.z());
    Jb(1, 1) = -1.0 / b.z();
    Jb(1, 2) = b.y() / (b.z() * b.z());
  };

  switch (kind) {
    case LossKind::Euclidean:
      out.values = a - b;
      J_a = Eigen::Matrix3d::Identity();
      J_b = -Eigen::Matrix3d::Identity();
      break;
    case LossKind::SpatialDisparity: {
      spatial_head(out.values, J_a, J_b);
      out.values.z() = 1.0 / a.z() - 1.0 / b.z();
      J_a(2, 2) = -1.0 / (a.z() * a.z());
      J_b(2, 2) = 1.0 / (b.z() * b.z());
      break;
    }
    case LossKind::SpatialRatio: {
      spatial_head(out.values, J_a, J_b);
      // Depth component max/min - 1, taken as the residual directly (its
      // square, not the ratio loss itself, enters the objective): the exact
      // square root sqrt(max/min - 1) has an unbounded derivative on the
      // consistency manifold and stalls Gauss-Newton. At the a_z = b_z kink
      // the derivative follows the max branch.
      out.values.z() = std::max(a.z(), b.z()) / std::min(a.z(), b.z()) - 1.0;
      if (a.z() >= b.z()) {
        J_a(2, 2) = 1.0 / b.z();
        J_b(2, 2) = -a.z() / (b.z() * b.z());
      } else {
        J_a(2, 2) = -b.z() / (a.z() * a.z());
        J_b(2, 2) = 1.0 / a.z();
      }
      break;
    }
  }

  if (!with_jacobian) return out;

  const Eigen::Matrix3d A = pose_j.rotation.transpose() * pose_i.rotation;
  auto apply_Kj = [&](const Eigen::Matrix3d& M) {
    Eigen::Matrix3d out_m = M;
    out_m.row(0) *= K_j.focal;
    out_m.row(1) *= K_j.focal;
    return out_m;
  };
  const Eigen::Matrix3d KjA = apply_Kj(A);
  const Eigen::Matrix3d KjRjT = apply_Kj(pose_j.rotation.transpose());

  // Pose i: rotation increment (right-multiplied), then translation.
  Eigen::Matrix<double, 3, 6> da_pose_i;
  da_pose_i.block<3, 3>(0, 0) = -KjA * skew(x_i);
  da_pose_i.block<3, 3>(0, 3) = KjRjT;
  // Pose j.
  Eigen::Matrix<double, 3, 6> da_pose_j;
  da_pose_j.block<3, 3>(0, 0) = apply_Kj(skew(x_j));
  da_pose_j.block<3, 3>(0, 3) = -KjRjT;

  // Focals. a depends on u_i through K_i^-1 and on u_j through K_j; the
  // lifted endpoint b carries no intrinsics at all.
  const Eigen::Vector3d dxi_dui(-z_i * m.p_plane.x / (K_i.focal * K_i.focal),
                                -z_i * m.p_plane.y / (K_i.focal * K_i.focal),
                                0.0);
  const Eigen::Vector3d da_dui = KjA * dxi_dui;
  const Eigen::Vector3d da_duj(x_j.x(), x_j.y(), 0.0);

  // Depth-scale handles, in log space: d z / d log(s_k) = b_k * d * s_k.
  const Eigen::Vector3d da_dzi = KjA * dir_i;
  const Eigen::Vector3d db_dzj(m.q_plane.x, m.q_plane.y, 1.0);

  out.d_pose_i = J_a * da_pose_i;
  out.d_pose_j = J_a * da_pose_j;
  out.d_focal_i = J_a * da_dui;
  out.d_focal_j = J_a * da_duj;
  out.d_handles_i.setZero();
  out.d_handles_j.setZero();
  const Eigen::Vector3d r_dzi = J_a * da_dzi;
  const Eigen::Vector3d r_dzj = J_b * db_dzj;
  for (int k = 0; k < m.support_i.count; ++k) {
    const double dz = m.support_i.weight[k] * m.depth_i *
                      grid_i.handles[m.support_i.index[k]];
    out.d_handles_i.col(k) = r_dzi * dz;
  }
  for (int k = 0; k < m.support_j.count; ++k) {
    const double dz = m.support_j.weight[k] * m.depth_j *
                      grid_j.handles[m.support_j.index[k]];
    out.d_handles_j.col(k) = r_dzj * dz;
  }
  return out;
}

std::vector<double> handle_weights(const BinaryMask& m_dyn,
                                   const DeformationGrid& grid,
                                   const RegWeights& w) {
  if (m_dyn.width() != grid.image_width ||
      m_dyn.height() != grid.image_height) {
    throw std::invalid_argument("handle_weights: mask/grid dimension mismatch");
  }
  std::vector<double> dyn_mass(grid.handle_count(), 0.0);
  std::vector<double> total_mass(grid.handle_count(), 0.0);
  for (int y = 0; y < m_dyn.height(); ++y) {
    for (int x = 0; x < m_dyn.width(); ++x) {
      SplineSupport s = grid.support(PixelCoord{double(x), double(y)});
      const double dyn = m_dyn.get(x, y) ? 1.0 : 0.0;
      for (int k = 0; k < s.count; ++k) {
        total_mass[s.index[k]] += s.weight[k];
        dyn_mass[s.index[k]] += dyn * s.weight[k];
      }
    }
  }
  std::vector<double> weights(grid.handle_count());
  for (int k = 0; k < grid.handle_count(); ++k) {
    double frac = w.normalize_handle_weights
                      ? (total_mass[k] > 0.0 ? dyn_mass[k] / total_mass[k] : 0.0)
                      : dyn_mass[k];
    weights[k] = w.lambda1 + w.lambda2 * frac;
  }
  return weights;
}

DeformLoss loss_deform(const std::vector<DeformationGrid>& grids,
                       const std::vector<std::vector<double>>& weights,
                       const RegWeights& w) {
  if (grids.size() != weights.size()) {
    throw std::invalid_argument("loss_deform: grids/weights size mismatch");
  }
  DeformLoss out;
  out.gradients.resize(grids.size());
  const double pair_mult = w.count_pairs_twice ? 2.0 : 1.0;
  for (size_t f = 0; f < grids.size(); ++f) {
    const DeformationGrid& g = grids[f];
    const std::vector<double>& wf = weights[f];
    out.gradients[f].assign(g.handle_count(), 0.0);
    auto add_pair = [&](int k, int r) {
      const double diff = g.handles[k] - g.handles[r];
      const double pw = pair_mult * std::max(wf[k], wf[r]);
      out.value += pw * diff * diff;
      out.gradients[f][k] += 2.0 * pw * diff;
      out.gradients[f][r] -= 2.0 * pw * diff;
    };
    for (int cy = 0; cy < g.rows; ++cy) {
      for (int cx = 0; cx < g.cols; ++cx) {
        const int k = cy * g.cols + cx;
        if (cx + 1 < g.cols) add_pair(k, k + 1);
        if (cy + 1 < g.rows) add_pair(k, k + g.cols);
      }
    }
  }
  return out;
}

FocalLoss loss_focal(const std::vector<double>& focals, double focal_prior) {
  FocalLoss out;
  out.gradients.resize(focals.size());
  for (size_t i = 0; i < focals.size(); ++i) {
    const double d = focals[i] - focal_prior;
    out.value += d * d;
    out.gradients[i] = 2.0 * d;
  }
  return out;
}

}  // namespace vda
