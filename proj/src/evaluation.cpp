#include "vda/evaluation.h"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vda {

Similarity align_trajectory(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || pred.size() < 1) {
    throw std::invalid_argument("align_trajectory: size mismatch");
  }
  const int n = pred.size();

  Eigen::Vector3d mu_p = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_g = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    mu_p += pred.position(i);
    mu_g += gt.position(i);
  }
  mu_p /= n;
  mu_g /= n;

  double var_p = 0.0, var_g = 0.0;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d dp = pred.position(i) - mu_p;
    const Eigen::Vector3d dg = gt.position(i) - mu_g;
    var_p += dp.squaredNorm();
    var_g += dg.squaredNorm();
    cov += dg * dp.transpose();
  }
  var_p /= n;
  var_g /= n;
  cov /= n;

  Similarity sim;
  if (n < 3 || var_p < 1e-300) {
    // Not enough geometry for a rotation; scale from spreads, then match
    // centroids.
    sim.degenerate = true;
    sim.scale = var_p > 1e-300 ? std::sqrt(var_g / var_p) : 1.0;
    sim.translation = mu_g - sim.scale * mu_p;
    return sim;
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) {
    s.z() = -1.0;
  }
  sim.rotation =
      svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  sim.scale = svd.singularValues().dot(s) / var_p;
  sim.translation = mu_g - sim.scale * (sim.rotation * mu_p);
  return sim;
}

Trajectory apply_alignment(const Similarity& sim, const Trajectory& traj) {
  Trajectory out;
  out.poses.reserve(traj.poses.size());
  for (const Pose& p : traj.poses) out.poses.push_back(sim.apply(p));
  return out;
}

double ate(const Trajectory& aligned, const Trajectory& gt) {
  if (aligned.size() != gt.size() || aligned.size() < 1) {
    throw std::invalid_argument("ate: size mismatch");
  }
  double sum = 0.0;
  for (int i = 0; i < aligned.size(); ++i) {
    sum += (aligned.position(i) - gt.position(i)).squaredNorm();
  }
  return std::sqrt(sum / aligned.size());
}

double RpeResult::mean_translation() const {
  if (translation.empty()) return 0.0;
  double s = 0.0;
  for (double v : translation) s += v;
  return s / translation.size();
}

double RpeResult::mean_rotation_deg() const {
  if (rotation_deg.empty()) return 0.0;
  double s = 0.0;
  for (double v : rotation_deg) s += v;
  return s / rotation_deg.size();
}

RpeResult rpe(const Trajectory& pred, const Trajectory& gt, int delta) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("rpe: size mismatch");
  }
  if (delta < 1 || pred.size() <= delta) {
    throw std::invalid_argument("rpe: delta out of range");
  }
  RpeResult out;
  for (int i = 0; i + delta < pred.size(); ++i) {
    const Pose rel_pred = pred.poses[i].inverse().compose(pred.poses[i + delta]);
    const Pose rel_gt = gt.poses[i].inverse().compose(gt.poses[i + delta]);
    const Pose err = rel_gt.inverse().compose(rel_pred);
    out.translation.push_back(err.translation.norm());
    const double angle = so3_log(err.rotation).norm();
    out.rotation_deg.push_back(angle * 180.0 / M_PI);
  }
  return out;
}

DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& gt, double cap) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("depth_metrics: sequence size mismatch");
  }

  std::vector<float> pred_vals, gt_vals;
  for (size_t f = 0; f < pred.size(); ++f) {
    if (!pred[f].same_size(gt[f])) {
      throw std::invalid_argument("depth_metrics: raster size mismatch");
    }
    for (int y = 0; y < gt[f].height(); ++y) {
      for (int x = 0; x < gt[f].width(); ++x) {
        const float g = gt[f].at(x, y);
        const float p = pred[f].at(x, y);
        if (!(g > 0.f) || g > cap || !(p > 0.f)) continue;
        gt_vals.push_back(g);
        pred_vals.push_back(p);
      }
    }
  }
  if (gt_vals.empty()) {
    throw std::invalid_argument("depth_metrics: no valid pixels under cap");
  }

  auto median = [](std::vector<float> v) {
    const size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      std::nth_element(v.begin(), v.begin() + mid + 1, v.end());
      m = 0.5 * (m + v[mid + 1]);
    }
    return m;
  };

  DepthMetrics m;
  m.scale = median(gt_vals) / median(pred_vals);
  m.pixels = int64_t(gt_vals.size());
  m.sorted_abs_rel.reserve(gt_vals.size());

  double se = 0.0, abs_rel = 0.0;
  int64_t d1 = 0, d2 = 0, d3 = 0;
  for (size_t i = 0; i < gt_vals.size(); ++i) {
    const double g = gt_vals[i];
    const double p = m.scale * pred_vals[i];
    const double err = p - g;
    se += err * err;
    m.sorted_abs_rel.push_back(float(std::abs(err) / g));
    abs_rel += std::abs(err) / g;
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  m.abs_rel = abs_rel / double(m.pixels);
  m.rmse = std::sqrt(se / double(m.pixels));
  m.delta_125 = double(d1) / double(m.pixels);
  m.delta_125_2 = double(d2) / double(m.pixels);
  m.delta_125_3 = double(d3) / double(m.pixels);
  std::sort(m.sorted_abs_rel.begin(), m.sorted_abs_rel.end());
  return m;
}

}  // namespace vda
