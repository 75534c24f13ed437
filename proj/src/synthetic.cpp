#include "vda/synthetic.h"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vda {

namespace {

// World frame: the surface sits near the z=0 plane, cameras observe it from
// negative z looking along +z. Image y points down in world as in raster.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Pose pose;
  const Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d right = Eigen::Vector3d(0, 1, 0).cross(fwd);
  if (right.norm() < 1e-12) right = Eigen::Vector3d(1, 0, 0);
  right.normalize();
  const Eigen::Vector3d down = fwd.cross(right);
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = fwd;
  pose.translation = eye;
  return pose;
}

Eigen::Matrix3d rot_z(double angle) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  const double c = std::cos(angle), s = std::sin(angle);
  R(0, 0) = c;
  R(0, 1) = -s;
  R(1, 0) = s;
  R(1, 1) = c;
  return R;
}

double heightfield_z(const GroundTruth& gt, double x, double y) {
  const double amp = gt.spec.height_amplitude;
  const double k = 2.0 * M_PI / gt.spec.extent;
  double z = 0.0;
  for (int w = 0; w < 4; ++w) {
    const auto& row = gt.height_waves.row(w);
    z += std::sin(k * (row(0) * x + row(1) * y) + row(2));
  }
  return amp * 0.25 * z;
}

// Camera-space depth of the surface along the pixel ray; the ray parameter
// is the camera z itself because the direction's z component is 1.
double raycast(const GroundTruth& gt, const Pose& pose,
               const Eigen::Vector3d& dir_cam, Eigen::Vector3d* world_out) {
  const Eigen::Vector3d o = pose.translation;
  const Eigen::Vector3d d = pose.rotation * dir_cam;

  auto plane_hit = [&](double plane_z) {
    if (std::abs(d.z()) < 1e-12) return -1.0;
    return (plane_z - o.z()) / d.z();
  };

  double t = -1.0;
  switch (gt.spec.scene) {
    case SceneKind::Plane:
      t = plane_hit(0.0);
      break;
    case SceneKind::TwoPlane: {
      // Watertight step: near half-plane (world x < 0), far half-plane
      // (x >= 0), and the vertical wall joining them at x = 0. The nearest
      // positive hit wins, so every frame sees one consistent surface.
      const double z_near = gt.spec.near_depth - gt.spec.base_depth;
      const double z_far = gt.spec.far_depth - gt.spec.base_depth;
      const double tn = plane_hit(z_near);
      const double tf = plane_hit(z_far);
      double best = -1.0;
      auto consider = [&best](double cand) {
        if (cand > 0 && (best < 0 || cand < best)) best = cand;
      };
      if (tn > 0 && (o + tn * d).x() < 0.0) consider(tn);
      if (tf > 0 && (o + tf * d).x() >= 0.0) consider(tf);
      if (std::abs(d.x()) > 1e-12) {
        const double tw = (0.0 - o.x()) / d.x();
        if (tw > 0) {
          const double z = (o + tw * d).z();
          if (z >= z_near && z <= z_far) consider(tw);
        }
      }
      t = best;
      break;
    }
    case SceneKind::Heightfield: {
      auto residual = [&](double tt) {
        const Eigen::Vector3d p = o + tt * d;
        return p.z() - heightfield_z(gt, p.x(), p.y());
      };
      // Newton on f(t) = ray_z(t) - h(ray_xy(t)) from the base plane.
      t = plane_hit(0.0);
      if (t <= 0) break;
      for (int it = 0; it < 50; ++it) {
        const double f = residual(t);
        const double h = 1e-6;
        const double df = (residual(t + h) - f) / h;
        if (std::abs(df) < 1e-12) break;
        const double step = f / df;
        t -= step;
        if (std::abs(step) < 1e-13) break;
      }
      if (!(t > 0.0) || std::abs(residual(t)) > 1e-9) {
        // Steep relief can defeat Newton; bracket the first crossing by
        // marching from the nearest possible surface, then bisect.
        const double t_lo0 = plane_hit(-gt.spec.height_amplitude);
        double lo = t_lo0 > 0 ? t_lo0 : 1e-3;
        t = -1.0;
        double hi = lo;
        const double step = 0.05;
        for (int it = 0; it < 4000; ++it) {
          hi = lo + step;
          if (residual(hi) >= 0.0) break;
          lo = hi;
        }
        if (residual(hi) >= 0.0 && residual(lo) < 0.0) {
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (residual(mid) < 0.0 ? lo : hi) = mid;
          }
          t = 0.5 * (lo + hi);
        }
      }
      break;
    }
    case SceneKind::PointCloud:
      // Backdrop plane; the splatted points overwrite it.
      t = plane_hit(0.5 * gt.spec.extent);
      break;
  }
  if (world_out && t > 0) *world_out = o + t * d;
  return t;
}

}  // namespace

GroundTruth gen_scene(const SceneSpec& spec) {
  if (spec.n_frames < 2) {
    throw std::invalid_argument("gen_scene: need at least two frames");
  }
  if (!(spec.extent > 0.0)) {
    throw std::invalid_argument("gen_scene: extent must be positive");
  }
  if (spec.motion_scale <= 0.0 &&
      (spec.trajectory == TrajectoryKind::Orbit ||
       spec.trajectory == TrajectoryKind::Arc)) {
    throw std::invalid_argument("gen_scene: degenerate trajectory (zero baseline)");
  }

  GroundTruth gt;
  gt.spec = spec;
  gt.intrinsics = Intrinsics::for_image(spec.width, spec.height, spec.focal);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (int w = 0; w < 4; ++w) {
    gt.height_waves(w, 0) = 0.5 + 1.5 * uni(rng);
    gt.height_waves(w, 1) = 0.5 + 1.5 * uni(rng);
    gt.height_waves(w, 2) = 2.0 * M_PI * uni(rng);
  }

  if (spec.scene == SceneKind::PointCloud) {
    gt.points.reserve(spec.point_count);
    for (int i = 0; i < spec.point_count; ++i) {
      const double x = (uni(rng) - 0.5) * spec.extent;
      const double y = (uni(rng) - 0.5) * spec.extent;
      const double z = (uni(rng) - 0.6) * 0.5 * spec.extent;
      gt.points.emplace_back(x, y, z);
    }
  }

  const double D = spec.base_depth;
  const Eigen::Vector3d base_eye(0, 0, -D);
  const double radius = 0.25 * spec.extent * spec.motion_scale;

  for (int f = 0; f < spec.n_frames; ++f) {
    const double s = spec.n_frames > 1 ? double(f) / (spec.n_frames - 1) : 0.0;
    Pose pose;
    switch (spec.trajectory) {
      case TrajectoryKind::Orbit: {
        // Rigidly rotate a tilted base pose about the world viewing axis:
        // consecutive relative rotations are exactly 2*pi/n.
        const double theta = 2.0 * M_PI * f / spec.n_frames;
        const Pose base = spec.allow_rotation
                              ? look_at(base_eye + Eigen::Vector3d(radius, 0, 0),
                                        Eigen::Vector3d::Zero())
                              : Pose{Eigen::Matrix3d::Identity(),
                                     base_eye + Eigen::Vector3d(radius, 0, 0)};
        pose.rotation = rot_z(theta) * base.rotation;
        pose.translation = rot_z(theta) * base.translation;
        break;
      }
      case TrajectoryKind::Arc: {
        if (spec.allow_rotation) {
          const double theta = (s - 0.5) * M_PI / 3.0 * spec.motion_scale;
          const Eigen::Vector3d eye(D * std::sin(theta), 0,
                                    -D * std::cos(theta));
          pose = look_at(eye, Eigen::Vector3d::Zero());
        } else {
          // Strafe along the chord at fixed distance: camera z never
          // changes, so a fronto-parallel plane keeps one exact depth for
          // the whole sequence.
          const double amp = 0.3 * D * spec.motion_scale;
          pose.translation = base_eye + Eigen::Vector3d(
                                            amp * (s - 0.5),
                                            0.4 * amp * std::sin(M_PI * s),
                                            0.0);
        }
        break;
      }
      case TrajectoryKind::Forward: {
        pose.translation =
            base_eye + Eigen::Vector3d(0, 0, 0.3 * D * spec.motion_scale * s);
        break;
      }
      case TrajectoryKind::HandheldJitter: {
        // Smooth low-amplitude path plus per-frame shake; the shake
        // dominates the drift step so consecutive displacements change
        // direction, as hand-held footage does.
        const double drift = 0.15 * spec.extent * spec.motion_scale;
        const Eigen::Vector3d eye =
            base_eye + Eigen::Vector3d(drift * (s - 0.5),
                                       0.3 * drift * std::sin(2 * M_PI * s),
                                       0.02 * D * s);
        pose = spec.allow_rotation ? look_at(eye, Eigen::Vector3d::Zero())
                                   : Pose{Eigen::Matrix3d::Identity(), eye};
        Eigen::Vector3d jitter_rot(uni(rng) - 0.5, uni(rng) - 0.5,
                                   uni(rng) - 0.5);
        Eigen::Vector3d jitter_trans(uni(rng) - 0.5, uni(rng) - 0.5,
                                     uni(rng) - 0.5);
        if (spec.allow_rotation) {
          pose.rotation =
              pose.rotation * so3_exp(0.01 * spec.motion_scale * jitter_rot);
        }
        pose.translation += 0.04 * D * spec.motion_scale * jitter_trans;
        break;
      }
    }
    gt.poses.push_back(pose);
  }
  return gt;
}

GeometryBuffer render_geometry(const GroundTruth& gt, int frame) {
  if (frame < 0 || frame >= gt.n_frames()) {
    throw std::invalid_argument("render_geometry: frame out of range");
  }
  const SceneSpec& spec = gt.spec;
  const Pose& pose = gt.poses[frame];
  GeometryBuffer buf;
  buf.depth = DepthMap(spec.width, spec.height);
  buf.depth.frame = frame;
  buf.world_points.assign(size_t(spec.width) * spec.height,
                          Eigen::Vector3d::Zero());

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const PixelCoord plane =
          gt.intrinsics.plane_from_raster({double(x), double(y)});
      const Eigen::Vector3d dir(plane.x / gt.intrinsics.focal,
                                plane.y / gt.intrinsics.focal, 1.0);
      Eigen::Vector3d world;
      const double t = raycast(gt, pose, dir, &world);
      if (!(t > 0.0)) {
        throw std::runtime_error("render_geometry: ray missed the surface");
      }
      buf.depth.at(x, y) = float(t);
      buf.world_points[size_t(y) * spec.width + x] = world;
    }
  }

  if (spec.scene == SceneKind::PointCloud) {
    // Splat points to the nearest pixel with z-buffering over the backdrop.
    const Pose inv = pose.inverse();
    for (const Eigen::Vector3d& p : gt.points) {
      const Eigen::Vector3d cam = inv.rotation * p + inv.translation;
      if (cam.z() <= 0.05) continue;
      const PixelCoord plane{gt.intrinsics.focal * cam.x() / cam.z(),
                             gt.intrinsics.focal * cam.y() / cam.z()};
      const PixelCoord raster = gt.intrinsics.raster_from_plane(plane);
      const int px = int(std::lround(raster.x));
      const int py = int(std::lround(raster.y));
      if (px < 0 || px >= spec.width || py < 0 || py >= spec.height) continue;
      if (cam.z() < buf.depth.at(px, py)) {
        buf.depth.at(px, py) = float(cam.z());
        buf.world_points[size_t(py) * spec.width + px] = p;
      }
    }
  }
  return buf;
}

DepthMap render_depth(const GroundTruth& gt, int frame) {
  return render_geometry(gt, frame).depth;
}

double exact_depth(const GroundTruth& gt, int frame,
                   const PixelCoord& raster) {
  const PixelCoord plane = gt.intrinsics.plane_from_raster(raster);
  const Eigen::Vector3d dir(plane.x / gt.intrinsics.focal,
                            plane.y / gt.intrinsics.focal, 1.0);
  return raycast(gt, gt.poses[frame], dir, nullptr);
}

std::pair<FlowField, BinaryMask> render_flow(const GroundTruth& gt, int i,
                                             int j) {
  const GeometryBuffer buf_i = render_geometry(gt, i);
  const GeometryBuffer buf_j = render_geometry(gt, j);
  const SceneSpec& spec = gt.spec;
  const Pose inv_j = gt.poses[j].inverse();

  FlowField flow(spec.width, spec.height);
  flow.src = i;
  flow.dst = j;
  BinaryMask visible(spec.width, spec.height, false);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Eigen::Vector3d& world =
          buf_i.world_points[size_t(y) * spec.width + x];
      const Eigen::Vector3d cam = inv_j.rotation * world + inv_j.translation;
      if (cam.z() <= 0.0) continue;
      const PixelCoord plane{gt.intrinsics.focal * cam.x() / cam.z(),
                             gt.intrinsics.focal * cam.y() / cam.z()};
      const PixelCoord raster = gt.intrinsics.raster_from_plane(plane);
      flow.u.at(x, y) = float(raster.x - x);
      flow.v.at(x, y) = float(raster.y - y);
      if (!buf_j.depth.in_bounds(raster.x, raster.y)) continue;
      // Occlusion: the point must win frame j's z-buffer at its landing
      // spot (nearest pixel, with a small relative tolerance).
      const int nx = std::clamp(int(std::lround(raster.x)), 0, spec.width - 1);
      const int ny =
          std::clamp(int(std::lround(raster.y)), 0, spec.height - 1);
      const double zbuf = buf_j.depth.at(nx, ny);
      if (cam.z() <= zbuf * (1.0 + 0.02) + 1e-6) {
        visible.set(x, y, true);
      }
    }
  }
  return {std::move(flow), std::move(visible)};
}

DepthMap corrupt_depth(const DepthMap& depth, const CorruptionSpec& spec,
                       uint64_t seed, DeformationGrid* field_out) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  DeformationGrid recip(std::max(spec.field_cols, 1),
                        std::max(spec.field_rows, 1), depth.width(),
                        depth.height(), 1.0);
  if (spec.field_cols > 0 && spec.field_rows > 0) {
    for (double& h : recip.handles) {
      h = std::exp(spec.field_amplitude * uni(rng));
    }
  }
  if (field_out) *field_out = recip;

  DepthMap out(depth.width(), depth.height());
  out.frame = depth.frame;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double g = eval_spline(recip, {double(x), double(y)});
      double v = double(depth.at(x, y)) / g * spec.frame_scale;
      if (spec.noise_sigma > 0.0) {
        v *= 1.0 + spec.noise_sigma * gauss(rng);
      }
      if (!(v > 0.0)) {
        throw std::runtime_error("corrupt_depth: corruption violated positivity");
      }
      out.at(x, y) = float(v);
    }
  }
  return out;
}

}  // namespace vda
