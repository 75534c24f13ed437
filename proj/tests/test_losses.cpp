#include <doctest.h>

#include <random>

#include "oracles.h"
#include "vda/losses.h"

using namespace vda;
using namespace vda::oracles;

namespace {

CameraPoint random_point(std::mt19937_64& rng, double z_lo = 0.5,
                         double z_hi = 5.0) {
  std::uniform_real_distribution<double> xy(-2.0, 2.0), z(z_lo, z_hi);
  return {xy(rng), xy(rng), z(rng)};
}

CameraPoint scaled(const CameraPoint& c, double s) {
  return {c.x * s, c.y * s, c.z * s};
}

}  // namespace

TEST_CASE("euclidean loss examples") {
  CHECK(loss_euclidean({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(loss_euclidean({0, 0, 0}, {1, 2, 2}) == doctest::Approx(9.0));
}

TEST_CASE("spatial loss examples") {
  CHECK(loss_spatial({2, 0, 2}, {0, 0, 2}) == doctest::Approx(1.0));
  CHECK(loss_spatial({1, 2, 4}, {2, 4, 8}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(loss_spatial({0, 0, -1}, {0, 0, 1}), std::invalid_argument);
}

TEST_CASE("disparity loss examples") {
  CHECK(loss_disparity({0, 0, 2}, {1, 1, 2}) == doctest::Approx(0.0));
  CHECK(loss_disparity({0, 0, 1}, {0, 0, 2}) == doctest::Approx(0.25));
  CHECK_THROWS_AS(loss_disparity({0, 0, 1}, {0, 0, 0}), std::invalid_argument);
}

TEST_CASE("ratio loss examples: symmetry and scale invariance") {
  CHECK(loss_ratio({0, 0, 5}, {1, 1, 5}) == doctest::Approx(0.0));
  CHECK(loss_ratio({0, 0, 2}, {0, 0, 1}) == doctest::Approx(1.0));
  CHECK(loss_ratio({0, 0, 1}, {0, 0, 2}) == doctest::Approx(1.0));
  CHECK(loss_ratio({0, 0, 2}, {0, 0, 1}) ==
        doctest::Approx(loss_ratio({0, 0, 20}, {0, 0, 10})));
}

TEST_CASE("sim loss is spatial plus ratio") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    CameraPoint a = random_point(rng), b = random_point(rng);
    CHECK(loss_sim(a, b) ==
          doctest::Approx(loss_spatial(a, b) + loss_ratio(a, b)));
    CHECK(loss_sim(a, b) == doctest::Approx(loss_sim(b, a)));
  }
  CameraPoint a{0, 0, 2}, b{0, 0, 1};
  CHECK(loss_sim(a, a) == 0.0);
  CHECK(loss_sim(a, b) == doctest::Approx(1.0));  // same ray, a_z = 2 b_z
}

TEST_CASE("bias ordering: homogeneity exponents are +2, -2, 0") {
  std::mt19937_64 rng(2);
  for (double s : {0.1, 10.0}) {
    for (int i = 0; i < 100; ++i) {
      CameraPoint a = random_point(rng), b = random_point(rng);
      CHECK(loss_euclidean(scaled(a, s), scaled(b, s)) ==
            doctest::Approx(s * s * loss_euclidean(a, b)).epsilon(1e-9));
      CHECK(loss_disparity(scaled(a, s), scaled(b, s)) ==
            doctest::Approx(loss_disparity(a, b) / (s * s)).epsilon(1e-9));
      CHECK(loss_ratio(scaled(a, s), scaled(b, s)) ==
            doctest::Approx(loss_ratio(a, b)).epsilon(1e-12));
      CHECK(loss_spatial(scaled(a, s), scaled(b, s)) ==
            doctest::Approx(loss_spatial(a, b)).epsilon(1e-9));
    }
  }
}

TEST_CASE("losses are nonnegative, zero iff coincident rays and depths") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    CameraPoint a = random_point(rng), b = random_point(rng);
    CHECK(loss_euclidean(a, b) >= 0.0);
    CHECK(loss_spatial(a, b) >= 0.0);
    CHECK(loss_disparity(a, b) >= 0.0);
    CHECK(loss_ratio(a, b) >= 0.0);
    if (loss_sim(a, b) == 0.0) {
      CHECK(std::abs(a.x / a.z - b.x / b.z) < 1e-12);
      CHECK(std::abs(a.z - b.z) < 1e-12);
    }
  }
}

TEST_CASE("residual squared norm equals the chosen loss") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    ReproSetup s = random_repro_setup(rng);
    auto res = residual_repro(s.ctx, s.pose_i, s.pose_j, s.K_i(), s.K_j(),
                              s.grid_i, s.grid_j, LossKind::SpatialRatio,
                              false);
    if (!res) continue;

    double phi_i = 0, phi_j = 0;
    for (int k = 0; k < s.ctx.support_i.count; ++k) {
      phi_i +=
          s.ctx.support_i.weight[k] * s.grid_i.handles[s.ctx.support_i.index[k]];
    }
    for (int k = 0; k < s.ctx.support_j.count; ++k) {
      phi_j +=
          s.ctx.support_j.weight[k] * s.grid_j.handles[s.ctx.support_j.index[k]];
    }
    const CameraPoint lifted = lift(s.ctx.p_plane, s.ctx.depth_i, phi_i);
    const CameraPoint a =
        reproject(lifted, s.pose_i, s.pose_j, s.K_i(), s.K_j());
    const CameraPoint b = lift(s.ctx.q_plane, s.ctx.depth_j, phi_j);
    if (a.z <= 0) continue;

    // The solver's ratio head squares max/min - 1 (see the losses module),
    // so the block's squared norm is spatial + ratio^2.
    CHECK(res->values.squaredNorm() ==
          doctest::Approx(loss_spatial(a, b) +
                          loss_ratio(a, b) * loss_ratio(a, b))
              .epsilon(1e-9));

    auto res_e = residual_repro(s.ctx, s.pose_i, s.pose_j, s.K_i(), s.K_j(),
                                s.grid_i, s.grid_j, LossKind::Euclidean, false);
    CHECK(res_e->values.squaredNorm() ==
          doctest::Approx(loss_euclidean(a, b)).epsilon(1e-9));

    auto res_d = residual_repro(s.ctx, s.pose_i, s.pose_j, s.K_i(), s.K_j(),
                                s.grid_i, s.grid_j, LossKind::SpatialDisparity,
                                false);
    CHECK(res_d->values.squaredNorm() ==
          doctest::Approx(loss_spatial(a, b) + loss_disparity(a, b))
              .epsilon(1e-9));
  }
}

TEST_CASE("analytic jacobians match central finite differences") {
  std::mt19937_64 rng(5);
  int tested = 0;
  for (LossKind kind : {LossKind::Euclidean, LossKind::SpatialDisparity,
                        LossKind::SpatialRatio}) {
    int n = 0;
    while (n < 400) {
      ReproSetup s = random_repro_setup(rng);
      if (kind == LossKind::SpatialRatio && near_ratio_kink(s)) continue;
      auto res = residual_repro(s.ctx, s.pose_i, s.pose_j, s.K_i(), s.K_j(),
                                s.grid_i, s.grid_j, kind, true);
      if (!res) continue;
      FdJacobians fd = fd_jacobians(s, kind);
      if (!fd.valid) continue;
      ++n;
      ++tested;
      CHECK(block_error(res->d_pose_i, fd.d_pose_i) < 1e-4);
      CHECK(block_error(res->d_pose_j, fd.d_pose_j) < 1e-4);
      CHECK(block_error(res->d_focal_i, fd.d_focal_i) < 1e-4);
      CHECK(block_error(res->d_focal_j, fd.d_focal_j) < 1e-4);
      CHECK(block_error(res->d_handles_i.leftCols(s.ctx.support_i.count),
                        fd.d_handles_i.leftCols(s.ctx.support_i.count)) <
            1e-4);
      CHECK(block_error(res->d_handles_j.leftCols(s.ctx.support_j.count),
                        fd.d_handles_j.leftCols(s.ctx.support_j.count)) <
            1e-4);
    }
  }
  CHECK(tested >= 1000);
}

TEST_CASE("translation perturbation matches first-order prediction") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    ReproSetup s = random_repro_setup(rng);
    if (near_ratio_kink(s)) continue;
    auto res = residual_repro(s.ctx, s.pose_i, s.pose_j, s.K_i(), s.K_j(),
                              s.grid_i, s.grid_j, LossKind::SpatialRatio, true);
    if (!res) continue;
    const double eps = 1e-7;
    ReproSetup t = s;
    Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
    delta(5) = eps;  // t_j z-component
    t.pose_j = local_update(t.pose_j, delta);
    auto moved = t.values(LossKind::SpatialRatio);
    REQUIRE(moved.has_value());
    const Eigen::Vector3d predicted = res->values + res->d_pose_j.col(5) * eps;
    CHECK((*moved - predicted).norm() < 1e-10 + 1e-4 * eps);
  }
}

TEST_CASE("zero residual at a consistent configuration") {
  // Construct q as the exact projection of p's lifted point; all residual
  // kinds must vanish.
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    ReproSetup s = random_repro_setup(rng);
    double phi_i = 0;
    for (int k = 0; k < s.ctx.support_i.count; ++k) {
      phi_i +=
          s.ctx.support_i.weight[k] * s.grid_i.handles[s.ctx.support_i.index[k]];
    }
    const CameraPoint a = reproject(lift(s.ctx.p_plane, s.ctx.depth_i, phi_i),
                                    s.pose_i, s.pose_j, s.K_i(), s.K_j());
    if (a.z <= 0) continue;
    const PixelCoord q_plane = to_pixel(a);
    const PixelCoord q_raster = s.K_j().raster_from_plane(q_plane);
    s.ctx.q_plane = q_plane;
    s.ctx.support_j = s.grid_j.support(q_raster);
    double phi_j = 0;
    for (int k = 0; k < s.ctx.support_j.count; ++k) {
      phi_j +=
          s.ctx.support_j.weight[k] * s.grid_j.handles[s.ctx.support_j.index[k]];
    }
    s.ctx.depth_j = a.z / phi_j;
    for (LossKind kind : {LossKind::Euclidean, LossKind::SpatialDisparity,
                          LossKind::SpatialRatio}) {
      auto v = s.values(kind);
      REQUIRE(v.has_value());
      // The loss value (squared residual norm); the ratio component itself
      // is a square root, which floors at sqrt(machine epsilon).
      CHECK(v->squaredNorm() < 1e-9);
    }
  }
}

TEST_CASE("handle weights: empty and full masks") {
  RegWeights w;
  DeformationGrid g(3, 2, 30, 20);
  BinaryMask empty(30, 20, false);
  for (double v : handle_weights(empty, g, w)) {
    CHECK(v == doctest::Approx(0.1));
  }
  BinaryMask full(30, 20, true);
  for (double v : handle_weights(full, g, w)) {
    CHECK(v == doctest::Approx(10.1));
  }
}

TEST_CASE("handle weights match a per-pixel brute-force oracle") {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.37);
  DeformationGrid g(4, 3, 40, 30);
  BinaryMask mask(40, 30, false);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) mask.set(x, y, coin(rng));
  }
  RegWeights w;
  const auto weights = handle_weights(mask, g, w);

  for (int k = 0; k < g.handle_count(); ++k) {
    double num = 0.0, den = 0.0;
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 40; ++x) {
        const SplineSupport s = g.support({double(x), double(y)});
        for (int t = 0; t < s.count; ++t) {
          if (s.index[t] != k) continue;
          den += s.weight[t];
          if (mask.get(x, y)) num += s.weight[t];
        }
      }
    }
    const double expect = w.lambda1 + w.lambda2 * (den > 0 ? num / den : 0.0);
    CHECK(weights[k] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("handle weights: half-covered influence region") {
  const int W = 40, H = 10;
  DeformationGrid g(1, 1, W, H);
  BinaryMask mask(W, H, false);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W / 2; ++x) mask.set(x, y, true);
  }
  RegWeights w;
  const auto weights = handle_weights(mask, g, w);
  CHECK(weights[0] == doctest::Approx(0.1 + 10.0 * 0.5));
}

TEST_CASE("unnormalized handle-weight variant sums raw mass") {
  RegWeights w;
  w.normalize_handle_weights = false;
  DeformationGrid g(1, 1, 10, 10);
  BinaryMask full(10, 10, true);
  // The single handle holds the whole image's mass: 100 pixels.
  CHECK(handle_weights(full, g, w)[0] == doctest::Approx(0.1 + 10.0 * 100.0));
}

TEST_CASE("deform loss: uniform grid and single pair") {
  RegWeights w;
  std::vector<DeformationGrid> grids{DeformationGrid(3, 3, 30, 30, 1.5)};
  std::vector<std::vector<double>> weights{std::vector<double>(9, 0.1)};
  CHECK(loss_deform(grids, weights, w).value == doctest::Approx(0.0));

  DeformationGrid g2(2, 1, 30, 10);
  g2.handle(0, 0) = 1.0;
  g2.handle(1, 0) = 3.0;
  std::vector<DeformationGrid> grids2{g2};
  std::vector<std::vector<double>> weights2{{0.1, 0.1}};
  CHECK(loss_deform(grids2, weights2, w).value == doctest::Approx(0.4));
}

TEST_CASE("deform loss matches brute-force pair enumeration and FD gradient") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.5, 2.0), wd(0.1, 3.0);
  DeformationGrid g(4, 3, 40, 30);
  for (double& h : g.handles) h = uni(rng);
  std::vector<double> weights(g.handle_count());
  for (double& v : weights) v = wd(rng);

  RegWeights rw;
  std::vector<DeformationGrid> grids{g};
  std::vector<std::vector<double>> all_weights{weights};
  const DeformLoss loss = loss_deform(grids, all_weights, rw);

  // Brute force over all horizontal/vertical neighbor pairs, counted once.
  double expect = 0.0;
  for (int cy = 0; cy < g.rows; ++cy) {
    for (int cx = 0; cx < g.cols; ++cx) {
      const int k = cy * g.cols + cx;
      for (auto [nx, ny] : {std::pair{cx + 1, cy}, std::pair{cx, cy + 1}}) {
        if (nx >= g.cols || ny >= g.rows) continue;
        const int r = ny * g.cols + nx;
        const double d = g.handles[k] - g.handles[r];
        expect += d * d * std::max(weights[k], weights[r]);
      }
    }
  }
  CHECK(loss.value == doctest::Approx(expect).epsilon(1e-12));

  // FD gradient w.r.t. raw handle values.
  for (int k = 0; k < g.handle_count(); ++k) {
    const double eps = 1e-7;
    auto perturbed = [&](double delta) {
      std::vector<DeformationGrid> gs{g};
      gs[0].handles[k] += delta;
      return loss_deform(gs, all_weights, rw).value;
    };
    const double fd = (perturbed(eps) - perturbed(-eps)) / (2 * eps);
    CHECK(loss.gradients[0][k] == doctest::Approx(fd).epsilon(1e-5));
  }

  RegWeights twice = rw;
  twice.count_pairs_twice = true;
  CHECK(loss_deform(grids, all_weights, twice).value ==
        doctest::Approx(2.0 * expect));
}

TEST_CASE("focal loss value and gradient") {
  FocalLoss l = loss_focal({0.35}, 0.35);
  CHECK(l.value == 0.0);
  l = loss_focal({1.35}, 0.35);
  CHECK(l.value == doctest::Approx(1.0));

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> uni(0.2, 4.0);
  std::vector<double> focals(5);
  for (double& f : focals) f = uni(rng);
  const double prior = 2.747;
  const FocalLoss loss = loss_focal(focals, prior);
  for (size_t i = 0; i < focals.size(); ++i) {
    CHECK(loss.gradients[i] == doctest::Approx(2.0 * (focals[i] - prior)));
    const double eps = 1e-7;
    std::vector<double> plus = focals, minus = focals;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd =
        (loss_focal(plus, prior).value - loss_focal(minus, prior).value) /
        (2 * eps);
    CHECK(loss.gradients[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}
