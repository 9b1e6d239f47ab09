#include <doctest.h>

#include "streetsplat/losses.hpp"
#include "streetsplat/optimizer.hpp"
#include "streetsplat/rasterizer.hpp"
#include "test_util.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace streetsplat;
using namespace streetsplat::testing;

namespace {

Frame target_frame(const HybridScene& truth, const Camera& cam) {
  Frame f;
  f.rgb = render(truth, cam).color;
  f.pose = cam.pose;
  f.intrinsics = cam.intrinsics;
  return f;
}

double fit_loss(const HybridScene& s, const Camera& cam, const Frame& f, GradientBuffer* grads) {
  const auto out = render(s, cam);
  Image gc, gd;
  const auto r = evaluate_loss(s, out, f, grads ? &gc : nullptr, grads ? &gd : nullptr);
  if (grads) backward(s, out, gc, gd, *grads);
  return r.total;
}

}  // namespace

TEST_CASE("zero gradients leave the scene unchanged") {
  const Camera cam = street_camera(32, 24);
  auto scene = ordered_scene(1, cam, 5, 5, 2);
  const auto before = fingerprint(scene);
  AdamOptimizer adam(scene.config);
  GradientBuffer g;
  g.resize_like(scene);
  for (int i = 0; i < 3; ++i) CHECK(adam.step(scene, g));
  CHECK(fingerprint(scene) == before);
  CHECK(adam.step_count() == 3);
}

TEST_CASE("one step moves a color toward its target") {
  Camera cam;
  cam.intrinsics = Intrinsics{10, 10, 0, 0, 1, 1};
  HybridScene scene;
  FreeGaussian g;
  g.position = Vec3(0, 0, 5);
  g.log_scale = Vec3::Constant(std::log(0.5));
  g.color = Vec3(0.2, 0.8, 0.5);
  g.opacity = 3.0;
  scene.free.push_back(g);
  scene.config.lambda_dssim = 0.0;
  scene.config.lambda_reg = 0.0;
  Frame f;
  f.rgb = Image(1, 1, 3);
  f.rgb.at(0, 0, 0) = 0.9;
  f.rgb.at(0, 0, 1) = 0.1;
  f.rgb.at(0, 0, 2) = 0.5 * sigmoid(3.0);
  f.pose = cam.pose;
  f.intrinsics = cam.intrinsics;
  GradientBuffer grads;
  fit_loss(scene, cam, f, &grads);
  AdamOptimizer adam(scene.config);
  adam.step(scene, grads);
  CHECK(scene.free[0].color.x() > 0.2);
  CHECK(scene.free[0].color.y() < 0.8);
}

TEST_CASE("200 steps on a ten-gaussian toy scene cut the loss tenfold") {
  const Camera cam = street_camera(40, 30);
  auto truth = ordered_scene(31, cam, 6, 3, 1);
  for (auto& g : truth.free) g.opacity = 2.0;
  for (auto& g : truth.inlier) g.opacity = 2.0;
  for (auto& g : truth.sky) g.opacity = 2.0;
  truth.config.lambda_reg = 0.0;
  const Frame f = target_frame(truth, cam);

  HybridScene scene = truth;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& g : scene.free) g.color = (g.color + Vec3(u(rng), u(rng), u(rng))).cwiseMax(0.0).cwiseMin(1.0);
  for (auto& g : scene.inlier) g.color = (g.color + Vec3(u(rng), u(rng), u(rng))).cwiseMax(0.0).cwiseMin(1.0);
  for (auto& g : scene.sky) g.color = (g.color + Vec3(u(rng), u(rng), u(rng))).cwiseMax(0.0).cwiseMin(1.0);
  for (auto& g : scene.free) g.opacity = 0.0;

  const double initial = fit_loss(scene, cam, f, nullptr);
  AdamOptimizer adam(scene.config);
  GradientBuffer grads;
  for (int i = 0; i < 200; ++i) {
    fit_loss(scene, cam, f, &grads);
    adam.step(scene, grads);
  }
  const double final_loss = fit_loss(scene, cam, f, nullptr);
  MESSAGE("toy fit loss " << initial << " -> " << final_loss);
  CHECK(final_loss * 10.0 <= initial);
}

TEST_CASE("non-finite gradients skip the step") {
  const Camera cam = street_camera(32, 24);
  auto scene = ordered_scene(2, cam, 3, 3, 1);
  const auto before = fingerprint(scene);
  AdamOptimizer adam(scene.config);
  GradientBuffer g;
  g.resize_like(scene);
  g.free[1].color.y() = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(adam.step(scene, g));
  CHECK(adam.skipped_steps() == 1);
  CHECK(fingerprint(scene) == before);
  g.free[1].color.y() = 0.0;
  g.inlier[0].xz.x() = std::numeric_limits<double>::infinity();
  CHECK_FALSE(adam.step(scene, g));
  CHECK(adam.skipped_steps() == 2);
}

TEST_CASE("steps keep colors in range, quaternions unit and sky inside the disc") {
  const Camera cam = street_camera(32, 24);
  auto scene = ordered_scene(5, cam, 4, 2, 2);
  scene.sky[0].xz = Vec2(0.0, 0.9985 * scene.config.sky_radius);
  AdamOptimizer adam(scene.config);
  GradientBuffer g;
  g.resize_like(scene);
  for (auto& f : g.free) {
    f.color = Vec3(-1, 1, -1);
    f.rotation = Quat(0.3, -0.2, 0.1, 0.5);
  }
  for (auto& s : g.sky) s.xz = Vec2(0.0, -1.0);
  for (int i = 0; i < 500; ++i) adam.step(scene, g);
  for (const auto& f : scene.free) {
    CHECK(f.color.minCoeff() >= 0.0);
    CHECK(f.color.maxCoeff() <= 1.0);
    CHECK(f.rotation.norm() == doctest::Approx(1.0));
  }
  for (const auto& s : scene.sky) CHECK(s.xz.norm() < scene.config.sky_radius);
  CHECK_NOTHROW(project(scene, cam));
}

TEST_CASE("remap keeps moments with their gaussians") {
  const Camera cam = street_camera(32, 24);
  auto scene = ordered_scene(6, cam, 3, 0, 0);
  AdamOptimizer a(scene.config);
  GradientBuffer g;
  g.resize_like(scene);
  g.free[2].position = Vec3(1, 0, 0);
  a.step(scene, g);

  // Reverse the order and insert a fresh Gaussian in front.
  HybridScene edited = scene;
  edited.free = {scene.free[0], scene.free[2], scene.free[1], scene.free[0]};
  FamilyRemap map;
  map.free = {-1, 2, 1, 0};
  AdamOptimizer b = a;
  b.remap(map);
  GradientBuffer zero;
  zero.resize_like(edited);
  const auto before = edited;
  b.step(edited, zero);
  // Momentum carries Gaussian 2 (now at index 1) along x; nobody else moves.
  CHECK(edited.free[1].position.x() < before.free[1].position.x());
  CHECK(edited.free[0].position == before.free[0].position);
  CHECK(edited.free[2].position == before.free[2].position);
  CHECK(edited.free[3].position == before.free[3].position);
}
