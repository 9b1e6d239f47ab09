#include <doctest.h>

#include "streetsplat/errors.hpp"
#include "streetsplat/losses.hpp"
#include "streetsplat/rasterizer.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace streetsplat;

namespace {

Image random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image im(w, h, c);
  for (double& v : im.data()) v = u(rng);
  return im;
}

// Direct windowed SSIM: 2D Gaussian weights per pixel, zero outside the image.
double naive_ssim(const Image& a, const Image& b) {
  const int r = 5;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double wsum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) wsum += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int u = x + dx, v = y + dy;
            if (u < 0 || v < 0 || u >= a.width() || v >= a.height()) continue;
            const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / wsum;
            const double p = a.at(u, v, c), q = b.at(u, v, c);
            mx += w * p;
            my += w * q;
            xx += w * p * p;
            yy += w * q * q;
            xy += w * p * q;
          }
        const double sxx = xx - mx * mx, syy = yy - my * my, sxy = xy - mx * my;
        total += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      }
  return total / (static_cast<double>(a.pixels()) * a.channels());
}

}  // namespace

TEST_CASE("loss_rgb examples") {
  const Image a = random_image(20, 15, 3, 1);
  CHECK(loss_rgb(a, a, 0.2) == doctest::Approx(0.0).epsilon(1e-12));
  Image b(20, 15, 3, 0.3), c(20, 15, 3, 0.4);
  CHECK(loss_rgb(b, c, 0.0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(loss_rgb(a, Image(20, 14, 3), 0.2), DimensionMismatch);
}

TEST_CASE("ssim matches a direct windowed implementation") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Image a = random_image(23, 17, 3, seed), b = random_image(23, 17, 3, seed + 10);
    CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) < 1e-6);
  }
  const Image a = random_image(23, 17, 3, 42);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
}

TEST_CASE("loss_rgb gradient matches finite differences") {
  const Image a = random_image(14, 12, 3, 5), b = random_image(14, 12, 3, 6);
  Image g;
  loss_rgb(a, b, 0.2, &g);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, a.data().size() - 1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = pick(rng);
    Image p = a, m = a;
    p.data()[i] += 1e-6;
    m.data()[i] -= 1e-6;
    const double fd = (loss_rgb(p, b, 0.2) - loss_rgb(m, b, 0.2)) / 2e-6;
    CHECK(g.data()[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("loss_lidar examples") {
  Image depth(8, 8, 1, 5.0), sil(8, 8, 1, 1.0);
  std::vector<DepthSample> s{{1, 1, 5.0}, {2, 3, 5.0}};
  CHECK(loss_lidar(depth, sil, s, 0.9) == 0.0);
  CHECK(loss_lidar(depth, sil, {{4, 4, 4.5}}, 0.9) == doctest::Approx(0.5));
  sil.at(2, 3) = 0.5;
  std::vector<DepthSample> mixed{{1, 1, 4.0}, {2, 3, 100.0}};
  CHECK(loss_lidar(depth, sil, mixed, 0.9) == doctest::Approx(1.0));
  CHECK(loss_lidar(depth, Image(8, 8, 1, 0.0), mixed, 0.9) == 0.0);
}

TEST_CASE("loss_smooth examples") {
  const Image rgb = random_image(10, 10, 3, 3);
  CHECK(loss_smooth(Image(10, 10, 1, 7.0), rgb) == 0.0);

  // Depth step at x = 5; the image either has an edge there or is flat.
  Image depth(10, 10, 1, 2.0);
  Image edge(10, 10, 3, 0.0), flat(10, 10, 3, 0.5);
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) {
      depth.at(x, y) = 6.0;
      for (int c = 0; c < 3; ++c) edge.at(x, y, c) = 1.0;
    }
  CHECK(loss_smooth(depth, edge) < loss_smooth(depth, flat));

  Mask sky(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) sky.set(x, y, true);
  CHECK(loss_smooth(depth, flat, &sky) == 0.0);
}

TEST_CASE("loss_iso examples") {
  HybridScene s;
  FreeGaussian g;
  g.log_scale = Vec3::Zero();
  s.free.push_back(g);
  CHECK(loss_iso(s) == doctest::Approx(0.0));
  s.free[0].log_scale = Vec3(std::log(2.0), -INFINITY, 0.0);
  CHECK(loss_iso(s) == doctest::Approx(2.0));
  s.free.push_back(g);
  CHECK(loss_iso(s) == doctest::Approx(1.0));
}

TEST_CASE("evaluate_loss decomposes into its weighted terms") {
  const Camera cam = streetsplat::testing::street_camera(32, 24);
  auto scene = streetsplat::testing::ordered_scene(4, cam, 10, 10, 3);
  scene.config.lambda_lidar = 0.7;
  scene.config.lambda_reg = 0.5;
  Frame f;
  f.rgb = random_image(32, 24, 3, 9);
  f.pose = cam.pose;
  f.intrinsics = cam.intrinsics;
  f.sparse_depth = {{3, 20, 4.0}, {16, 22, 6.0}, {30, 23, 5.0}};
  const auto out = render(scene, cam);
  Image gc, gd;
  const auto r = evaluate_loss(scene, out, f, &gc, &gd);
  const auto& c = scene.config;
  CHECK(r.total == doctest::Approx(c.lambda_rgb * r.l_rgb + c.lambda_lidar * r.l_lidar +
                                   c.lambda_reg * (c.lambda_smooth * r.l_smooth + c.lambda_iso * r.l_iso)));
  CHECK(r.l_rgb >= 0.0);
  CHECK(r.l_lidar >= 0.0);
  CHECK(r.l_smooth >= 0.0);
  CHECK(r.l_iso >= 0.0);
  CHECK(gc.same_shape(out.color));
  CHECK(gd.same_shape(out.depth));
  CHECK(r.depth_l1.at(16, 22) == doctest::Approx(std::abs(out.depth.at(16, 22) - 6.0)));
}
