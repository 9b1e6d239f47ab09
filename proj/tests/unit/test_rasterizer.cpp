#include <doctest.h>

#include "streetsplat/rasterizer.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace streetsplat;
using streetsplat::testing::max_abs_diff;
using streetsplat::testing::ordered_scene;
using streetsplat::testing::street_camera;

namespace {

Camera axis_camera() {
  Camera c;
  c.intrinsics = Intrinsics{100.0, 100.0, 31.5, 23.5, 64, 48};
  return c;
}

SplatPrimitive disc_at(const Vec2& center, double opacity, const Vec3& color, double depth) {
  SplatPrimitive p;
  p.mean2d = center;
  p.cov2d = Mat2::Identity();
  p.conic = Mat2::Identity();
  p.opacity = opacity;
  p.color = color;
  p.depth = depth;
  return p;
}

}  // namespace

TEST_CASE("project: gaussian on the optical axis") {
  HybridScene s;
  FreeGaussian g;
  g.position = Vec3(0, 0, 10);
  g.log_scale = Vec3::Constant(std::log(0.1));
  s.free.push_back(g);
  const Camera cam = axis_camera();
  const auto prims = project(s, cam);
  REQUIRE(prims.size() == 1);
  CHECK(prims[0].mean2d.isApprox(Vec2(cam.intrinsics.cx, cam.intrinsics.cy)));
  CHECK((prims[0].cov2d - 1.3 * Mat2::Identity()).norm() < 1e-9);
  CHECK(prims[0].depth == doctest::Approx(10.0));
}

TEST_CASE("project: gaussians behind the camera or the near plane are culled") {
  HybridScene s;
  FreeGaussian g;
  g.position = Vec3(0, 0, -5);
  s.free.push_back(g);
  g.position = Vec3(0, 0, 0.05);
  s.free.push_back(g);
  CHECK(project(s, axis_camera()).empty());
}

TEST_CASE("project: mean2d matches the pinhole projection of the center") {
  const Camera cam = street_camera(96, 64);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HybridScene s;
  for (int i = 0; i < 100; ++i) {
    FreeGaussian g;
    g.position = streetsplat::testing::point_in_view(cam, u(rng), u(rng), 3.0 + 10.0 * (u(rng) + 1.0));
    g.rotation = streetsplat::testing::random_quat(rng);
    g.log_scale = Vec3(u(rng), u(rng), u(rng)) - Vec3::Constant(2.0);
    s.free.push_back(g);
  }
  const auto prims = project(s, cam);
  REQUIRE(prims.size() == s.free.size());
  for (const auto& p : prims) {
    const Vec3 pc = cam.pose.to_camera(s.free[p.source].position);
    const Vec2 expect(cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx,
                      cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy);
    CHECK((p.mean2d - expect).norm() < 1e-9);
    CHECK(p.cov2d.determinant() > 0.0);
    CHECK(p.cov2d(0, 0) >= 0.3);
  }
}

TEST_CASE("project: sky gaussians ride with the camera center") {
  HybridScene s;
  s.config.sky_radius = 100.0;
  SphereGaussian g;
  g.xz = Vec2(0.0, 90.0);
  s.sky.push_back(g);
  Camera a = street_camera(64, 48, 0.0);
  Camera b = street_camera(64, 48, 25.0);
  const auto pa = project(s, a), pb = project(s, b);
  REQUIRE(pa.size() == 1);
  REQUIRE(pb.size() == 1);
  CHECK((pa[0].mean2d - pb[0].mean2d).norm() < 1e-9);
  CHECK(pa[0].depth == doctest::Approx(90.0));
}

TEST_CASE("composite examples") {
  const Vec2 px(5, 5);
  SUBCASE("single primitive") {
    std::vector<SplatPrimitive> prims{disc_at(px, 0.5, Vec3(1, 0, 0), 4.0)};
    const auto r = composite(prims, {0}, px);
    CHECK(r.color.isApprox(Vec3(0.5, 0, 0)));
    CHECK(r.depth == doctest::Approx(2.0));
    CHECK(r.silhouette == doctest::Approx(0.5));
  }
  SUBCASE("two primitives") {
    const Vec3 c1(0.2, 0.4, 0.6), c2(1.0, 0.0, 0.5);
    std::vector<SplatPrimitive> prims{disc_at(px, 0.5, c1, 4.0), disc_at(px, 0.5, c2, 6.0)};
    const auto r = composite(prims, {0, 1}, px);
    CHECK((r.color - (0.5 * c1 + 0.25 * c2)).norm() < 1e-12);
    CHECK(r.silhouette == doctest::Approx(0.75));
    CHECK(r.depth == doctest::Approx(0.5 * 4.0 + 0.25 * 6.0));
  }
  SUBCASE("empty pixel") {
    const auto r = composite({}, {}, px);
    CHECK(r.color.isZero());
    CHECK(r.depth == 0.0);
    CHECK(r.silhouette == 0.0);
    CHECK(r.transmittance == 1.0);
  }
  SUBCASE("accumulation stops below the transmittance cutoff") {
    std::vector<SplatPrimitive> prims;
    std::vector<int> order;
    for (int i = 0; i < 10; ++i) {
      prims.push_back(disc_at(px, 0.95, Vec3::Ones(), 1.0 + i));
      order.push_back(i);
    }
    const auto r = composite(prims, order, px);
    CHECK(r.contributors == 4);
    CHECK(r.transmittance < 1e-4);
  }
}

TEST_CASE("sort_grouped orders families and leaves inliers in insertion order") {
  std::vector<SplatPrimitive> prims;
  auto add = [&](Family f, double depth) {
    SplatPrimitive p;
    p.family = f;
    p.depth = depth;
    prims.push_back(p);
  };
  add(Family::Sky, 900);
  add(Family::Inlier, 30);
  add(Family::Outlier, 5);
  add(Family::Inlier, 10);
  add(Family::Outlier, 2);
  add(Family::Sky, 800);
  SortStats st;
  CHECK(sort_grouped(prims, {0, 1, 2, 3, 4, 5}, false, st) == std::vector<int>{4, 2, 1, 3, 5, 0});
  CHECK(sort_grouped(prims, {0, 1, 2, 3, 4, 5}, true, st) == std::vector<int>{4, 2, 3, 1, 5, 0});
}

TEST_CASE("sort_grouped equals a full sort on outlier-only tiles") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  std::vector<SplatPrimitive> prims(40);
  std::vector<int> members;
  for (int i = 0; i < 40; ++i) {
    prims[i].depth = u(rng);
    members.push_back(i);
  }
  SortStats a, b;
  const auto g = sort_grouped(prims, members, false, a);
  CHECK(g == sort_unified(prims, members, b));
  CHECK(a.comparisons == b.comparisons);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(prims[g[i - 1]].depth <= prims[g[i]].depth);
}

TEST_CASE("counted_stable_sort is stable and its count depends only on length") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> k(0, 5);
  for (int n : {0, 1, 2, 7, 33}) {
    std::vector<std::pair<double, int>> a, b;
    for (int i = 0; i < n; ++i) {
      a.emplace_back(k(rng), i);
      b.emplace_back(-i, i);
    }
    SortStats sa, sb;
    counted_stable_sort(a, sa);
    counted_stable_sort(b, sb);
    CHECK(sa.comparisons == sb.comparisons);
    for (int i = 1; i < n; ++i) {
      CHECK(a[i - 1].first <= a[i].first);
      if (a[i - 1].first == a[i].first) CHECK(a[i - 1].second < a[i].second);
    }
  }
}

TEST_CASE("a lone gaussian needs no comparisons either way") {
  std::vector<SplatPrimitive> prims(1);
  prims[0].family = Family::Inlier;
  SortStats g, u;
  sort_grouped(prims, {0}, false, g);
  sort_unified(prims, {0}, u);
  CHECK(g.comparisons == 0);
  CHECK(u.comparisons == 0);
}

TEST_CASE("grouped comparison count is below unified on random mixed tiles") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> fam(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(60 * u(rng));
    std::vector<SplatPrimitive> prims(n);
    std::vector<int> members;
    int inliers = 0;
    for (int i = 0; i < n; ++i) {
      prims[i].family = static_cast<Family>(fam(rng));
      prims[i].depth = 100 * u(rng);
      inliers += prims[i].family == Family::Inlier;
      members.push_back(i);
    }
    SortStats g, uni;
    sort_grouped(prims, members, false, g);
    sort_unified(prims, members, uni);
    CHECK(g.comparisons <= uni.comparisons);
    if (inliers > 0) CHECK(g.comparisons < uni.comparisons);
  }
}

TEST_CASE("render: empty scene gives zero images") {
  const auto out = render(HybridScene{}, street_camera());
  for (double v : out.color.data()) CHECK(v == 0.0);
  for (double v : out.depth.data()) CHECK(v == 0.0);
  for (double v : out.silhouette.data()) CHECK(v == 0.0);
}

TEST_CASE("render: grouped sort equals the unified oracle under the ordering assumption") {
  const Camera cam = street_camera(64, 48);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = ordered_scene(seed, cam, 25, 25, 10);
    RenderSettings grouped, unified;
    unified.unified_sort = true;
    const auto a = render(scene, cam, grouped);
    const auto b = render(scene, cam, unified);
    CHECK(max_abs_diff(a.color, b.color) <= 1e-5);
    CHECK(max_abs_diff(a.depth, b.depth) <= 1e-5);
    CHECK(max_abs_diff(a.silhouette, b.silhouette) <= 1e-5);
    CHECK(a.sort_stats.comparisons < b.sort_stats.comparisons);
  }
}

TEST_CASE("render: silhouette plus transmittance is one and values stay in range") {
  const Camera cam = street_camera(64, 48);
  const auto scene = ordered_scene(77, cam, 40, 40, 10);
  const auto out = render(scene, cam);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      const double s = out.silhouette.at(x, y);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      CHECK(std::abs(s + out.transmittance.at(x, y) - 1.0) < 1e-6);
      CHECK(out.depth.at(x, y) >= 0.0);
      for (int c = 0; c < 3; ++c) CHECK(out.color.at(x, y, c) <= 1.0 + 1e-9);
    }
}

TEST_CASE("render is pure") {
  const Camera cam = street_camera(64, 48);
  const auto scene = ordered_scene(3, cam, 30, 30, 5);
  const auto a = render(scene, cam), b = render(scene, cam);
  CHECK(a.color.data() == b.color.data());
  CHECK(a.depth.data() == b.depth.data());
  CHECK(a.silhouette.data() == b.silhouette.data());
  CHECK(a.sort_stats.comparisons == b.sort_stats.comparisons);
}

TEST_CASE("adding a gaussian never decreases the silhouette") {
  const Camera cam = street_camera(64, 48);
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto scene = ordered_scene(seed + 100, cam, 20, 20, 5);
    const auto before = render(scene, cam);
    FreeGaussian g;
    g.position = streetsplat::testing::point_in_view(cam, 0.1, 0.0, 3.0 + seed);
    g.log_scale = Vec3::Constant(std::log(0.3));
    g.rotation = streetsplat::testing::random_quat(rng);
    g.color = Vec3(0.3, 0.6, 0.9);
    g.opacity = 0.5;
    scene.free.push_back(g);
    const auto after = render(scene, cam);
    for (std::size_t i = 0; i < before.silhouette.data().size(); ++i)
      CHECK(after.silhouette.data()[i] >= before.silhouette.data()[i] - 1e-12);
  }
}

TEST_CASE("render: shuffled inliers break the oracle only through inlier order") {
  const Camera cam = street_camera(64, 48);
  const auto scene = ordered_scene(8, cam, 10, 60, 5, false);
  RenderSettings sorted_inliers, unified;
  sorted_inliers.sort_inliers = true;
  unified.unified_sort = true;
  const auto a = render(scene, cam, sorted_inliers);
  const auto b = render(scene, cam, unified);
  CHECK(max_abs_diff(a.color, b.color) <= 1e-5);
  CHECK(max_abs_diff(a.depth, b.depth) <= 1e-5);
}
