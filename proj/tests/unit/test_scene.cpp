#include <doctest.h>

#include "streetsplat/errors.hpp"
#include "streetsplat/scene.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace streetsplat;

namespace {

Quat axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized() * std::sin(angle / 2);
  return Quat(std::cos(angle / 2), a.x(), a.y(), a.z());
}

}  // namespace

TEST_CASE("lift_sphere at the zenith is the identity") {
  SphereGaussian g;
  const auto l = lift_sphere(g, 100.0, 1.0);
  CHECK(l.position.isApprox(Vec3(0, 100, 0)));
  CHECK(l.rotation.isApprox(Quat(1, 0, 0, 0)));
}

TEST_CASE("lift_sphere near the horizon rotates about -z by 90 degrees") {
  SphereGaussian g;
  g.xz = Vec2(99.99, 0.0);
  const auto l = lift_sphere(g, 100.0, 1.0);
  const double h = std::sqrt(0.5);
  CHECK(l.rotation.normalized().isApprox(Quat(h, 0, 0, -h), 1e-2));
  const Vec3 axis = l.rotation.tail<3>().normalized();
  CHECK(axis.isApprox(Vec3(0, 0, -1), 1e-9));
}

TEST_CASE("lift_sphere maps the thickness axis onto the radial direction") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-70.0, 70.0);
  const double R = 100.0;
  for (int i = 0; i < 200; ++i) {
    SphereGaussian g;
    g.xz = Vec2(u(rng), u(rng));
    g.log_scale = Vec2(0.3, -0.2);
    const auto l = lift_sphere(g, R, 2.5);
    const Vec3 radial = l.position / R;
    CHECK((rotate(l.rotation, Vec3::UnitY()) - radial).norm() < 1e-9);
    CHECK(std::abs(l.position.squaredNorm() - R * R) < 1e-4 * R * R);
    CHECK(std::abs(std::acos(rotate(l.rotation, Vec3::UnitY()).y()) - std::acos(l.position.y() / R)) < 1e-9);
    CHECK(l.scale.isApprox(Vec3(std::exp(0.3), 2.5, std::exp(-0.2))));
    CHECK(std::abs(l.rotation.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("lift_sphere rejects points outside the disc") {
  SphereGaussian g;
  g.xz = Vec2(100.0, 0.0);
  CHECK_THROWS_AS(lift_sphere(g, 100.0, 1.0), DomainError);
  g.xz = Vec2(80.0, 80.0);
  CHECK_THROWS_AS(lift_sphere(g, 100.0, 1.0), DomainError);
}

TEST_CASE("lift_plane on the ground plane") {
  PlaneGaussian g;
  g.xz = Vec2(3, -2);
  PlaneSegment seg;
  const auto l = lift_plane(g, seg, 0.01);
  CHECK(l.position.isApprox(Vec3(3, 0, -2)));
  CHECK(l.rotation.isApprox(Quat(1, 0, 0, 0)));
  CHECK(l.scale.y() == doctest::Approx(0.01));
}

TEST_CASE("lift_plane on an offset plane") {
  PlaneSegment seg;
  seg.coefficients = Vec4(0, 1, 0, -5);
  PlaneGaussian g;
  for (double x : {-4.0, 0.0, 7.5}) {
    g.xz = Vec2(x, -x * 2);
    CHECK(lift_plane(g, seg, 0.01).position.y() == doctest::Approx(5.0));
  }
}

TEST_CASE("lift_plane aligns the thickness axis with a tilted normal") {
  const Vec3 n = Vec3(0.1, 0.99, 0.1).normalized();
  PlaneSegment seg;
  seg.coefficients << n, 0.7;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 100; ++i) {
    PlaneGaussian g;
    g.xz = Vec2(u(rng), u(rng));
    const auto l = lift_plane(g, seg, 0.01);
    CHECK((rotate(l.rotation, Vec3::UnitY()) - n).norm() < 1e-9);
    CHECK(std::abs(seg.signed_distance(l.position)) < 1e-9);
    CHECK(std::acos(rotate(l.rotation, Vec3::UnitY()).y()) == doctest::Approx(std::acos(n.y())));
  }
}

TEST_CASE("lift_plane rejects vertical planes") {
  PlaneSegment seg;
  seg.coefficients = Vec4(1, 0, 0, 0);
  CHECK_THROWS_AS(lift_plane(PlaneGaussian{}, seg, 0.01), DomainError);
}

TEST_CASE("materialize_covariance examples") {
  const Mat3 a = materialize_covariance(identity_quat(), Vec3(1, 2, 3));
  CHECK(a.isApprox(Vec3(1, 4, 9).asDiagonal().toDenseMatrix()));

  const Mat3 b = materialize_covariance(axis_angle(Vec3::UnitZ(), M_PI / 2), Vec3(1, 2, 1));
  CHECK((b - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).norm() < 1e-12);
}

TEST_CASE("materialize_covariance eigenvalues are the squared scales") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> s(0.05, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Quat q(n(rng), n(rng), n(rng), n(rng));
    const Vec3 sc(s(rng), s(rng), s(rng));
    const Mat3 c = materialize_covariance(q, sc);
    CHECK((c - c.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    Vec3 want = sc.cwiseProduct(sc);
    std::sort(want.data(), want.data() + 3);
    CHECK((es.eigenvalues() - want).norm() < 1e-9);
    CHECK(es.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("lift_sphere then projecting onto the sphere is the identity") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-600.0, 600.0);
  const double R = 1000.0;
  for (int i = 0; i < 100; ++i) {
    SphereGaussian g;
    g.xz = Vec2(u(rng), u(rng));
    const Vec3 p = lift_sphere(g, R, 1.0).position;
    const Vec3 on_sphere = p.normalized() * R;
    CHECK((on_sphere - p).norm() < 1e-9 * R);
  }
}

TEST_CASE("learnable parameter counts") {
  CHECK(FreeGaussian::kLearnables == 14);
  CHECK(SphereGaussian::kLearnables == 8);
  CHECK(PlaneGaussian::kLearnables == 8);
}

TEST_CASE("project_into_disc pulls sky Gaussians back inside") {
  SphereGaussian g;
  g.xz = Vec2(300.0, 400.0);
  project_into_disc(g, 100.0);
  CHECK(g.xz.norm() == doctest::Approx(99.9));
  CHECK_NOTHROW(lift_sphere(g, 100.0, 1.0));
  g.xz = Vec2(1.0, 2.0);
  project_into_disc(g, 100.0);
  CHECK(g.xz.isApprox(Vec2(1.0, 2.0)));
}

TEST_CASE("lift Jacobians match finite differences") {
  const double R = 50.0;
  SphereGaussian g;
  g.xz = Vec2(12.0, -7.0);
  const auto jac = lift_sphere_jacobian(g, R);
  const double h = 1e-6;
  for (int a = 0; a < 2; ++a) {
    SphereGaussian gp = g, gm = g;
    gp.xz[a] += h;
    gm.xz[a] -= h;
    const auto lp = lift_sphere(gp, R, 1.0), lm = lift_sphere(gm, R, 1.0);
    CHECK(((lp.position - lm.position) / (2 * h) - jac.d_position.col(a)).norm() < 1e-6);
    CHECK(((lp.rotation - lm.rotation) / (2 * h) - jac.d_rotation.col(a)).norm() < 1e-6);
  }
  PlaneSegment seg;
  seg.coefficients << Vec3(0.05, 1.0, -0.08).normalized(), 0.3;
  const auto pj = lift_plane_jacobian(seg);
  PlaneGaussian pg;
  for (int a = 0; a < 2; ++a) {
    PlaneGaussian gp = pg, gm = pg;
    gp.xz[a] += h;
    gm.xz[a] -= h;
    const Vec3 d = (lift_plane(gp, seg, 0.01).position - lift_plane(gm, seg, 0.01).position) / (2 * h);
    CHECK((d - pj.d_position.col(a)).norm() < 1e-6);
    CHECK(pj.d_rotation.col(a).norm() == 0.0);
  }
}

TEST_CASE("fingerprint tracks every parameter") {
  HybridScene s;
  s.free.resize(2);
  s.sky.resize(1);
  s.inlier.resize(1);
  s.segments.resize(1);
  const auto base = fingerprint(s);
  CHECK(fingerprint(s) == base);
  HybridScene t = s;
  t.free[1].color.x() = 1e-12;
  CHECK(fingerprint(t) != base);
  t = s;
  t.sky[0].opacity = 0.5;
  CHECK(fingerprint(t) != base);
  t = s;
  t.segments[0].coefficients[3] = 0.1;
  CHECK(fingerprint(t) != base);
}

TEST_CASE("FamilyRemap chaining and apply_remap") {
  HybridScene s;
  s.free.resize(4);
  FamilyRemap a = FamilyRemap::identity(s);
  a.free = {0, 2, 3, -1};
  FamilyRemap b;
  b.free = {3, 1, -1};
  const FamilyRemap c = FamilyRemap::chain(a, b);
  CHECK(c.free == std::vector<int>{-1, 2, -1});
  const std::vector<double> v{10, 11, 12, 13};
  CHECK(apply_remap(v, a.free, -1.0) == std::vector<double>{10, 12, 13, -1});
}
