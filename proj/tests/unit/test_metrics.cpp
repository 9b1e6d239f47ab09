#include <doctest.h>

#include "streetsplat/errors.hpp"
#include "streetsplat/metrics.hpp"

#include <cmath>

using namespace streetsplat;

TEST_CASE("psnr examples") {
  Image a(8, 8, 3, 0.4);
  CHECK(psnr(a, a) == 99.0);
  Image b(8, 8, 3, 0.5);
  CHECK(psnr(a, b) == doctest::Approx(20.0));
  CHECK_THROWS_AS(psnr(a, Image(8, 7, 3)), DimensionMismatch);
}

TEST_CASE("ssim metric of identical images is one") {
  Image a(16, 16, 3);
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] = (i % 7) / 7.0;
  CHECK(ssim_metric(a, a) == doctest::Approx(1.0));
}

TEST_CASE("sparse depth errors") {
  Image depth(4, 4, 1, 5.1), sil(4, 4, 1, 1.0);
  sil.at(3, 3) = 0.2;
  const std::vector<DepthSample> s{{0, 0, 5.0}, {1, 2, 5.0}, {3, 3, 1.0}};
  const auto e = depth_errors(depth, sil, s, 0.9);
  CHECK(e.count == 2);
  CHECK(e.mae == doctest::Approx(0.1));
  CHECK(e.rmse == doctest::Approx(0.1));
}

TEST_CASE("dense depth errors skip invalid references") {
  Image depth(3, 1, 1), ref(3, 1, 1);
  depth.at(0, 0) = 2.0;
  ref.at(0, 0) = 1.0;
  depth.at(1, 0) = 4.0;
  ref.at(1, 0) = 4.0;
  depth.at(2, 0) = 9.0;
  const auto e = dense_depth_errors(depth, ref);
  CHECK(e.count == 2);
  CHECK(e.mae == doctest::Approx(0.5));
  CHECK(e.rmse == doctest::Approx(std::sqrt(0.5)));
  Mask m(3, 1);
  m.set(1, 0, true);
  CHECK(dense_depth_errors(depth, ref, &m).mae == 0.0);
}
