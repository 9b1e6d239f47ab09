#include <doctest.h>

#include "streetsplat/config.hpp"
#include "streetsplat/errors.hpp"

#include <sstream>

using namespace streetsplat;

TEST_CASE("default config carries the documented defaults") {
  const SceneConfig c;
  CHECK(c.lambda_dssim == 0.2);
  CHECK(c.lambda_rgb == 1.0);
  CHECK(c.lambda_lidar == 0.5);
  CHECK(c.lambda_smooth == 0.1);
  CHECK(c.lambda_iso == 10.0);
  CHECK(c.lambda_reg == 1.0);
  CHECK(c.keyframe_count == 10);
  CHECK(c.keyframe_interval == 5);
  CHECK(c.iterations_per_frame == 100);
  CHECK(c.lr_position == 1.6e-4);
  CHECK(c.lr_color == 2.5e-3);
  CHECK(c.lr_opacity == 5e-2);
  CHECK(c.lr_scale == 5e-3);
  CHECK(c.lr_rotation == 1e-3);
  CHECK(c.alpha_threshold == 0.005);
  CHECK(c.scale_threshold == 1.0);
  CHECK(c.grad_threshold == 2e-4);
  CHECK(c.silhouette_seed == 0.5);
  CHECK(c.silhouette_filter == 0.9);
  CHECK(c.prune_rate == 3.0);
  CHECK(c.flow_threshold == 2.0);
  CHECK(c.plane_distance_threshold == 0.15);
  CHECK(c.ransac_iterations == 200);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("config round-trips through text") {
  SceneConfig c;
  c.sky_radius = 123.456789012345;
  c.prune_rate = 5.0;
  c.sort_inliers = true;
  c.seed = 987654321;
  std::stringstream ss;
  write_config(ss, c);
  const SceneConfig d = read_config(ss);
  CHECK(d.sky_radius == c.sky_radius);
  CHECK(d.prune_rate == 5.0);
  CHECK(d.sort_inliers);
  CHECK(d.seed == 987654321u);
}

TEST_CASE("config parsing accepts comments and rejects junk") {
  std::istringstream ok("# comment\n\nkeyframe_count = 4  # trailing\nlambda_dssim=0.3\n");
  const SceneConfig c = read_config(ok);
  CHECK(c.keyframe_count == 4);
  CHECK(c.lambda_dssim == doctest::Approx(0.3));

  std::istringstream unknown("no_such_key = 1\n");
  CHECK_THROWS_AS(read_config(unknown), FormatError);
  std::istringstream malformed("keyframe_count = four\n");
  CHECK_THROWS_AS(read_config(malformed), FormatError);
  std::istringstream bad_range("lambda_dssim = 1.5\n");
  CHECK_THROWS_AS(read_config(bad_range), FormatError);
}

TEST_CASE("validate enforces ranges") {
  SceneConfig c;
  c.prune_rate = 100.0;
  CHECK_THROWS_AS(validate(c), DomainError);
  c = SceneConfig{};
  c.flow_threshold = 0.0;
  CHECK_THROWS_AS(validate(c), DomainError);
  c = SceneConfig{};
  c.lambda_dssim = -0.1;
  CHECK_THROWS_AS(validate(c), DomainError);
}
