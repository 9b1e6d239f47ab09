#include "streetsplat/metrics.hpp"

#include "streetsplat/errors.hpp"
#include "streetsplat/losses.hpp"

#include <algorithm>
#include <cmath>

namespace streetsplat {

double psnr(const Image& pred, const Image& target) {
  if (!pred.same_shape(target)) throw DimensionMismatch("psnr: image shapes differ");
  double se = 0.0;
  const auto& a = pred.data();
  const auto& b = target.data();
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = a.empty() ? 0.0 : se / static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const Image& pred, const Image& target) {
  if (!pred.same_shape(target)) throw DimensionMismatch("ssim: image shapes differ");
  return ssim(pred, target);
}

namespace {

DepthErrors finish(double abs_sum, double sq_sum, std::size_t n) {
  DepthErrors e;
  e.count = n;
  if (n == 0) return e;
  e.mae = abs_sum / static_cast<double>(n);
  e.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  return e;
}

}  // namespace

DepthErrors depth_errors(const Image& depth, const Image& silhouette, const std::vector<DepthSample>& samples,
                         double min_silhouette) {
  double a = 0.0, s = 0.0;
  std::size_t n = 0;
  for (const DepthSample& d : samples) {
    if (d.u < 0 || d.v < 0 || d.u >= depth.width() || d.v >= depth.height()) continue;
    if (silhouette.at(d.u, d.v) < min_silhouette) continue;
    const double e = depth.at(d.u, d.v) - d.depth;
    a += std::abs(e);
    s += e * e;
    ++n;
  }
  return finish(a, s, n);
}

DepthErrors dense_depth_errors(const Image& depth, const Image& reference, const Mask* valid) {
  double a = 0.0, s = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (valid && !valid->at(x, y)) continue;
      const double r = reference.at(x, y);
      if (!(r > 0.0)) continue;
      const double e = depth.at(x, y) - r;
      a += std::abs(e);
      s += e * e;
      ++n;
    }
  }
  return finish(a, s, n);
}

}  // namespace streetsplat
