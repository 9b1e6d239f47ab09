#pragma once

#include "streetsplat/image.hpp"
#include "streetsplat/ingest.hpp"

#include <vector>

namespace streetsplat {

/// 10 log10(1 / MSE) on [0,1] images, capped at 99 dB.
double psnr(const Image& pred, const Image& target);

/// Mean SSIM with an 11x11 Gaussian window.
double ssim_metric(const Image& pred, const Image& target);

struct DepthErrors {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// Errors at sparse samples whose silhouette is at least `min_silhouette`.
DepthErrors depth_errors(const Image& depth, const Image& silhouette, const std::vector<DepthSample>& samples,
                         double min_silhouette);

/// Dense errors over pixels where `valid` (same size as depth) is nonzero and
/// the reference is positive.
DepthErrors dense_depth_errors(const Image& depth, const Image& reference, const Mask* valid = nullptr);

}  // namespace streetsplat
