#pragma once

#include "streetsplat/config.hpp"
#include "streetsplat/image.hpp"
#include "streetsplat/ingest.hpp"
#include "streetsplat/scene.hpp"

#include <optional>
#include <vector>

namespace streetsplat {

struct GradientBuffer;
struct RenderOutput;

/// Mean absolute difference; optional gradient w.r.t. `pred`.
double l1_loss(const Image& pred, const Image& target, Image* grad = nullptr);

/// Mean SSIM over all channels with an 11x11 Gaussian window (sigma 1.5) and
/// zero padding; optional gradient of the mean w.r.t. `a`.
double ssim(const Image& a, const Image& b, Image* grad_a = nullptr);

/// (1 - lambda) L1 + lambda (1 - SSIM) / 2. Throws DimensionMismatch.
double loss_rgb(const Image& pred, const Image& target, double lambda, Image* grad = nullptr);

/// Mean |D(u,v) - d| over samples whose silhouette is >= s_filter; 0 when
/// none qualify.
double loss_lidar(const Image& depth, const Image& silhouette, const std::vector<DepthSample>& samples,
                  double s_filter, Image* grad = nullptr);

/// Edge-aware depth smoothness over forward differences. Pixels flagged in
/// `skip` (sky) are left out of both difference terms.
double loss_smooth(const Image& depth, const Image& rgb, const Mask* skip = nullptr,
                   Image* grad = nullptr);

/// Mean over free Gaussians of |s - mean(s)|^2 on activated scales; optional
/// gradient added into grads->free[..].log_scale.
double loss_iso(const HybridScene& scene, GradientBuffer* grads = nullptr, double weight = 1.0);

struct LossReport {
  double l_rgb = 0.0;
  double l_lidar = 0.0;
  double l_smooth = 0.0;
  double l_iso = 0.0;
  double total = 0.0;
  Image depth_l1;  // |D - d| at sparse samples, 0 elsewhere
};

/// Evaluates every term for one rendered frame. When the gradient images are
/// provided they receive dL_total/dC and dL_total/dD.
LossReport evaluate_loss(const HybridScene& scene, const RenderOutput& out, const Frame& frame,
                         Image* dL_dcolor = nullptr, Image* dL_ddepth = nullptr);

}  // namespace streetsplat
