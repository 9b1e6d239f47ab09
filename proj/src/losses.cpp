#include "streetsplat/losses.hpp"

#include "streetsplat/errors.hpp"
#include "streetsplat/rasterizer.hpp"

#include <array>
#include <cmath>

namespace streetsplat {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& gaussian_window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double x = i - kWindow / 2;
      k[i] = std::exp(-x * x / (2 * kSigma * kSigma));
      sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return w;
}

// Separable zero-padded "same" filtering of a single-channel plane.
std::vector<double> blur(const std::vector<double>& src, int w, int h) {
  const auto& k = gaussian_window();
  const int r = kWindow / 2;
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("image shapes differ");
}

}  // namespace

double l1_loss(const Image& pred, const Image& target, Image* grad) {
  require_same(pred, target);
  const auto n = static_cast<double>(pred.data().size());
  double sum = 0.0;
  if (grad) *grad = Image(pred.width(), pred.height(), pred.channels());
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    sum += std::abs(d);
    if (grad) grad->data()[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
  }
  return sum / n;
}

double ssim(const Image& a, const Image& b, Image* grad_a) {
  require_same(a, b);
  const int w = a.width(), h = a.height(), ch = a.channels();
  const std::size_t np = a.pixels();
  const double norm = 1.0 / (static_cast<double>(np) * ch);
  if (grad_a) *grad_a = Image(w, h, ch);
  double total = 0.0;
  std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
  for (int c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < np; ++i) {
      x[i] = a.data()[i * ch + c];
      y[i] = b.data()[i * ch + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
    std::vector<double> d_mx(np), d_exx(np), d_exy(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2 * mx[i] * my[i] + kC1, a2 = 2 * sxy + kC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1, b2 = sxx + syy + kC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad_a) {
        d_mx[i] = s * (2 * my[i] / a1 - 2 * my[i] / a2 - 2 * mx[i] / b1 + 2 * mx[i] / b2);
        d_exx[i] = -s / b2;
        d_exy[i] = 2 * a1 / (b1 * b2);
      }
    }
    if (grad_a) {
      // The window is symmetric, so the adjoint of the blur is the blur.
      const auto g_mx = blur(d_mx, w, h), g_exx = blur(d_exx, w, h), g_exy = blur(d_exy, w, h);
      for (std::size_t i = 0; i < np; ++i) {
        grad_a->data()[i * ch + c] = norm * (g_mx[i] + 2 * x[i] * g_exx[i] + y[i] * g_exy[i]);
      }
    }
  }
  return total * norm;
}

double loss_rgb(const Image& pred, const Image& target, double lambda, Image* grad) {
  require_same(pred, target);
  Image g1, g2;
  const double l1 = l1_loss(pred, target, grad ? &g1 : nullptr);
  const double s = lambda > 0.0 ? ssim(pred, target, grad ? &g2 : nullptr) : 1.0;
  if (grad) {
    *grad = Image(pred.width(), pred.height(), pred.channels());
    for (std::size_t i = 0; i < grad->data().size(); ++i) {
      grad->data()[i] = (1.0 - lambda) * g1.data()[i] - (lambda > 0.0 ? 0.5 * lambda * g2.data()[i] : 0.0);
    }
  }
  return (1.0 - lambda) * l1 + lambda * (1.0 - s) / 2.0;
}

double loss_lidar(const Image& depth, const Image& silhouette, const std::vector<DepthSample>& samples,
                  double s_filter, Image* grad) {
  if (!depth.same_shape(silhouette)) throw DimensionMismatch("depth / silhouette shapes differ");
  if (grad) *grad = Image(depth.width(), depth.height(), 1);
  double sum = 0.0;
  int n = 0;
  for (const auto& s : samples) {
    if (silhouette.at(s.u, s.v) < s_filter) continue;
    sum += std::abs(depth.at(s.u, s.v) - s.depth);
    ++n;
  }
  if (n == 0) return 0.0;
  if (grad) {
    for (const auto& s : samples) {
      if (silhouette.at(s.u, s.v) < s_filter) continue;
      const double d = depth.at(s.u, s.v) - s.depth;
      grad->at(s.u, s.v) += (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
    }
  }
  return sum / n;
}

double loss_smooth(const Image& depth, const Image& rgb, const Mask* skip, Image* grad) {
  if (depth.width() != rgb.width() || depth.height() != rgb.height()) {
    throw DimensionMismatch("depth / image shapes differ");
  }
  const int w = depth.width(), h = depth.height();
  if (grad) *grad = Image(w, h, 1);
  if (w < 2 || h < 2) return 0.0;
  const Image gray = to_gray(rgb);
  const double n = static_cast<double>(w - 1) * (h - 1);
  auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
  auto skipped = [&](int x, int y) { return skip && skip->at(x, y); };
  double sum = 0.0;
  for (int y = 0; y < h - 1; ++y) {
    for (int x = 0; x < w - 1; ++x) {
      if (skipped(x, y)) continue;
      if (!skipped(x + 1, y)) {
        const double dx = depth.at(x + 1, y) - depth.at(x, y);
        const double wx = std::exp(-std::abs(gray.at(x + 1, y) - gray.at(x, y)));
        sum += std::abs(dx) * wx;
        if (grad) {
          grad->at(x + 1, y) += sgn(dx) * wx / n;
          grad->at(x, y) -= sgn(dx) * wx / n;
        }
      }
      if (!skipped(x, y + 1)) {
        const double dy = depth.at(x, y + 1) - depth.at(x, y);
        const double wy = std::exp(-std::abs(gray.at(x, y + 1) - gray.at(x, y)));
        sum += std::abs(dy) * wy;
        if (grad) {
          grad->at(x, y + 1) += sgn(dy) * wy / n;
          grad->at(x, y) -= sgn(dy) * wy / n;
        }
      }
    }
  }
  return sum / n;
}

double loss_iso(const HybridScene& scene, GradientBuffer* grads, double weight) {
  if (scene.free.empty()) return 0.0;
  const double n = static_cast<double>(scene.free.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scene.free.size(); ++i) {
    const Vec3 s = scene.free[i].log_scale.array().exp();
    const Vec3 dev = s.array() - s.mean();
    sum += dev.squaredNorm();
    // d/ds_k sum_j (s_j - mean)^2 = 2 (s_k - mean); then through exp.
    if (grads) grads->free[i].log_scale += weight * (2.0 / n) * dev.cwiseProduct(s);
  }
  return sum / n;
}

LossReport evaluate_loss(const HybridScene& scene, const RenderOutput& out, const Frame& frame,
                         Image* dL_dcolor, Image* dL_ddepth) {
  const auto& cfg = scene.config;
  const bool want_grad = dL_dcolor && dL_ddepth;
  LossReport r;
  Image g_rgb, g_lidar, g_smooth;
  r.l_rgb = loss_rgb(out.color, frame.rgb, cfg.lambda_dssim, want_grad ? &g_rgb : nullptr);
  r.l_lidar = loss_lidar(out.depth, out.silhouette, frame.sparse_depth, cfg.silhouette_filter,
                         want_grad ? &g_lidar : nullptr);
  r.l_smooth = loss_smooth(out.depth, frame.rgb, frame.sky_mask ? &*frame.sky_mask : nullptr,
                           want_grad ? &g_smooth : nullptr);
  r.l_iso = loss_iso(scene);
  r.total = cfg.lambda_rgb * r.l_rgb + cfg.lambda_lidar * r.l_lidar +
            cfg.lambda_reg * (cfg.lambda_smooth * r.l_smooth + cfg.lambda_iso * r.l_iso);

  r.depth_l1 = Image(out.depth.width(), out.depth.height(), 1);
  for (const auto& s : frame.sparse_depth) r.depth_l1.at(s.u, s.v) = std::abs(out.depth.at(s.u, s.v) - s.depth);

  if (want_grad) {
    *dL_dcolor = g_rgb;
    for (auto& v : dL_dcolor->data()) v *= cfg.lambda_rgb;
    *dL_ddepth = Image(out.depth.width(), out.depth.height(), 1);
    for (std::size_t i = 0; i < dL_ddepth->data().size(); ++i) {
      dL_ddepth->data()[i] = cfg.lambda_lidar * g_lidar.data()[i] +
                             cfg.lambda_reg * cfg.lambda_smooth * g_smooth.data()[i];
    }
  }
  return r;
}

}  // namespace streetsplat
