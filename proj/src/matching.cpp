#include "streetsplat/matching.hpp"

#include <algorithm>
#include <cmath>

namespace streetsplat {

bool ground_truth_warp(const Frame& a, const Frame& b, const Vec2& pixel, Vec2& out) {
  if (!a.gt_depth) return false;
  const int u = static_cast<int>(std::lround(pixel.x()));
  const int v = static_cast<int>(std::lround(pixel.y()));
  if (u < 0 || v < 0 || u >= a.width() || v >= a.height()) return false;
  const double d = a.gt_depth->at(u, v);
  if (!(d > 0.0)) return false;
  const Vec3 world = a.pose.to_world(a.intrinsics.unproject(pixel.x(), pixel.y(), d));
  const Vec3 cam_b = b.pose.to_camera(world);
  if (cam_b.z() <= 1e-6) return false;
  out = b.intrinsics.project(cam_b);
  return true;
}

std::vector<Correspondence> GroundTruthMatcher::match(const Frame& ft, const Frame& ft1) const {
  std::vector<Correspondence> out;
  if (!ft.gt_depth || !ft1.gt_depth) return out;
  for (int v = 0; v < ft.height(); v += stride_) {
    for (int u = 0; u < ft.width(); u += stride_) {
      Vec2 p1;
      if (!ground_truth_warp(ft, ft1, Vec2(u, v), p1)) continue;
      if (p1.x() < 0 || p1.y() < 0 || p1.x() > ft1.width() - 1 || p1.y() > ft1.height() - 1) continue;
      // Visibility: the warped point must be the surface seen by frame t+1.
      const double d = ft.gt_depth->at(u, v);
      const Vec3 world = ft.pose.to_world(ft.intrinsics.unproject(u, v, d));
      const double z1 = ft1.pose.to_camera(world).z();
      const int u1 = static_cast<int>(std::lround(p1.x()));
      const int v1 = static_cast<int>(std::lround(p1.y()));
      const double seen = ft1.gt_depth->at(u1, v1);
      if (!(seen > 0.0) || std::abs(seen - z1) > 0.02 * z1) continue;
      out.push_back(Correspondence::make(Vec2(u, v), p1));
    }
  }
  return out;
}

namespace {

Image sobel(const Image& g, bool x_dir) {
  Image out(g.width(), g.height(), 1);
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, g.width() - 1);
    y = std::clamp(y, 0, g.height() - 1);
    return g.at(x, y);
  };
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (x_dir) {
        out.at(x, y) = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                        2 * px(x - 1, y) - px(x - 1, y + 1)) / 8.0;
      } else {
        out.at(x, y) = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                        2 * px(x, y - 1) - px(x + 1, y - 1)) / 8.0;
      }
    }
  }
  return out;
}

Image box_sum(const Image& g, int r) {
  Image out(g.width(), g.height(), 1);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < g.width() && yy < g.height()) s += g.at(xx, yy);
        }
      }
      out.at(x, y) = s;
    }
  }
  return out;
}

// ZNCC between the patch of `a` at (ax, ay) and `b` at (bx, by); -2 when
// either patch is flat.
double zncc(const Image& a, int ax, int ay, const Image& b, int bx, int by, int r) {
  const int n = (2 * r + 1) * (2 * r + 1);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double va = a.at(ax + dx, ay + dy);
      const double vb = b.at(bx + dx, by + dy);
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  const double cov = sab - sa * sb / n;
  const double var_a = saa - sa * sa / n;
  const double var_b = sbb - sb * sb / n;
  if (var_a < 1e-10 || var_b < 1e-10) return -2.0;
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace

std::vector<Vec2> PatchMatcher::detect_corners(const Image& gray) const {
  const Image gx = sobel(gray, true);
  const Image gy = sobel(gray, false);
  Image xx(gray.width(), gray.height(), 1), yy = xx, xy = xx;
  for (std::size_t i = 0; i < gray.pixels(); ++i) {
    xx.data()[i] = gx.data()[i] * gx.data()[i];
    yy.data()[i] = gy.data()[i] * gy.data()[i];
    xy.data()[i] = gx.data()[i] * gy.data()[i];
  }
  const Image sxx = box_sum(xx, 2), syy = box_sum(yy, 2), sxy = box_sum(xy, 2);
  Image response(gray.width(), gray.height(), 1);
  double max_r = 0.0;
  for (std::size_t i = 0; i < gray.pixels(); ++i) {
    const double det = sxx.data()[i] * syy.data()[i] - sxy.data()[i] * sxy.data()[i];
    const double tr = sxx.data()[i] + syy.data()[i];
    response.data()[i] = det - opts_.harris_k * tr * tr;
    max_r = std::max(max_r, response.data()[i]);
  }
  const double thresh = std::max(opts_.min_response, opts_.relative_response * max_r);
  const int border = opts_.patch_radius + 1;

  struct Cand {
    double r;
    int x, y;
  };
  std::vector<Cand> cands;
  for (int y = border; y < gray.height() - border; ++y) {
    for (int x = border; x < gray.width() - border; ++x) {
      const double r = response.at(x, y);
      if (r <= thresh) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && response.at(x + dx, y + dy) > r) {
            is_max = false;
            break;
          }
      if (is_max) cands.push_back({r, x, y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.r > b.r; });

  std::vector<Vec2> kept;
  const double min_d2 = static_cast<double>(opts_.min_distance) * opts_.min_distance;
  for (const auto& c : cands) {
    const Vec2 p(c.x, c.y);
    const bool far = std::none_of(kept.begin(), kept.end(),
                                  [&](const Vec2& k) { return (k - p).squaredNorm() < min_d2; });
    if (far) kept.push_back(p);
    if (static_cast<int>(kept.size()) >= opts_.max_corners) break;
  }
  return kept;
}

std::vector<Correspondence> PatchMatcher::match(const Frame& ft, const Frame& ft1) const {
  std::vector<Correspondence> out;
  const Image a = to_gray(ft.rgb);
  const Image b = to_gray(ft1.rgb);
  const int r = opts_.patch_radius;
  const int sr = opts_.search_radius;
  for (const Vec2& c : detect_corners(a)) {
    const int cx = static_cast<int>(c.x()), cy = static_cast<int>(c.y());
    double best = -2.0;
    int bx = -1, by = -1;
    for (int y = std::max(r, cy - sr); y <= std::min(b.height() - 1 - r, cy + sr); ++y) {
      for (int x = std::max(r, cx - sr); x <= std::min(b.width() - 1 - r, cx + sr); ++x) {
        const double s = zncc(a, cx, cy, b, x, y, r);
        if (s > best) {
          best = s;
          bx = x;
          by = y;
        }
      }
    }
    if (bx < 0 || best < opts_.min_score) continue;
    Vec2 p(bx, by);
    // A perfect score is an exact integer alignment; otherwise refine each
    // axis with a parabola through the neighbouring scores.
    if (best < 1.0 - 1e-12) {
      auto refine = [&](double sm, double sp) {
        const double denom = sm - 2.0 * best + sp;
        if (std::abs(denom) < 1e-12) return 0.0;
        return std::clamp(0.5 * (sm - sp) / denom, -0.5, 0.5);
      };
      if (bx - 1 >= r && bx + 1 <= b.width() - 1 - r) {
        p.x() += refine(zncc(a, cx, cy, b, bx - 1, by, r), zncc(a, cx, cy, b, bx + 1, by, r));
      }
      if (by - 1 >= r && by + 1 <= b.height() - 1 - r) {
        p.y() += refine(zncc(a, cx, cy, b, bx, by - 1, r), zncc(a, cx, cy, b, bx, by + 1, r));
      }
    }
    out.push_back(Correspondence::make(c, p));
  }
  return out;
}

std::vector<Correspondence> match_features(const Frame& ft, const Frame& ft1) {
  if (ft.gt_depth && ft1.gt_depth) return GroundTruthMatcher().match(ft, ft1);
  return PatchMatcher().match(ft, ft1);
}

}  // namespace streetsplat
