#include "streetsplat/plane.hpp"

#include "streetsplat/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <climits>
#include <cmath>
#include <random>

namespace streetsplat {

namespace {

Vec4 canonical(const Vec3& n, const Vec3& p) {
  Vec3 u = n.normalized();
  if (u.y() < 0.0) u = -u;
  Vec4 c;
  c << u, -u.dot(p);
  return c;
}

bool spans_plane(const PointCloud& cloud) {
  if (cloud.size() < 3) return false;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : cloud) mean += p;
  mean /= static_cast<double>(cloud.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();
  return ev[1] > 1e-12 * std::max(ev[2], 1e-300) && ev[1] > 1e-18;
}

}  // namespace

Vec4 fit_plane_least_squares(const PointCloud& cloud) {
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : cloud) mean += p;
  mean /= static_cast<double>(cloud.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  return canonical(es.eigenvectors().col(0), mean);
}

PlaneFit fit_plane_ransac(const PointCloud& cloud, double distance_threshold, int iterations,
                          std::uint64_t seed) {
  if (!spans_plane(cloud)) throw DegenerateCloud("points do not span a plane");
  const std::size_t n = cloud.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  auto score = [&](const Vec4& c, std::size_t& count, double& rms) {
    count = 0;
    double ss = 0.0;
    for (const Vec3& p : cloud) {
      const double d = std::abs(c.head<3>().dot(p) + c[3]);
      if (d < distance_threshold) {
        ++count;
        ss += d * d;
      }
    }
    rms = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
  };

  Vec4 best = Vec4::Zero();
  std::size_t best_count = 0;
  double best_rms = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
    if (i == j || j == k || i == k) continue;
    const Vec3 nrm = (cloud[j] - cloud[i]).cross(cloud[k] - cloud[i]);
    if (nrm.norm() < 1e-12) continue;
    const Vec4 c = canonical(nrm, cloud[i]);
    std::size_t count;
    double rms;
    score(c, count, rms);
    if (count > best_count || (count == best_count && count > 0 && rms < best_rms)) {
      best = c;
      best_count = count;
      best_rms = rms;
    }
  }
  if (best_count < 3) {
    // Tiny clouds may never draw three distinct indices; fall back to all points.
    best = fit_plane_least_squares(cloud);
  }

  PlaneFit fit;
  PointCloud in;
  for (const Vec3& p : cloud)
    if (std::abs(best.head<3>().dot(p) + best[3]) < distance_threshold) in.push_back(p);
  Vec4 refined = in.size() >= 3 && spans_plane(in) ? fit_plane_least_squares(in) : best;
  std::size_t count;
  double rms;
  score(refined, count, rms);
  std::size_t best_c;
  double best_r;
  score(best, best_c, best_r);
  if (count < best_c) refined = best;

  if (std::abs(refined[1]) < 0.1) throw VerticalPlane("fitted plane is nearly vertical");
  fit.segment.coefficients = refined;
  fit.inliers.resize(n);
  double ss = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(fit.segment.signed_distance(cloud[i]));
    fit.inliers[i] = d < distance_threshold;
    if (fit.inliers[i]) {
      ss += d * d;
      ++cnt;
    }
  }
  fit.rms = cnt ? std::sqrt(ss / static_cast<double>(cnt)) : 0.0;
  return fit;
}

Partition classify(const PointCloud& cloud, const PlaneSegment& segment, double distance_threshold) {
  Partition p;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (std::abs(segment.signed_distance(cloud[i])) < distance_threshold)
      p.inliers.push_back(static_cast<int>(i));
    else
      p.outliers.push_back(static_cast<int>(i));
  }
  return p;
}

std::vector<PlaneSegment> update_segments(const std::vector<PlaneSegment>& segments,
                                          const std::vector<int>& anchors,
                                          const std::vector<PointCloud>& points_by_frame,
                                          const SceneConfig& cfg, std::uint64_t seed) {
  if (anchors.empty()) return segments;
  const std::size_t wanted = anchors.size() == 1 ? 1 : anchors.size() - 1;
  std::vector<PlaneSegment> out = segments;
  if (out.size() > wanted) out.resize(wanted);
  const std::size_t first = out.empty() ? 0 : out.size() - 1;
  out.resize(wanted);

  for (std::size_t i = first; i < wanted; ++i) {
    const int lo = anchors[i];
    const int hi = anchors.size() == 1 ? INT_MAX : anchors[i + 1];
    PointCloud cloud;
    for (int f = lo; f <= std::min<int>(hi, static_cast<int>(points_by_frame.size()) - 1); ++f)
      cloud.insert(cloud.end(), points_by_frame[f].begin(), points_by_frame[f].end());
    PlaneSegment seg;
    bool ok = false;
    try {
      seg = fit_plane_ransac(cloud, cfg.plane_distance_threshold, cfg.ransac_iterations,
                             seed + 0x51ED270B27ULL * (i + 1)).segment;
      ok = true;
    } catch (const DegenerateCloud&) {
    } catch (const VerticalPlane&) {
    }
    if (!ok) {
      if (i < segments.size())
        seg = segments[i];
      else if (i > 0)
        seg = out[i - 1];
    }
    seg.first_frame = lo;
    seg.last_frame = hi;
    out[i] = seg;
  }
  return out;
}

int segment_for_frame(const std::vector<PlaneSegment>& segments, int frame) {
  if (segments.empty()) return -1;
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].covers(frame)) return static_cast<int>(i);
  if (frame < segments.front().first_frame) return 0;
  return static_cast<int>(segments.size()) - 1;
}

}  // namespace streetsplat
