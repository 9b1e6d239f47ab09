#include "streetsplat/keyframes.hpp"

#include <algorithm>
#include <random>

namespace streetsplat {

std::vector<int> KeyframeList::entries() const {
  std::vector<int> out;
  auto push = [&](int i) {
    if (i >= 0 && std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  };
  for (int s : sampled) push(s);
  push(previous);
  push(current);
  return out;
}

double frame_overlap(const Frame& current, const Frame& other) {
  if (current.sparse_depth.empty()) return 0.0;
  const Intrinsics& kc = current.intrinsics;
  const Intrinsics& ko = other.intrinsics;
  std::size_t inside = 0;
  for (const DepthSample& s : current.sparse_depth) {
    const Vec3 world = current.pose.to_world(kc.unproject(s.u, s.v, s.depth));
    const Vec3 p = other.pose.to_camera(world);
    if (p.z() <= 0.0) continue;
    const Vec2 uv = ko.project(p);
    if (uv.x() >= -0.5 && uv.x() < ko.width - 0.5 && uv.y() >= -0.5 && uv.y() < ko.height - 0.5) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(current.sparse_depth.size());
}

KeyframeList update_keyframes(const KeyframeList& list, const Frame& current,
                              const std::vector<const Frame*>& history, int K, std::uint64_t seed) {
  KeyframeList out;
  out.current = current.index;
  out.previous = list.current >= 0 && list.current != current.index ? list.current : list.previous;
  if (out.previous < 0 && !history.empty()) out.previous = history.back()->index;
  out.last_update_frame = current.index;

  std::vector<int> candidates;
  for (const Frame* f : history) {
    if (f->index == current.index || f->index == out.previous) continue;
    if (frame_overlap(current, *f) > 0.0) candidates.push_back(f->index);
  }
  const std::size_t want = static_cast<std::size_t>(std::max(K - 2, 0));
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(current.index + 1)));
  const std::size_t take = std::min(want, candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  out.sampled = std::move(candidates);
  return out;
}

void advance_keyframes(KeyframeList& list, int current_index) {
  if (list.current == current_index) return;
  list.previous = list.current;
  list.current = current_index;
  std::erase_if(list.sampled, [&](int i) { return i == list.previous || i == list.current; });
}

}  // namespace streetsplat
