#pragma once

#include "streetsplat/ingest.hpp"

#include <cstdint>
#include <vector>

namespace streetsplat {

/// Working set of frame indices used during per-frame optimization: K - 2
/// sampled overlapping frames plus the previous and current frame.
struct KeyframeList {
  std::vector<int> sampled;
  int previous = -1;
  int current = -1;
  int last_update_frame = -1;

  /// sampled..., previous, current (missing ones omitted, no duplicates).
  std::vector<int> entries() const;
  std::size_t size() const { return entries().size(); }
};

/// Fraction of `current`'s sparse-depth points that land inside `other`'s
/// image with positive depth.
double frame_overlap(const Frame& current, const Frame& other);

/// Full refresh: resamples the K - 2 overlapping frames from `history`
/// (frames seen so far, excluding current) and appends previous and current.
KeyframeList update_keyframes(const KeyframeList& list, const Frame& current,
                              const std::vector<const Frame*>& history, int K, std::uint64_t seed);

/// Per-frame bookkeeping between full refreshes: shifts the recent pair and
/// drops sampled entries that collide with it.
void advance_keyframes(KeyframeList& list, int current_index);

}  // namespace streetsplat
