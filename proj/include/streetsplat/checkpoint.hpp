#pragma once

#include "streetsplat/scene.hpp"

#include <string>

namespace streetsplat {

/// Binary container:
///   "SSPLTCKP" | u32 version | u64 config length | config text
///   | u64 segment count | per segment: 4 x f64 coefficients, i32 first, i32 last
///   | u64 free count | per Gaussian: 14 x f64
///   | u64 sky count | per Gaussian: 8 x f64
///   | u64 inlier count | per Gaussian: 8 x f64, i32 segment id
/// All little-endian.
void save_checkpoint(const std::string& path, const HybridScene& scene);

/// Throws FormatError on a bad magic, unsupported version, or truncation.
HybridScene load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace streetsplat
