#pragma once

#include "streetsplat/image.hpp"

#include <string>

namespace streetsplat {

/// 8-bit PNG I/O. Values are mapped between [0,1] and [0,255] with rounding
/// and clamping on write.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

/// Little-endian PFM with 1 ("Pf") or 3 ("PF") channels, rows stored bottom-up
/// per the format.
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& image);

}  // namespace streetsplat
