#include "streetsplat/image.hpp"

#include <algorithm>

namespace streetsplat {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 1));
}

Image to_gray(const Image& rgb) {
  Image out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      double s = 0.0;
      for (int c = 0; c < rgb.channels(); ++c) s += rgb.at(x, y, c);
      out.at(x, y) = s / rgb.channels();
    }
  }
  return out;
}

}  // namespace streetsplat
