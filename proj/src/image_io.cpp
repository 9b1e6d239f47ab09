#include "streetsplat/image_io.hpp"

#include "streetsplat/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace streetsplat {

Image read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("cannot read PNG '" + path + "': " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG '" + path + "': " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  for (std::size_t i = 0; i < buf.size(); ++i) out.data()[i] = buf[i] / 255.0;
  return out;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError("PNG writer supports 1 or 3 channels");
  }
  std::vector<unsigned char> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data()[i], 0.0, 1.0) * 255.0));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw FormatError("cannot write PNG '" + path + "': " + img.message);
  }
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (!in || (magic != "Pf" && magic != "PF") || width <= 0 || height <= 0 || scale == 0.0) {
    throw FormatError("'" + path + "' has a malformed PFM header");
  }
  if (scale > 0) throw FormatError("big-endian PFM not supported: '" + path + "'");
  const int channels = magic == "PF" ? 3 : 1;
  std::vector<float> buf(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw FormatError("'" + path + "' is truncated");
  Image img(width, height, channels);
  for (int y = 0; y < height; ++y) {
    const int src_row = height - 1 - y;
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(x, y, c) = buf[(static_cast<std::size_t>(src_row) * width + x) * channels + c];
      }
    }
  }
  return img;
}

void write_pfm(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError("PFM writer supports 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create '" + path + "'");
  out << (image.channels() == 3 ? "PF" : "Pf") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << "-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(image.width()) * image.channels());
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        row[static_cast<std::size_t>(x) * image.channels() + c] = static_cast<float>(image.at(x, y, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

}  // namespace streetsplat
