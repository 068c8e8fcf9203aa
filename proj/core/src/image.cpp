#include "panosum/image.hpp"

#include <algorithm>
#include <cmath>

#include "panosum/errors.hpp"

namespace panosum::io {

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.width, image.height, 1);
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = image.pixels[3 * i];
    const double g = image.pixels[3 * i + 1];
    const double b = image.pixels[3 * i + 2];
    const double v = 0.299 * r + 0.587 * g + 0.114 * b;
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

Image gaussian_smooth(const Image& gray, double sigma, int ksize) {
  if (gray.channels != 1)
    throw InvalidValue("gaussian_smooth expects a 1-channel image");
  if (ksize % 2 == 0 || ksize < 1)
    throw InvalidValue("kernel size must be odd and positive");

  const int r = ksize / 2;
  std::vector<double> k(ksize);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;

  const int w = gray.width, h = gray.height;
  auto clampx = [&](int x) { return std::clamp(x, 0, w - 1); };
  auto clampy = [&](int y) { return std::clamp(y, 0, h - 1); };

  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * gray.at(clampx(x + i), y);
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }

  Image out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i)
        acc += k[i + r] * tmp[static_cast<std::size_t>(clampy(y + i)) * w + x];
      out.at(x, y) = static_cast<std::uint8_t>(
          std::clamp<long>(std::lround(acc), 0, 255));
    }
  return out;
}

}  // namespace panosum::io
