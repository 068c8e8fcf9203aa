#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace panosum::io {

/// 8-bit raster, 1 (gray) or 3 (RGB) channels, row-major, interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, 0) {}

  bool valid() const {
    return width >= 1 && height >= 1 && (channels == 1 || channels == 3) &&
           pixels.size() == static_cast<std::size_t>(width) * height * channels;
  }

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image& o) const = default;
};

/// One element of an input sequence.
struct Frame {
  int index = 0;
  Image image;
  std::string source_name;
};

/// Pinhole calibration. Distortion is assumed corrected upstream.
struct CameraIntrinsics {
  double fx = 0;
  double fy = 0;
  double cx = 0;
  double cy = 0;
};

/// gray = round(0.299 R + 0.587 G + 0.114 B); 1-channel input is returned
/// unchanged.
Image to_grayscale(const Image& image);

/// Separable Gaussian smoothing with a sampled, normalized kernel and
/// replicated borders. Gray input only. Default matches the descriptor
/// pre-smoothing contract (sigma 2, 7x7).
Image gaussian_smooth(const Image& gray, double sigma = 2.0, int ksize = 7);

}  // namespace panosum::io
