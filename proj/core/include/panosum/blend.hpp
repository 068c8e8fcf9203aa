#pragma once

#include <cstdint>
#include <vector>

#include "panosum/image.hpp"

namespace panosum::stitch {

/// Float raster used inside the blending stage; same layout as io::Image.
struct ImageF {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

ImageF to_float(const io::Image& image);

/// Rounds and clamps to [0, 255].
io::Image to_uint8(const ImageF& image);

/// 5-tap [1,4,6,4,1]/16 separable smoothing + 2x decimation (replicate
/// borders). Output size is ceil(size/2).
ImageF pyramid_down(const ImageF& src);

/// Zero-insertion upsample to (target_w, target_h) followed by the doubled
/// 5-tap kernel, the exact adjoint pairing used by the Laplacian collapse.
ImageF pyramid_up(const ImageF& src, int target_w, int target_h);

/// Chamfer 3-4 distance to the nearest zero-mask or outside-canvas pixel.
/// Zero where mask is zero.
std::vector<float> chamfer_distance(const std::vector<std::uint8_t>& mask, int width,
                                    int height);

/// Pairwise-overlap gain solve: minimize sum_pairs (g_i mu_ij - g_j mu_ji)^2
/// + lambda sum (g_i - 1)^2 over mean overlap intensities, gains clamped to
/// [0.5, 2.0]. Images with no overlaps keep gain 1.
std::vector<double> gain_compensate(const std::vector<ImageF>& images,
                                    const std::vector<std::vector<std::uint8_t>>& masks,
                                    double lambda = 0.01);

/// Laplacian-pyramid blend of same-size layers with per-pixel weights
/// (weight pyramids renormalized per level). Output clamped to [0, 255].
io::Image multiband_blend(const std::vector<ImageF>& images,
                          const std::vector<std::vector<float>>& weights, int levels);

}  // namespace panosum::stitch
