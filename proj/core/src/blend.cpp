#include "panosum/blend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "panosum/errors.hpp"

namespace panosum::stitch {
namespace {

constexpr float kKernel[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

/// Separable 5-tap convolution with replicated borders.
ImageF convolve5(const ImageF& src) {
  ImageF tmp(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        float acc = 0;
        for (int k = -2; k <= 2; ++k) {
          acc += kKernel[k + 2] * src.at(clamp_index(x + k, src.width), y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  ImageF out(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        float acc = 0;
        for (int k = -2; k <= 2; ++k) {
          acc += kKernel[k + 2] * tmp.at(x, clamp_index(y + k, src.height), c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace

ImageF to_float(const io::Image& image) {
  ImageF out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.data[i] = static_cast<float>(image.pixels[i]);
  }
  return out;
}

io::Image to_uint8(const ImageF& image) {
  io::Image out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(static_cast<double>(image.data[i])), 0l, 255l));
  }
  return out;
}

ImageF pyramid_down(const ImageF& src) {
  const ImageF smooth = convolve5(src);
  const int ow = (src.width + 1) / 2;
  const int oh = (src.height + 1) / 2;
  ImageF out(ow, oh, src.channels);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        out.at(x, y, c) = smooth.at(2 * x, 2 * y, c);
      }
    }
  }
  return out;
}

ImageF pyramid_up(const ImageF& src, int target_w, int target_h) {
  ImageF out(target_w, target_h, src.channels);
  // Zero-insertion + 5-tap kernel, folded into a direct gather: output pixel
  // x draws from source pixels at even positions x+k, scaled by 2 per axis
  // to preserve mean brightness.
  for (int y = 0; y < target_h; ++y) {
    for (int x = 0; x < target_w; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        float acc = 0;
        for (int ky = -2; ky <= 2; ++ky) {
          const int py = y + ky;
          if ((py & 1) != 0) continue;
          const float wy = 2.0f * kKernel[ky + 2];
          float row_acc = 0;
          for (int kx = -2; kx <= 2; ++kx) {
            const int px = x + kx;
            if ((px & 1) != 0) continue;
            row_acc += 2.0f * kKernel[kx + 2] *
                       src.at(clamp_index(px / 2, src.width), clamp_index(py / 2, src.height), c);
          }
          acc += wy * row_acc;
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

std::vector<float> chamfer_distance(const std::vector<std::uint8_t>& mask, int width,
                                    int height) {
  constexpr float kBig = std::numeric_limits<float>::max() / 4;
  std::vector<float> d(mask.size());
  const auto at = [&](int x, int y) -> float {
    if (x < 0 || x >= width || y < 0 || y >= height) return 0;  // outside counts as border
    return d[static_cast<std::size_t>(y) * width + x];
  };
  for (std::size_t i = 0; i < mask.size(); ++i) d[i] = mask[i] ? kBig : 0.0f;

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      float& v = d[static_cast<std::size_t>(y) * width + x];
      if (v == 0) continue;
      v = std::min({v, at(x - 1, y) + 3, at(x, y - 1) + 3, at(x - 1, y - 1) + 4,
                    at(x + 1, y - 1) + 4});
    }
  }
  for (int y = height - 1; y >= 0; --y) {
    for (int x = width - 1; x >= 0; --x) {
      float& v = d[static_cast<std::size_t>(y) * width + x];
      if (v == 0) continue;
      v = std::min({v, at(x + 1, y) + 3, at(x, y + 1) + 3, at(x + 1, y + 1) + 4,
                    at(x - 1, y + 1) + 4});
    }
  }
  return d;
}

std::vector<double> gain_compensate(const std::vector<ImageF>& images,
                                    const std::vector<std::vector<std::uint8_t>>& masks,
                                    double lambda) {
  const int n = static_cast<int>(images.size());
  if (n == 0) throw InvalidValue("gain_compensate: no images");
  if (masks.size() != images.size()) {
    throw DimensionMismatch("gain_compensate: masks/images count mismatch");
  }
  if (n == 1) return {1.0};

  const int w = images[0].width;
  const int h = images[0].height;
  for (const auto& im : images) {
    if (im.width != w || im.height != h) {
      throw DimensionMismatch("gain_compensate: canvas sizes differ");
    }
  }

  const auto mean_intensity = [&](const ImageF& im, std::size_t px) {
    double s = 0;
    for (int c = 0; c < im.channels; ++c) {
      s += im.data[px * static_cast<std::size_t>(im.channels) + static_cast<std::size_t>(c)];
    }
    return s / im.channels;
  };

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  bool any_overlap = false;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double sum_i = 0;
      double sum_j = 0;
      std::size_t count = 0;
      const std::size_t total = static_cast<std::size_t>(w) * h;
      for (std::size_t px = 0; px < total; ++px) {
        if (!masks[static_cast<std::size_t>(i)][px] || !masks[static_cast<std::size_t>(j)][px]) {
          continue;
        }
        sum_i += mean_intensity(images[static_cast<std::size_t>(i)], px);
        sum_j += mean_intensity(images[static_cast<std::size_t>(j)], px);
        ++count;
      }
      if (count == 0) continue;
      any_overlap = true;
      const double mu_ij = sum_i / static_cast<double>(count);
      const double mu_ji = sum_j / static_cast<double>(count);
      m(i, i) += mu_ij * mu_ij;
      m(j, j) += mu_ji * mu_ji;
      m(i, j) -= mu_ij * mu_ji;
      m(j, i) -= mu_ij * mu_ji;
    }
  }
  if (!any_overlap) return std::vector<double>(static_cast<std::size_t>(n), 1.0);

  m.diagonal().array() += lambda;
  const Eigen::VectorXd g = m.ldlt().solve(Eigen::VectorXd::Constant(n, lambda));
  std::vector<double> gains(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    gains[static_cast<std::size_t>(i)] = std::clamp(g(i), 0.5, 2.0);
  }
  return gains;
}

io::Image multiband_blend(const std::vector<ImageF>& images,
                          const std::vector<std::vector<float>>& weights, int levels) {
  if (images.empty()) throw InvalidValue("multiband_blend: no images");
  if (weights.size() != images.size()) {
    throw DimensionMismatch("multiband_blend: weights/images count mismatch");
  }
  if (levels < 1) throw InvalidValue("multiband_blend: levels must be >= 1");
  const int w = images[0].width;
  const int h = images[0].height;
  const int ch = images[0].channels;
  for (const auto& im : images) {
    if (im.width != w || im.height != h || im.channels != ch) {
      throw DimensionMismatch("multiband_blend: layer sizes differ");
    }
  }
  for (const auto& wt : weights) {
    if (wt.size() != static_cast<std::size_t>(w) * h) {
      throw DimensionMismatch("multiband_blend: weight size differs from canvas");
    }
  }
  // Every level must keep at least one pixel.
  int feasible = 1;
  for (int s = std::min(w, h); s >= 2 && feasible < levels; s = (s + 1) / 2) ++feasible;
  levels = std::min(levels, feasible);

  const std::size_t n = images.size();
  // Per image: Gaussian pyramid, then Laplacians in place (base stays Gaussian).
  std::vector<std::vector<ImageF>> lap(n);
  std::vector<std::vector<ImageF>> wpyr(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<ImageF> gp;
    gp.push_back(images[i]);
    ImageF wimg(w, h, 1);
    wimg.data = weights[i];
    std::vector<ImageF> wp;
    wp.push_back(std::move(wimg));
    for (int l = 1; l < levels; ++l) {
      gp.push_back(pyramid_down(gp.back()));
      wp.push_back(pyramid_down(wp.back()));
    }
    std::vector<ImageF> lp;
    for (int l = 0; l < levels - 1; ++l) {
      const ImageF up = pyramid_up(gp[static_cast<std::size_t>(l + 1)],
                                   gp[static_cast<std::size_t>(l)].width,
                                   gp[static_cast<std::size_t>(l)].height);
      ImageF diff = gp[static_cast<std::size_t>(l)];
      for (std::size_t k = 0; k < diff.data.size(); ++k) diff.data[k] -= up.data[k];
      lp.push_back(std::move(diff));
    }
    lp.push_back(std::move(gp.back()));
    lap[i] = std::move(lp);
    wpyr[i] = std::move(wp);
  }

  // Blend each level with per-pixel weight renormalization.
  std::vector<ImageF> blended;
  for (int l = 0; l < levels; ++l) {
    const ImageF& ref = lap[0][static_cast<std::size_t>(l)];
    ImageF out(ref.width, ref.height, ch);
    for (int y = 0; y < ref.height; ++y) {
      for (int x = 0; x < ref.width; ++x) {
        float wsum = 0;
        for (std::size_t i = 0; i < n; ++i) {
          wsum += wpyr[i][static_cast<std::size_t>(l)].at(x, y);
        }
        if (wsum <= 1e-12f) continue;
        for (int c = 0; c < ch; ++c) {
          float acc = 0;
          for (std::size_t i = 0; i < n; ++i) {
            acc += wpyr[i][static_cast<std::size_t>(l)].at(x, y) *
                   lap[i][static_cast<std::size_t>(l)].at(x, y, c);
          }
          out.at(x, y, c) = acc / wsum;
        }
      }
    }
    blended.push_back(std::move(out));
  }

  ImageF acc = std::move(blended.back());
  for (int l = levels - 2; l >= 0; --l) {
    const ImageF up = pyramid_up(acc, blended[static_cast<std::size_t>(l)].width,
                                 blended[static_cast<std::size_t>(l)].height);
    acc = std::move(blended[static_cast<std::size_t>(l)]);
    for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += up.data[k];
  }
  return to_uint8(acc);
}

}  // namespace panosum::stitch
