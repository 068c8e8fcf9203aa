#include "panosum/warp.hpp"

#include <algorithm>
#include <cmath>

#include "panosum/errors.hpp"

namespace panosum::stitch {

Eigen::Vector2d cylindrical_forward(const Eigen::Vector2d& p, double focal_px, double cx,
                                    double cy) {
  const double dx = p.x() - cx;
  return {focal_px * std::atan(dx / focal_px),
          focal_px * (p.y() - cy) / std::sqrt(dx * dx + focal_px * focal_px)};
}

Eigen::Vector2d cylindrical_inverse(const Eigen::Vector2d& q, double focal_px, double cx,
                                    double cy) {
  const double theta = q.x() / focal_px;
  return {cx + focal_px * std::tan(theta), cy + q.y() / std::cos(theta)};
}

double bilinear_sample(const io::Image& image, double x, double y, int channel) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = image.at(x0, y0, channel);
  const double v10 = image.at(x1, y0, channel);
  const double v01 = image.at(x0, y1, channel);
  const double v11 = image.at(x1, y1, channel);
  return (1 - fx) * ((1 - fy) * v00 + fy * v01) + fx * ((1 - fy) * v10 + fy * v11);
}

WarpResult cylindrical_warp(const io::Image& image, double focal_px, double cx, double cy) {
  if (!(focal_px > 0)) throw InvalidValue("cylindrical_warp: focal must be positive");
  if (!image.valid()) throw InvalidValue("cylindrical_warp: invalid image");

  const double w1 = image.width - 1;
  const double h1 = image.height - 1;
  // x' is monotone in x; y' extremes occur where (x-cx)^2 is smallest.
  double min_x = cylindrical_forward({0, cy}, focal_px, cx, cy).x();
  double max_x = cylindrical_forward({w1, cy}, focal_px, cx, cy).x();
  const double x_near = std::clamp(cx, 0.0, w1);
  double min_y = std::min({cylindrical_forward({x_near, 0}, focal_px, cx, cy).y(),
                           cylindrical_forward({0, 0}, focal_px, cx, cy).y(),
                           cylindrical_forward({w1, 0}, focal_px, cx, cy).y()});
  double max_y = std::max({cylindrical_forward({x_near, h1}, focal_px, cx, cy).y(),
                           cylindrical_forward({0, h1}, focal_px, cx, cy).y(),
                           cylindrical_forward({w1, h1}, focal_px, cx, cy).y()});

  WarpResult out;
  out.origin_x = std::floor(min_x);
  out.origin_y = std::floor(min_y);
  const int out_w = static_cast<int>(std::ceil(max_x) - out.origin_x) + 1;
  const int out_h = static_cast<int>(std::ceil(max_y) - out.origin_y) + 1;
  out.image = io::Image(out_w, out_h, image.channels);
  out.mask.assign(static_cast<std::size_t>(out_w) * out_h, 0);

  const double half_pi = std::asin(1.0);
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) {
      const Eigen::Vector2d q(u + out.origin_x, v + out.origin_y);
      if (std::abs(q.x() / focal_px) >= half_pi) continue;
      const Eigen::Vector2d p = cylindrical_inverse(q, focal_px, cx, cy);
      if (p.x() < 0 || p.x() > w1 || p.y() < 0 || p.y() > h1) continue;
      for (int c = 0; c < image.channels; ++c) {
        out.image.at(u, v, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(bilinear_sample(image, p.x(), p.y(), c)), 0l, 255l));
      }
      out.mask[static_cast<std::size_t>(v) * out_w + u] = 1;
    }
  }
  return out;
}

}  // namespace panosum::stitch
