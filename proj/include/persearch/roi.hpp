#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "persearch/embedding.hpp"

namespace persearch {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // pixel coordinates, x1 < x2, y1 < y2
};

inline double box_width(const Box& b) { return b.x2 - b.x1; }
inline double box_height(const Box& b) { return b.y2 - b.y1; }
inline double box_area(const Box& b) { return std::max(0.0, box_width(b)) * std::max(0.0, box_height(b)); }

inline Box clip_box(const Box& b, int image_w, int image_h) {
  Box c;
  c.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image_w));
  c.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image_h));
  c.x2 = std::clamp(b.x2, 0.0, static_cast<double>(image_w));
  c.y2 = std::clamp(b.y2, 0.0, static_cast<double>(image_h));
  return c;
}

// Dense H x W x C pixel array, row-major, values in [0, 1].
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

struct Annotation {
  Box box;
  std::optional<int> identity;  // absent for unlabeled persons
};

struct SceneImage {
  int scene_id = 0;
  Image pixels;
  std::vector<Annotation> annotations;
};

// Border-replicating bilinear sample at continuous index coordinates
// (integer coordinates hit pixel values exactly).
inline double bilinear_sample(const Image& img, double y, double x, int ch) {
  const double yc = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, img.h - 1);
  const int x1 = std::min(x0 + 1, img.w - 1);
  const double fy = yc - y0;
  const double fx = xc - x0;
  const double top = img.at(y0, x0, ch) * (1.0 - fx) + img.at(y0, x1, ch) * fx;
  const double bot = img.at(y1, x0, ch) * (1.0 - fx) + img.at(y1, x1, ch) * fx;
  return top * (1.0 - fy) + bot * fy;
}

/// Crop + bilinear resize of a box region to (out_h, out_w). Output cell
/// (i, j) samples the input at the center of the corresponding sub-rectangle
/// of the box, so a full-image box at native resolution is an exact copy.
/// The box is clipped to the image first; a degenerate clipped box is
/// rejected.
inline Image roi_extract(const SceneImage& scene, const Box& box, int out_h, int out_w) {
  check(out_h >= 1 && out_w >= 1, "roi_extract: roi size must be positive");
  const Image& img = scene.pixels;
  const Box b = clip_box(box, img.w, img.h);
  check(box_width(b) > 0.0 && box_height(b) > 0.0, "roi_extract: degenerate box after clipping");

  Image patch(out_h, out_w, img.c);
  const double sy = box_height(b) / out_h;
  const double sx = box_width(b) / out_w;
  for (int i = 0; i < out_h; ++i) {
    const double src_y = b.y1 + (i + 0.5) * sy - 0.5;
    for (int j = 0; j < out_w; ++j) {
      const double src_x = b.x1 + (j + 0.5) * sx - 0.5;
      for (int ch = 0; ch < img.c; ++ch) patch.at(i, j, ch) = bilinear_sample(img, src_y, src_x, ch);
    }
  }
  return patch;
}

}  // namespace persearch
