#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ptgan/tensor.hpp"

namespace ptgan {

/// H×W×3 image with values in [0,1] (storage range). Network I/O uses
/// [-1,1]; conversion happens at the to_net/from_net boundary only.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major (y, x, channel)

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }

  bool empty() const { return pixels.empty(); }
  int64_t num_pixels() const { return static_cast<int64_t>(height) * width; }

  void fill(double r, double g, double b) {
    for (int64_t i = 0; i < num_pixels(); ++i) {
      pixels[i * 3 + 0] = r;
      pixels[i * 3 + 1] = g;
      pixels[i * 3 + 2] = b;
    }
  }
};

Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

/// Bilinear resize; exact passthrough when dims already match.
Image bilinear_resize(const Image& img, int out_h, int out_w);

/// [0,1] storage -> [-1,1] network tensor of shape 3×H×W.
Tensor image_to_net(const Image& img);
/// Batch of images -> N×3×H×W network tensor.
Tensor images_to_net(const std::vector<Image>& imgs);
/// [-1,1] network tensor (3×H×W or 1×3×H×W) -> clamped [0,1] image.
Image net_to_image(const Tensor& t);

/// Mean squared difference in storage range; images must share dims.
double image_mse(const Image& a, const Image& b);

int count_differing_pixels(const Image& a, const Image& b);

}  // namespace ptgan
