#include "ptgan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "ptgan/error.hpp"

namespace ptgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t to_byte(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(v * 255.0));
}

}  // namespace

Image load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail(Errc::missing_file, "cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::malformed_document, "png read init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::malformed_document, "png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::malformed_document, "not a valid PNG: " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  png_byte color_type = png_get_color_type(png, info);
  png_byte bit_depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<uint8_t> raw(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = raw.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w));
  for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  require(!img.empty(), Errc::empty_image, "save_png on empty image");

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail(Errc::missing_file, "cannot write " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::malformed_document, "png write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::malformed_document, "png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::malformed_document, "png write failed: " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) row[x * 3 + c] = to_byte(img.at(y, x, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image bilinear_resize(const Image& img, int out_h, int out_w) {
  require(!img.empty(), Errc::empty_image, "resize on empty image");
  if (img.height == out_h && img.width == out_w) return img;

  Image out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double src_y = (y + 0.5) * sy - 0.5;
    src_y = std::clamp(src_y, 0.0, static_cast<double>(img.height - 1));
    int y0 = static_cast<int>(src_y);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fy = src_y - y0;
    for (int x = 0; x < out_w; ++x) {
      double src_x = (x + 0.5) * sx - 0.5;
      src_x = std::clamp(src_x, 0.0, static_cast<double>(img.width - 1));
      int x0 = static_cast<int>(src_x);
      int x1 = std::min(x0 + 1, img.width - 1);
      double fx = src_x - x0;
      for (int c = 0; c < 3; ++c) {
        // Two-stage lerp keeps interpolation of a constant bit-exact.
        double a = img.at(y0, x0, c);
        double b = img.at(y0, x1, c);
        double d = img.at(y1, x0, c);
        double e = img.at(y1, x1, c);
        double top = a + (b - a) * fx;
        double bot = d + (e - d) * fx;
        out.at(y, x, c) = top + (bot - top) * fy;
      }
    }
  }
  return out;
}

Tensor image_to_net(const Image& img) {
  require(!img.empty(), Errc::empty_image, "image_to_net on empty image");
  Tensor t({3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t[(static_cast<int64_t>(c) * img.height + y) * img.width + x] =
            img.at(y, x, c) * 2.0 - 1.0;
  return t;
}

Tensor images_to_net(const std::vector<Image>& imgs) {
  require(!imgs.empty(), Errc::empty_image, "images_to_net on empty batch");
  const int h = imgs[0].height, w = imgs[0].width;
  Tensor t({static_cast<int>(imgs.size()), 3, h, w});
  for (size_t n = 0; n < imgs.size(); ++n) {
    require(imgs[n].height == h && imgs[n].width == w, Errc::dim_mismatch,
            "batch images must share dims");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          t.at4(static_cast<int>(n), c, y, x) = imgs[n].at(y, x, c) * 2.0 - 1.0;
  }
  return t;
}

Image net_to_image(const Tensor& t) {
  std::vector<int> s = t.shape();
  if (s.size() == 4) {
    require(s[0] == 1, Errc::dim_mismatch, "net_to_image expects batch of 1");
    s.erase(s.begin());
  }
  require(s.size() == 3 && s[0] == 3, Errc::dim_mismatch,
          "net_to_image expects 3×H×W, got " + shape_str(t.shape()));
  const int h = s[1], w = s[2];
  Image img(h, w);
  const double* p = t.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(y, x, c) = std::clamp(
            (p[(static_cast<int64_t>(c) * h + y) * w + x] + 1.0) * 0.5, 0.0, 1.0);
  return img;
}

double image_mse(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width, Errc::dim_mismatch,
          "image_mse dims differ");
  double s = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

int count_differing_pixels(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width, Errc::dim_mismatch,
          "count_differing_pixels dims differ");
  int n = 0;
  for (int64_t i = 0; i < a.num_pixels(); ++i) {
    bool diff = false;
    for (int c = 0; c < 3; ++c)
      if (a.pixels[i * 3 + c] != b.pixels[i * 3 + c]) diff = true;
    if (diff) ++n;
  }
  return n;
}

}  // namespace ptgan
