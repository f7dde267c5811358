#include "ptgan/augment.hpp"

#include <algorithm>
#include <cmath>

#include "ptgan/error.hpp"

namespace ptgan {

namespace {

constexpr double kMinEraseAspect = 0.3;

double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double maxc = std::max({r, g, b});
  double minc = std::min({r, g, b});
  v = maxc;
  double d = maxc - minc;
  s = maxc <= 0.0 ? 0.0 : d / maxc;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (maxc == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (maxc == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);  // wrap to [0,1)
  double i = std::floor(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * f);
  double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Edge-clamped bilinear sample.
double sample_bilinear(const Image& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  int y0 = static_cast<int>(y);
  int x0 = static_cast<int>(x);
  int y1 = std::min(y0 + 1, img.height - 1);
  int x1 = std::min(x0 + 1, img.width - 1);
  double fy = y - y0, fx = x - x0;
  double a = img.at(y0, x0, c);
  double b = img.at(y0, x1, c);
  double d = img.at(y1, x0, c);
  double e = img.at(y1, x1, c);
  double top = a + (b - a) * fx;
  double bot = d + (e - d) * fx;
  return top + (bot - top) * fy;
}

}  // namespace

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* key) {
    require(p >= 0.0 && p <= 1.0, Errc::config_error,
            std::string("augment.") + key + " must lie in [0,1]");
  };
  prob(erase_prob, "erase_prob");
  prob(flip_prob, "flip_prob");
  require(erase_area_range.first <= erase_area_range.second &&
              erase_area_range.first > 0.0 && erase_area_range.second < 1.0,
          Errc::config_error, "augment.erase_area_range must be inside (0,1)");
  require(crop_scale_range.first <= crop_scale_range.second &&
              crop_scale_range.first > 0.0 && crop_scale_range.second <= 1.0,
          Errc::config_error, "augment.crop_scale_range must be inside (0,1]");
  require(jitter_strength >= 0.0 && jitter_hue_degrees >= 0.0,
          Errc::config_error, "augment.jitter strengths must be >= 0");
  require(distortion_grid >= 2, Errc::config_error,
          "augment.distortion_grid must be >= 2");
  require(distortion_magnitude >= 0.0, Errc::config_error,
          "augment.distortion_magnitude must be >= 0");
  require(target_height >= 1 && target_width >= 1, Errc::config_error,
          "augment.target dims must be >= 1");
  for (const std::string& op : order)
    require(op == "erase" || op == "crop" || op == "distort" ||
                op == "jitter" || op == "flip",
            Errc::config_error, "augment.order: unknown transform '" + op + "'");
}

Image resize_and_pad(const Image& img, int target_h, int target_w) {
  require(!img.empty(), Errc::empty_image, "resize_and_pad on empty image");
  if (img.height == target_h && img.width == target_w) return img;

  const double scale = std::min(static_cast<double>(target_h) / img.height,
                                static_cast<double>(target_w) / img.width);
  int new_h = std::min(target_h,
                       static_cast<int>(std::lround(img.height * scale)));
  int new_w = std::min(target_w,
                       static_cast<int>(std::lround(img.width * scale)));
  new_h = std::max(new_h, 1);
  new_w = std::max(new_w, 1);

  Image scaled = bilinear_resize(img, new_h, new_w);
  if (new_h == target_h && new_w == target_w) return scaled;

  Image out(target_h, target_w);  // zero-filled
  const int pad_top = (target_h - new_h) / 2;
  const int pad_left = (target_w - new_w) / 2;
  for (int y = 0; y < new_h; ++y)
    for (int x = 0; x < new_w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(pad_top + y, pad_left + x, c) = scaled.at(y, x, c);
  return out;
}

Image erase_patch(const Image& img, int y0, int x0, int patch_h, int patch_w,
                  RngStream& noise_rng, bool per_pixel_noise) {
  Image out = img;
  double fill_r = noise_rng.uniform();
  double fill_g = noise_rng.uniform();
  double fill_b = noise_rng.uniform();
  for (int y = y0; y < y0 + patch_h; ++y) {
    for (int x = x0; x < x0 + patch_w; ++x) {
      if (per_pixel_noise) {
        out.at(y, x, 0) = noise_rng.uniform();
        out.at(y, x, 1) = noise_rng.uniform();
        out.at(y, x, 2) = noise_rng.uniform();
      } else {
        out.at(y, x, 0) = fill_r;
        out.at(y, x, 1) = fill_g;
        out.at(y, x, 2) = fill_b;
      }
    }
  }
  return out;
}

Image random_erase(const Image& img, RngStream& rng, const AugmentConfig& cfg) {
  if (!rng.bernoulli(cfg.erase_prob)) return img;
  const double area_frac =
      rng.uniform(cfg.erase_area_range.first, cfg.erase_area_range.second);
  const double aspect = std::exp(
      rng.uniform(std::log(kMinEraseAspect), std::log(1.0 / kMinEraseAspect)));
  const double area = area_frac * img.height * img.width;
  int patch_h = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))),
                           1, img.height);
  int patch_w = std::clamp(static_cast<int>(std::lround(area / patch_h)), 1,
                           img.width);
  const int y0 = rng.uniform_int(0, img.height - patch_h);
  const int x0 = rng.uniform_int(0, img.width - patch_w);
  return erase_patch(img, y0, x0, patch_h, patch_w, rng,
                     cfg.erase_per_pixel_noise);
}

Image crop_window_upscale(const Image& img, int y0, int x0, int crop_h,
                          int crop_w) {
  if (crop_h == img.height && crop_w == img.width) return img;
  Image window(crop_h, crop_w);
  for (int y = 0; y < crop_h; ++y)
    for (int x = 0; x < crop_w; ++x)
      for (int c = 0; c < 3; ++c)
        window.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return bilinear_resize(window, img.height, img.width);
}

Image random_crop_upscale(const Image& img, RngStream& rng,
                          const AugmentConfig& cfg) {
  const double scale =
      rng.uniform(cfg.crop_scale_range.first, cfg.crop_scale_range.second);
  const int crop_h =
      std::clamp(static_cast<int>(std::lround(img.height * scale)), 1,
                 img.height);
  const int crop_w = std::clamp(
      static_cast<int>(std::lround(img.width * scale)), 1, img.width);
  const int y0 = rng.uniform_int(0, img.height - crop_h);
  const int x0 = rng.uniform_int(0, img.width - crop_w);
  return crop_window_upscale(img, y0, x0, crop_h, crop_w);
}

Image apply_jitter(const Image& img, double brightness, double contrast,
                   double saturation, double hue_shift_degrees) {
  Image out = img;

  if (brightness != 1.0) {
    for (double& v : out.pixels) v = clamp01(v * brightness);
  }
  if (contrast != 1.0) {
    double mean = 0.0;
    for (int64_t i = 0; i < out.num_pixels(); ++i)
      mean += luminance(out.pixels[i * 3], out.pixels[i * 3 + 1],
                        out.pixels[i * 3 + 2]);
    mean /= static_cast<double>(out.num_pixels());
    for (double& v : out.pixels) v = clamp01(mean + (v - mean) * contrast);
  }
  if (saturation != 1.0) {
    for (int64_t i = 0; i < out.num_pixels(); ++i) {
      double l = luminance(out.pixels[i * 3], out.pixels[i * 3 + 1],
                           out.pixels[i * 3 + 2]);
      for (int c = 0; c < 3; ++c)
        out.pixels[i * 3 + c] = clamp01(l + (out.pixels[i * 3 + c] - l) * saturation);
    }
  }
  if (hue_shift_degrees != 0.0) {
    const double shift = hue_shift_degrees / 360.0;
    for (int64_t i = 0; i < out.num_pixels(); ++i) {
      double h, s, v;
      rgb_to_hsv(out.pixels[i * 3], out.pixels[i * 3 + 1], out.pixels[i * 3 + 2],
                 h, s, v);
      double r, g, b;
      hsv_to_rgb(h + shift, s, v, r, g, b);
      out.pixels[i * 3 + 0] = clamp01(r);
      out.pixels[i * 3 + 1] = clamp01(g);
      out.pixels[i * 3 + 2] = clamp01(b);
    }
  }
  return out;
}

Image jitter(const Image& img, RngStream& rng, const AugmentConfig& cfg) {
  const double s = cfg.jitter_strength;
  const double brightness = rng.uniform(1.0 - s, 1.0 + s);
  const double contrast = rng.uniform(1.0 - s, 1.0 + s);
  const double saturation = rng.uniform(1.0 - s, 1.0 + s);
  const double hue =
      rng.uniform(-cfg.jitter_hue_degrees, cfg.jitter_hue_degrees);
  return apply_jitter(img, brightness, contrast, saturation, hue);
}

Image flip_columns(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image horizontal_flip(const Image& img, RngStream& rng,
                      const AugmentConfig& cfg) {
  if (!rng.bernoulli(cfg.flip_prob)) return img;
  return flip_columns(img);
}

Image warp_by_lattice(const Image& img, const std::vector<double>& dx,
                      const std::vector<double>& dy, int grid) {
  require(grid >= 2, Errc::config_error, "distortion grid must be >= 2");
  const size_t nodes = static_cast<size_t>(grid + 1) * (grid + 1);
  require(dx.size() == nodes && dy.size() == nodes, Errc::dim_mismatch,
          "lattice offset count mismatch");
  if (img.height < 2 || img.width < 2) return img;

  Image out(img.height, img.width);
  const double gy_scale = static_cast<double>(grid) / (img.height - 1);
  const double gx_scale = static_cast<double>(grid) / (img.width - 1);
  for (int y = 0; y < img.height; ++y) {
    double u = y * gy_scale;
    int iy = std::min(static_cast<int>(u), grid - 1);
    double fy = u - iy;
    for (int x = 0; x < img.width; ++x) {
      double v = x * gx_scale;
      int ix = std::min(static_cast<int>(v), grid - 1);
      double fx = v - ix;
      auto node = [&](int r, int c) { return static_cast<size_t>(r) * (grid + 1) + c; };
      auto lerp_field = [&](const std::vector<double>& f) {
        double a = f[node(iy, ix)];
        double b = f[node(iy, ix + 1)];
        double c = f[node(iy + 1, ix)];
        double d = f[node(iy + 1, ix + 1)];
        double top = a + (b - a) * fx;
        double bot = c + (d - c) * fx;
        return top + (bot - top) * fy;
      };
      const double off_x = lerp_field(dx);
      const double off_y = lerp_field(dy);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = sample_bilinear(img, y + off_y, x + off_x, c);
    }
  }
  return out;
}

Image random_distortion(const Image& img, RngStream& rng,
                        const AugmentConfig& cfg) {
  const int grid = cfg.distortion_grid;
  const size_t nodes = static_cast<size_t>(grid + 1) * (grid + 1);
  std::vector<double> dx(nodes), dy(nodes);
  for (size_t i = 0; i < nodes; ++i) {
    dx[i] = rng.uniform(-cfg.distortion_magnitude, cfg.distortion_magnitude);
    dy[i] = rng.uniform(-cfg.distortion_magnitude, cfg.distortion_magnitude);
  }
  return warp_by_lattice(img, dx, dy, grid);
}

Augmenter::Augmenter(AugmentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

Image Augmenter::operator()(const Image& img, uint64_t sample_index) const {
  Image out = resize_and_pad(img, cfg_.target_height, cfg_.target_width);
  for (const std::string& op : cfg_.order) {
    RngStream rng(cfg_.seed, "aug/" + op, sample_index);
    if (op == "erase")
      out = random_erase(out, rng, cfg_);
    else if (op == "crop")
      out = random_crop_upscale(out, rng, cfg_);
    else if (op == "distort")
      out = random_distortion(out, rng, cfg_);
    else if (op == "jitter")
      out = jitter(out, rng, cfg_);
    else if (op == "flip")
      out = horizontal_flip(out, rng, cfg_);
  }
  return out;
}

Augmenter compose_pipeline(AugmentConfig cfg) { return Augmenter(std::move(cfg)); }

}  // namespace ptgan
