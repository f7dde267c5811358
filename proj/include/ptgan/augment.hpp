#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptgan/image.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

/// Hyperparameters for the six-transform augmentation pipeline. All
/// magnitudes are config-visible so ablations can vary them.
struct AugmentConfig {
  double erase_prob = 0.5;
  std::pair<double, double> erase_area_range{0.02, 0.2};
  std::pair<double, double> crop_scale_range{0.8, 1.0};
  double jitter_strength = 0.2;    // brightness/contrast/saturation, relative
  double jitter_hue_degrees = 18.0;
  double flip_prob = 0.5;
  int distortion_grid = 10;        // control cells per side
  double distortion_magnitude = 8.0;  // pixels
  uint64_t seed = 0;
  bool erase_per_pixel_noise = true;  // false: single random fill value
  int target_height = 256;
  int target_width = 256;
  // Application order after the canonical resize.
  std::vector<std::string> order{"erase", "crop", "distort", "jitter", "flip"};

  void validate() const;
};

/// Aspect-preserving scale of the longer side to the target, remainder
/// zero-padded symmetrically.
Image resize_and_pad(const Image& img, int target_h = 256, int target_w = 256);

Image random_erase(const Image& img, RngStream& rng, const AugmentConfig& cfg);
Image random_crop_upscale(const Image& img, RngStream& rng,
                          const AugmentConfig& cfg);
Image jitter(const Image& img, RngStream& rng, const AugmentConfig& cfg);
Image horizontal_flip(const Image& img, RngStream& rng,
                      const AugmentConfig& cfg);
Image random_distortion(const Image& img, RngStream& rng,
                        const AugmentConfig& cfg);

// Deterministic cores behind the stochastic wrappers. Exposed so transforms
// can be exercised with pinned parameters.
Image erase_patch(const Image& img, int y0, int x0, int patch_h, int patch_w,
                  RngStream& noise_rng, bool per_pixel_noise);
Image crop_window_upscale(const Image& img, int y0, int x0, int crop_h,
                          int crop_w);
Image apply_jitter(const Image& img, double brightness, double contrast,
                   double saturation, double hue_shift_degrees);
Image flip_columns(const Image& img);
/// Backward-warp by a displacement field defined on a (grid+1)² control
/// lattice; out-of-frame samples read edge-clamped.
Image warp_by_lattice(const Image& img, const std::vector<double>& dx,
                      const std::vector<double>& dy, int grid);

/// Immutable composed pipeline: canonical resize followed by the five
/// stochastic transforms, each on its own (seed, sample_index) substream.
/// Safe for concurrent use.
class Augmenter {
 public:
  explicit Augmenter(AugmentConfig cfg);

  Image operator()(const Image& img, uint64_t sample_index) const;

  const AugmentConfig& config() const { return cfg_; }

 private:
  AugmentConfig cfg_;
};

Augmenter compose_pipeline(AugmentConfig cfg);

}  // namespace ptgan
