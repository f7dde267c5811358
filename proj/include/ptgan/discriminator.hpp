#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptgan/nn.hpp"
#include "ptgan/tensor.hpp"

namespace ptgan {

/// Dual-head discriminator D_P: Conv-ReLU-Pool trunk stages followed by one
/// shared fully-connected layer whose outputs split into a realness logit
/// and identity-class logits.
struct DiscriminatorConfig {
  std::vector<int> trunk_channels{64, 128, 256, 512, 512};
  int num_classes = 2;
  int in_height = 256;
  int in_width = 256;
  double leaky_slope = 0.2;
  /// When true the classification loss also covers generated images,
  /// labelled with their source identity.
  bool classify_fake = false;
  uint64_t seed = 43;

  void validate() const;
  /// Spatial side lengths after all pooling stages.
  std::pair<int, int> final_dims() const;
};

struct DiscOutput {
  Tensor realness;      // (N)
  Tensor class_logits;  // (N, num_classes)
};

class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorConfig& cfg);

  /// img: (N, 3, H, W) in network range.
  DiscOutput forward(const Tensor& img, bool cache = true);
  /// Gradient w.r.t. the two heads; returns dL/d(input image batch).
  Tensor backward(const Tensor& d_realness, const Tensor& d_class_logits);

  std::vector<nn::ParamRef> params();
  void zero_grads();
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  struct Stage {
    nn::Conv2d conv;
    nn::LeakyReLU act;
    nn::MaxPool pool{2, 2, 0};
  };

  DiscriminatorConfig cfg_;
  std::vector<Stage> stages_;
  nn::Linear head_;
  std::vector<int> trunk_out_shape_;
};

}  // namespace ptgan
