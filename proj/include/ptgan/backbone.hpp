#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ptgan/nn.hpp"
#include "ptgan/tensor.hpp"

namespace ptgan {

struct BackboneConfig {
  std::string kind = "test";  // "test" | "reference"
  std::string weights_path;   // reference only
  int dim = 64;               // descriptor width (2048 for reference)
  uint64_t seed = 1234;       // test only: frozen random weights
};

/// Fixed image descriptor network. Weights are read-only for the program
/// lifetime; extraction is a pure function of the image.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
  /// N×3×H×W in [-1,1] -> N×dim descriptors.
  virtual Tensor extract(const Tensor& images) const = 0;
  /// Checksum over all weights; must be invariant across training.
  virtual uint64_t weights_checksum() const = 0;
};

/// Tiny frozen convnet (three valid stride-2 convs + ReLU, global average
/// pool), seeded at construction so the full pipeline runs offline.
/// Valid (unpadded) convolutions keep constant inputs constant, which gives
/// tests a closed-form bias-pathway oracle.
class TestBackbone : public Backbone {
 public:
  TestBackbone(int dim, uint64_t seed);

  int dim() const override { return dim_; }
  std::string kind() const override { return "test"; }
  Tensor extract(const Tensor& images) const override;
  uint64_t weights_checksum() const override;

  const std::vector<nn::Conv2d>& convs() const { return convs_; }

 private:
  int dim_;
  std::vector<nn::Conv2d> convs_;  // weights frozen after construction
};

/// 50-layer residual classifier backbone (bottleneck layout 3-4-6-3),
/// descriptor taken after global average pooling. Weights come from a
/// parameter archive on disk; nothing here is ever trained.
class ResNet50Backbone : public Backbone {
 public:
  explicit ResNet50Backbone(const std::string& weights_path);

  int dim() const override { return 2048; }
  std::string kind() const override { return "reference"; }
  Tensor extract(const Tensor& images) const override;
  uint64_t weights_checksum() const override;

  struct ParamSpec {
    std::string name;
    std::vector<int> shape;
  };
  /// Names and shapes the weights archive must provide.
  static std::vector<ParamSpec> parameter_spec();

 private:
  struct Bottleneck {
    nn::Conv2d conv1, conv2, conv3;
    nn::FrozenBatchNorm bn1, bn2, bn3;
    bool has_downsample = false;
    nn::Conv2d down_conv;
    nn::FrozenBatchNorm down_bn;
  };

  Tensor forward_bottleneck(const Bottleneck& block, const Tensor& x) const;

  nn::Conv2d conv1_;
  nn::FrozenBatchNorm bn1_;
  nn::MaxPool pool_{3, 2, 1};
  std::vector<std::vector<Bottleneck>> layers_;
  uint64_t checksum_ = 0;
};

std::unique_ptr<Backbone> make_backbone(const BackboneConfig& cfg);

/// extract_descriptor with the declared input contract (dims must match
/// what the backbone expects).
Tensor extract_descriptor(const Tensor& images, const Backbone& backbone);

}  // namespace ptgan
