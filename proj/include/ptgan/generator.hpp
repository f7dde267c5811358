#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptgan/nn.hpp"
#include "ptgan/pose.hpp"
#include "ptgan/tensor.hpp"

namespace ptgan {

/// Architecture of the pose-transformational generator: a learned projection
/// seeds a latent map, residual blocks transform it at constant resolution,
/// transposed-conv stages upsample to the output image.
struct GeneratorConfig {
  int num_res_blocks = 9;
  int base_channels = 64;
  int latent_h = 8;
  int latent_w = 8;
  int latent_c = 64;
  int descriptor_dim = 64;
  int out_height = 256;
  int out_width = 256;
  std::string norm_kind = "instance";  // instance | none
  std::string output_activation = "tanh";
  bool pose_include_confidence = true;
  uint64_t seed = 42;

  /// Number of x2 upsampling stages from the latent map to the output.
  int up_stages() const;
  /// Channel widths entering each upsampling stage, plus the final width.
  std::vector<int> up_channel_plan() const;
  int pose_input_dim() const {
    return pose_include_confidence ? kPoseVectorDim : kNumJoints * 2;
  }
  void validate() const;
};

/// G_P. Forward maps (descriptor batch, pose batch) to images in [-1,1];
/// backward accumulates parameter gradients from an output gradient.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg);

  /// desc: (N, descriptor_dim); pose: (N, 75). Returns (N, 3, H, W).
  Tensor forward(const Tensor& desc, const Tensor& pose, bool cache = true);
  void backward(const Tensor& dy);

  /// One residual block in isolation: y = up(act(norm(down(x)))) + x.
  Tensor res_block_forward(int block, const Tensor& x, bool cache = false);

  std::vector<nn::ParamRef> params();
  void zero_grads();
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct ResBlock {
    nn::Conv2d down;
    nn::InstanceNorm norm;
    nn::LeakyReLU act{0.0};
    nn::ConvTranspose2d up;
  };
  struct UpStage {
    nn::ConvTranspose2d conv;
    nn::InstanceNorm norm;
    nn::LeakyReLU act{0.0};
  };

  Tensor project_pose(const Tensor& pose) const;

  GeneratorConfig cfg_;
  bool use_norm_ = true;
  nn::Linear merge_;
  nn::Conv2d stem_;
  nn::InstanceNorm stem_norm_;
  nn::LeakyReLU stem_act_{0.0};
  std::vector<ResBlock> blocks_;
  std::vector<UpStage> ups_;
  nn::Conv2d out_conv_;
  nn::Tanh out_act_;
};

/// Cache-free synthesis wrapper used by generation and evaluation.
Tensor generate(Generator& g, const Tensor& desc, const Tensor& pose);

}  // namespace ptgan
