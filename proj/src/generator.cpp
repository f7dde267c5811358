#include "ptgan/generator.hpp"

#include <algorithm>
#include <cmath>

#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

namespace {

bool pow2_factor(int from, int to, int* stages) {
  if (from <= 0 || to < from) return false;
  int k = 0;
  while (from < to) {
    from *= 2;
    ++k;
  }
  *stages = k;
  return from == to;
}

}  // namespace

int GeneratorConfig::up_stages() const {
  int kh = 0, kw = 0;
  require(pow2_factor(latent_h, out_height, &kh) &&
              pow2_factor(latent_w, out_width, &kw) && kh == kw,
          Errc::config_error,
          "generator latent map must reach the output dims by equal "
          "power-of-two upsampling");
  return kh;
}

std::vector<int> GeneratorConfig::up_channel_plan() const {
  const int stages = up_stages();
  const int floor_c = std::min(base_channels, 8);
  std::vector<int> plan{base_channels};
  for (int i = 1; i <= stages; ++i)
    plan.push_back(std::max(base_channels >> i, floor_c));
  return plan;
}

void GeneratorConfig::validate() const {
  require(num_res_blocks >= 1, Errc::config_error,
          "generator.num_res_blocks must be >= 1");
  require(base_channels >= 1, Errc::config_error,
          "generator.base_channels must be >= 1");
  require(latent_h >= 2 && latent_w >= 2 && latent_c >= 1, Errc::config_error,
          "generator latent map dims must be at least 2x2x1");
  require(latent_h % 2 == 0 && latent_w % 2 == 0, Errc::config_error,
          "generator latent dims must be even for the block bottleneck");
  require(descriptor_dim >= 1, Errc::config_error,
          "generator.descriptor_dim must be >= 1");
  require(norm_kind == "instance" || norm_kind == "none", Errc::config_error,
          "generator.norm_kind must be 'instance' or 'none'");
  require(output_activation == "tanh", Errc::config_error,
          "generator.output_activation must be 'tanh'");
  up_stages();
}

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  use_norm_ = cfg_.norm_kind == "instance";
  const bool conv_bias = !use_norm_;

  merge_ = nn::Linear(cfg_.descriptor_dim + cfg_.pose_input_dim(),
                      cfg_.latent_h * cfg_.latent_w * cfg_.latent_c);
  stem_ = nn::Conv2d(cfg_.latent_c, cfg_.base_channels, 3, 1, 1, conv_bias);
  stem_norm_ = nn::InstanceNorm(cfg_.base_channels);

  blocks_.resize(static_cast<size_t>(cfg_.num_res_blocks));
  for (ResBlock& blk : blocks_) {
    blk.down =
        nn::Conv2d(cfg_.base_channels, cfg_.base_channels, 3, 2, 1, conv_bias);
    blk.norm = nn::InstanceNorm(cfg_.base_channels);
    blk.up = nn::ConvTranspose2d(cfg_.base_channels, cfg_.base_channels, 3, 2,
                                 1, 1);
  }

  const std::vector<int> plan = cfg_.up_channel_plan();
  ups_.resize(plan.size() - 1);
  for (size_t i = 0; i < ups_.size(); ++i) {
    ups_[i].conv = nn::ConvTranspose2d(plan[i], plan[i + 1], 3, 2, 1, 1,
                                       conv_bias);
    ups_[i].norm = nn::InstanceNorm(plan[i + 1]);
  }
  out_conv_ = nn::Conv2d(plan.back(), 3, 3, 1, 1);

  RngStream rng(cfg_.seed, "generator/init");
  merge_.init(rng);
  stem_.init(rng);
  stem_norm_.init();
  for (ResBlock& blk : blocks_) {
    blk.down.init(rng);
    blk.norm.init();
    blk.up.init(rng);
  }
  for (UpStage& up : ups_) {
    up.conv.init(rng);
    up.norm.init();
  }
  out_conv_.init(rng);
}

Tensor Generator::project_pose(const Tensor& pose) const {
  require(pose.ndim() == 2 && pose.dim(1) == kPoseVectorDim,
          Errc::dim_mismatch, "pose batch " + shape_str(pose.shape()));
  if (cfg_.pose_include_confidence) return pose;
  const int n = pose.dim(0);
  Tensor reduced({n, kNumJoints * 2});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kNumJoints; ++j) {
      reduced.at2(i, j * 2 + 0) = pose.at2(i, j * 3 + 0);
      reduced.at2(i, j * 2 + 1) = pose.at2(i, j * 3 + 1);
    }
  return reduced;
}

Tensor Generator::forward(const Tensor& desc, const Tensor& pose, bool cache) {
  require(desc.ndim() == 2 && desc.dim(1) == cfg_.descriptor_dim,
          Errc::dim_mismatch, "descriptor batch " + shape_str(desc.shape()));
  require(desc.dim(0) == pose.dim(0), Errc::dim_mismatch,
          "descriptor/pose batch sizes differ");
  const Tensor p = project_pose(pose);
  const int n = desc.dim(0);
  const int d = cfg_.descriptor_dim;
  const int pd = cfg_.pose_input_dim();

  Tensor merged({n, d + pd});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) merged.at2(i, j) = desc.at2(i, j);
    for (int j = 0; j < pd; ++j) merged.at2(i, d + j) = p.at2(i, j);
  }

  Tensor x = merge_.forward(merged, cache)
                 .reshaped({n, cfg_.latent_c, cfg_.latent_h, cfg_.latent_w});
  nn::check_finite(x, "generator merge");

  x = stem_.forward(x, cache);
  if (use_norm_) x = stem_norm_.forward(x, cache);
  x = stem_act_.forward(x, cache);

  for (size_t i = 0; i < blocks_.size(); ++i) {
    ResBlock& blk = blocks_[i];
    Tensor f = blk.down.forward(x, cache);
    if (use_norm_) f = blk.norm.forward(f, cache);
    f = blk.act.forward(f, cache);
    f = blk.up.forward(f, cache);
    require(f.same_shape(x), Errc::dim_mismatch,
            "residual branch shape " + shape_str(f.shape()) +
                " != input shape " + shape_str(x.shape()));
    for (int64_t j = 0; j < x.size(); ++j) x[j] += f[j];
    nn::check_finite(x, "generator block " + std::to_string(i));
  }

  for (size_t i = 0; i < ups_.size(); ++i) {
    UpStage& up = ups_[i];
    x = up.conv.forward(x, cache);
    if (use_norm_) x = up.norm.forward(x, cache);
    x = up.act.forward(x, cache);
    nn::check_finite(x, "generator upsample " + std::to_string(i));
  }

  x = out_conv_.forward(x, cache);
  x = out_act_.forward(x, cache);
  nn::check_finite(x, "generator output");
  require(x.dim(2) == cfg_.out_height && x.dim(3) == cfg_.out_width,
          Errc::dim_mismatch, "generator output " + shape_str(x.shape()));
  return x;
}

void Generator::backward(const Tensor& dy) {
  Tensor g = out_act_.backward(dy);
  g = out_conv_.backward(g);

  for (size_t i = ups_.size(); i-- > 0;) {
    UpStage& up = ups_[i];
    g = up.act.backward(g);
    if (use_norm_) g = up.norm.backward(g);
    g = up.conv.backward(g);
  }

  for (size_t i = blocks_.size(); i-- > 0;) {
    ResBlock& blk = blocks_[i];
    Tensor f = blk.up.backward(g);
    f = blk.act.backward(f);
    if (use_norm_) f = blk.norm.backward(f);
    f = blk.down.backward(f);
    // Skip connection: total gradient is branch + identity paths.
    for (int64_t j = 0; j < g.size(); ++j) g[j] += f[j];
  }

  g = stem_act_.backward(g);
  if (use_norm_) g = stem_norm_.backward(g);
  g = stem_.backward(g);
  merge_.backward(g.reshaped(
      {g.dim(0), cfg_.latent_h * cfg_.latent_w * cfg_.latent_c}));
}

Tensor Generator::res_block_forward(int block, const Tensor& x, bool cache) {
  require(block >= 0 && block < num_blocks(), Errc::config_error,
          "res block index out of range");
  ResBlock& blk = blocks_[static_cast<size_t>(block)];
  Tensor f = blk.down.forward(x, cache);
  if (use_norm_) f = blk.norm.forward(f, cache);
  f = blk.act.forward(f, cache);
  f = blk.up.forward(f, cache);
  require(f.same_shape(x), Errc::dim_mismatch, "residual branch shape");
  Tensor y = x;
  for (int64_t j = 0; j < y.size(); ++j) y[j] += f[j];
  return y;
}

std::vector<nn::ParamRef> Generator::params() {
  std::vector<nn::ParamRef> out;
  merge_.collect("merge", out);
  stem_.collect("stem.conv", out);
  if (use_norm_) stem_norm_.collect("stem.norm", out);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    blocks_[i].down.collect(prefix + ".down", out);
    if (use_norm_) blocks_[i].norm.collect(prefix + ".norm", out);
    blocks_[i].up.collect(prefix + ".up", out);
  }
  for (size_t i = 0; i < ups_.size(); ++i) {
    const std::string prefix = "up" + std::to_string(i);
    ups_[i].conv.collect(prefix + ".conv", out);
    if (use_norm_) ups_[i].norm.collect(prefix + ".norm", out);
  }
  out_conv_.collect("out", out);
  return out;
}

void Generator::zero_grads() {
  for (nn::ParamRef& p : params()) p.grad->zero_();
}

Tensor generate(Generator& g, const Tensor& desc, const Tensor& pose) {
  return g.forward(desc, pose, /*cache=*/false);
}

}  // namespace ptgan
