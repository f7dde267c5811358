#include "ptgan/backbone.hpp"

#include <cmath>

#include "ptgan/checkpoint.hpp"
#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

namespace {

uint64_t tensors_checksum(std::initializer_list<const Tensor*> tensors) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor* t : tensors)
    h = fnv1a64(t->data(), static_cast<size_t>(t->size()) * sizeof(double), h);
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// TestBackbone
// ---------------------------------------------------------------------------

TestBackbone::TestBackbone(int dim, uint64_t seed) : dim_(dim) {
  require(dim >= 1, Errc::config_error, "backbone.dim must be >= 1");
  convs_.emplace_back(3, 16, 3, 2, 0);
  convs_.emplace_back(16, 32, 3, 2, 0);
  convs_.emplace_back(32, dim, 3, 2, 0);
  int idx = 0;
  for (nn::Conv2d& conv : convs_) {
    RngStream rng(seed, "test_backbone/conv", static_cast<uint64_t>(idx++));
    conv.init(rng);
    for (int64_t i = 0; i < conv.b.size(); ++i) conv.b[i] = rng.normal(0.0, 0.1);
  }
}

Tensor TestBackbone::extract(const Tensor& images) const {
  require(images.ndim() == 4 && images.dim(1) == 3, Errc::dim_mismatch,
          "backbone input " + shape_str(images.shape()));
  require(images.dim(2) >= 15 && images.dim(3) >= 15, Errc::dim_mismatch,
          "test backbone needs at least 15×15 input");
  Tensor x = images;
  nn::LeakyReLU relu(0.0);
  for (const nn::Conv2d& conv : convs_) {
    x = conv.infer(x);
    x = relu.forward(x, /*cache=*/false);
  }
  nn::GlobalAvgPool gap;
  return gap.forward(x, /*cache=*/false);
}

uint64_t TestBackbone::weights_checksum() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const nn::Conv2d& conv : convs_) {
    h = fnv1a64(conv.w.data(), static_cast<size_t>(conv.w.size()) * sizeof(double), h);
    h = fnv1a64(conv.b.data(), static_cast<size_t>(conv.b.size()) * sizeof(double), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// ResNet50Backbone
// ---------------------------------------------------------------------------

namespace {

struct StagePlan {
  int blocks;
  int mid;   // bottleneck width
  int out;   // expansion width (4× mid)
  int stride;
};

constexpr StagePlan kStages[4] = {
    {3, 64, 256, 1}, {4, 128, 512, 2}, {6, 256, 1024, 2}, {3, 512, 2048, 2}};

std::string block_prefix(int stage, int block) {
  return "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
}

void spec_bn(std::vector<ResNet50Backbone::ParamSpec>& out,
             const std::string& prefix, int c) {
  for (const char* field : {"gamma", "beta", "mean", "var"})
    out.push_back({prefix + "." + field, {c}});
}

}  // namespace

std::vector<ResNet50Backbone::ParamSpec> ResNet50Backbone::parameter_spec() {
  std::vector<ParamSpec> out;
  out.push_back({"conv1.w", {64, 3, 7, 7}});
  spec_bn(out, "bn1", 64);
  int in_ch = 64;
  for (int s = 0; s < 4; ++s) {
    const StagePlan& plan = kStages[s];
    for (int bl = 0; bl < plan.blocks; ++bl) {
      const std::string p = block_prefix(s, bl);
      out.push_back({p + ".conv1.w", {plan.mid, in_ch, 1, 1}});
      spec_bn(out, p + ".bn1", plan.mid);
      out.push_back({p + ".conv2.w", {plan.mid, plan.mid, 3, 3}});
      spec_bn(out, p + ".bn2", plan.mid);
      out.push_back({p + ".conv3.w", {plan.out, plan.mid, 1, 1}});
      spec_bn(out, p + ".bn3", plan.out);
      if (bl == 0) {
        out.push_back({p + ".downsample.conv.w", {plan.out, in_ch, 1, 1}});
        spec_bn(out, p + ".downsample.bn", plan.out);
      }
      in_ch = plan.out;
    }
  }
  return out;
}

ResNet50Backbone::ResNet50Backbone(const std::string& weights_path) {
  if (weights_path.empty())
    fail(Errc::weights_unavailable, "reference backbone needs backbone.weights_path");
  Archive ar;
  try {
    ar = Archive::load(weights_path);
  } catch (const Error& e) {
    if (e.code() == Errc::missing_file)
      fail(Errc::weights_unavailable,
           "cannot open backbone weights: " + weights_path);
    throw;
  }

  auto load_conv = [&](nn::Conv2d& conv, const std::string& name,
                       int cin, int cout, int k, int stride, int pad) {
    conv = nn::Conv2d(cin, cout, k, stride, pad);
    const Tensor& w = ar.get(name + ".w");
    require(w.shape() == conv.w.shape(), Errc::dim_mismatch,
            name + ".w shape " + shape_str(w.shape()) + " expected " +
                shape_str(conv.w.shape()));
    conv.w = w;  // bias stays zero: reference convs fold bias into BN
  };
  auto load_bn = [&](nn::FrozenBatchNorm& bn, const std::string& name, int c) {
    bn = nn::FrozenBatchNorm(c);
    bn.set_stats(ar.get(name + ".gamma"), ar.get(name + ".beta"),
                 ar.get(name + ".mean"), ar.get(name + ".var"));
  };

  load_conv(conv1_, "conv1", 3, 64, 7, 2, 3);
  load_bn(bn1_, "bn1", 64);

  int in_ch = 64;
  layers_.resize(4);
  for (int s = 0; s < 4; ++s) {
    const StagePlan& plan = kStages[s];
    for (int bl = 0; bl < plan.blocks; ++bl) {
      const std::string p = block_prefix(s, bl);
      Bottleneck block;
      const int stride = bl == 0 ? plan.stride : 1;
      load_conv(block.conv1, p + ".conv1", in_ch, plan.mid, 1, 1, 0);
      load_bn(block.bn1, p + ".bn1", plan.mid);
      load_conv(block.conv2, p + ".conv2", plan.mid, plan.mid, 3, stride, 1);
      load_bn(block.bn2, p + ".bn2", plan.mid);
      load_conv(block.conv3, p + ".conv3", plan.mid, plan.out, 1, 1, 0);
      load_bn(block.bn3, p + ".bn3", plan.out);
      if (bl == 0) {
        block.has_downsample = true;
        load_conv(block.down_conv, p + ".downsample.conv", in_ch, plan.out, 1,
                  stride, 0);
        load_bn(block.down_bn, p + ".downsample.bn", plan.out);
      }
      layers_[s].push_back(std::move(block));
      in_ch = plan.out;
    }
  }
  require(in_ch == 2048, Errc::dim_mismatch,
          "reference backbone pooled width must be 2048");
  checksum_ = ar.checksum();
}

Tensor ResNet50Backbone::forward_bottleneck(const Bottleneck& block,
                                            const Tensor& x) const {
  nn::LeakyReLU relu(0.0);
  Tensor out = relu.forward(block.bn1.forward(block.conv1.infer(x)), false);
  out = relu.forward(block.bn2.forward(block.conv2.infer(out)), false);
  out = block.bn3.forward(block.conv3.infer(out));
  Tensor skip = block.has_downsample
                    ? block.down_bn.forward(block.down_conv.infer(x))
                    : x;
  require(out.same_shape(skip), Errc::dim_mismatch, "bottleneck skip shape");
  for (int64_t i = 0; i < out.size(); ++i) {
    const double v = out[i] + skip[i];
    out[i] = v > 0.0 ? v : 0.0;
  }
  return out;
}

Tensor ResNet50Backbone::extract(const Tensor& images) const {
  require(images.ndim() == 4 && images.dim(1) == 3, Errc::dim_mismatch,
          "backbone input " + shape_str(images.shape()));
  require(images.dim(2) == 256 && images.dim(3) == 256, Errc::dim_mismatch,
          "reference backbone expects 256×256 input, got " +
              shape_str(images.shape()));
  nn::LeakyReLU relu(0.0);
  Tensor x = conv1_.infer(images);
  x = relu.forward(bn1_.forward(x), false);
  x = pool_.infer(x);
  for (const auto& stage : layers_)
    for (const Bottleneck& block : stage) x = forward_bottleneck(block, x);
  nn::GlobalAvgPool gap;
  return gap.forward(x, false);
}

uint64_t ResNet50Backbone::weights_checksum() const { return checksum_; }

std::unique_ptr<Backbone> make_backbone(const BackboneConfig& cfg) {
  if (cfg.kind == "test") return std::make_unique<TestBackbone>(cfg.dim, cfg.seed);
  if (cfg.kind == "reference") {
    auto backbone = std::make_unique<ResNet50Backbone>(cfg.weights_path);
    require(backbone->dim() == cfg.dim || cfg.dim == 0, Errc::config_error,
            "backbone.dim=" + std::to_string(cfg.dim) +
                " but reference descriptor width is 2048");
    return backbone;
  }
  fail(Errc::config_error, "backbone.kind must be 'test' or 'reference', got '" +
                               cfg.kind + "'");
}

Tensor extract_descriptor(const Tensor& images, const Backbone& backbone) {
  Tensor d = backbone.extract(images);
  nn::check_finite(d, "descriptor");
  return d;
}

}  // namespace ptgan
