#include "ptgan/discriminator.hpp"

#include <string>

#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

void DiscriminatorConfig::validate() const {
  require(!trunk_channels.empty(), Errc::config_error,
          "discriminator.trunk_channels must be non-empty");
  for (int c : trunk_channels)
    require(c >= 1, Errc::config_error,
            "discriminator trunk channel counts must be >= 1");
  require(num_classes >= 2, Errc::config_error,
          "discriminator.num_classes must be >= 2");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, Errc::config_error,
          "discriminator.leaky_slope must be in [0,1)");
  final_dims();
}

std::pair<int, int> DiscriminatorConfig::final_dims() const {
  int h = in_height, w = in_width;
  for (size_t i = 0; i < trunk_channels.size(); ++i) {
    require(h >= 2 && w >= 2 && h % 2 == 0 && w % 2 == 0, Errc::config_error,
            "discriminator input dims must halve cleanly through every "
            "pooling stage");
    h /= 2;
    w /= 2;
  }
  return {h, w};
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int cin = 3;
  stages_.resize(cfg_.trunk_channels.size());
  for (size_t i = 0; i < stages_.size(); ++i) {
    const int cout = cfg_.trunk_channels[i];
    stages_[i].conv = nn::Conv2d(cin, cout, 3, 1, 1);
    stages_[i].act = nn::LeakyReLU(cfg_.leaky_slope);
    cin = cout;
  }
  const auto [fh, fw] = cfg_.final_dims();
  head_ = nn::Linear(cin * fh * fw, 1 + cfg_.num_classes);

  RngStream rng(cfg_.seed, "discriminator/init");
  for (Stage& s : stages_) s.conv.init(rng);
  head_.init(rng);
}

DiscOutput Discriminator::forward(const Tensor& img, bool cache) {
  require(img.ndim() == 4 && img.dim(1) == 3 && img.dim(2) == cfg_.in_height &&
              img.dim(3) == cfg_.in_width,
          Errc::dim_mismatch, "discriminator input " + shape_str(img.shape()));
  Tensor x = img;
  for (size_t i = 0; i < stages_.size(); ++i) {
    Stage& s = stages_[i];
    x = s.conv.forward(x, cache);
    x = s.act.forward(x, cache);
    x = s.pool.forward(x, cache);
    nn::check_finite(x, "discriminator stage " + std::to_string(i));
  }
  if (cache) trunk_out_shape_ = x.shape();

  const int n = x.dim(0);
  const int flat = static_cast<int>(x.size() / n);
  Tensor logits = head_.forward(x.reshaped({n, flat}), cache);
  nn::check_finite(logits, "discriminator head");

  DiscOutput out;
  out.realness = Tensor({n});
  out.class_logits = Tensor({n, cfg_.num_classes});
  for (int i = 0; i < n; ++i) {
    out.realness[i] = logits.at2(i, 0);
    for (int c = 0; c < cfg_.num_classes; ++c)
      out.class_logits.at2(i, c) = logits.at2(i, c + 1);
  }
  return out;
}

Tensor Discriminator::backward(const Tensor& d_realness,
                               const Tensor& d_class_logits) {
  require(!trunk_out_shape_.empty(), Errc::dim_mismatch,
          "discriminator backward without cached forward");
  const int n = d_realness.dim(0);
  require(d_class_logits.ndim() == 2 && d_class_logits.dim(0) == n &&
              d_class_logits.dim(1) == cfg_.num_classes,
          Errc::dim_mismatch, "class logit gradient shape");

  Tensor d_logits({n, 1 + cfg_.num_classes});
  for (int i = 0; i < n; ++i) {
    d_logits.at2(i, 0) = d_realness[i];
    for (int c = 0; c < cfg_.num_classes; ++c)
      d_logits.at2(i, c + 1) = d_class_logits.at2(i, c);
  }

  Tensor g = head_.backward(d_logits).reshaped(trunk_out_shape_);
  for (size_t i = stages_.size(); i-- > 0;) {
    Stage& s = stages_[i];
    g = s.pool.backward(g);
    g = s.act.backward(g);
    g = s.conv.backward(g);
  }
  return g;
}

std::vector<nn::ParamRef> Discriminator::params() {
  std::vector<nn::ParamRef> out;
  for (size_t i = 0; i < stages_.size(); ++i)
    stages_[i].conv.collect("stage" + std::to_string(i) + ".conv", out);
  head_.collect("head", out);
  return out;
}

void Discriminator::zero_grads() {
  for (nn::ParamRef& p : params()) p.grad->zero_();
}

}  // namespace ptgan
