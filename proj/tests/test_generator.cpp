#include <string>
#include <vector>

#include "helpers.hpp"
#include "ptgan/error.hpp"
#include "ptgan/generator.hpp"

using namespace ptgan;

namespace {

GeneratorConfig mini_config() {
  GeneratorConfig cfg;
  cfg.num_res_blocks = 2;
  cfg.base_channels = 16;
  cfg.latent_h = 4;
  cfg.latent_w = 4;
  cfg.latent_c = 16;
  cfg.descriptor_dim = 8;
  cfg.out_height = 32;
  cfg.out_width = 32;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("generator: upsampling plan halves channels down to a floor") {
  GeneratorConfig cfg;  // defaults: 8x8 latent -> 256x256, base 64
  CHECK(cfg.up_stages() == 5);
  CHECK(cfg.up_channel_plan() == std::vector<int>{64, 32, 16, 8, 8, 8});

  const GeneratorConfig mini = mini_config();  // 4x4 -> 32x32, base 16
  CHECK(mini.up_stages() == 3);
  CHECK(mini.up_channel_plan() == std::vector<int>{16, 8, 8, 8});
}

TEST_CASE("generator: configuration validation") {
  auto bad = [](auto mutate) {
    GeneratorConfig cfg = mini_config();
    mutate(cfg);
    return cfg;
  };
  CHECK_NOTHROW(mini_config().validate());
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.num_res_blocks = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.base_channels = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.latent_h = 3; }).validate(),
      Errc::config_error);  // odd latent side cannot double cleanly
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.latent_c = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.descriptor_dim = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.norm_kind = "batch"; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.output_activation = "sigmoid"; })
          .validate(),
      Errc::config_error);
  // Output must be latent size times a power of two, same factor both axes.
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.out_height = 48; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](GeneratorConfig& c) { c.out_width = 64; }).validate(),
      Errc::config_error);
}

TEST_CASE("generator: forward produces in-range images deterministically") {
  Generator g(mini_config());
  const Tensor desc = testutil::random_tensor({2, 8}, 1);
  const Tensor pose = testutil::random_tensor({2, 75}, 2, 0.0, 1.0);
  const Tensor y = g.forward(desc, pose, false);
  REQUIRE(y.shape() == std::vector<int>{2, 3, 32, 32});
  for (int64_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] >= -1.0);
    CHECK(y[i] <= 1.0);
  }
  // Same seed, same inputs: identical output. Different seed: different.
  Generator same(mini_config());
  CHECK(testutil::tensor_max_abs_diff(same.forward(desc, pose, false), y) ==
        0.0);
  GeneratorConfig other_cfg = mini_config();
  other_cfg.seed = 6;
  Generator other(other_cfg);
  CHECK(testutil::tensor_max_abs_diff(other.forward(desc, pose, false), y) >
        0.0);
  // The synthesis wrapper is the same function.
  Generator fresh(mini_config());
  CHECK(testutil::tensor_max_abs_diff(generate(fresh, desc, pose), y) == 0.0);
}

TEST_CASE("generator: input contracts") {
  Generator g(mini_config());
  const Tensor desc = testutil::random_tensor({2, 8}, 3);
  const Tensor pose = testutil::random_tensor({2, 75}, 4, 0.0, 1.0);
  CHECK_THROWS_CODE(g.forward(testutil::random_tensor({2, 9}, 5), pose, false),
                    Errc::dim_mismatch);
  CHECK_THROWS_CODE(g.forward(desc, testutil::random_tensor({2, 74}, 6), false),
                    Errc::dim_mismatch);
  CHECK_THROWS_CODE(g.forward(desc, testutil::random_tensor({3, 75}, 7), false),
                    Errc::dim_mismatch);
  CHECK_THROWS_CODE(g.res_block_forward(2, Tensor({1, 16, 4, 4})),
                    Errc::config_error);  // only blocks 0 and 1 exist
}

TEST_CASE("generator: zeroed residual branch is the identity map") {
  Generator g(mini_config());
  for (nn::ParamRef& p : g.params())
    if (p.name.rfind("block0.", 0) == 0) p.value->zero_();
  const Tensor x = testutil::random_tensor({2, 16, 4, 4}, 8);
  const Tensor y = g.res_block_forward(0, x);
  REQUIRE(y.same_shape(x));
  CHECK(testutil::tensor_max_abs_diff(y, x) <= 1e-15);
  // An untouched block is not the identity.
  const Tensor y1 = g.res_block_forward(1, x);
  CHECK(testutil::tensor_max_abs_diff(y1, x) > 1e-6);
}

TEST_CASE("generator: parameter inventory covers every trainable piece") {
  Generator g(mini_config());
  const auto params = g.params();
  std::vector<std::string> names;
  for (const auto& p : params) {
    names.push_back(p.name);
    REQUIRE(p.value != nullptr);
    REQUIRE(p.grad != nullptr);
    CHECK(p.value->size() == p.grad->size());
  }
  for (const char* expected :
       {"merge.w", "merge.b", "stem.conv.w", "stem.norm.gamma",
        "stem.norm.beta", "block0.down.w", "block0.norm.gamma",
        "block0.norm.beta", "block0.up.w", "block0.up.b", "block1.down.w",
        "up0.conv.w", "up0.norm.gamma", "up2.norm.beta", "out.w", "out.b"}) {
    CAPTURE(expected);
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
  }
  // Convs feeding a norm carry no bias.
  CHECK(std::find(names.begin(), names.end(), "stem.conv.b") == names.end());
  CHECK(std::find(names.begin(), names.end(), "up0.conv.b") == names.end());
}

TEST_CASE("generator: every parameter receives gradient signal") {
  Generator g(mini_config());
  const Tensor desc = testutil::random_tensor({2, 8}, 9);
  const Tensor pose = testutil::random_tensor({2, 75}, 10, 0.0, 1.0);
  const Tensor y = g.forward(desc, pose);
  Tensor dy(y.shape());
  RngStream rng(11, "test/gen");
  testutil::fill_uniform(dy, rng);
  g.zero_grads();
  g.backward(dy);
  for (nn::ParamRef& p : g.params()) {
    CAPTURE(p.name);
    CHECK(p.grad->squared_norm() > 0.0);
  }
}

TEST_CASE("generator: analytic gradients match finite differences") {
  GeneratorConfig cfg = mini_config();
  cfg.num_res_blocks = 1;
  Generator g(cfg);
  Tensor desc = testutil::random_tensor({1, 8}, 12);
  Tensor pose = testutil::random_tensor({1, 75}, 13, 0.0, 1.0);
  const Tensor y0 = g.forward(desc, pose);
  const Tensor r = testutil::random_tensor(y0.shape(), 14);
  auto loss = [&]() {
    const Tensor y = g.forward(desc, pose);
    double s = 0.0;
    for (int64_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };
  g.zero_grads();
  (void)loss();
  g.backward(r);
  int checked = 0;
  for (nn::ParamRef& p : g.params()) {
    // One coordinate per tensor keeps this fast but covers every layer kind.
    const int64_t i = p.value->size() / 2;
    const double analytic = (*p.grad)[i];
    const double fd = testutil::central_diff((*p.value)[i], loss);
    const bool ok = std::abs(fd - analytic) < 1e-6 ||
                    testutil::rel_err(fd, analytic) < 1e-3;
    CHECK_MESSAGE(ok, p.name << "[" << i << "]: fd=" << fd
                             << " analytic=" << analytic);
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("generator: confidence channel can be excluded from conditioning") {
  GeneratorConfig cfg = mini_config();
  cfg.pose_include_confidence = false;
  Generator g(cfg);
  const Tensor desc = testutil::random_tensor({1, 8}, 15);
  Tensor pose = testutil::random_tensor({1, 75}, 16, 0.0, 1.0);
  const Tensor y = g.forward(desc, pose, false);
  Tensor jittered = pose;
  for (int j = 0; j < kNumJoints; ++j) jittered[j * 3 + 2] *= 0.5;
  CHECK(testutil::tensor_max_abs_diff(g.forward(desc, jittered, false), y) ==
        0.0);
  // With confidences included the output must react to them.
  Generator g2(mini_config());
  const Tensor y2 = g2.forward(desc, pose, false);
  CHECK(testutil::tensor_max_abs_diff(g2.forward(desc, jittered, false), y2) >
        0.0);
}
