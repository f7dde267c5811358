// Release gate: one binary that exercises every promised property of the
// shipped pipeline end to end. Each check prints a single PASS/FAIL line
// (with elapsed wall time and, on failure, the reasons); the process exit
// code is the number of failed checks, so 0 means the build is releasable.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ptgan/augment.hpp"
#include "ptgan/backbone.hpp"
#include "ptgan/checkpoint.hpp"
#include "ptgan/dataset.hpp"
#include "ptgan/discriminator.hpp"
#include "ptgan/error.hpp"
#include "ptgan/generator.hpp"
#include "ptgan/image.hpp"
#include "ptgan/metrics.hpp"
#include "ptgan/pose.hpp"
#include "ptgan/rng.hpp"
#include "ptgan/tensor.hpp"
#include "ptgan/trainer.hpp"

using namespace ptgan;

namespace {

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

class Gate {
 public:
  // budget_seconds <= 0 means "no stated runtime bound".
  void run(int id, const std::string& label, double budget_seconds,
           const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(c);
    } catch (const ptgan::Error& e) {
      c.failures.push_back(std::string("unexpected error: ") + e.what());
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("unexpected exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (budget_seconds > 0.0 && elapsed > budget_seconds) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "exceeded %.0fs runtime budget",
                    budget_seconds);
      c.failures.push_back(buf);
    }
    const bool ok = c.failures.empty();
    std::printf("[%s] %02d %s (%.1fs)\n", ok ? "PASS" : "FAIL", id,
                label.c_str(), elapsed);
    for (const std::string& n : c.notes)
      std::printf("       %s\n", n.c_str());
    for (const std::string& f : c.failures)
      std::printf("       failure: %s\n", f.c_str());
    std::fflush(stdout);
    ++total_;
    if (!ok) ++failed_;
  }

  int failed() const { return failed_; }
  int total() const { return total_; }

 private:
  int total_ = 0;
  int failed_ = 0;
};

// ---------------------------------------------------------------------------
// Small local utilities (the gate binary is deliberately self-contained)
// ---------------------------------------------------------------------------

class TempDir {
 public:
  explicit TempDir(const std::string& hint) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ptgan_gate_" + hint + "_" + std::to_string(++counter));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void fill_uniform(Tensor& t, RngStream& rng, double lo = -1.0,
                  double hi = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

Image random_image(int h, int w, uint64_t seed) {
  RngStream rng(seed, "gate/image");
  Image img(h, w);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

double image_max_diff(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) return 1e9;
  double m = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

double grad_max_abs(const Tensor& g) {
  double m = 0.0;
  for (int64_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i]));
  return m;
}

double central_diff(double& theta, const std::function<double()>& loss) {
  const double orig = theta;
  const double h = 1e-5 * std::max(1.0, std::abs(orig));
  theta = orig + h;
  const double hi = loss();
  theta = orig - h;
  const double lo = loss();
  theta = orig;
  return (hi - lo) / (2.0 * h);
}

bool fd_agrees(double analytic, double fd) {
  const double abs_err = std::abs(analytic - fd);
  const double rel =
      abs_err / std::max({std::abs(analytic), std::abs(fd), 1e-12});
  return abs_err < 1e-6 || rel < 1e-3;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

AugmentConfig zero_strength(int target_h, int target_w) {
  AugmentConfig cfg;
  cfg.erase_prob = 0.0;
  cfg.crop_scale_range = {1.0, 1.0};
  cfg.jitter_strength = 0.0;
  cfg.jitter_hue_degrees = 0.0;
  cfg.flip_prob = 0.0;
  cfg.distortion_magnitude = 0.0;
  cfg.target_height = target_h;
  cfg.target_width = target_w;
  return cfg;
}

GeneratorConfig mini_gen(int size, int blocks, uint64_t seed) {
  GeneratorConfig g;
  g.num_res_blocks = blocks;
  g.base_channels = 8;
  g.latent_h = 4;
  g.latent_w = 4;
  g.latent_c = 8;
  g.descriptor_dim = 8;
  g.out_height = size;
  g.out_width = size;
  g.seed = seed;
  return g;
}

DiscriminatorConfig mini_disc(int size, int classes, uint64_t seed) {
  DiscriminatorConfig d;
  d.trunk_channels = {8, 16};
  d.num_classes = classes;
  d.in_height = size;
  d.in_width = size;
  d.seed = seed;
  return d;
}

AugmentConfig square_aug(int size, uint64_t seed) {
  AugmentConfig a;
  a.target_height = size;
  a.target_width = size;
  a.seed = seed;
  return a;
}

BackboneConfig test_backbone(uint64_t seed) {
  BackboneConfig b;
  b.kind = "test";
  b.dim = 8;
  b.seed = seed;
  return b;
}

DiscOutput split_rows(const DiscOutput& both, int begin, int n, int classes) {
  DiscOutput out{Tensor({n}), Tensor({n, classes})};
  for (int i = 0; i < n; ++i) {
    out.realness[i] = both.realness[begin + i];
    for (int j = 0; j < classes; ++j)
      out.class_logits.at2(i, j) = both.class_logits.at2(begin + i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

void check_scope_note(Check& c) {
  c.note("absolute similarity/diversity scores from full-scale training are "
         "not reproducible in this desk-scale build;");
  c.note("the property checks below (02-10) stand in for them.");
  c.expect(true, "");
}

void check_metric_oracles(Check& c) {
  // Self-similarity of 20 random images.
  for (uint64_t s = 0; s < 20; ++s) {
    const Image x = random_image(24, 24, 100 + s);
    const double v = ssim(x, x);
    c.expect(std::abs(v - 1.0) <= 1e-6,
             "ssim(x,x) = " + std::to_string(v) + " for seed " +
                 std::to_string(100 + s));
  }

  // Constant images have a closed form: variance terms vanish.
  Image cx(16, 16), cy(16, 16);
  cx.fill(0.5, 0.5, 0.5);
  cy.fill(0.25, 0.25, 0.25);
  const double c1 = 0.01 * 0.01;  // (k1 * dynamic_range)^2
  const double expected = (2.0 * 0.5 * 0.25 + c1) / (0.5 * 0.5 + 0.25 * 0.25 + c1);
  const double got = ssim(cx, cy);
  c.expect(std::abs(got - expected) <= 1e-4,
           "constant-image ssim " + std::to_string(got) + " vs closed form " +
               std::to_string(expected));

  // Identical class distributions carry zero information about the input:
  // the score must be exactly 1.
  Tensor same({12, 4});
  for (int i = 0; i < 12; ++i) {
    same.at2(i, 0) = 0.4;
    same.at2(i, 1) = 0.3;
    same.at2(i, 2) = 0.2;
    same.at2(i, 3) = 0.1;
  }
  const auto [m_same, s_same] = inception_score(same, 4);
  c.expect(m_same == 1.0, "identical-row score mean = " + std::to_string(m_same) +
                              " (must equal 1 exactly)");
  c.expect(s_same == 0.0, "identical-row score std = " + std::to_string(s_same));

  // One-hot rows uniformly covering C classes score C.
  Tensor onehot({70, 7});
  for (int i = 0; i < 70; ++i) onehot.at2(i, i % 7) = 1.0;
  const auto [m_hot, s_hot] = inception_score(onehot, 10);
  c.expect(std::abs(m_hot - 7.0) <= 1e-3,
           "one-hot C=7 score mean = " + std::to_string(m_hot));
  (void)s_hot;
}

void check_residual_identity(Check& c) {
  GeneratorConfig cfg;  // full-size defaults: 9 blocks at the latent grid
  Generator g(cfg);
  c.expect(g.num_blocks() == 9,
           "expected 9 residual blocks, got " + std::to_string(g.num_blocks()));

  RngStream rng(7, "gate/resblock");
  Tensor x({2, cfg.base_channels, cfg.latent_h, cfg.latent_w});
  fill_uniform(x, rng);

  for (int b = 0; b < g.num_blocks(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    std::vector<std::pair<Tensor*, Tensor>> saved;
    for (const nn::ParamRef& p : g.params()) {
      if (p.name.rfind(prefix, 0) == 0) {
        saved.emplace_back(p.value, *p.value);
        p.value->zero_();
      }
    }
    c.expect(!saved.empty(), "no parameters found for " + prefix);
    const Tensor y = g.res_block_forward(b, x);
    double max_err = 0.0;
    for (int64_t i = 0; i < x.size(); ++i)
      max_err = std::max(max_err, std::abs(y[i] - x[i]));
    c.expect(max_err <= 1e-6, "block " + std::to_string(b) +
                                  " with zeroed branch deviates from identity "
                                  "by " + std::to_string(max_err));
    for (auto& [ptr, copy] : saved) *ptr = copy;
  }
}

void check_gradients(Check& c) {
  const int size = 32, n = 2, classes = 3;
  Generator gen(mini_gen(size, 2, 11));
  Discriminator disc(mini_disc(size, classes, 12));
  TrainerConfig tcfg;
  const DiscriminatorConfig& dcfg = disc.config();

  RngStream rng(99, "gate/gradbatch");
  Tensor desc({n, 8});
  fill_uniform(desc, rng);
  Tensor pose({n, kPoseVectorDim});
  fill_uniform(pose, rng, 0.0, 1.0);
  Tensor target({n, 3, size, size});
  fill_uniform(target, rng);
  Tensor real({n, 3, size, size});
  fill_uniform(real, rng);
  const std::vector<int> labels{0, 2};

  // --- generator side: analytic gradients through the composite loss -----
  const Tensor fake = gen.forward(desc, pose, true);
  const DiscOutput fresh = disc.forward(fake, true);
  Tensor d_gen, d_adv;
  generator_loss(fake, target, fresh.realness, tcfg, &d_gen, &d_adv);
  disc.zero_grads();
  const Tensor d_fake_img = disc.backward(d_adv, Tensor({n, classes}));
  for (int64_t i = 0; i < d_gen.size(); ++i) d_gen[i] += d_fake_img[i];
  gen.zero_grads();
  gen.backward(d_gen);

  std::vector<std::pair<std::string, Tensor>> g_grads;
  for (const nn::ParamRef& p : gen.params()) {
    c.expect(grad_max_abs(*p.grad) > 0.0,
             "generator parameter " + p.name + " has all-zero gradient");
    g_grads.emplace_back(p.name, *p.grad);
  }

  // --- discriminator side: real+fake pass mirroring one training step ----
  const Tensor d_in = concat_batch(real, fake);
  const DiscOutput both = disc.forward(d_in, true);
  const DiscOutput real_out = split_rows(both, 0, n, classes);
  const DiscOutput fake_out = split_rows(both, n, n, classes);
  Tensor d_rr, d_rc, d_fr, d_fc;
  discriminator_loss(real_out, fake_out, labels, dcfg, &d_rr, &d_rc, &d_fr,
                     &d_fc);
  Tensor d_realness({2 * n}), d_class({2 * n, classes});
  for (int i = 0; i < n; ++i) {
    d_realness[i] = d_rr[i];
    d_realness[n + i] = d_fr[i];
    for (int j = 0; j < classes; ++j) {
      d_class.at2(i, j) = d_rc.at2(i, j);
      d_class.at2(n + i, j) = d_fc.at2(i, j);
    }
  }
  disc.zero_grads();
  disc.backward(d_realness, d_class);

  std::vector<std::pair<std::string, Tensor>> d_grads;
  for (const nn::ParamRef& p : disc.params()) {
    c.expect(grad_max_abs(*p.grad) > 0.0,
             "discriminator parameter " + p.name + " has all-zero gradient");
    d_grads.emplace_back(p.name, *p.grad);
  }

  // --- finite differences against the same scalar losses -----------------
  auto g_loss = [&]() {
    const Tensor f = gen.forward(desc, pose, false);
    const DiscOutput out = disc.forward(f, false);
    return generator_loss(f, target, out.realness, tcfg).total;
  };
  auto d_loss = [&]() {
    const DiscOutput b = disc.forward(d_in, false);
    return discriminator_loss(split_rows(b, 0, n, classes),
                              split_rows(b, n, n, classes), labels, dcfg)
        .total;
  };

  int sampled = 0;
  size_t gi = 0;
  for (const nn::ParamRef& p : gen.params()) {
    const int64_t coord = p.value->size() / 2;
    const double fd = central_diff((*p.value)[coord], g_loss);
    const double analytic = g_grads[gi++].second[coord];
    c.expect(fd_agrees(analytic, fd),
             "generator " + p.name + "[" + std::to_string(coord) +
                 "]: analytic " + std::to_string(analytic) + " vs fd " +
                 std::to_string(fd));
    ++sampled;
  }
  size_t di = 0;
  for (const nn::ParamRef& p : disc.params()) {
    const int64_t coord = p.value->size() / 2;
    const double fd = central_diff((*p.value)[coord], d_loss);
    const double analytic = d_grads[di++].second[coord];
    c.expect(fd_agrees(analytic, fd),
             "discriminator " + p.name + "[" + std::to_string(coord) +
                 "]: analytic " + std::to_string(analytic) + " vs fd " +
                 std::to_string(fd));
    ++sampled;
  }
  c.expect(sampled >= 20, "only sampled " + std::to_string(sampled) +
                              " parameters for finite differences");
  c.note("finite-difference agreement on " + std::to_string(sampled) +
         " sampled parameters");
}

void check_lr_schedule(Check& c) {
  TrainerConfig cfg;
  c.expect(lr_schedule(0, cfg) == 2e-4,
           "epoch 0 lr != 2e-4 exactly");
  c.expect(lr_schedule(20, cfg) == 2e-5,
           "epoch 20 lr != 2e-5 exactly");
  c.expect(lr_schedule(45, cfg) == 2e-6,
           "epoch 45 lr != 2e-6 exactly");
}

void check_overfit(Check& c) {
  TempDir dir("overfit");
  SynthConfig scfg;
  scfg.num_identities = 4;
  scfg.images_per_identity = 4;
  scfg.height = 32;
  scfg.width = 32;
  scfg.seed = 5;
  const auto manifest = make_synthetic_dataset(dir.path(), scfg);
  const DatasetIndex index = load_manifest(manifest);
  const std::vector<TrainingPair> pairs = build_pairs(index);
  c.expect(pairs.size() == 4u * 4u * 3u,
           "expected 48 training pairs, got " + std::to_string(pairs.size()));

  TrainerConfig tcfg;
  tcfg.batch_size = 8;
  tcfg.lr0 = 1e-3;       // constant while the epoch counter stays at 0
  tcfg.augment = false;  // memorization test: canonical sources only
  tcfg.seed = 17;
  Trainer trainer(mini_gen(32, 2, 21), mini_disc(32, 4, 22), tcfg,
                  square_aug(32, 23), test_backbone(24));

  // Preload every sample once (no augmentation -> deterministic).
  const Augmenter canonical(zero_strength(32, 32));
  std::vector<Sample> samples;
  samples.reserve(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i)
    samples.push_back(load_sample(index, pairs[i], canonical, i));

  auto train_mse = [&]() {
    double total = 0.0;
    for (const Sample& s : samples) {
      const Tensor src =
          image_to_net(s.source).reshaped({1, 3, 32, 32});
      const Tensor desc = trainer.backbone().extract(src);
      Tensor pose({1, kPoseVectorDim});
      for (int j = 0; j < kPoseVectorDim; ++j)
        pose.at2(0, j) = s.target_pose.values[j];
      const Tensor out = generate(trainer.generator(), desc, pose);
      const Tensor tgt = image_to_net(s.target);
      double se = 0.0;
      for (int64_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - tgt[i];
        se += d * d;
      }
      total += se / static_cast<double>(out.size());
    }
    return total / static_cast<double>(samples.size());
  };

  const int max_steps = 500;
  int steps = 0;
  double mse = train_mse();
  while (steps < max_steps) {
    std::vector<Sample> batch;
    for (int i = 0; i < tcfg.batch_size; ++i)
      batch.push_back(
          samples[(static_cast<size_t>(steps) * tcfg.batch_size + i) %
                  samples.size()]);
    trainer.train_step(make_batch(batch));
    ++steps;
    if (steps % 50 == 0) {
      mse = train_mse();
      if (mse < 0.04) break;  // already comfortably under the bar
    }
  }
  mse = train_mse();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "train-pair reconstruction MSE %.4f after %d steps "
                "(threshold 0.05)", mse, steps);
  c.note(buf);
  c.expect(mse < 0.05, buf);
  c.expect(steps <= max_steps, "step budget exceeded");
}

void check_augmentation(Check& c) {
  // Output contract: always target dims, channels in storage range.
  AugmentConfig cfg;
  cfg.seed = 5;
  const Augmenter aug(cfg);
  const std::vector<std::pair<int, int>> shapes{
      {31, 77}, {256, 256}, {400, 100}, {3, 500}};
  uint64_t idx = 0;
  for (const auto& [h, w] : shapes) {
    const Image in = random_image(h, w, 500 + idx);
    for (int k = 0; k < 10; ++k) {
      const Image out = aug(in, idx++);
      c.expect(out.height == 256 && out.width == 256,
               "augmented output is not 256x256");
      bool in_range = true;
      for (double v : out.pixels)
        if (!(v >= 0.0 && v <= 1.0)) in_range = false;
      c.expect(in_range, "augmented output leaves [0,1]");
    }
  }

  // Mirroring twice restores the image bit-exactly, odd or even width.
  for (int w : {63, 64}) {
    const Image img = random_image(17, w, 900 + w);
    const Image twice = flip_columns(flip_columns(img));
    c.expect(img.pixels == twice.pixels && img.width == twice.width,
             "double mirror is not bit-exact at width " + std::to_string(w));
  }

  // All strengths zero: the pipeline is exactly the canonical resize.
  const Augmenter none(zero_strength(256, 256));
  for (uint64_t i = 0; i < 3; ++i) {
    const Image in = random_image(90, 50, 700 + i);
    const double diff = image_max_diff(none(in, i), resize_and_pad(in));
    c.expect(diff <= 1e-6,
             "zero-strength pipeline deviates from canonical resize by " +
                 std::to_string(diff));
  }

  // Same (seed, sample index) -> same output; replay is exact.
  const Augmenter again(cfg);
  const Image probe = random_image(120, 80, 1234);
  bool any_index_differs = false;
  for (uint64_t i = 0; i < 30; ++i) {
    const Image a = aug(probe, i);
    const Image b = again(probe, i);
    c.expect(a.pixels == b.pixels,
             "replay differs at sample index " + std::to_string(i));
    if (i > 0 && a.pixels != aug(probe, 0).pixels) any_index_differs = true;
  }
  c.expect(any_index_differs, "all sample indices produced identical output");
  AugmentConfig other = cfg;
  other.seed = 6;
  const Augmenter reseeded(other);
  c.expect(reseeded(probe, 0).pixels != aug(probe, 0).pixels,
           "different seeds produced identical output");
}

void check_ablation(Check& c) {
  TempDir dir("ablation");
  const AblationReport report = run_ablation(dir.path(), AblationOptions{});
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "median held-out occluded SSIM: with augmentation %.4f, "
                "without %.4f (3 seeds)",
                report.with_aug.median, report.without_aug.median);
  c.note(buf);
  c.note("direction-only check: the size of the full-scale improvement is "
         "not expected to transfer to desk scale");
  c.expect(report.with_aug.median >= report.without_aug.median, buf);
  c.expect(report.with_aug.seed_ssim.size() == 3 &&
               report.without_aug.seed_ssim.size() == 3,
           "expected 3 seeds per arm");
}

void check_pair_enumeration(Check& c) {
  TempDir dir("pairs");
  std::filesystem::create_directories(dir.path() / "kp");

  // Three identities with 2, 3 and 4 images, interleaved in the manifest so
  // the deterministic output order cannot come from input order alone.
  const std::vector<std::pair<int, int>> plan{
      {11, 0}, {4, 0}, {7, 0}, {4, 1}, {7, 1}, {11, 1},
      {4, 2},  {7, 2}, {7, 3}};
  std::string manifest_text;
  int entry_idx = 0;
  for (const auto& [raw_id, img_no] : plan) {
    const std::string stem =
        "id" + std::to_string(raw_id) + "_" + std::to_string(img_no);
    Image img(4, 4);
    img.fill(0.2, 0.4, 0.6);
    save_png(img, dir.path() / (stem + ".png"));
    PoseKeypoints kp;
    kp.height = 64;
    kp.width = 64;
    for (int j = 0; j < kNumJoints; ++j)
      kp.joints[j] = {1.0 + j + entry_idx, 2.0 + j, 1.0};
    std::ofstream(dir.path() / "kp" / (stem + ".json"))
        << serialize_keypoints(kp);
    manifest_text += stem + ".png\t" + std::to_string(raw_id) + "\tkp/" +
                     stem + ".json\n";
    ++entry_idx;
  }
  std::ofstream(dir.path() / "manifest.tsv") << manifest_text;

  const DatasetIndex index = load_manifest(dir.path() / "manifest.tsv");
  c.expect(index.num_identities == 3, "expected 3 identities");

  // Independent oracle: exhaustive double loop plus an explicit sort on the
  // documented (identity, source path, target path) key.
  std::vector<TrainingPair> expected;
  const int n = static_cast<int>(index.entries.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const IndexEntry& ea = index.entries[static_cast<size_t>(a)];
      const IndexEntry& eb = index.entries[static_cast<size_t>(b)];
      if (ea.identity != eb.identity) continue;
      if (shared_visible_joints(ea.pose, eb.pose) == 0) continue;
      if (!(pose_distance(ea.pose, eb.pose) > 0.0)) continue;
      expected.push_back({a, b});
    }
  std::sort(expected.begin(), expected.end(),
            [&](const TrainingPair& x, const TrainingPair& y) {
              const IndexEntry& xs = index.entries[static_cast<size_t>(x.source)];
              const IndexEntry& ys = index.entries[static_cast<size_t>(y.source)];
              const IndexEntry& xt = index.entries[static_cast<size_t>(x.target)];
              const IndexEntry& yt = index.entries[static_cast<size_t>(y.target)];
              return std::tie(xs.identity, xs.image_path, xt.image_path) <
                     std::tie(ys.identity, ys.image_path, yt.image_path);
            });

  const std::vector<TrainingPair> got = build_pairs(index);
  c.expect(got.size() == 20u, "expected 2*1 + 3*2 + 4*3 = 20 pairs, got " +
                                  std::to_string(got.size()));
  c.expect(got.size() == expected.size(),
           "pair count differs from exhaustive enumeration");
  for (size_t i = 0; i < std::min(got.size(), expected.size()); ++i)
    c.expect(got[i].source == expected[i].source &&
                 got[i].target == expected[i].target,
             "pair " + std::to_string(i) + " differs from enumeration");

  // Per-identity directed-pair counts are k(k-1).
  std::vector<int> members(3, 0), pair_count(3, 0);
  for (const IndexEntry& e : index.entries) ++members[static_cast<size_t>(e.identity)];
  for (const TrainingPair& p : got)
    ++pair_count[static_cast<size_t>(
        index.entries[static_cast<size_t>(p.source)].identity)];
  for (int id = 0; id < 3; ++id) {
    const int k = members[static_cast<size_t>(id)];
    c.expect(pair_count[static_cast<size_t>(id)] == k * (k - 1),
             "identity " + std::to_string(id) + " has " +
                 std::to_string(pair_count[static_cast<size_t>(id)]) +
                 " pairs, expected k(k-1) = " + std::to_string(k * (k - 1)));
  }
}

void check_persistence(Check& c) {
  TempDir dir("persist");

  // Part 1: save -> load -> save reproduces the checkpoint byte for byte.
  {
    TrainerConfig tcfg;
    tcfg.batch_size = 2;
    Trainer t(mini_gen(16, 1, 41), mini_disc(16, 2, 42), tcfg,
              square_aug(16, 43), test_backbone(44));
    RngStream rng(1, "gate/persist");
    for (int s = 0; s < 2; ++s) {
      Batch b;
      b.source = Tensor({2, 3, 16, 16});
      b.target = Tensor({2, 3, 16, 16});
      b.pose = Tensor({2, kPoseVectorDim});
      fill_uniform(b.source, rng);
      fill_uniform(b.target, rng);
      fill_uniform(b.pose, rng, 0.0, 1.0);
      b.labels = {0, 1};
      t.train_step(b);
    }
    const auto ck_a = dir.path() / "a.ptgan";
    const auto ck_b = dir.path() / "b.ptgan";
    t.save_checkpoint(ck_a);
    Trainer reloaded = Trainer::load_checkpoint(ck_a);
    reloaded.save_checkpoint(ck_b);
    c.expect(read_bytes(ck_a) == read_bytes(ck_b),
             "save -> load -> save is not byte-identical");
    c.expect(reloaded.state_checksum() == t.state_checksum(),
             "reloaded state checksum differs");
  }

  // Part 2: a run interrupted at epoch 2 of 3 and resumed matches the
  // uninterrupted run's full state checksum at the same step.
  {
    SynthConfig scfg;
    scfg.num_identities = 2;
    scfg.images_per_identity = 2;
    scfg.height = 32;
    scfg.width = 32;
    scfg.seed = 9;
    const DatasetIndex index =
        load_manifest(make_synthetic_dataset(dir.path() / "data", scfg));

    auto make_trainer = [&](int epochs) {
      TrainerConfig tcfg;
      tcfg.batch_size = 4;
      tcfg.epochs = epochs;
      tcfg.seed = 55;
      return Trainer(mini_gen(32, 1, 51), mini_disc(32, 2, 52), tcfg,
                     square_aug(32, 53), test_backbone(54));
    };

    Trainer full = make_trainer(3);
    full.fit(index, dir.path() / "full");

    Trainer part = make_trainer(2);
    part.fit(index, dir.path() / "part");
    Trainer resumed =
        Trainer::load_checkpoint(dir.path() / "part" / "ckpt_latest.ptgan");
    resumed.set_epochs(3);
    resumed.fit(index, dir.path() / "part");

    c.expect(resumed.epoch() == full.epoch() && resumed.step() == full.step(),
             "resumed run ended at a different epoch/step");
    c.expect(resumed.state_checksum() == full.state_checksum(),
             "resumed state checksum differs from the uninterrupted run");
  }
}

}  // namespace

int main() {
  std::printf("release gate: pose-guided person image synthesis\n");
  Gate gate;
  gate.run(1, "desk-scale scope: full-scale benchmark scores out of reach", 0.0,
           check_scope_note);
  gate.run(2, "similarity/diversity metric oracles", 10.0, check_metric_oracles);
  gate.run(3, "residual blocks reduce to identity when their branch is zeroed",
           30.0, check_residual_identity);
  gate.run(4, "gradient flow and finite-difference agreement", 120.0,
           check_gradients);
  gate.run(5, "learning-rate decade schedule is exact", 0.0, check_lr_schedule);
  gate.run(6, "miniature run memorizes its training pairs", 600.0,
           check_overfit);
  gate.run(7, "augmentation pipeline invariants", 30.0, check_augmentation);
  gate.run(8, "augmentation helps occluded held-out poses (direction only)",
           3600.0, check_ablation);
  gate.run(9, "pair construction matches exhaustive enumeration", 0.0,
           check_pair_enumeration);
  gate.run(10, "checkpoint byte stability and bit-exact resume", 0.0,
           check_persistence);
  std::printf("%d/%d checks passed\n", gate.total() - gate.failed(),
              gate.total());
  return gate.failed();
}
