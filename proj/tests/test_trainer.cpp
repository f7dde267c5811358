#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ptgan/error.hpp"
#include "ptgan/trainer.hpp"

using namespace ptgan;

namespace {

struct MiniSetup {
  GeneratorConfig gen;
  DiscriminatorConfig disc;
  TrainerConfig train;
  AugmentConfig aug;
  BackboneConfig backbone;
};

MiniSetup mini(int size = 16, int classes = 2) {
  MiniSetup s;
  s.gen.num_res_blocks = 1;
  s.gen.base_channels = 8;
  s.gen.latent_h = 4;
  s.gen.latent_w = 4;
  s.gen.latent_c = 8;
  s.gen.descriptor_dim = 8;
  s.gen.out_height = size;
  s.gen.out_width = size;
  s.gen.seed = 31;
  s.disc.trunk_channels = {8, 16};
  s.disc.num_classes = classes;
  s.disc.in_height = size;
  s.disc.in_width = size;
  s.disc.seed = 32;
  s.train.batch_size = 4;
  s.train.epochs = 1;
  s.train.seed = 33;
  s.aug.target_height = size;
  s.aug.target_width = size;
  s.aug.seed = 34;
  s.backbone.kind = "test";
  s.backbone.dim = 8;
  s.backbone.seed = 4242;
  return s;
}

Batch random_batch(int n, int size, int classes, uint64_t seed) {
  Batch b;
  b.source = testutil::random_tensor({n, 3, size, size}, seed);
  b.target = testutil::random_tensor({n, 3, size, size}, seed + 1);
  b.pose = testutil::random_tensor({n, 75}, seed + 2, 0.0, 1.0);
  for (int i = 0; i < n; ++i) b.labels.push_back(i % classes);
  return b;
}

double softplus_ref(double x) { return std::log1p(std::exp(-std::abs(x))) +
                                       std::max(x, 0.0); }

}  // namespace

TEST_CASE("trainer: learning rate decays by the configured factor per era") {
  const TrainerConfig cfg;  // 2e-4, factor 10, every 20 epochs
  CHECK(lr_schedule(0, cfg) == 2e-4);
  CHECK(lr_schedule(19, cfg) == 2e-4);
  CHECK(lr_schedule(20, cfg) == 2e-5);
  CHECK(lr_schedule(39, cfg) == 2e-5);
  CHECK(lr_schedule(40, cfg) == 2e-6);
  CHECK(lr_schedule(45, cfg) == 2e-6);

  TrainerConfig custom;
  custom.lr0 = 1e-3;
  custom.decay_factor = 2.0;
  custom.decay_every = 5;
  CHECK(lr_schedule(12, custom) == 2.5e-4);  // two halvings
  CHECK_THROWS_CODE(lr_schedule(-1, cfg), Errc::config_error);
}

TEST_CASE("trainer: configuration validation") {
  auto bad = [](auto mutate) {
    TrainerConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_NOTHROW(TrainerConfig{}.validate());
  CHECK_THROWS_CODE(bad([](TrainerConfig& c) { c.lr0 = 0.0; }).validate(),
                    Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](TrainerConfig& c) { c.decay_every = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](TrainerConfig& c) { c.batch_size = 0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](TrainerConfig& c) { c.lambda_rec = -1.0; }).validate(),
      Errc::config_error);
  CHECK_THROWS_CODE(bad([](TrainerConfig& c) { c.beta1 = 1.0; }).validate(),
                    Errc::config_error);
  CHECK_THROWS_CODE(
      bad([](TrainerConfig& c) { c.adv_form = "hinge"; }).validate(),
      Errc::config_error);
}

TEST_CASE("trainer: generator loss matches its closed form") {
  TrainerConfig cfg;  // lambda_rec = 10, non-saturating
  Tensor generated({1, 3, 2, 2});
  generated.fill(0.1);
  Tensor target({1, 3, 2, 2});
  Tensor realness({1});  // logit 0

  Tensor d_gen, d_real;
  const GenLossParts parts =
      generator_loss(generated, target, realness, cfg, &d_gen, &d_real);
  CHECK(parts.rec == doctest::Approx(10.0 * 0.01).epsilon(1e-12));
  CHECK(parts.adv == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(parts.total == parts.rec + parts.adv);
  // d rec/d generated = lambda * 2 * diff / count, count = 12 elements.
  for (int64_t i = 0; i < d_gen.size(); ++i)
    CHECK(d_gen[i] == doctest::Approx(10.0 * 2.0 * 0.1 / 12.0));
  // Non-saturating: d adv/d r = (sigmoid(r) - 1) / n = -0.5.
  CHECK(d_real[0] == doctest::Approx(-0.5));

  TrainerConfig heavy = cfg;
  heavy.lambda_rec = 20.0;
  CHECK(generator_loss(generated, target, realness, heavy).rec ==
        doctest::Approx(2.0 * parts.rec));

  // A confident discriminator zeroes the non-saturating term.
  Tensor confident({1});
  confident[0] = 50.0;
  CHECK(generator_loss(generated, target, confident, cfg).adv <= 1e-20);

  TrainerConfig sat = cfg;
  sat.adv_form = "saturating";
  Tensor d_real_sat;
  const GenLossParts sparts = generator_loss(generated, target, realness, sat,
                                             nullptr, &d_real_sat);
  CHECK(sparts.adv == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(d_real_sat[0] == doctest::Approx(-0.5));

  CHECK_THROWS_CODE(
      generator_loss(generated, Tensor({1, 3, 2, 3}), realness, cfg),
      Errc::dim_mismatch);
  CHECK_THROWS_CODE(generator_loss(generated, target, Tensor({2}), cfg),
                    Errc::dim_mismatch);
  CHECK_THROWS_CODE(
      generator_loss(Tensor({0, 3, 2, 2}), Tensor({0, 3, 2, 2}),
                     Tensor({0}), cfg),
      Errc::dim_mismatch);
}

TEST_CASE("trainer: discriminator loss matches its closed form") {
  DiscriminatorConfig dcfg;
  dcfg.num_classes = 3;
  DiscOutput real{Tensor({2}), Tensor({2, 3})};  // all logits zero
  DiscOutput fake{Tensor({2}), Tensor({2, 3})};
  const std::vector<int> labels{0, 1};

  Tensor d_rr, d_rc, d_fr, d_fc;
  const DiscLossParts parts = discriminator_loss(
      real, fake, labels, dcfg, &d_rr, &d_rc, &d_fr, &d_fc);
  const double ln2 = std::log(2.0), ln3 = std::log(3.0);
  CHECK(parts.bce_real == doctest::Approx(ln2).epsilon(1e-12));
  CHECK(parts.bce_fake == doctest::Approx(ln2).epsilon(1e-12));
  CHECK(parts.bce() == doctest::Approx(2 * ln2).epsilon(1e-12));
  CHECK(parts.cce == doctest::Approx(ln3).epsilon(1e-12));
  CHECK(parts.total ==
        doctest::Approx(2 * ln2 + ln3).epsilon(1e-12));
  // Gradients at zero logits: (sigmoid-1)/n for real, sigmoid/n for fake,
  // (softmax - onehot)/n for classes.
  CHECK(d_rr[0] == doctest::Approx(-0.25));
  CHECK(d_fr[0] == doctest::Approx(0.25));
  CHECK(d_rc.at2(0, 0) == doctest::Approx((1.0 / 3.0 - 1.0) / 2.0));
  CHECK(d_rc.at2(0, 1) == doctest::Approx((1.0 / 3.0) / 2.0));
  CHECK(d_fc.sum() == 0.0);  // fake classes unused by default

  DiscriminatorConfig both = dcfg;
  both.classify_fake = true;
  Tensor d_fc2;
  const DiscLossParts parts2 = discriminator_loss(
      real, fake, labels, both, nullptr, nullptr, nullptr, &d_fc2);
  CHECK(parts2.cce == doctest::Approx(2 * ln3).epsilon(1e-12));
  CHECK(d_fc2.at2(1, 1) == doctest::Approx((1.0 / 3.0 - 1.0) / 2.0));

  // A perfect discriminator scores ~0.
  DiscOutput sharp_real{Tensor({2}), Tensor({2, 3})};
  DiscOutput sharp_fake{Tensor({2}), Tensor({2, 3})};
  for (int i = 0; i < 2; ++i) {
    sharp_real.realness[i] = 50.0;
    sharp_fake.realness[i] = -50.0;
    sharp_real.class_logits.at2(i, labels[i]) = 50.0;
  }
  CHECK(discriminator_loss(sharp_real, sharp_fake, labels, dcfg).total <=
        1e-6);
  CHECK(softplus_ref(50.0) > 0.0);  // sanity on the local reference

  CHECK_THROWS_CODE(discriminator_loss(real, fake, {0, 5}, dcfg),
                    Errc::label_out_of_range);
  CHECK_THROWS_CODE(discriminator_loss(real, fake, {0}, dcfg),
                    Errc::dim_mismatch);
  DiscOutput fake1{Tensor({1}), Tensor({1, 3})};
  CHECK_NOTHROW(discriminator_loss(real, fake1, labels, dcfg));
  CHECK_THROWS_CODE(discriminator_loss(real, fake1, labels, both),
                    Errc::dim_mismatch);
}

TEST_CASE("trainer: batches stack samples into network tensors") {
  Sample s1, s2;
  s1.source = Image(2, 2);
  s1.source.fill(0.25, 0.25, 0.25);
  s1.target = Image(2, 2);
  s1.target.fill(0.75, 0.75, 0.75);
  s1.target_pose.values[0] = 0.5;
  s1.identity = 1;
  s2 = s1;
  s2.identity = 0;
  const Batch batch = make_batch({s1, s2});
  REQUIRE(batch.source.shape() == std::vector<int>{2, 3, 2, 2});
  REQUIRE(batch.pose.shape() == std::vector<int>{2, 75});
  CHECK(batch.source[0] == doctest::Approx(-0.5));  // 0.25 -> [-1,1]
  CHECK(batch.target[0] == doctest::Approx(0.5));
  CHECK(batch.pose.at2(0, 0) == 0.5);
  CHECK(batch.labels == std::vector<int>{1, 0});
  CHECK_THROWS_CODE(make_batch({}), Errc::dim_mismatch);
  Sample odd = s1;
  odd.source = Image(3, 2);
  CHECK_THROWS_CODE(make_batch({s1, odd}), Errc::dim_mismatch);
}

TEST_CASE("trainer: construction cross-checks module geometry") {
  const MiniSetup s = mini();
  CHECK_NOTHROW(Trainer(s.gen, s.disc, s.train, s.aug, s.backbone));
  MiniSetup bad_desc = s;
  bad_desc.gen.descriptor_dim = 9;
  CHECK_THROWS_CODE(Trainer(bad_desc.gen, bad_desc.disc, bad_desc.train,
                            bad_desc.aug, bad_desc.backbone),
                    Errc::config_error);
  MiniSetup bad_disc = s;
  bad_disc.disc.in_height = 32;
  bad_disc.disc.in_width = 32;
  CHECK_THROWS_CODE(Trainer(bad_disc.gen, bad_disc.disc, bad_disc.train,
                            bad_disc.aug, bad_disc.backbone),
                    Errc::config_error);
  MiniSetup bad_aug = s;
  bad_aug.aug.target_height = 32;
  CHECK_THROWS_CODE(Trainer(bad_aug.gen, bad_aug.disc, bad_aug.train,
                            bad_aug.aug, bad_aug.backbone),
                    Errc::config_error);
}

TEST_CASE("trainer: one step updates both players and logs history") {
  const MiniSetup s = mini();
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  const Batch batch = random_batch(4, 16, 2, 1);
  const StepLosses l1 = t.train_step(batch);
  CHECK(l1.lr == 2e-4);
  CHECK(std::isfinite(l1.d.total));
  CHECK(std::isfinite(l1.g.total));
  CHECK(l1.g.total == l1.g.rec + l1.g.adv);
  CHECK(t.step() == 1);
  REQUIRE(t.history().size() == 1);
  CHECK(t.history()[0].step == 1);
  CHECK(t.history()[0].lr == l1.lr);
  CHECK(t.history()[0].g_rec == l1.g.rec);
  const StepLosses l2 = t.train_step(batch);
  CHECK(t.step() == 2);
  // Same batch, updated weights: the losses must move.
  CHECK(l2.d.total != l1.d.total);

  Batch bad = batch;
  bad.pose = testutil::random_tensor({4, 74}, 9, 0.0, 1.0);
  CHECK_THROWS_CODE(t.train_step(bad), Errc::dim_mismatch);
  Batch nan_batch = batch;
  nan_batch.source[0] = std::nan("");
  CHECK_THROWS_AS(t.train_step(nan_batch), ptgan::Error);
}

TEST_CASE("trainer: saturating objective also trains") {
  MiniSetup s = mini();
  s.train.adv_form = "saturating";
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  const StepLosses l = t.train_step(random_batch(4, 16, 2, 21));
  CHECK(std::isfinite(l.g.adv));
  CHECK(l.g.adv <= 0.0);  // -softplus is never positive
}

TEST_CASE("trainer: identical runs give identical state checksums") {
  const MiniSetup s = mini();
  Trainer a(s.gen, s.disc, s.train, s.aug, s.backbone);
  Trainer b(s.gen, s.disc, s.train, s.aug, s.backbone);
  CHECK(a.state_checksum() == b.state_checksum());
  const Batch b1 = random_batch(4, 16, 2, 31);
  const Batch b2 = random_batch(4, 16, 2, 32);
  a.train_step(b1);
  a.train_step(b2);
  b.train_step(b1);
  b.train_step(b2);
  CHECK(a.state_checksum() == b.state_checksum());
  b.train_step(b1);
  CHECK(a.state_checksum() != b.state_checksum());
}

TEST_CASE("trainer: the discriminator improves against a frozen generator") {
  const MiniSetup s = mini();
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  std::vector<Tensor> snapshot;
  for (nn::ParamRef& p : t.generator().params()) snapshot.push_back(*p.value);
  const Batch batch = random_batch(4, 16, 2, 41);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    const StepLosses l = t.train_step(batch);
    if (i == 0) first = l.d.total;
    last = l.d.total;
    auto params = t.generator().params();
    for (size_t j = 0; j < params.size(); ++j) *params[j].value = snapshot[j];
  }
  CHECK(last < first);
}

TEST_CASE("trainer: fit writes per-epoch checkpoints and a history log") {
  testutil::TempDir dir("fit");
  SynthConfig scfg;
  scfg.num_identities = 2;
  scfg.images_per_identity = 2;
  scfg.height = 32;
  scfg.width = 32;
  scfg.seed = 3;
  const DatasetIndex index = load_manifest(make_synthetic_dataset(dir / "data",
                                                                  scfg));
  MiniSetup s = mini(32);
  s.train.epochs = 2;
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  t.fit(index, dir / "out");
  CHECK(t.epoch() == 2);
  CHECK(t.step() == 2);  // 4 pairs, batch 4 -> one step per epoch
  CHECK(std::filesystem::exists(dir / "out" / "ckpt_epoch_0001.ptgan"));
  CHECK(std::filesystem::exists(dir / "out" / "ckpt_epoch_0002.ptgan"));
  CHECK(std::filesystem::exists(dir / "out" / "ckpt_latest.ptgan"));

  std::ifstream csv(dir.path() / "out" / "history.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "epoch,step,lr,L_D_bce,L_D_cce,L_G_rec,L_G_adv");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 2);

  // An empty pair list is a configuration problem, not a silent no-op.
  testutil::TempDir dir2("fit_empty");
  SynthConfig lonely = scfg;
  lonely.num_identities = 1;
  lonely.images_per_identity = 2;
  const DatasetIndex single =
      load_manifest(make_synthetic_dataset(dir2 / "data", lonely));
  MiniSetup s2 = mini(32);
  s2.train.pair_min_pose_distance = 10.0;  // excludes everything
  Trainer t2(s2.gen, s2.disc, s2.train, s2.aug, s2.backbone);
  CHECK_THROWS_CODE(t2.fit(single, dir2 / "out"), Errc::config_error);
}

TEST_CASE("trainer: a resumed run is bit-identical to an uninterrupted one") {
  testutil::TempDir dir("resume");
  SynthConfig scfg;
  scfg.num_identities = 2;
  scfg.images_per_identity = 2;
  scfg.height = 32;
  scfg.width = 32;
  scfg.seed = 5;
  const DatasetIndex index = load_manifest(make_synthetic_dataset(dir / "data",
                                                                  scfg));
  MiniSetup s = mini(32);

  s.train.epochs = 3;
  Trainer full(s.gen, s.disc, s.train, s.aug, s.backbone);
  full.fit(index, dir / "full");
  const uint64_t target = full.state_checksum();

  s.train.epochs = 2;
  Trainer part(s.gen, s.disc, s.train, s.aug, s.backbone);
  part.fit(index, dir / "part");
  Trainer resumed = Trainer::load_checkpoint(dir / "part" /
                                             "ckpt_latest.ptgan");
  CHECK(resumed.state_checksum() == part.state_checksum());
  CHECK(resumed.epoch() == 2);
  resumed.set_epochs(3);
  resumed.fit(index, dir / "resumed");
  CHECK(resumed.epoch() == 3);
  CHECK(resumed.state_checksum() == target);
}

TEST_CASE("trainer: checkpoint files round-trip byte-identically") {
  testutil::TempDir dir("ckpt");
  const MiniSetup s = mini();
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  t.train_step(random_batch(4, 16, 2, 51));
  t.save_checkpoint(dir / "a.ptgan");
  Trainer loaded = Trainer::load_checkpoint(dir / "a.ptgan");
  loaded.save_checkpoint(dir / "b.ptgan");
  CHECK(testutil::read_file_bytes(dir / "a.ptgan") ==
        testutil::read_file_bytes(dir / "b.ptgan"));
  CHECK(loaded.state_checksum() == t.state_checksum());
  CHECK(loaded.step() == 1);
  // And the loaded trainer continues exactly like the original.
  const Batch next = random_batch(4, 16, 2, 52);
  t.train_step(next);
  loaded.train_step(next);
  CHECK(loaded.state_checksum() == t.state_checksum());
}

TEST_CASE("trainer: checkpoint loading rejects damaged or foreign files") {
  testutil::TempDir dir("ckpt_bad");
  CHECK_THROWS_CODE(Trainer::load_checkpoint(dir / "absent.ptgan"),
                    Errc::missing_file);
  Archive foreign;
  foreign.put("x", testutil::random_tensor({2}, 1));
  foreign.put_meta({{"kind", "something-else"}});
  foreign.save(dir / "foreign.ptgan");
  CHECK_THROWS_CODE(Trainer::load_checkpoint(dir / "foreign.ptgan"),
                    Errc::malformed_document);

  const MiniSetup s = mini();
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  t.save_checkpoint(dir / "good.ptgan");

  // Tamper with the recorded backbone checksum.
  Archive ar = Archive::load(dir / "good.ptgan");
  nlohmann::json meta = ar.meta();
  meta["backbone"]["weights_checksum"] =
      meta["backbone"]["weights_checksum"].get<uint64_t>() ^ 1u;
  ar.put_meta(meta);
  ar.save(dir / "tampered.ptgan");
  CHECK_THROWS_CODE(Trainer::load_checkpoint(dir / "tampered.ptgan"),
                    Errc::config_error);

  // Drop one parameter array.
  const Archive good = Archive::load(dir / "good.ptgan");
  Archive pruned;
  pruned.put_meta(good.meta());
  for (const std::string& name : good.names())
    if (name != "generator.merge.w") pruned.put(name, good.get(name));
  pruned.save(dir / "pruned.ptgan");
  CHECK_THROWS_CODE(Trainer::load_checkpoint(dir / "pruned.ptgan"),
                    Errc::malformed_document);
}

TEST_CASE("trainer: checkpoints rebuild a generator that synthesizes alike") {
  testutil::TempDir dir("bundle");
  const MiniSetup s = mini();
  Trainer t(s.gen, s.disc, s.train, s.aug, s.backbone);
  t.train_step(random_batch(4, 16, 2, 61));
  t.save_checkpoint(dir / "ck.ptgan");

  const Tensor desc = testutil::random_tensor({1, 8}, 62);
  const Tensor pose = testutil::random_tensor({1, 75}, 63, 0.0, 1.0);
  const Tensor want = generate(t.generator(), desc, pose);

  Generator g = generator_from_checkpoint(dir / "ck.ptgan");
  CHECK(testutil::tensor_max_abs_diff(generate(g, desc, pose), want) == 0.0);

  GeneratorBundle bundle = load_generator_bundle(dir / "ck.ptgan");
  CHECK(testutil::tensor_max_abs_diff(generate(bundle.generator, desc, pose),
                                      want) == 0.0);
  CHECK(bundle.backbone->dim() == 8);
  CHECK(bundle.checksum == Archive::load(dir / "ck.ptgan").checksum());
}

TEST_CASE("trainer: the ablation harness trains paired arms per seed") {
  testutil::TempDir dir("ablation");
  AblationOptions opts;
  opts.num_identities = 2;
  opts.images_per_identity = 4;
  opts.eval_per_identity = 1;
  opts.image_size = 32;
  opts.epochs = 1;
  opts.batch_size = 4;
  opts.num_seeds = 1;
  opts.data_seed = 7;
  opts.base_seed = 123;
  const AblationReport report = run_ablation(dir.path(), opts);
  REQUIRE(report.with_aug.seed_ssim.size() == 1);
  REQUIRE(report.without_aug.seed_ssim.size() == 1);
  CHECK(report.with_aug.median == report.with_aug.seed_ssim[0]);
  for (double v : {report.with_aug.median, report.without_aug.median}) {
    CHECK(v > -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(std::filesystem::exists(dir.path() / "data" / "manifest.tsv"));
  CHECK(std::filesystem::exists(dir.path() / "aug_seed0" /
                                "ckpt_latest.ptgan"));
  CHECK(std::filesystem::exists(dir.path() / "noaug_seed0" /
                                "ckpt_latest.ptgan"));

  AblationOptions bad = opts;
  bad.num_seeds = 0;
  CHECK_THROWS_CODE(run_ablation(dir.path(), bad), Errc::config_error);
  bad = opts;
  bad.eval_per_identity = 3;  // leaves only one training image
  CHECK_THROWS_CODE(run_ablation(dir.path(), bad), Errc::config_error);
  bad = opts;
  bad.occlusion_area = 1.5;
  CHECK_THROWS_CODE(run_ablation(dir.path(), bad), Errc::config_error);
}
