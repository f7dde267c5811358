#include "ptgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <utility>

#include "ptgan/error.hpp"
#include "ptgan/metrics.hpp"

namespace ptgan {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Numerically stable log(1 + e^z).
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

/// Stable cross-entropy for one logits row; accumulates the scaled
/// (softmax - onehot) gradient when dlogits is non-null.
double row_cross_entropy(const Tensor& logits, int row, int label,
                         Tensor* dlogits, double grad_scale) {
  const int classes = logits.dim(1);
  double mx = logits.at2(row, 0);
  for (int j = 1; j < classes; ++j) mx = std::max(mx, logits.at2(row, j));
  double sum_exp = 0.0;
  for (int j = 0; j < classes; ++j) sum_exp += std::exp(logits.at2(row, j) - mx);
  const double log_z = mx + std::log(sum_exp);
  if (dlogits) {
    for (int j = 0; j < classes; ++j) {
      const double p = std::exp(logits.at2(row, j) - log_z);
      dlogits->at2(row, j) += (p - (j == label ? 1.0 : 0.0)) * grad_scale;
    }
  }
  return log_z - logits.at2(row, label);
}

}  // namespace

void TrainerConfig::validate() const {
  require(lr0 > 0.0, Errc::config_error, "trainer.lr0 must be positive");
  require(decay_factor > 0.0, Errc::config_error,
          "trainer.decay_factor must be positive");
  require(decay_every >= 1, Errc::config_error,
          "trainer.decay_every must be at least 1");
  require(batch_size >= 1, Errc::config_error,
          "trainer.batch_size must be at least 1");
  require(lambda_rec >= 0.0, Errc::config_error,
          "trainer.lambda_rec must be non-negative");
  require(epochs >= 0, Errc::config_error,
          "trainer.epochs must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0, Errc::config_error,
          "trainer.beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, Errc::config_error,
          "trainer.beta2 must lie in [0, 1)");
  require(adv_form == "non_saturating" || adv_form == "saturating",
          Errc::config_error,
          "trainer.adv_form must be non_saturating or saturating, got " +
              adv_form);
  require(pair_min_pose_distance >= 0.0, Errc::config_error,
          "trainer.pair_min_pose_distance must be non-negative");
}

double lr_schedule(int epoch, const TrainerConfig& cfg) {
  require(epoch >= 0, Errc::config_error, "epoch must be non-negative");
  const int decades = epoch / cfg.decay_every;
  return cfg.lr0 / std::pow(cfg.decay_factor, static_cast<double>(decades));
}

GenLossParts generator_loss(const Tensor& generated, const Tensor& target,
                            const Tensor& fake_realness,
                            const TrainerConfig& cfg, Tensor* d_generated,
                            Tensor* d_realness) {
  require(generated.same_shape(target), Errc::dim_mismatch,
          "generated and target batches must share shape");
  require(generated.size() > 0, Errc::dim_mismatch, "empty generated batch");
  require(fake_realness.ndim() == 1 &&
              fake_realness.dim(0) == generated.dim(0),
          Errc::dim_mismatch, "one realness logit per generated image");

  GenLossParts parts;
  const int64_t count = generated.size();
  const double inv_count = 1.0 / static_cast<double>(count);
  if (d_generated) *d_generated = Tensor::zeros(generated.shape());
  double sq = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    const double diff = generated[i] - target[i];
    sq += diff * diff;
    if (d_generated)
      (*d_generated)[i] = cfg.lambda_rec * 2.0 * diff * inv_count;
  }
  parts.rec = cfg.lambda_rec * sq * inv_count;

  const int n = fake_realness.dim(0);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (d_realness) *d_realness = Tensor::zeros(fake_realness.shape());
  const bool saturating = cfg.adv_form == "saturating";
  double adv = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = fake_realness[i];
    if (saturating) {
      // log(1 - sigmoid(r)) = -softplus(r)
      adv += -softplus(r);
      if (d_realness) (*d_realness)[i] = -sigmoid(r) * inv_n;
    } else {
      // -log sigmoid(r) = softplus(-r)
      adv += softplus(-r);
      if (d_realness) (*d_realness)[i] = (sigmoid(r) - 1.0) * inv_n;
    }
  }
  parts.adv = adv * inv_n;
  parts.total = parts.rec + parts.adv;
  return parts;
}

DiscLossParts discriminator_loss(const DiscOutput& real, const DiscOutput& fake,
                                 const std::vector<int>& labels,
                                 const DiscriminatorConfig& cfg,
                                 Tensor* d_real_realness, Tensor* d_real_class,
                                 Tensor* d_fake_realness,
                                 Tensor* d_fake_class) {
  const int n_real = real.realness.dim(0);
  const int n_fake = fake.realness.dim(0);
  require(n_real >= 1 && n_fake >= 1, Errc::dim_mismatch,
          "discriminator loss needs at least one real and one fake image");
  require(real.class_logits.ndim() == 2 &&
              real.class_logits.dim(0) == n_real &&
              real.class_logits.dim(1) == cfg.num_classes,
          Errc::dim_mismatch, "real class logits must be (n, num_classes)");
  require(fake.class_logits.ndim() == 2 &&
              fake.class_logits.dim(0) == n_fake &&
              fake.class_logits.dim(1) == cfg.num_classes,
          Errc::dim_mismatch, "fake class logits must be (n, num_classes)");
  require(static_cast<int>(labels.size()) == n_real, Errc::dim_mismatch,
          "one identity label per real image");
  if (cfg.classify_fake)
    require(n_fake == n_real, Errc::dim_mismatch,
            "classify_fake pairs each generated image with a source label");
  for (size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < cfg.num_classes,
            Errc::label_out_of_range,
            "label " + std::to_string(labels[i]) + " at row " +
                std::to_string(i) + " outside [0, " +
                std::to_string(cfg.num_classes) + ")");

  if (d_real_realness) *d_real_realness = Tensor::zeros(real.realness.shape());
  if (d_real_class) *d_real_class = Tensor::zeros(real.class_logits.shape());
  if (d_fake_realness) *d_fake_realness = Tensor::zeros(fake.realness.shape());
  if (d_fake_class) *d_fake_class = Tensor::zeros(fake.class_logits.shape());

  DiscLossParts parts;
  const double inv_real = 1.0 / static_cast<double>(n_real);
  const double inv_fake = 1.0 / static_cast<double>(n_fake);
  for (int i = 0; i < n_real; ++i) {
    const double r = real.realness[i];
    parts.bce_real += softplus(-r) * inv_real;  // -log sigmoid(r)
    if (d_real_realness) (*d_real_realness)[i] = (sigmoid(r) - 1.0) * inv_real;
  }
  for (int i = 0; i < n_fake; ++i) {
    const double f = fake.realness[i];
    parts.bce_fake += softplus(f) * inv_fake;  // -log(1 - sigmoid(f))
    if (d_fake_realness) (*d_fake_realness)[i] = sigmoid(f) * inv_fake;
  }
  for (int i = 0; i < n_real; ++i)
    parts.cce += row_cross_entropy(real.class_logits, i, labels[i],
                                   d_real_class, inv_real) *
                 inv_real;
  if (cfg.classify_fake) {
    for (int i = 0; i < n_fake; ++i)
      parts.cce += row_cross_entropy(fake.class_logits, i, labels[i],
                                     d_fake_class, inv_fake) *
                   inv_fake;
  }
  parts.total = parts.bce_real + parts.bce_fake + parts.cce;
  return parts;
}

Batch make_batch(const std::vector<Sample>& samples) {
  require(!samples.empty(), Errc::dim_mismatch, "empty sample batch");
  const int n = static_cast<int>(samples.size());
  std::vector<Image> sources, targets;
  sources.reserve(samples.size());
  targets.reserve(samples.size());
  Batch batch;
  batch.pose = Tensor({n, kPoseVectorDim});
  batch.labels.reserve(samples.size());
  for (int i = 0; i < n; ++i) {
    sources.push_back(samples[i].source);
    targets.push_back(samples[i].target);
    for (int j = 0; j < kPoseVectorDim; ++j)
      batch.pose.at2(i, j) = samples[i].target_pose.values[j];
    batch.labels.push_back(samples[i].identity);
  }
  batch.source = images_to_net(sources);
  batch.target = images_to_net(targets);
  return batch;
}

// ---------------------------------------------------------------------------
// Config JSON round-trips
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TrainerConfig& c) {
  j = {{"beta1", c.beta1},
       {"beta2", c.beta2},
       {"lr0", c.lr0},
       {"decay_factor", c.decay_factor},
       {"decay_every", c.decay_every},
       {"batch_size", c.batch_size},
       {"lambda_rec", c.lambda_rec},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"augment", c.augment},
       {"adv_form", c.adv_form},
       {"pair_min_pose_distance", c.pair_min_pose_distance}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("lr0").get_to(c.lr0);
  j.at("decay_factor").get_to(c.decay_factor);
  j.at("decay_every").get_to(c.decay_every);
  j.at("batch_size").get_to(c.batch_size);
  j.at("lambda_rec").get_to(c.lambda_rec);
  j.at("epochs").get_to(c.epochs);
  j.at("seed").get_to(c.seed);
  j.at("augment").get_to(c.augment);
  j.at("adv_form").get_to(c.adv_form);
  j.at("pair_min_pose_distance").get_to(c.pair_min_pose_distance);
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"num_res_blocks", c.num_res_blocks},
       {"base_channels", c.base_channels},
       {"latent_h", c.latent_h},
       {"latent_w", c.latent_w},
       {"latent_c", c.latent_c},
       {"descriptor_dim", c.descriptor_dim},
       {"out_height", c.out_height},
       {"out_width", c.out_width},
       {"norm_kind", c.norm_kind},
       {"output_activation", c.output_activation},
       {"pose_include_confidence", c.pose_include_confidence},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  j.at("num_res_blocks").get_to(c.num_res_blocks);
  j.at("base_channels").get_to(c.base_channels);
  j.at("latent_h").get_to(c.latent_h);
  j.at("latent_w").get_to(c.latent_w);
  j.at("latent_c").get_to(c.latent_c);
  j.at("descriptor_dim").get_to(c.descriptor_dim);
  j.at("out_height").get_to(c.out_height);
  j.at("out_width").get_to(c.out_width);
  j.at("norm_kind").get_to(c.norm_kind);
  j.at("output_activation").get_to(c.output_activation);
  j.at("pose_include_confidence").get_to(c.pose_include_confidence);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"trunk_channels", c.trunk_channels},
       {"num_classes", c.num_classes},
       {"in_height", c.in_height},
       {"in_width", c.in_width},
       {"leaky_slope", c.leaky_slope},
       {"classify_fake", c.classify_fake},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  j.at("trunk_channels").get_to(c.trunk_channels);
  j.at("num_classes").get_to(c.num_classes);
  j.at("in_height").get_to(c.in_height);
  j.at("in_width").get_to(c.in_width);
  j.at("leaky_slope").get_to(c.leaky_slope);
  j.at("classify_fake").get_to(c.classify_fake);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"kind", c.kind},
       {"weights_path", c.weights_path},
       {"dim", c.dim},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  j.at("kind").get_to(c.kind);
  j.at("weights_path").get_to(c.weights_path);
  j.at("dim").get_to(c.dim);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"erase_prob", c.erase_prob},
       {"erase_area_range", c.erase_area_range},
       {"crop_scale_range", c.crop_scale_range},
       {"jitter_strength", c.jitter_strength},
       {"jitter_hue_degrees", c.jitter_hue_degrees},
       {"flip_prob", c.flip_prob},
       {"distortion_grid", c.distortion_grid},
       {"distortion_magnitude", c.distortion_magnitude},
       {"seed", c.seed},
       {"erase_per_pixel_noise", c.erase_per_pixel_noise},
       {"target_height", c.target_height},
       {"target_width", c.target_width},
       {"order", c.order}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  j.at("erase_prob").get_to(c.erase_prob);
  j.at("erase_area_range").get_to(c.erase_area_range);
  j.at("crop_scale_range").get_to(c.crop_scale_range);
  j.at("jitter_strength").get_to(c.jitter_strength);
  j.at("jitter_hue_degrees").get_to(c.jitter_hue_degrees);
  j.at("flip_prob").get_to(c.flip_prob);
  j.at("distortion_grid").get_to(c.distortion_grid);
  j.at("distortion_magnitude").get_to(c.distortion_magnitude);
  j.at("seed").get_to(c.seed);
  j.at("erase_per_pixel_noise").get_to(c.erase_per_pixel_noise);
  j.at("target_height").get_to(c.target_height);
  j.at("target_width").get_to(c.target_width);
  j.at("order").get_to(c.order);
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const GeneratorConfig& gen_cfg,
                 const DiscriminatorConfig& disc_cfg,
                 const TrainerConfig& trainer_cfg, const AugmentConfig& aug_cfg,
                 const BackboneConfig& backbone_cfg)
    : cfg_(trainer_cfg),
      aug_cfg_(aug_cfg),
      bb_cfg_(backbone_cfg),
      backbone_(make_backbone(backbone_cfg)),
      generator_(gen_cfg),
      discriminator_(disc_cfg),
      g_opt_(trainer_cfg.beta1, trainer_cfg.beta2),
      d_opt_(trainer_cfg.beta1, trainer_cfg.beta2) {
  cfg_.validate();
  aug_cfg_.validate();
  require(gen_cfg.descriptor_dim == backbone_->dim(), Errc::config_error,
          "generator.descriptor_dim (" +
              std::to_string(gen_cfg.descriptor_dim) +
              ") must match the backbone descriptor width (" +
              std::to_string(backbone_->dim()) + ")");
  require(disc_cfg.in_height == gen_cfg.out_height &&
              disc_cfg.in_width == gen_cfg.out_width,
          Errc::config_error,
          "discriminator input dims must match generator output dims");
  require(aug_cfg_.target_height == gen_cfg.out_height &&
              aug_cfg_.target_width == gen_cfg.out_width,
          Errc::config_error,
          "augment target dims must match generator output dims");
}

StepLosses Trainer::train_step(const Batch& batch) {
  const auto& gcfg = generator_.config();
  require(batch.source.ndim() == 4 && batch.source.dim(0) >= 1 &&
              batch.source.dim(1) == 3 &&
              batch.source.dim(2) == gcfg.out_height &&
              batch.source.dim(3) == gcfg.out_width,
          Errc::dim_mismatch, "batch source must be (n, 3, out_h, out_w)");
  require(batch.target.same_shape(batch.source), Errc::dim_mismatch,
          "batch target dims must match batch source dims");
  const int n = batch.source.dim(0);
  require(batch.pose.ndim() == 2 && batch.pose.dim(0) == n &&
              batch.pose.dim(1) == kPoseVectorDim,
          Errc::dim_mismatch, "batch pose must be (n, 75)");
  require(static_cast<int>(batch.labels.size()) == n, Errc::dim_mismatch,
          "one identity label per batch row");

  const double lr = lr_schedule(epoch_, cfg_);
  const int classes = discriminator_.config().num_classes;

  const Tensor desc = backbone_->extract(batch.source);
  const Tensor fake = generator_.forward(desc, batch.pose, true);

  // Discriminator update: real and fake share one forward pass so the
  // layer caches stay consistent for the single backward.
  const Tensor d_in = concat_batch(batch.target, fake);
  const DiscOutput both = discriminator_.forward(d_in, true);
  DiscOutput real{Tensor({n}), Tensor({n, classes})};
  DiscOutput faked{Tensor({n}), Tensor({n, classes})};
  for (int i = 0; i < n; ++i) {
    real.realness[i] = both.realness[i];
    faked.realness[i] = both.realness[n + i];
    for (int j = 0; j < classes; ++j) {
      real.class_logits.at2(i, j) = both.class_logits.at2(i, j);
      faked.class_logits.at2(i, j) = both.class_logits.at2(n + i, j);
    }
  }
  Tensor d_rr, d_rc, d_fr, d_fc;
  const DiscLossParts dl =
      discriminator_loss(real, faked, batch.labels, discriminator_.config(),
                         &d_rr, &d_rc, &d_fr, &d_fc);
  require(std::isfinite(dl.total), Errc::non_finite_loss,
          "discriminator loss (bce_real=" + std::to_string(dl.bce_real) +
              ", bce_fake=" + std::to_string(dl.bce_fake) +
              ", cce=" + std::to_string(dl.cce) + ")");
  Tensor d_realness({2 * n});
  Tensor d_class({2 * n, classes});
  for (int i = 0; i < n; ++i) {
    d_realness[i] = d_rr[i];
    d_realness[n + i] = d_fr[i];
    for (int j = 0; j < classes; ++j) {
      d_class.at2(i, j) = d_rc.at2(i, j);
      d_class.at2(n + i, j) = d_fc.at2(i, j);
    }
  }
  discriminator_.zero_grads();
  discriminator_.backward(d_realness, d_class);
  d_opt_.step(lr, discriminator_.params());

  // Generator update, scored against the just-updated discriminator.
  const DiscOutput fresh = discriminator_.forward(fake, true);
  Tensor d_gen, d_adv_realness;
  const GenLossParts gl = generator_loss(fake, batch.target, fresh.realness,
                                         cfg_, &d_gen, &d_adv_realness);
  require(std::isfinite(gl.total), Errc::non_finite_loss,
          "generator loss (rec=" + std::to_string(gl.rec) +
              ", adv=" + std::to_string(gl.adv) + ")");
  // The adversarial path flows through the discriminator to the image;
  // discriminator grads from this pass are discarded, not applied.
  discriminator_.zero_grads();
  const Tensor d_fake_img =
      discriminator_.backward(d_adv_realness, Tensor({n, classes}));
  for (int64_t i = 0; i < d_gen.size(); ++i) d_gen[i] += d_fake_img[i];
  generator_.zero_grads();
  generator_.backward(d_gen);
  g_opt_.step(lr, generator_.params());
  discriminator_.zero_grads();

  ++step_;
  history_.push_back(
      {epoch_, step_, lr, dl.bce(), dl.cce, gl.rec, gl.adv});
  return {lr, dl, gl};
}

void Trainer::fit(const DatasetIndex& index,
                  const std::filesystem::path& out_dir) {
  const std::vector<TrainingPair> pairs =
      build_pairs(index, cfg_.pair_min_pose_distance);
  require(!pairs.empty(), Errc::config_error,
          "no training pairs (need >= 2 images per identity with distinct "
          "poses above trainer.pair_min_pose_distance)");

  AugmentConfig acfg = aug_cfg_;
  if (!cfg_.augment) acfg.order.clear();
  const Augmenter augmenter(acfg);

  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "history.csv";
  const bool fresh_csv = !std::filesystem::exists(csv_path);
  std::ofstream csv(csv_path, std::ios::app);
  require(csv.good(), Errc::missing_file,
          "cannot open " + csv_path.string() + " for writing");
  if (fresh_csv) csv << "epoch,step,lr,L_D_bce,L_D_cce,L_G_rec,L_G_adv\n";

  const int64_t num_pairs = static_cast<int64_t>(pairs.size());
  while (epoch_ < cfg_.epochs) {
    std::vector<int64_t> order(num_pairs);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle(cfg_.seed, "trainer/shuffle",
                      static_cast<uint64_t>(epoch_));
    for (int64_t i = num_pairs - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(
          shuffle.next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int64_t begin = 0; begin < num_pairs; begin += cfg_.batch_size) {
      const int64_t end = std::min(begin + cfg_.batch_size, num_pairs);
      std::vector<Sample> samples;
      samples.reserve(static_cast<size_t>(end - begin));
      for (int64_t i = begin; i < end; ++i) {
        // Substream index depends only on (epoch, position), so a resumed
        // run replays the same augmentations as an uninterrupted one.
        const uint64_t sample_index =
            static_cast<uint64_t>(epoch_) * static_cast<uint64_t>(num_pairs) +
            static_cast<uint64_t>(i);
        samples.push_back(
            load_sample(index, pairs[static_cast<size_t>(order[i])], augmenter,
                        sample_index));
      }
      train_step(make_batch(samples));
      const HistoryRow& row = history_.back();
      char line[256];
      std::snprintf(line, sizeof(line),
                    "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                    static_cast<long long>(row.step), row.lr, row.d_bce,
                    row.d_cce, row.g_rec, row.g_adv);
      csv << line;
    }
    ++epoch_;
    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_epoch_%04d.ptgan", epoch_);
    save_checkpoint(out_dir / name);
    save_checkpoint(out_dir / "ckpt_latest.ptgan");
    csv.flush();
  }
}

Archive Trainer::to_archive() {
  Archive a;
  for (const nn::ParamRef& p : generator_.params())
    a.put("generator." + p.name, *p.value);
  for (const nn::ParamRef& p : discriminator_.params())
    a.put("discriminator." + p.name, *p.value);
  for (const auto& [name, slot] : g_opt_.slots) {
    a.put("opt.g." + name + ".m", slot.m);
    a.put("opt.g." + name + ".v", slot.v);
  }
  for (const auto& [name, slot] : d_opt_.slots) {
    a.put("opt.d." + name + ".m", slot.m);
    a.put("opt.d." + name + ".v", slot.v);
  }
  nlohmann::json meta = {
      {"kind", "ptgan-checkpoint"},
      {"format", 1},
      {"epoch", epoch_},
      {"step", step_},
      {"generator", generator_.config()},
      {"discriminator", discriminator_.config()},
      {"trainer", cfg_},
      {"augment", aug_cfg_},
      {"adam", {{"g_t", g_opt_.t}, {"d_t", d_opt_.t}}},
      {"backbone",
       {{"config", bb_cfg_},
        {"weights_checksum", backbone_->weights_checksum()}}},
  };
  a.put_meta(meta);
  return a;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) {
  to_archive().save(path);
}

uint64_t Trainer::state_checksum() { return to_archive().checksum(); }

void Trainer::set_epochs(int epochs) {
  require(epochs >= 0, Errc::config_error,
          "trainer.epochs must be non-negative");
  cfg_.epochs = epochs;
}

namespace {

void restore_params(const Archive& a, const std::string& prefix,
                    const std::vector<nn::ParamRef>& params) {
  for (const nn::ParamRef& p : params) {
    const std::string key = prefix + p.name;
    require(a.has(key), Errc::malformed_document,
            "checkpoint missing parameter " + key);
    const Tensor& stored = a.get(key);
    require(stored.same_shape(*p.value), Errc::dim_mismatch,
            "checkpoint parameter " + key + " has mismatched shape");
    *p.value = stored;
  }
}

void restore_slots(const Archive& a, const std::string& prefix,
                   const std::vector<nn::ParamRef>& params, nn::Adam& opt) {
  opt.slots.clear();
  for (const nn::ParamRef& p : params) {
    const std::string m_key = prefix + p.name + ".m";
    const std::string v_key = prefix + p.name + ".v";
    if (!a.has(m_key)) continue;  // optimizer never stepped
    require(a.has(v_key), Errc::malformed_document,
            "checkpoint has " + m_key + " without " + v_key);
    const Tensor& m = a.get(m_key);
    const Tensor& v = a.get(v_key);
    require(m.same_shape(*p.value) && v.same_shape(*p.value),
            Errc::dim_mismatch,
            "checkpoint moments for " + p.name + " have mismatched shape");
    opt.slots.push_back({p.name, nn::Adam::Slot{m, v}});
  }
}

}  // namespace

namespace {

const nlohmann::json& checkpoint_meta(const Archive& a,
                                      const std::filesystem::path& path) {
  const nlohmann::json& meta = a.meta();
  require(meta.is_object() && meta.value("kind", std::string()) ==
                                  "ptgan-checkpoint",
          Errc::malformed_document,
          path.string() + " is not a training checkpoint");
  return meta;
}

std::unique_ptr<Backbone> backbone_from_meta(const nlohmann::json& meta) {
  const nlohmann::json& bb = meta.at("backbone");
  auto backbone = make_backbone(bb.at("config").get<BackboneConfig>());
  require(backbone->weights_checksum() ==
              bb.at("weights_checksum").get<uint64_t>(),
          Errc::config_error,
          "backbone weights differ from the ones used at training time");
  return backbone;
}

}  // namespace

Trainer Trainer::load_checkpoint(const std::filesystem::path& path) {
  const Archive a = Archive::load(path);
  const nlohmann::json& meta = checkpoint_meta(a, path);
  Trainer t(meta.at("generator").get<GeneratorConfig>(),
            meta.at("discriminator").get<DiscriminatorConfig>(),
            meta.at("trainer").get<TrainerConfig>(),
            meta.at("augment").get<AugmentConfig>(),
            meta.at("backbone").at("config").get<BackboneConfig>());
  require(t.backbone_->weights_checksum() ==
              meta.at("backbone").at("weights_checksum").get<uint64_t>(),
          Errc::config_error,
          "backbone weights differ from the ones used at training time");
  t.epoch_ = meta.at("epoch").get<int>();
  t.step_ = meta.at("step").get<int64_t>();
  restore_params(a, "generator.", t.generator_.params());
  restore_params(a, "discriminator.", t.discriminator_.params());
  t.g_opt_.t = meta.at("adam").at("g_t").get<int64_t>();
  t.d_opt_.t = meta.at("adam").at("d_t").get<int64_t>();
  restore_slots(a, "opt.g.", t.generator_.params(), t.g_opt_);
  restore_slots(a, "opt.d.", t.discriminator_.params(), t.d_opt_);
  return t;
}

Generator generator_from_checkpoint(const std::filesystem::path& path) {
  const Archive a = Archive::load(path);
  const nlohmann::json& meta = checkpoint_meta(a, path);
  Generator g(meta.at("generator").get<GeneratorConfig>());
  restore_params(a, "generator.", g.params());
  return g;
}

GeneratorBundle load_generator_bundle(const std::filesystem::path& path) {
  const Archive a = Archive::load(path);
  const nlohmann::json& meta = checkpoint_meta(a, path);
  Generator g(meta.at("generator").get<GeneratorConfig>());
  restore_params(a, "generator.", g.params());
  return {std::move(g), backbone_from_meta(meta), a.checksum()};
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AblationReport run_ablation(const std::filesystem::path& work_dir,
                            const AblationOptions& opts) {
  require(opts.num_seeds >= 1, Errc::config_error,
          "ablation needs at least one seed");
  require(opts.eval_per_identity >= 1 &&
              opts.images_per_identity > opts.eval_per_identity + 1,
          Errc::config_error,
          "ablation needs held-out images plus >= 2 training images per "
          "identity");
  require(opts.occlusion_area > 0.0 && opts.occlusion_area < 1.0,
          Errc::config_error, "occlusion_area must lie in (0, 1)");

  SynthConfig scfg;
  scfg.num_identities = opts.num_identities;
  scfg.images_per_identity = opts.images_per_identity;
  scfg.height = opts.image_size;
  scfg.width = opts.image_size;
  scfg.seed = opts.data_seed;
  const auto manifest =
      make_synthetic_dataset(work_dir / "data", scfg);
  const DatasetIndex full = load_manifest(manifest);

  // Per identity: leading images train, trailing images are held-out poses.
  const int train_per = opts.images_per_identity - opts.eval_per_identity;
  DatasetIndex train;
  train.num_identities = full.num_identities;
  std::vector<std::pair<IndexEntry, IndexEntry>> eval_pairs;  // (source, target)
  std::vector<std::vector<IndexEntry>> by_id(
      static_cast<size_t>(full.num_identities));
  for (const IndexEntry& e : full.entries)
    by_id[static_cast<size_t>(e.identity)].push_back(e);
  for (const auto& members : by_id) {
    for (size_t i = 0; i < members.size(); ++i) {
      if (static_cast<int>(i) < train_per) {
        train.entries.push_back(members[i]);
        for (size_t j = static_cast<size_t>(train_per); j < members.size();
             ++j)
          eval_pairs.emplace_back(members[i], members[j]);
      }
    }
  }

  BackboneConfig bcfg;
  bcfg.kind = "test";
  bcfg.dim = 32;
  bcfg.seed = 4242;  // same frozen descriptor network for every run

  GeneratorConfig gcfg;
  gcfg.num_res_blocks = 3;
  gcfg.base_channels = 16;
  gcfg.latent_h = 4;
  gcfg.latent_w = 4;
  gcfg.latent_c = 16;
  gcfg.descriptor_dim = bcfg.dim;
  gcfg.out_height = opts.image_size;
  gcfg.out_width = opts.image_size;

  DiscriminatorConfig dcfg;
  dcfg.trunk_channels = {16, 32, 64};
  dcfg.num_classes = opts.num_identities;
  dcfg.in_height = opts.image_size;
  dcfg.in_width = opts.image_size;

  TrainerConfig tcfg;
  tcfg.batch_size = opts.batch_size;
  tcfg.epochs = opts.epochs;

  AugmentConfig acfg;
  acfg.target_height = opts.image_size;
  acfg.target_width = opts.image_size;

  // Occlusions are sampled from the data seed, never from run seeds, so
  // every run sees identical corruptions.
  auto eval_run = [&](Trainer& t) {
    double total = 0.0;
    for (size_t pi = 0; pi < eval_pairs.size(); ++pi) {
      const auto& [src_e, tgt_e] = eval_pairs[pi];
      Image src = resize_and_pad(load_png(src_e.image_path), opts.image_size,
                                 opts.image_size);
      RngStream occ(opts.data_seed, "ablation/occlude", pi);
      const int side = std::max(
          1, static_cast<int>(std::lround(opts.image_size *
                                          std::sqrt(opts.occlusion_area))));
      const int y0 = occ.uniform_int(0, opts.image_size - side);
      const int x0 = occ.uniform_int(0, opts.image_size - side);
      src = erase_patch(src, y0, x0, side, side, occ, true);
      const Tensor desc = t.backbone().extract(
          image_to_net(src).reshaped({1, 3, opts.image_size, opts.image_size}));
      Tensor pose({1, kPoseVectorDim});
      for (int j = 0; j < kPoseVectorDim; ++j)
        pose.at2(0, j) = tgt_e.pose.values[j];
      const Tensor out = generate(t.generator(), desc, pose);
      const Image target = resize_and_pad(load_png(tgt_e.image_path),
                                          opts.image_size, opts.image_size);
      total += ssim(net_to_image(out), target);
    }
    return total / static_cast<double>(eval_pairs.size());
  };

  AblationReport report;
  for (int arm = 0; arm < 2; ++arm) {
    const bool aug = arm == 0;
    AblationArm& out = aug ? report.with_aug : report.without_aug;
    for (int s = 0; s < opts.num_seeds; ++s) {
      const uint64_t run_seed = opts.base_seed + 10 * static_cast<uint64_t>(s);
      TrainerConfig tc = tcfg;
      tc.augment = aug;
      tc.seed = run_seed;
      GeneratorConfig gc = gcfg;
      gc.seed = run_seed + 1;
      DiscriminatorConfig dc = dcfg;
      dc.seed = run_seed + 2;
      AugmentConfig ac = acfg;
      ac.seed = run_seed + 3;
      Trainer t(gc, dc, tc, ac, bcfg);
      const auto run_dir =
          work_dir / ((aug ? "aug_seed" : "noaug_seed") + std::to_string(s));
      t.fit(train, run_dir);
      out.seed_ssim.push_back(eval_run(t));
    }
    out.median = median_of(out.seed_ssim);
  }
  return report;
}

}  // namespace ptgan
