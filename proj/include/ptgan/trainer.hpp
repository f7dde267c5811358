#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptgan/augment.hpp"
#include "ptgan/backbone.hpp"
#include "ptgan/checkpoint.hpp"
#include "ptgan/dataset.hpp"
#include "ptgan/discriminator.hpp"
#include "ptgan/generator.hpp"

namespace ptgan {

struct TrainerConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lr0 = 2e-4;
  double decay_factor = 10.0;
  int decay_every = 20;  // epochs per learning-rate decade
  int batch_size = 32;
  double lambda_rec = 10.0;
  int epochs = 1;
  uint64_t seed = 99;
  bool augment = true;
  std::string adv_form = "non_saturating";  // non_saturating | saturating
  double pair_min_pose_distance = 0.0;

  void validate() const;
};

/// lr0 / decay_factor^floor(epoch / decay_every)
double lr_schedule(int epoch, const TrainerConfig& cfg);

struct GenLossParts {
  double total = 0.0;
  double rec = 0.0;  // lambda_rec-weighted reconstruction term
  double adv = 0.0;
};

struct DiscLossParts {
  double total = 0.0;
  double bce_real = 0.0;
  double bce_fake = 0.0;
  double cce = 0.0;
  double bce() const { return bce_real + bce_fake; }
};

/// L_G = lambda_rec * MSE(generated, target) + adversarial realness term.
/// Optional outputs receive dL/d(generated) and dL/d(fake realness logits).
GenLossParts generator_loss(const Tensor& generated, const Tensor& target,
                            const Tensor& fake_realness,
                            const TrainerConfig& cfg,
                            Tensor* d_generated = nullptr,
                            Tensor* d_realness = nullptr);

/// L_D = BCE(real, 1) + BCE(fake, 0) + CCE(real classes); generated images
/// enter the class term only when cfg.classify_fake.
DiscLossParts discriminator_loss(const DiscOutput& real, const DiscOutput& fake,
                                 const std::vector<int>& labels,
                                 const DiscriminatorConfig& cfg,
                                 Tensor* d_real_realness = nullptr,
                                 Tensor* d_real_class = nullptr,
                                 Tensor* d_fake_realness = nullptr,
                                 Tensor* d_fake_class = nullptr);

struct Batch {
  Tensor source;  // (N, 3, H, W) in [-1,1]
  Tensor target;  // (N, 3, H, W) in [-1,1]
  Tensor pose;    // (N, 75)
  std::vector<int> labels;
};

Batch make_batch(const std::vector<Sample>& samples);

struct StepLosses {
  double lr = 0.0;
  DiscLossParts d;
  GenLossParts g;
};

struct HistoryRow {
  int epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double d_bce = 0.0;
  double d_cce = 0.0;
  double g_rec = 0.0;
  double g_adv = 0.0;
};

// Config round-trips for self-describing checkpoints.
void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// Adversarial loop: one discriminator step then one generator step per
/// batch, Adam for both, epoch-based decay, per-epoch checkpoints, resume.
/// Checkpoints embed every config (including the backbone's), so a file can
/// be resumed or used for synthesis without the original run setup.
class Trainer {
 public:
  Trainer(const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
          const TrainerConfig& trainer_cfg, const AugmentConfig& aug_cfg,
          const BackboneConfig& backbone_cfg);

  StepLosses train_step(const Batch& batch);

  /// Run the remaining epochs over the index's pair list; writes per-epoch
  /// checkpoints and appends history.csv under out_dir.
  void fit(const DatasetIndex& index, const std::filesystem::path& out_dir);

  void save_checkpoint(const std::filesystem::path& path);
  static Trainer load_checkpoint(const std::filesystem::path& path);

  /// Checksum over parameters, optimizer moments, counters and configs.
  uint64_t state_checksum();

  /// Raise (or lower) the target epoch count, e.g. to extend a resumed run.
  void set_epochs(int epochs);

  Generator& generator() { return generator_; }
  Discriminator& discriminator() { return discriminator_; }
  const Backbone& backbone() const { return *backbone_; }
  const std::vector<HistoryRow>& history() const { return history_; }
  int epoch() const { return epoch_; }
  int64_t step() const { return step_; }
  const TrainerConfig& config() const { return cfg_; }
  const AugmentConfig& augment_config() const { return aug_cfg_; }
  const BackboneConfig& backbone_config() const { return bb_cfg_; }

 private:
  Archive to_archive();

  TrainerConfig cfg_;
  AugmentConfig aug_cfg_;
  BackboneConfig bb_cfg_;
  std::unique_ptr<Backbone> backbone_;
  Generator generator_;
  Discriminator discriminator_;
  nn::Adam g_opt_;
  nn::Adam d_opt_;
  int epoch_ = 0;
  int64_t step_ = 0;
  std::vector<HistoryRow> history_;
};

/// Rebuild just the generator from a checkpoint (for gradient-free use).
Generator generator_from_checkpoint(const std::filesystem::path& path);

/// Everything synthesis needs from one checkpoint file.
struct GeneratorBundle {
  Generator generator;
  std::unique_ptr<Backbone> backbone;
  uint64_t checksum = 0;  // archive checksum, used as the checkpoint id
};

GeneratorBundle load_generator_bundle(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// With/without-augmentation ablation harness
// ---------------------------------------------------------------------------

struct AblationOptions {
  int num_identities = 4;
  int images_per_identity = 6;
  int eval_per_identity = 2;  // held-out poses per identity
  int image_size = 64;
  int epochs = 25;
  int batch_size = 8;
  int num_seeds = 3;
  uint64_t data_seed = 7;
  uint64_t base_seed = 1000;
  double occlusion_area = 0.18;  // fraction of each eval source erased
};

struct AblationArm {
  std::vector<double> seed_ssim;  // mean eval SSIM per seed
  double median = 0.0;
};

struct AblationReport {
  AblationArm with_aug;
  AblationArm without_aug;
};

/// Train paired runs (augmentation on/off) over num_seeds seeds on one
/// synthetic dataset; evaluate on held-out poses with occlusion-corrupted
/// source images.
AblationReport run_ablation(const std::filesystem::path& work_dir,
                            const AblationOptions& opts);

}  // namespace ptgan
