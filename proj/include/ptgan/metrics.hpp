#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptgan/dataset.hpp"
#include "ptgan/generator.hpp"
#include "ptgan/image.hpp"
#include "ptgan/tensor.hpp"

namespace ptgan {

class Backbone;

/// Windowed structural-similarity parameters. The dynamic range matches the
/// [0,1] storage encoding by default.
struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over valid sliding windows, per-channel scores averaged.
double ssim(const Image& x, const Image& y, const SsimConfig& cfg = {});

/// probs: (N, C), each row a class distribution. Returns (mean, std) of the
/// per-split exp(mean KL(row || split marginal)); std is over splits.
std::pair<double, double> inception_score(const Tensor& probs, int splits = 10);

/// Fixed classifier producing the per-image class distributions the
/// Inception Score is computed against.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int num_classes() const = 0;
  virtual std::string kind() const = 0;
  /// images: (N, 3, H, W) in [-1,1]. Returns (N, C) softmax rows.
  virtual Tensor probabilities(const Tensor& images) = 0;
};

Tensor classify_for_is(const Tensor& images, Classifier& classifier);

/// Small trainable identity classifier for desk-scale scoring: two strided
/// conv stages, global average pooling, one linear head.
class SmallClassifier : public Classifier {
 public:
  SmallClassifier(int num_classes, uint64_t seed);

  int num_classes() const override { return num_classes_; }
  std::string kind() const override { return "synthetic-identity"; }
  Tensor probabilities(const Tensor& images) override;

  /// Adam + cross-entropy on the given set until max_epochs.
  void fit(const Tensor& images, const std::vector<int>& labels,
           int max_epochs = 60, double lr = 1e-3, int batch_size = 16);
  double accuracy(const Tensor& images, const std::vector<int>& labels);

 private:
  Tensor logits(const Tensor& images, bool cache);
  void backward(const Tensor& d_logits);
  std::vector<nn::ParamRef> params();

  int num_classes_ = 0;
  nn::Conv2d conv1_, conv2_;
  nn::LeakyReLU act1_{0.0}, act2_{0.0};
  nn::GlobalAvgPool gap_;
  nn::Linear head_;
};

/// Classifier backed by the reference descriptor network plus a stored
/// linear head (arrays `fc.w`, `fc.b` alongside the backbone weights).
std::unique_ptr<Classifier> make_reference_classifier(
    const std::filesystem::path& weights_path);

struct MetricsReport {
  double ssim_mean = 0.0;
  double is_mean = 0.0;
  double is_std = 0.0;
  int n_images = 0;
  std::string checkpoint_id;
  std::string classifier_kind;
  nlohmann::json config_echo;
};

struct EvalConfig {
  SsimConfig ssim;
  int is_splits = 10;
};

/// Generate for every pair, score SSIM against the true targets and IS over
/// the generated set.
MetricsReport evaluate(const DatasetIndex& index,
                       const std::vector<TrainingPair>& pairs, Generator& g,
                       Backbone& backbone, Classifier& classifier,
                       const EvalConfig& cfg);

nlohmann::json report_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace ptgan
