#include "ptgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ptgan/augment.hpp"
#include "ptgan/backbone.hpp"
#include "ptgan/checkpoint.hpp"
#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

namespace {

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> g(static_cast<size_t>(window));
  const double center = (window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = (i - center) / sigma;
    g[static_cast<size_t>(i)] = std::exp(-0.5 * d * d);
    sum += g[static_cast<size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

/// Separable valid convolution of an (h, w) plane.
std::vector<double> conv_valid(const std::vector<double>& plane, int h, int w,
                               const std::vector<double>& kernel) {
  const int k = static_cast<int>(kernel.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> horiz(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i)
        s += kernel[static_cast<size_t>(i)] *
             plane[static_cast<size_t>(y) * w + x + i];
      horiz[static_cast<size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i)
        s += kernel[static_cast<size_t>(i)] *
             horiz[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

std::vector<double> channel_plane(const Image& img, int c) {
  std::vector<double> plane(static_cast<size_t>(img.num_pixels()));
  for (int64_t i = 0; i < img.num_pixels(); ++i)
    plane[static_cast<size_t>(i)] = img.pixels[static_cast<size_t>(i) * 3 + c];
  return plane;
}

}  // namespace

double ssim(const Image& x, const Image& y, const SsimConfig& cfg) {
  require(!x.empty() && x.height == y.height && x.width == y.width,
          Errc::dim_mismatch, "ssim inputs must share nonempty dims");
  require(x.height >= cfg.window && x.width >= cfg.window, Errc::dim_mismatch,
          "image smaller than the ssim window");
  require(cfg.k1 > 0.0 && cfg.k2 > 0.0 && cfg.sigma > 0.0 && cfg.window >= 1,
          Errc::config_error, "invalid ssim parameters");

  const std::vector<double> kernel = gaussian_kernel(cfg.window, cfg.sigma);
  const double c1 = cfg.k1 * cfg.dynamic_range * cfg.k1 * cfg.dynamic_range;
  const double c2 = cfg.k2 * cfg.dynamic_range * cfg.k2 * cfg.dynamic_range;
  const int h = x.height, w = x.width;

  double channel_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const std::vector<double> px = channel_plane(x, c);
    const std::vector<double> py = channel_plane(y, c);
    const size_t n = px.size();
    std::vector<double> pxx(n), pyy(n), pxy(n);
    for (size_t i = 0; i < n; ++i) {
      pxx[i] = px[i] * px[i];
      pyy[i] = py[i] * py[i];
      pxy[i] = px[i] * py[i];
    }
    const std::vector<double> mu_x = conv_valid(px, h, w, kernel);
    const std::vector<double> mu_y = conv_valid(py, h, w, kernel);
    const std::vector<double> m_xx = conv_valid(pxx, h, w, kernel);
    const std::vector<double> m_yy = conv_valid(pyy, h, w, kernel);
    const std::vector<double> m_xy = conv_valid(pxy, h, w, kernel);

    double acc = 0.0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
      const double sxx = m_xx[i] - mu_x[i] * mu_x[i];
      const double syy = m_yy[i] - mu_y[i] * mu_y[i];
      const double sxy = m_xy[i] - mu_x[i] * mu_y[i];
      const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * sxy + c2);
      const double den =
          (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (sxx + syy + c2);
      acc += num / den;
    }
    channel_sum += acc / static_cast<double>(mu_x.size());
  }
  return channel_sum / 3.0;
}

std::pair<double, double> inception_score(const Tensor& probs, int splits) {
  require(probs.ndim() == 2 && probs.dim(1) >= 1, Errc::dim_mismatch,
          "inception_score expects an (N, C) matrix");
  require(splits >= 1, Errc::config_error, "splits must be >= 1");
  const int n = probs.dim(0), c = probs.dim(1);
  require(n >= splits, Errc::config_error,
          "need at least as many rows as splits");

  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double p = probs.at2(i, j);
      require(p >= 0.0, Errc::row_not_normalized,
              "row " + std::to_string(i) + " has a negative entry");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, Errc::row_not_normalized,
            "row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }

  std::vector<double> scores(static_cast<size_t>(splits));
  for (int s = 0; s < splits; ++s) {
    const int begin = static_cast<int>(static_cast<int64_t>(s) * n / splits);
    const int end =
        static_cast<int>(static_cast<int64_t>(s + 1) * n / splits);
    const int rows = end - begin;
    // Shifted mean q_j = p_0j + mean_i(p_ij - p_0j): better conditioned than
    // the plain sum and exact when the rows coincide, so identical rows give
    // KL contributions of log(1) = 0 and a score of exactly 1.
    std::vector<double> marginal(static_cast<size_t>(c), 0.0);
    for (int j = 0; j < c; ++j) {
      const double first = probs.at2(begin, j);
      double shifted = 0.0;
      for (int i = begin + 1; i < end; ++i) shifted += probs.at2(i, j) - first;
      marginal[static_cast<size_t>(j)] = first + shifted / rows;
    }

    double mean_kl = 0.0;
    for (int i = begin; i < end; ++i) {
      double kl = 0.0;
      for (int j = 0; j < c; ++j) {
        const double p = probs.at2(i, j);
        if (p > 0.0) kl += p * std::log(p / marginal[static_cast<size_t>(j)]);
      }
      mean_kl += kl;
    }
    scores[static_cast<size_t>(s)] = std::exp(mean_kl / rows);
  }

  const double mean =
      std::accumulate(scores.begin(), scores.end(), 0.0) / splits;
  double var = 0.0;
  for (double v : scores) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / splits)};
}

Tensor classify_for_is(const Tensor& images, Classifier& classifier) {
  Tensor probs = classifier.probabilities(images);
  require(probs.ndim() == 2 && probs.dim(0) == images.dim(0) &&
              probs.dim(1) == classifier.num_classes(),
          Errc::dim_mismatch, "classifier output shape");
  return probs;
}

// ---------------------------------------------------------------------------
// SmallClassifier
// ---------------------------------------------------------------------------

namespace {

Tensor softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  Tensor probs({n, c});
  for (int i = 0; i < n; ++i) {
    double mx = logits.at2(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at2(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(logits.at2(i, j) - mx);
      probs.at2(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) probs.at2(i, j) /= sum;
  }
  return probs;
}

Tensor gather_rows(const Tensor& images, const std::vector<int>& idx) {
  const int64_t stride = images.size() / images.dim(0);
  std::vector<int> shape = images.shape();
  shape[0] = static_cast<int>(idx.size());
  Tensor out(shape);
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(images.data() + idx[i] * stride, stride,
                out.data() + static_cast<int64_t>(i) * stride);
  return out;
}

}  // namespace

SmallClassifier::SmallClassifier(int num_classes, uint64_t seed)
    : num_classes_(num_classes),
      conv1_(3, 16, 3, 2, 1),
      conv2_(16, 32, 3, 2, 1),
      head_(32, num_classes) {
  require(num_classes >= 2, Errc::config_error,
          "classifier needs at least 2 classes");
  RngStream rng(seed, "classifier/init");
  conv1_.init(rng);
  conv2_.init(rng);
  head_.init(rng);
}

Tensor SmallClassifier::logits(const Tensor& images, bool cache) {
  Tensor x = conv1_.forward(images, cache);
  x = act1_.forward(x, cache);
  x = conv2_.forward(x, cache);
  x = act2_.forward(x, cache);
  x = gap_.forward(x, cache);
  return head_.forward(x, cache);
}

void SmallClassifier::backward(const Tensor& d_logits) {
  Tensor g = head_.backward(d_logits);
  g = gap_.backward(g);
  g = act2_.backward(g);
  g = conv2_.backward(g);
  g = act1_.backward(g);
  conv1_.backward(g);
}

std::vector<nn::ParamRef> SmallClassifier::params() {
  std::vector<nn::ParamRef> out;
  conv1_.collect("conv1", out);
  conv2_.collect("conv2", out);
  head_.collect("head", out);
  return out;
}

Tensor SmallClassifier::probabilities(const Tensor& images) {
  return softmax_rows(logits(images, /*cache=*/false));
}

void SmallClassifier::fit(const Tensor& images, const std::vector<int>& labels,
                          int max_epochs, double lr, int batch_size) {
  const int n = images.dim(0);
  require(n >= 1 && static_cast<size_t>(n) == labels.size(),
          Errc::dim_mismatch, "classifier training set shape");
  for (int label : labels)
    require(label >= 0 && label < num_classes_, Errc::label_out_of_range,
            "classifier label " + std::to_string(label));

  nn::Adam opt(0.9, 0.999);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    RngStream shuffle(0xC1A55u, "classifier/shuffle",
                      static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle.uniform_int(0, i))]);

    for (int begin = 0; begin < n; begin += batch_size) {
      const int end = std::min(n, begin + batch_size);
      std::vector<int> idx(order.begin() + begin, order.begin() + end);
      const Tensor batch = gather_rows(images, idx);
      const Tensor out = logits(batch, /*cache=*/true);
      Tensor probs = softmax_rows(out);
      const int bn = static_cast<int>(idx.size());
      Tensor d_logits({bn, num_classes_});
      for (int i = 0; i < bn; ++i)
        for (int j = 0; j < num_classes_; ++j)
          d_logits.at2(i, j) =
              (probs.at2(i, j) - (labels[static_cast<size_t>(idx[static_cast<size_t>(i)])] == j ? 1.0 : 0.0)) /
              bn;
      auto ps = params();
      opt.zero_grads(ps);
      backward(d_logits);
      opt.step(lr, ps);
    }
    if (accuracy(images, labels) >= 0.999) break;
  }
}

double SmallClassifier::accuracy(const Tensor& images,
                                 const std::vector<int>& labels) {
  const Tensor out = logits(images, /*cache=*/false);
  const int n = out.dim(0);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < num_classes_; ++j)
      if (out.at2(i, j) > out.at2(i, best)) best = j;
    if (best == labels[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / n;
}

// ---------------------------------------------------------------------------
// Reference classifier
// ---------------------------------------------------------------------------

namespace {

class ReferenceClassifier : public Classifier {
 public:
  explicit ReferenceClassifier(const std::filesystem::path& weights_path)
      : backbone_(weights_path) {
    const Archive ar = Archive::load(weights_path);
    require(ar.has("fc.w") && ar.has("fc.b"), Errc::weights_unavailable,
            "classifier weights need fc.w and fc.b arrays");
    const Tensor& w = ar.get("fc.w");
    const Tensor& b = ar.get("fc.b");
    require(w.ndim() == 2 && w.dim(1) == backbone_.dim() && b.ndim() == 1 &&
                b.dim(0) == w.dim(0),
            Errc::weights_unavailable, "classifier head shape mismatch");
    classes_ = w.dim(0);
    fc_ = nn::Linear(w.dim(1), classes_);
    fc_.w = w;
    fc_.b = b;
  }

  int num_classes() const override { return classes_; }
  std::string kind() const override { return "reference"; }
  Tensor probabilities(const Tensor& images) override {
    return softmax_rows(fc_.forward(backbone_.extract(images), false));
  }

 private:
  ResNet50Backbone backbone_;
  nn::Linear fc_;
  int classes_ = 0;
};

}  // namespace

std::unique_ptr<Classifier> make_reference_classifier(
    const std::filesystem::path& weights_path) {
  return std::make_unique<ReferenceClassifier>(weights_path);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

MetricsReport evaluate(const DatasetIndex& index,
                       const std::vector<TrainingPair>& pairs, Generator& g,
                       Backbone& backbone, Classifier& classifier,
                       const EvalConfig& cfg) {
  require(!pairs.empty(), Errc::config_error, "evaluation needs >= 1 pair");
  const int h = g.config().out_height, w = g.config().out_width;
  const int n = static_cast<int>(pairs.size());

  double ssim_sum = 0.0;
  Tensor probs({n, classifier.num_classes()});
  for (int i = 0; i < n; ++i) {
    const IndexEntry& src = index.entries[static_cast<size_t>(pairs[i].source)];
    const IndexEntry& tgt = index.entries[static_cast<size_t>(pairs[i].target)];
    const Image source = resize_and_pad(load_png(src.image_path), h, w);
    const Image target = resize_and_pad(load_png(tgt.image_path), h, w);

    const Tensor src_net = image_to_net(source).reshaped({1, 3, h, w});
    const Tensor desc = backbone.extract(src_net);
    Tensor pose({1, kPoseVectorDim});
    for (int j = 0; j < kPoseVectorDim; ++j)
      pose.at2(0, j) = tgt.pose.values[static_cast<size_t>(j)];

    const Tensor fake = generate(g, desc, pose);
    ssim_sum += ssim(net_to_image(fake), target, cfg.ssim);
    const Tensor row = classify_for_is(fake, classifier);
    for (int j = 0; j < classifier.num_classes(); ++j)
      probs.at2(i, j) = row.at2(0, j);
  }

  const int splits = std::min(cfg.is_splits, n);
  const auto [is_mean, is_std] = inception_score(probs, splits);

  MetricsReport report;
  report.ssim_mean = ssim_sum / n;
  report.is_mean = is_mean;
  report.is_std = is_std;
  report.n_images = n;
  report.classifier_kind = classifier.kind();
  report.config_echo = {
      {"ssim", {{"window", cfg.ssim.window}, {"sigma", cfg.ssim.sigma},
                {"k1", cfg.ssim.k1}, {"k2", cfg.ssim.k2},
                {"dynamic_range", cfg.ssim.dynamic_range}}},
      {"is_splits", splits},
      {"out_dims", {h, w}},
  };
  return report;
}

nlohmann::json report_json(const MetricsReport& report) {
  return {
      {"ssim_mean", report.ssim_mean},
      {"is_mean", report.is_mean},
      {"is_std", report.is_std},
      {"n_images", report.n_images},
      {"checkpoint", report.checkpoint_id},
      {"classifier", report.classifier_kind},
      {"config", report.config_echo},
  };
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  const std::string model =
      report.checkpoint_id.empty() ? "current" : report.checkpoint_id;
  const size_t width = std::max<size_t>(model.size(), 5);
  char line[64];
  out << "Model" << std::string(width - 5, ' ') << "  SSIM     IS\n";
  out << std::string(width, '-') << "  -------  --------------\n";
  out << model << std::string(width - model.size(), ' ');
  std::snprintf(line, sizeof line, "  %.4f   %.3f +/- %.3f\n",
                report.ssim_mean, report.is_mean, report.is_std);
  out << line;
  out << "(IS is classifier-relative; scored by: " << report.classifier_kind
      << ", n=" << report.n_images << ")\n";
  return out.str();
}

}  // namespace ptgan
