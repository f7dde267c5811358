#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "ptgan/augment.hpp"
#include "ptgan/checkpoint.hpp"
#include "ptgan/dataset.hpp"
#include "ptgan/error.hpp"
#include "ptgan/metrics.hpp"
#include "ptgan/pose.hpp"
#include "ptgan/trainer.hpp"

namespace py = pybind11;

namespace {

using DoubleArray =
    py::array_t<double, py::array::c_style | py::array::forcecast>;

ptgan::Image array_to_image(const DoubleArray& arr) {
  ptgan::require(arr.ndim() == 3 && arr.shape(2) == 3,
                 ptgan::Errc::dim_mismatch,
                 "image array must have shape (height, width, 3)");
  ptgan::Image img(static_cast<int>(arr.shape(0)),
                   static_cast<int>(arr.shape(1)));
  std::memcpy(img.pixels.data(), arr.data(),
              img.pixels.size() * sizeof(double));
  return img;
}

py::array_t<double> image_to_array(const ptgan::Image& img) {
  py::array_t<double> out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.pixels.data(),
              img.pixels.size() * sizeof(double));
  return out;
}

ptgan::PoseVector array_to_pose(const DoubleArray& arr) {
  ptgan::require(arr.ndim() == 1 && arr.shape(0) == ptgan::kPoseVectorDim,
                 ptgan::Errc::dim_mismatch,
                 "pose array must have shape (75,)");
  ptgan::PoseVector pose;
  std::memcpy(pose.values.data(), arr.data(),
              pose.values.size() * sizeof(double));
  return pose;
}

py::array_t<double> pose_to_array(const ptgan::PoseVector& pose) {
  py::array_t<double> out(ptgan::kPoseVectorDim);
  std::memcpy(out.mutable_data(), pose.values.data(),
              pose.values.size() * sizeof(double));
  return out;
}

ptgan::Tensor probs_to_tensor(const DoubleArray& arr) {
  ptgan::require(arr.ndim() == 2, ptgan::Errc::dim_mismatch,
                 "probability array must have shape (n, classes)");
  ptgan::Tensor t({static_cast<int>(arr.shape(0)),
                   static_cast<int>(arr.shape(1))});
  std::memcpy(t.data(), arr.data(),
              static_cast<size_t>(t.size()) * sizeof(double));
  return t;
}

}  // namespace

PYBIND11_MODULE(_ptgan, m) {
  m.doc() = "Pose-guided person image synthesis core";

  m.def(
      "pose_vector",
      [](const std::string& document) {
        return pose_to_array(
            ptgan::normalize_pose(ptgan::parse_keypoints(document)));
      },
      py::arg("document"),
      "Parse a keypoint JSON document into the normalized 75-float pose "
      "vector");

  m.def(
      "load_pose",
      [](const std::string& path) {
        return pose_to_array(ptgan::normalize_pose(ptgan::load_keypoints(path)));
      },
      py::arg("path"), "Load a keypoint file into a normalized pose vector");

  m.def(
      "pose_distance",
      [](const DoubleArray& a, const DoubleArray& b) {
        return ptgan::pose_distance(array_to_pose(a), array_to_pose(b));
      },
      py::arg("a"), py::arg("b"),
      "Mean Euclidean distance over jointly visible joints");

  m.def(
      "resize_and_pad",
      [](const DoubleArray& img, int height, int width) {
        return image_to_array(
            ptgan::resize_and_pad(array_to_image(img), height, width));
      },
      py::arg("image"), py::arg("height") = 256, py::arg("width") = 256,
      "Aspect-preserving resize with symmetric zero padding");

  py::class_<ptgan::Augmenter>(m, "Augmenter",
                               "Deterministic source-augmentation pipeline")
      .def(py::init([](uint64_t seed, int target_height, int target_width,
                       std::vector<std::string> order) {
             ptgan::AugmentConfig cfg;
             cfg.seed = seed;
             cfg.target_height = target_height;
             cfg.target_width = target_width;
             cfg.order = std::move(order);
             return ptgan::Augmenter(cfg);
           }),
           py::arg("seed") = 0, py::arg("target_height") = 256,
           py::arg("target_width") = 256,
           py::arg("order") = std::vector<std::string>{
               "erase", "crop", "distort", "jitter", "flip"})
      .def(
          "__call__",
          [](const ptgan::Augmenter& aug, const DoubleArray& img,
             uint64_t sample_index) {
            return image_to_array(aug(array_to_image(img), sample_index));
          },
          py::arg("image"), py::arg("sample_index"));

  m.def(
      "make_synthetic_dataset",
      [](const std::string& out_dir, int num_identities,
         int images_per_identity, int height, int width, uint64_t seed) {
        ptgan::SynthConfig cfg;
        cfg.num_identities = num_identities;
        cfg.images_per_identity = images_per_identity;
        cfg.height = height;
        cfg.width = width;
        cfg.seed = seed;
        return ptgan::make_synthetic_dataset(out_dir, cfg).string();
      },
      py::arg("out_dir"), py::arg("num_identities") = 4,
      py::arg("images_per_identity") = 4, py::arg("height") = 256,
      py::arg("width") = 256, py::arg("seed") = 7,
      "Render a stick-figure dataset; returns the manifest path");

  m.def(
      "build_pairs",
      [](const std::string& manifest, double min_pose_distance) {
        const ptgan::DatasetIndex index = ptgan::load_manifest(manifest);
        std::vector<std::pair<std::string, std::string>> out;
        for (const ptgan::TrainingPair& p :
             ptgan::build_pairs(index, min_pose_distance))
          out.emplace_back(
              index.entries[static_cast<size_t>(p.source)].image_path,
              index.entries[static_cast<size_t>(p.target)].image_path);
        return out;
      },
      py::arg("manifest"), py::arg("min_pose_distance") = 0.0,
      "Same-identity (source, target) image path pairs");

  m.def(
      "ssim",
      [](const DoubleArray& x, const DoubleArray& y) {
        return ptgan::ssim(array_to_image(x), array_to_image(y));
      },
      py::arg("x"), py::arg("y"),
      "Mean structural similarity over channels, values in [0,1] range");

  m.def(
      "inception_score",
      [](const DoubleArray& probs, int splits) {
        return ptgan::inception_score(probs_to_tensor(probs), splits);
      },
      py::arg("probs"), py::arg("splits") = 10,
      "(mean, std) of the split-wise inception score");

  m.def(
      "lr_schedule",
      [](int epoch, double lr0, double decay_factor, int decay_every) {
        ptgan::TrainerConfig cfg;
        cfg.lr0 = lr0;
        cfg.decay_factor = decay_factor;
        cfg.decay_every = decay_every;
        return ptgan::lr_schedule(epoch, cfg);
      },
      py::arg("epoch"), py::arg("lr0") = 2e-4, py::arg("decay_factor") = 10.0,
      py::arg("decay_every") = 20,
      "Step-decayed learning rate at the given epoch");

  m.def(
      "generate_image",
      [](const std::string& checkpoint, const DoubleArray& source,
         const DoubleArray& pose) {
        ptgan::GeneratorBundle bundle =
            ptgan::load_generator_bundle(checkpoint);
        const ptgan::GeneratorConfig& gcfg = bundle.generator.config();
        const ptgan::Image canonical = ptgan::resize_and_pad(
            array_to_image(source), gcfg.out_height, gcfg.out_width);
        const ptgan::Tensor desc = bundle.backbone->extract(
            ptgan::image_to_net(canonical)
                .reshaped({1, 3, gcfg.out_height, gcfg.out_width}));
        const ptgan::PoseVector target_pose = array_to_pose(pose);
        ptgan::Tensor row({1, ptgan::kPoseVectorDim});
        for (int j = 0; j < ptgan::kPoseVectorDim; ++j)
          row[j] = target_pose.values[j];
        return image_to_array(ptgan::net_to_image(
            ptgan::generate(bundle.generator, desc, row)));
      },
      py::arg("checkpoint"), py::arg("source"), py::arg("pose"),
      "Synthesize one image from a checkpoint, a source image and a pose");

  m.def(
      "checkpoint_info",
      [](const std::string& path) {
        const ptgan::Archive a = ptgan::Archive::load(path);
        py::dict info;
        info["checksum"] = a.checksum();
        info["arrays"] = a.names().size();
        if (a.meta().is_object()) {
          for (const char* key : {"kind", "epoch", "step"}) {
            if (!a.meta().contains(key)) continue;
            const nlohmann::json& v = a.meta().at(key);
            if (v.is_string())
              info[key] = v.get<std::string>();
            else
              info[key] = v.get<int64_t>();
          }
        }
        return info;
      },
      py::arg("path"), "Checksum and counters of a parameter archive");

  m.def(
      "load_image",
      [](const std::string& path) {
        return image_to_array(ptgan::load_png(path));
      },
      py::arg("path"), "Load a PNG into an (H, W, 3) array in [0,1]");

  m.def(
      "save_image",
      [](const DoubleArray& img, const std::string& path) {
        ptgan::save_png(array_to_image(img), path);
      },
      py::arg("image"), py::arg("path"), "Write an (H, W, 3) array as PNG");
}
