#include "ptgan/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptgan/config.hpp"
#include "ptgan/error.hpp"
#include "ptgan/metrics.hpp"
#include "ptgan/trainer.hpp"

namespace ptgan {

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sc, CommonOpts& opts) {
  sc->add_option("--config", opts.config_path,
                 "Config file ([section] / key = value lines)");
  sc->add_option("--set", opts.sets,
                 "Override one config value (repeatable)")
      ->type_name("SECTION.KEY=VALUE");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg =
      opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  for (const std::string& assignment : opts.sets)
    apply_override(cfg, assignment);
  apply_env_overrides(cfg);
  cfg.cross_validate();
  return cfg;
}

std::string hex_id(uint64_t checksum) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(checksum));
  return buf;
}

Tensor pose_row(const PoseVector& pose) {
  Tensor row({1, kPoseVectorDim});
  for (int j = 0; j < kPoseVectorDim; ++j) row[j] = pose.values[j];
  return row;
}

void cmd_synth_data(const CommonOpts& common, const std::string& out,
                    const SynthConfig& synth) {
  const RunConfig cfg = resolve_config(common);
  const std::filesystem::path out_dir = out.empty() ? cfg.paths.data_dir : out;
  const auto manifest = make_synthetic_dataset(out_dir, synth);
  std::cout << manifest.string() << "\n";
}

void cmd_pairs_build(const CommonOpts& common, const std::string& manifest,
                     std::optional<double> min_distance,
                     const std::string& out) {
  const RunConfig cfg = resolve_config(common);
  const std::filesystem::path manifest_path =
      manifest.empty() ? std::filesystem::path(cfg.paths.data_dir) /
                             "manifest.tsv"
                       : std::filesystem::path(manifest);
  const DatasetIndex index = load_manifest(manifest_path);
  const double threshold =
      min_distance.value_or(cfg.trainer.pair_min_pose_distance);
  const std::vector<TrainingPair> pairs = build_pairs(index, threshold);

  std::ofstream file;
  std::ostream* sink = &std::cout;
  if (!out.empty()) {
    file.open(out, std::ios::binary);
    require(file.good(), Errc::missing_file,
            "cannot open " + out + " for writing");
    sink = &file;
  }
  for (const TrainingPair& p : pairs)
    *sink << index.entries[static_cast<size_t>(p.source)].image_path << '\t'
          << index.entries[static_cast<size_t>(p.target)].image_path << '\n';
  std::ostream& note = out.empty() ? std::cerr : std::cout;
  note << pairs.size() << " pairs from " << index.entries.size()
       << " images, " << index.num_identities << " identities\n";
}

void cmd_augment_preview(const CommonOpts& common, const std::string& image,
                         const std::string& out, int count) {
  require(count >= 1, Errc::usage_error, "--count must be at least 1");
  const RunConfig cfg = resolve_config(common);
  const std::filesystem::path out_dir =
      out.empty() ? std::filesystem::path(cfg.paths.out_dir) / "preview"
                  : std::filesystem::path(out);
  const Image img = load_png(image);
  const Augmenter augmenter(cfg.augment);
  std::filesystem::create_directories(out_dir);
  save_png(resize_and_pad(img, cfg.augment.target_height,
                          cfg.augment.target_width),
           out_dir / "canonical.png");
  for (int k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "preview_%03d.png", k);
    save_png(augmenter(img, static_cast<uint64_t>(k)), out_dir / name);
  }
  std::cout << out_dir.string() << "\n";
}

void cmd_train(const CommonOpts& common, bool no_augment,
               const std::string& resume) {
  RunConfig cfg = resolve_config(common);
  if (no_augment) cfg.trainer.augment = false;
  const auto manifest =
      std::filesystem::path(cfg.paths.data_dir) / "manifest.tsv";
  const DatasetIndex index = load_manifest(manifest);

  std::optional<Trainer> trainer;
  if (resume.empty()) {
    trainer.emplace(cfg.generator, cfg.discriminator, cfg.trainer, cfg.augment,
                    cfg.backbone);
  } else {
    // The checkpoint defines the architecture and hyperparameters; only the
    // target epoch count is taken from this invocation's config.
    trainer.emplace(Trainer::load_checkpoint(resume));
    trainer->set_epochs(cfg.trainer.epochs);
  }
  const int classes = trainer->discriminator().config().num_classes;
  require(classes == index.num_identities, Errc::config_error,
          "discriminator.num_classes (" + std::to_string(classes) +
              ") must equal the manifest identity count (" +
              std::to_string(index.num_identities) + "); set "
              "discriminator.num_classes = " +
              std::to_string(index.num_identities));

  trainer->fit(index, cfg.paths.out_dir);
  std::cout << "trained to epoch " << trainer->epoch() << " ("
            << trainer->step() << " steps); checkpoints in "
            << cfg.paths.out_dir << "\n";
  if (!trainer->history().empty()) {
    const HistoryRow& last = trainer->history().back();
    std::printf("last step: lr=%g L_D_bce=%.4f L_D_cce=%.4f L_G_rec=%.4f "
                "L_G_adv=%.4f\n",
                last.lr, last.d_bce, last.d_cce, last.g_rec, last.g_adv);
  }
}

void cmd_generate(const std::string& checkpoint, const std::string& image,
                  const std::string& pose, const std::string& out) {
  GeneratorBundle bundle = load_generator_bundle(checkpoint);
  const GeneratorConfig& gcfg = bundle.generator.config();
  const Image canonical =
      resize_and_pad(load_png(image), gcfg.out_height, gcfg.out_width);
  const Tensor desc = bundle.backbone->extract(image_to_net(canonical).reshaped(
      {1, 3, gcfg.out_height, gcfg.out_width}));
  const PoseVector target_pose = normalize_pose(load_keypoints(pose));
  const Tensor result =
      generate(bundle.generator, desc, pose_row(target_pose));
  std::filesystem::path out_path(out);
  if (out_path.has_parent_path())
    std::filesystem::create_directories(out_path.parent_path());
  save_png(net_to_image(result), out_path);
  std::cout << out_path.string() << "\n";
}

void cmd_evaluate(const CommonOpts& common, const std::string& checkpoint,
                  const std::string& manifest, const std::string& report_path) {
  const RunConfig cfg = resolve_config(common);
  const std::filesystem::path manifest_path =
      manifest.empty() ? std::filesystem::path(cfg.paths.data_dir) /
                             "manifest.tsv"
                       : std::filesystem::path(manifest);
  const DatasetIndex index = load_manifest(manifest_path);
  const std::vector<TrainingPair> pairs =
      build_pairs(index, cfg.trainer.pair_min_pose_distance);
  require(!pairs.empty(), Errc::config_error,
          "manifest yields no evaluation pairs");

  GeneratorBundle bundle = load_generator_bundle(checkpoint);
  const GeneratorConfig& gcfg = bundle.generator.config();

  // Identity classifier for the classifier-relative IS, fitted on the
  // manifest's real images at evaluation resolution.
  std::vector<Image> images;
  std::vector<int> labels;
  images.reserve(index.entries.size());
  for (const IndexEntry& entry : index.entries) {
    images.push_back(resize_and_pad(load_png(entry.image_path),
                                    gcfg.out_height, gcfg.out_width));
    labels.push_back(entry.identity);
  }
  const Tensor real = images_to_net(images);
  SmallClassifier classifier(index.num_identities, 7777);
  classifier.fit(real, labels);
  std::cerr << "classifier '" << classifier.kind() << "' train accuracy "
            << classifier.accuracy(real, labels) << "\n";

  MetricsReport report = evaluate(index, pairs, bundle.generator,
                                  *bundle.backbone, classifier, cfg.metrics);
  report.checkpoint_id = checkpoint + "#" + hex_id(bundle.checksum);

  std::cout << report_table(report) << "\n";
  const std::filesystem::path out_path =
      report_path.empty()
          ? std::filesystem::path(cfg.paths.out_dir) / "report.json"
          : std::filesystem::path(report_path);
  if (out_path.has_parent_path())
    std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary);
  require(out.good(), Errc::missing_file,
          "cannot open " + out_path.string() + " for writing");
  out << report_json(report).dump(2) << "\n";
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"Pose-guided person image synthesis", "ptgan"};
  app.require_subcommand(1);

  // synth-data
  auto* sd = app.add_subcommand(
      "synth-data", "Render a procedural multi-identity pose dataset");
  CommonOpts sd_common;
  add_common(sd, sd_common);
  std::string sd_out;
  SynthConfig synth;
  int sd_size = 0;
  sd->add_option("--out", sd_out, "Dataset directory (default: paths.data_dir)");
  sd->add_option("--identities", synth.num_identities, "Number of identities")
      ->capture_default_str();
  sd->add_option("--images-per-identity", synth.images_per_identity,
                 "Images (poses) per identity")
      ->capture_default_str();
  sd->add_option("--height", synth.height, "Image height")
      ->capture_default_str();
  sd->add_option("--width", synth.width, "Image width")->capture_default_str();
  sd->add_option("--size", sd_size, "Set height and width together");
  sd->add_option("--seed", synth.seed, "Root seed")->capture_default_str();
  sd->callback([&] {
    if (sd_size > 0) {
      synth.height = sd_size;
      synth.width = sd_size;
    }
    cmd_synth_data(sd_common, sd_out, synth);
  });

  // pairs-build
  auto* pb = app.add_subcommand(
      "pairs-build", "Enumerate same-identity training pairs from a manifest");
  CommonOpts pb_common;
  add_common(pb, pb_common);
  std::string pb_manifest, pb_out;
  double pb_min_distance = 0.0;
  pb->add_option("--manifest", pb_manifest,
                 "Manifest path (default: paths.data_dir/manifest.tsv)");
  auto* pb_md_opt = pb->add_option(
      "--min-distance", pb_min_distance,
      "Minimum pose distance (default: trainer.pair_min_pose_distance)");
  pb->add_option("--out", pb_out, "Write pairs TSV here instead of stdout");
  pb->callback([&] {
    cmd_pairs_build(pb_common, pb_manifest,
                    pb_md_opt->count() ? std::optional<double>(pb_min_distance)
                                       : std::nullopt,
                    pb_out);
  });

  // augment-preview
  auto* ap = app.add_subcommand(
      "augment-preview", "Write augmented variants of one image");
  CommonOpts ap_common;
  add_common(ap, ap_common);
  std::string ap_image, ap_out;
  int ap_count = 8;
  ap->add_option("--image", ap_image, "Source PNG")->required();
  ap->add_option("--out", ap_out,
                 "Output directory (default: paths.out_dir/preview)");
  ap->add_option("--count", ap_count, "Number of variants")
      ->capture_default_str();
  ap->callback([&] { cmd_augment_preview(ap_common, ap_image, ap_out, ap_count); });

  // train
  auto* tr = app.add_subcommand("train", "Run the adversarial training loop");
  CommonOpts tr_common;
  add_common(tr, tr_common);
  bool tr_no_augment = false;
  std::string tr_resume;
  tr->add_flag("--no-augment", tr_no_augment,
               "Disable source augmentation (ablation arm)");
  tr->add_option("--resume", tr_resume, "Continue from a checkpoint file");
  tr->callback([&] { cmd_train(tr_common, tr_no_augment, tr_resume); });

  // generate
  auto* ge = app.add_subcommand(
      "generate", "Synthesize one image from a source image and a pose file");
  std::string ge_checkpoint, ge_image, ge_pose, ge_out;
  ge->add_option("--checkpoint", ge_checkpoint, "Trained checkpoint")
      ->required();
  ge->add_option("--image", ge_image, "Source appearance PNG")->required();
  ge->add_option("--pose", ge_pose, "Target pose keypoint JSON")->required();
  ge->add_option("--out", ge_out, "Output PNG path")->required();
  ge->callback([&] { cmd_generate(ge_checkpoint, ge_image, ge_pose, ge_out); });

  // evaluate
  auto* ev = app.add_subcommand(
      "evaluate", "Score a checkpoint on a manifest (SSIM and IS)");
  CommonOpts ev_common;
  add_common(ev, ev_common);
  std::string ev_checkpoint, ev_manifest, ev_report;
  ev->add_option("--checkpoint", ev_checkpoint, "Trained checkpoint")
      ->required();
  ev->add_option("--manifest", ev_manifest,
                 "Manifest path (default: paths.data_dir/manifest.tsv)");
  ev->add_option("--report", ev_report,
                 "Report JSON path (default: paths.out_dir/report.json)");
  ev->callback(
      [&] { cmd_evaluate(ev_common, ev_checkpoint, ev_manifest, ev_report); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.get_name() << ": " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::usage_error:
        return 2;
      case Errc::config_error:
        return 3;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ptgan
