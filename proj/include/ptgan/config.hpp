#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ptgan/augment.hpp"
#include "ptgan/backbone.hpp"
#include "ptgan/discriminator.hpp"
#include "ptgan/generator.hpp"
#include "ptgan/metrics.hpp"
#include "ptgan/trainer.hpp"

namespace ptgan {

struct PathsConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
};

struct RuntimeConfig {
  int workers = 1;
};

/// Full experiment description: one section per module plus paths.
struct RunConfig {
  BackboneConfig backbone;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  AugmentConfig augment;
  TrainerConfig trainer;
  EvalConfig metrics;
  PathsConfig paths;
  RuntimeConfig runtime;

  /// Per-section validation plus cross-section consistency (dims that must
  /// agree are reported with both offending key paths).
  void cross_validate() const;
};

/// All recognized `section.key` paths, for diagnostics and docs.
std::vector<std::string> config_key_paths();

/// Parse `[section]` / `key = value` lines over defaults. Blank lines and
/// lines starting with `#` or `;` are ignored. Unknown sections or keys are
/// ConfigErrors naming the key path.
RunConfig parse_config_text(const std::string& text);

RunConfig load_config(const std::filesystem::path& path);

/// Apply one `section.key=value` assignment (the --set flag).
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Environment overrides, applied after file and flags: PTGAN_OUT (when set
/// and nonempty) replaces paths.out_dir.
void apply_env_overrides(RunConfig& cfg);

}  // namespace ptgan
