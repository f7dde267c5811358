#include "ptgan/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ptgan/error.hpp"

namespace ptgan {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

long long parse_ll(const std::string& value, const std::string& key) {
  long long out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  require(ec == std::errc() && ptr == end, Errc::config_error,
          key + ": expected an integer, got '" + value + "'");
  return out;
}

int parse_int(const std::string& value, const std::string& key) {
  return static_cast<int>(parse_ll(value, key));
}

uint64_t parse_u64(const std::string& value, const std::string& key) {
  const long long v = parse_ll(value, key);
  require(v >= 0, Errc::config_error,
          key + ": expected a non-negative integer, got '" + value + "'");
  return static_cast<uint64_t>(v);
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    const double out = std::stod(value, &used);
    require(used == value.size(), Errc::config_error,
            key + ": expected a number, got '" + value + "'");
    return out;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(Errc::config_error,
         key + ": expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes" || value == "on")
    return true;
  if (value == "false" || value == "0" || value == "no" || value == "off")
    return false;
  fail(Errc::config_error,
       key + ": expected a boolean (true/false), got '" + value + "'");
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& value,
                                const std::string& key) {
  std::vector<int> out;
  for (const std::string& item : split_commas(value))
    out.push_back(parse_int(item, key));
  require(!out.empty(), Errc::config_error,
          key + ": expected a comma-separated integer list, got '" + value +
              "'");
  return out;
}

std::pair<double, double> parse_range(const std::string& value,
                                      const std::string& key) {
  const auto items = split_commas(value);
  require(items.size() == 2, Errc::config_error,
          key + ": expected 'low,high', got '" + value + "'");
  return {parse_double(items[0], key), parse_double(items[1], key)};
}

using Setter = std::function<void(RunConfig&, const std::string&,
                                  const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"backbone.kind",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.backbone.kind = v;
       }},
      {"backbone.weights_path",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.backbone.weights_path = v;
       }},
      {"backbone.dim",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.backbone.dim = parse_int(v, k);
       }},
      {"backbone.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.backbone.seed = parse_u64(v, k);
       }},

      {"generator.num_res_blocks",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.num_res_blocks = parse_int(v, k);
       }},
      {"generator.base_channels",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.base_channels = parse_int(v, k);
       }},
      {"generator.latent_h",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.latent_h = parse_int(v, k);
       }},
      {"generator.latent_w",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.latent_w = parse_int(v, k);
       }},
      {"generator.latent_c",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.latent_c = parse_int(v, k);
       }},
      {"generator.descriptor_dim",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.descriptor_dim = parse_int(v, k);
       }},
      {"generator.out_height",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.out_height = parse_int(v, k);
       }},
      {"generator.out_width",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.out_width = parse_int(v, k);
       }},
      {"generator.norm_kind",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.generator.norm_kind = v;
       }},
      {"generator.output_activation",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.generator.output_activation = v;
       }},
      {"generator.pose_include_confidence",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.pose_include_confidence = parse_bool(v, k);
       }},
      {"generator.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.generator.seed = parse_u64(v, k);
       }},

      {"discriminator.trunk_channels",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.trunk_channels = parse_int_list(v, k);
       }},
      {"discriminator.num_classes",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.num_classes = parse_int(v, k);
       }},
      {"discriminator.in_height",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.in_height = parse_int(v, k);
       }},
      {"discriminator.in_width",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.in_width = parse_int(v, k);
       }},
      {"discriminator.leaky_slope",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.leaky_slope = parse_double(v, k);
       }},
      {"discriminator.classify_fake",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.classify_fake = parse_bool(v, k);
       }},
      {"discriminator.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.discriminator.seed = parse_u64(v, k);
       }},

      {"augment.erase_prob",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.erase_prob = parse_double(v, k);
       }},
      {"augment.erase_area_range",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.erase_area_range = parse_range(v, k);
       }},
      {"augment.crop_scale_range",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.crop_scale_range = parse_range(v, k);
       }},
      {"augment.jitter_strength",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.jitter_strength = parse_double(v, k);
       }},
      {"augment.jitter_hue_degrees",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.jitter_hue_degrees = parse_double(v, k);
       }},
      {"augment.flip_prob",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.flip_prob = parse_double(v, k);
       }},
      {"augment.distortion_grid",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.distortion_grid = parse_int(v, k);
       }},
      {"augment.distortion_magnitude",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.distortion_magnitude = parse_double(v, k);
       }},
      {"augment.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.seed = parse_u64(v, k);
       }},
      {"augment.erase_per_pixel_noise",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.erase_per_pixel_noise = parse_bool(v, k);
       }},
      {"augment.target_height",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.target_height = parse_int(v, k);
       }},
      {"augment.target_width",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.target_width = parse_int(v, k);
       }},
      {"augment.order",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.augment.order = split_commas(v);
       }},

      {"trainer.beta1",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.beta1 = parse_double(v, k);
       }},
      {"trainer.beta2",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.beta2 = parse_double(v, k);
       }},
      {"trainer.lr0",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.lr0 = parse_double(v, k);
       }},
      {"trainer.decay_factor",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.decay_factor = parse_double(v, k);
       }},
      {"trainer.decay_every",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.decay_every = parse_int(v, k);
       }},
      {"trainer.batch_size",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.batch_size = parse_int(v, k);
       }},
      {"trainer.lambda_rec",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.lambda_rec = parse_double(v, k);
       }},
      {"trainer.epochs",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.epochs = parse_int(v, k);
       }},
      {"trainer.seed",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.seed = parse_u64(v, k);
       }},
      {"trainer.augment",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.augment = parse_bool(v, k);
       }},
      {"trainer.adv_form",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.trainer.adv_form = v;
       }},
      {"trainer.pair_min_pose_distance",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.trainer.pair_min_pose_distance = parse_double(v, k);
       }},

      {"metrics.is_splits",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.metrics.is_splits = parse_int(v, k);
       }},

      {"paths.data_dir",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.paths.data_dir = v;
       }},
      {"paths.out_dir",
       [](RunConfig& c, const std::string& v, const std::string&) {
         c.paths.out_dir = v;
       }},

      {"runtime.workers",
       [](RunConfig& c, const std::string& v, const std::string& k) {
         c.runtime.workers = parse_int(v, k);
       }},
  };
  return table;
}

void set_key(RunConfig& cfg, const std::string& key_path,
             const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key_path);
  require(it != table.end(), Errc::config_error,
          "unknown config key '" + key_path + "'");
  it->second(cfg, value, key_path);
}

}  // namespace

std::vector<std::string> config_key_paths() {
  std::vector<std::string> out;
  out.reserve(setters().size());
  for (const auto& [key, setter] : setters()) out.push_back(key);
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      require(line.back() == ']', Errc::config_error,
              "line " + std::to_string(line_no) +
                  ": unterminated section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), Errc::config_error,
              "line " + std::to_string(line_no) + ": empty section header");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::config_error,
            "line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::config_error,
            "line " + std::to_string(line_no) + ": missing key before '='");
    require(!section.empty(), Errc::config_error,
            "line " + std::to_string(line_no) + ": key '" + key +
                "' appears before any [section] header");
    set_key(cfg, section + "." + key, value);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::config_error,
          "config file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, Errc::config_error,
          "--set expects section.key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  require(key.find('.') != std::string::npos, Errc::config_error,
          "--set expects section.key=value, got '" + assignment + "'");
  set_key(cfg, key, value);
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* out = std::getenv("PTGAN_OUT"); out && *out)
    cfg.paths.out_dir = out;
}

void RunConfig::cross_validate() const {
  require(backbone.kind == "test" || backbone.kind == "reference",
          Errc::config_error,
          "backbone.kind must be test or reference, got " + backbone.kind);
  require(backbone.dim >= 1, Errc::config_error,
          "backbone.dim must be at least 1");
  if (backbone.kind == "reference") {
    require(!backbone.weights_path.empty(), Errc::config_error,
            "backbone.weights_path is required when backbone.kind = reference");
    require(backbone.dim == 2048, Errc::config_error,
            "backbone.dim must be 2048 when backbone.kind = reference");
  }
  generator.validate();
  discriminator.validate();
  augment.validate();
  trainer.validate();
  require(metrics.is_splits >= 1, Errc::config_error,
          "metrics.is_splits must be at least 1");
  require(runtime.workers >= 1, Errc::config_error,
          "runtime.workers must be at least 1");

  require(generator.descriptor_dim == backbone.dim, Errc::config_error,
          "generator.descriptor_dim (" +
              std::to_string(generator.descriptor_dim) +
              ") does not match backbone.dim (" + std::to_string(backbone.dim) +
              ")");
  require(discriminator.in_height == generator.out_height &&
              discriminator.in_width == generator.out_width,
          Errc::config_error,
          "discriminator.in_height/in_width (" +
              std::to_string(discriminator.in_height) + "x" +
              std::to_string(discriminator.in_width) +
              ") do not match generator.out_height/out_width (" +
              std::to_string(generator.out_height) + "x" +
              std::to_string(generator.out_width) + ")");
  require(augment.target_height == generator.out_height &&
              augment.target_width == generator.out_width,
          Errc::config_error,
          "augment.target_height/target_width (" +
              std::to_string(augment.target_height) + "x" +
              std::to_string(augment.target_width) +
              ") do not match generator.out_height/out_width (" +
              std::to_string(generator.out_height) + "x" +
              std::to_string(generator.out_width) + ")");
}

}  // namespace ptgan
