#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptgan/augment.hpp"
#include "ptgan/image.hpp"
#include "ptgan/pose.hpp"

namespace ptgan {

/// One manifest row: an image, its identity label, and its keypoints
/// (parsed eagerly so pair construction is pure in-memory work).
struct IndexEntry {
  std::string image_path;
  std::string keypoint_path;
  int identity = 0;  // dense label in [0, num_identities)
  PoseKeypoints keypoints;
  PoseVector pose;  // normalized once at load
};

struct DatasetIndex {
  std::vector<IndexEntry> entries;
  int num_identities = 0;
};

/// Directed same-identity pair; fields index DatasetIndex::entries.
struct TrainingPair {
  int source = 0;
  int target = 0;
};

/// Parse a tab-separated manifest (`image_path\tidentity_id\tkeypoint_path`
/// per line). Relative paths resolve against the manifest's directory; raw
/// identity ids are remapped to dense labels by ascending value.
DatasetIndex load_manifest(const std::filesystem::path& manifest_path);

/// All directed pairs (a, b), a != b, same identity, with
/// pose_distance(a, b) > min_pose_distance. Deterministic order: ascending
/// identity, then source path, then target path. Pairs whose pose distance
/// is undefined (no shared visible joints) are skipped.
std::vector<TrainingPair> build_pairs(const DatasetIndex& index,
                                      double min_pose_distance = 0.0);

struct SynthConfig {
  int num_identities = 4;
  int images_per_identity = 4;
  int height = 256;
  int width = 256;
  uint64_t seed = 7;
};

/// Render a procedural stick-figure dataset into out_dir: PNG images,
/// keypoint files computed from the drawn skeleton, and a manifest.
/// Per-identity attributes (colors, head size, proportions) are constant
/// across that identity's images; joint angles vary per image.
/// Returns the manifest path.
std::filesystem::path make_synthetic_dataset(
    const std::filesystem::path& out_dir, const SynthConfig& cfg);

/// One training example: augmented source, target pose condition, canonical
/// target image, identity label.
struct Sample {
  Image source;       // augmented, target dims
  PoseVector target_pose;
  Image target;       // resize_and_pad only
  int identity = 0;
};

/// Load the pair's images from disk, augment the source (the sample index
/// selects the deterministic transform substream), canonicalize the target.
Sample load_sample(const DatasetIndex& index, const TrainingPair& pair,
                   const Augmenter& augmenter, uint64_t sample_index);

}  // namespace ptgan
