#pragma once

#include <array>
#include <filesystem>
#include <string>

namespace ptgan {

inline constexpr int kNumJoints = 25;
inline constexpr int kPoseVectorDim = kNumJoints * 3;

/// One BODY-25 joint in source-image pixel coordinates.
/// confidence == 0 marks an undetected joint.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool visible() const { return confidence > 0.0; }
  bool operator==(const Keypoint&) const = default;
};

/// 25 joints in BODY-25 order plus the dims of the image they were
/// detected in.
struct PoseKeypoints {
  std::array<Keypoint, kNumJoints> joints{};
  int height = 0;
  int width = 0;

  bool operator==(const PoseKeypoints&) const = default;
};

/// Flat 75-float conditioning vector: per joint (x_norm, y_norm, confidence),
/// coordinates normalized by source dims. Undetected joints are (0,0,0).
struct PoseVector {
  std::array<double, kPoseVectorDim> values{};

  double x(int joint) const { return values[joint * 3 + 0]; }
  double y(int joint) const { return values[joint * 3 + 1]; }
  double confidence(int joint) const { return values[joint * 3 + 2]; }

  bool operator==(const PoseVector&) const = default;
};

/// Parse a keypoint document: JSON object with `pose_keypoints_2d` (flat
/// array of 75 numbers), `image_height` and `image_width`.
PoseKeypoints parse_keypoints(const std::string& document);

/// Read + parse a keypoint file from disk.
PoseKeypoints load_keypoints(const std::filesystem::path& path);

/// Inverse of parse_keypoints; parse(serialize(kp)) == kp.
std::string serialize_keypoints(const PoseKeypoints& kp);

PoseVector normalize_pose(const PoseKeypoints& kp);

/// Mean Euclidean distance (in normalized coordinates) over joints visible
/// in both poses.
double pose_distance(const PoseVector& a, const PoseVector& b);

/// Number of joints visible in both poses.
int shared_visible_joints(const PoseVector& a, const PoseVector& b);

}  // namespace ptgan
