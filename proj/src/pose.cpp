#include "ptgan/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ptgan/error.hpp"

namespace ptgan {

using json = nlohmann::json;

PoseKeypoints parse_keypoints(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    fail(Errc::malformed_document, e.what());
  }
  if (!doc.is_object() || !doc.contains("pose_keypoints_2d") ||
      !doc.contains("image_height") || !doc.contains("image_width"))
    fail(Errc::malformed_document,
         "expected object with pose_keypoints_2d, image_height, image_width");

  const json& arr = doc["pose_keypoints_2d"];
  if (!arr.is_array())
    fail(Errc::malformed_document, "pose_keypoints_2d must be an array");
  if (arr.size() != kPoseVectorDim)
    fail(Errc::wrong_joint_count,
         "expected " + std::to_string(kNumJoints) + " (x,y,c) triples, got " +
             std::to_string(arr.size() / 3.0));

  PoseKeypoints kp;
  try {
    kp.height = doc["image_height"].get<int>();
    kp.width = doc["image_width"].get<int>();
  } catch (const json::exception& e) {
    fail(Errc::malformed_document, e.what());
  }
  if (kp.height <= 0 || kp.width <= 0)
    fail(Errc::malformed_document, "image dims must be positive");

  for (int j = 0; j < kNumJoints; ++j) {
    double vals[3];
    for (int k = 0; k < 3; ++k) {
      const json& v = arr[static_cast<size_t>(j) * 3 + k];
      if (!v.is_number())
        fail(Errc::malformed_document, "non-numeric keypoint entry");
      vals[k] = v.get<double>();
    }
    if (vals[2] < 0.0)
      fail(Errc::negative_confidence,
           "joint " + std::to_string(j) + " has confidence " +
               std::to_string(vals[2]));
    Keypoint& joint = kp.joints[j];
    joint.confidence = std::min(vals[2], 1.0);
    if (joint.visible()) {
      // Detectors occasionally emit coordinates a hair outside the frame;
      // clamp so normalized coordinates stay in [0,1].
      joint.x = std::clamp(vals[0], 0.0, static_cast<double>(kp.width));
      joint.y = std::clamp(vals[1], 0.0, static_cast<double>(kp.height));
    } else {
      joint.x = 0.0;
      joint.y = 0.0;
    }
  }
  return kp;
}

PoseKeypoints load_keypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_keypoints(buf.str());
}

std::string serialize_keypoints(const PoseKeypoints& kp) {
  json arr = json::array();
  for (const Keypoint& j : kp.joints) {
    arr.push_back(j.x);
    arr.push_back(j.y);
    arr.push_back(j.confidence);
  }
  json doc;
  doc["pose_keypoints_2d"] = arr;
  doc["image_height"] = kp.height;
  doc["image_width"] = kp.width;
  return doc.dump();
}

PoseVector normalize_pose(const PoseKeypoints& kp) {
  require(kp.height > 0 && kp.width > 0, Errc::zero_dims,
          "source dims " + std::to_string(kp.height) + "x" +
              std::to_string(kp.width));
  PoseVector p;
  for (int j = 0; j < kNumJoints; ++j) {
    const Keypoint& joint = kp.joints[j];
    if (!joint.visible()) continue;  // stays (0,0,0)
    p.values[j * 3 + 0] = joint.x / kp.width;
    p.values[j * 3 + 1] = joint.y / kp.height;
    p.values[j * 3 + 2] = joint.confidence;
  }
  return p;
}

double pose_distance(const PoseVector& a, const PoseVector& b) {
  double sum = 0.0;
  int shared = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    if (a.confidence(j) <= 0.0 || b.confidence(j) <= 0.0) continue;
    double dx = a.x(j) - b.x(j);
    double dy = a.y(j) - b.y(j);
    sum += std::sqrt(dx * dx + dy * dy);
    ++shared;
  }
  if (shared == 0)
    fail(Errc::no_shared_visible_joints, "poses share no visible joints");
  return sum / shared;
}

int shared_visible_joints(const PoseVector& a, const PoseVector& b) {
  int shared = 0;
  for (int j = 0; j < kNumJoints; ++j)
    if (a.confidence(j) > 0.0 && b.confidence(j) > 0.0) ++shared;
  return shared;
}

}  // namespace ptgan
