#include "ptgan/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base_dir, const std::string& raw) {
  fs::path p(raw);
  return p.is_absolute() ? p : base_dir / p;
}

int parse_identity(const std::string& field, int line_no) {
  long value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || value < 0)
    fail(Errc::malformed_document,
         "manifest line " + std::to_string(line_no) +
             ": identity_id must be a non-negative integer, got '" + field +
             "'");
  return static_cast<int>(value);
}

}  // namespace

DatasetIndex load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(Errc::missing_file, "cannot open " + manifest_path.string());
  const fs::path base_dir = manifest_path.parent_path();

  DatasetIndex index;
  std::vector<int> raw_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos)
      fail(Errc::malformed_document,
           "manifest line " + std::to_string(line_no) +
               ": expected image_path<TAB>identity_id<TAB>keypoint_path");
    IndexEntry entry;
    entry.image_path = resolve(base_dir, line.substr(0, t1)).string();
    entry.keypoint_path =
        resolve(base_dir, line.substr(t2 + 1)).string();
    if (entry.image_path.empty() || entry.keypoint_path.empty())
      fail(Errc::malformed_document,
           "manifest line " + std::to_string(line_no) + ": empty path field");
    raw_ids.push_back(
        parse_identity(line.substr(t1 + 1, t2 - t1 - 1), line_no));
    entry.keypoints = load_keypoints(entry.keypoint_path);
    entry.pose = normalize_pose(entry.keypoints);
    index.entries.push_back(std::move(entry));
  }

  std::vector<int> unique_ids = raw_ids;
  std::sort(unique_ids.begin(), unique_ids.end());
  unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()),
                   unique_ids.end());
  std::map<int, int> dense;
  for (size_t i = 0; i < unique_ids.size(); ++i)
    dense[unique_ids[i]] = static_cast<int>(i);
  for (size_t i = 0; i < index.entries.size(); ++i)
    index.entries[i].identity = dense[raw_ids[i]];
  index.num_identities = static_cast<int>(unique_ids.size());
  return index;
}

std::vector<TrainingPair> build_pairs(const DatasetIndex& index,
                                      double min_pose_distance) {
  std::map<int, std::vector<int>> by_identity;
  for (size_t i = 0; i < index.entries.size(); ++i)
    by_identity[index.entries[i].identity].push_back(static_cast<int>(i));

  std::vector<TrainingPair> pairs;
  for (auto& [identity, members] : by_identity) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      const IndexEntry& ea = index.entries[a];
      const IndexEntry& eb = index.entries[b];
      return std::tie(ea.image_path, ea.keypoint_path, a) <
             std::tie(eb.image_path, eb.keypoint_path, b);
    });
    for (int src : members) {
      for (int tgt : members) {
        if (src == tgt) continue;
        const PoseVector& a = index.entries[src].pose;
        const PoseVector& b = index.entries[tgt].pose;
        if (shared_visible_joints(a, b) == 0) continue;
        if (pose_distance(a, b) > min_pose_distance)
          pairs.push_back({src, tgt});
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Synthetic stick-figure renderer
// ---------------------------------------------------------------------------

namespace {

// BODY-25 joint indices. "R" is the subject's right, drawn at negative x.
enum Joint : int {
  kNose = 0, kNeck = 1, kRShoulder = 2, kRElbow = 3, kRWrist = 4,
  kLShoulder = 5, kLElbow = 6, kLWrist = 7, kMidHip = 8, kRHip = 9,
  kRKnee = 10, kRAnkle = 11, kLHip = 12, kLKnee = 13, kLAnkle = 14,
  kREye = 15, kLEye = 16, kREar = 17, kLEar = 18, kLBigToe = 19,
  kLSmallToe = 20, kLHeel = 21, kRBigToe = 22, kRSmallToe = 23, kRHeel = 24,
};

struct P {
  double x = 0.0;
  double y = 0.0;
};

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};

struct FigureStyle {
  double bg_shade;
  Rgb torso, limb, head;
  double head_radius;   // pixels
  double limb_radius;   // pixels
  double scale;         // overall limb/torso length multiplier
};

FigureStyle sample_style(uint64_t seed, int identity, double unit) {
  RngStream rng(seed, "synth/identity", static_cast<uint64_t>(identity));
  FigureStyle s;
  s.bg_shade = rng.uniform(0.05, 0.30);
  s.torso = {rng.uniform(0.35, 0.95), rng.uniform(0.35, 0.95),
             rng.uniform(0.35, 0.95)};
  s.limb = {rng.uniform(0.35, 0.95), rng.uniform(0.35, 0.95),
            rng.uniform(0.35, 0.95)};
  s.head = {rng.uniform(0.70, 0.95), rng.uniform(0.50, 0.80),
            rng.uniform(0.35, 0.60)};
  s.head_radius = rng.uniform(0.045, 0.070) * unit;
  s.limb_radius = rng.uniform(0.012, 0.020) * unit;
  s.scale = rng.uniform(0.90, 1.10);
  return s;
}

P down_at(const P& from, double angle, double length) {
  return {from.x + length * std::sin(angle), from.y + length * std::cos(angle)};
}

/// Joint positions for one rendered figure. Lengths scale with the shorter
/// image side so the figure fits tall crops as well as square canvases.
std::array<P, kNumJoints> sample_skeleton(uint64_t seed, uint64_t image_index,
                                          const FigureStyle& style, int height,
                                          int width) {
  RngStream rng(seed, "synth/pose", image_index);
  const double unit = std::min(height, width);
  const double s = style.scale * unit;
  constexpr double deg = std::numbers::pi / 180.0;

  const double cx = 0.5 * width + rng.uniform(-0.05, 0.05) * unit;
  const double hip_y = 0.56 * height + rng.uniform(-0.02, 0.02) * unit;
  const double lean = rng.uniform(-10.0, 10.0) * deg;

  std::array<P, kNumJoints> j{};
  const P up{std::sin(lean), -std::cos(lean)};
  const P right{std::cos(lean), std::sin(lean)};

  j[kMidHip] = {cx, hip_y};
  const double torso_len = 0.24 * s;
  j[kNeck] = {cx + up.x * torso_len, hip_y + up.y * torso_len};
  const double sh = 0.085 * s, hh = 0.055 * s;
  j[kRShoulder] = {j[kNeck].x - right.x * sh, j[kNeck].y - right.y * sh};
  j[kLShoulder] = {j[kNeck].x + right.x * sh, j[kNeck].y + right.y * sh};
  j[kRHip] = {cx - right.x * hh, hip_y - right.y * hh};
  j[kLHip] = {cx + right.x * hh, hip_y + right.y * hh};

  const double upper_arm = 0.11 * s, forearm = 0.10 * s;
  const double thigh = 0.14 * s, shin = 0.13 * s;
  for (int side = 0; side < 2; ++side) {
    const int shoulder = side == 0 ? kRShoulder : kLShoulder;
    const int elbow = side == 0 ? kRElbow : kLElbow;
    const int wrist = side == 0 ? kRWrist : kLWrist;
    const double ua = rng.uniform(-75.0, 75.0) * deg;
    const double fa = ua + rng.uniform(-100.0, 100.0) * deg;
    j[elbow] = down_at(j[shoulder], ua, upper_arm);
    j[wrist] = down_at(j[elbow], fa, forearm);

    const int hip = side == 0 ? kRHip : kLHip;
    const int knee = side == 0 ? kRKnee : kLKnee;
    const int ankle = side == 0 ? kRAnkle : kLAnkle;
    const double ta = rng.uniform(-28.0, 28.0) * deg;
    const double sa = ta + rng.uniform(-45.0, 45.0) * deg;
    j[knee] = down_at(j[hip], ta, thigh);
    j[ankle] = down_at(j[knee], sa, shin);

    const double dir = side == 0 ? -1.0 : 1.0;
    const int big = side == 0 ? kRBigToe : kLBigToe;
    const int small = side == 0 ? kRSmallToe : kLSmallToe;
    const int heel = side == 0 ? kRHeel : kLHeel;
    j[big] = {j[ankle].x + dir * 0.045 * unit, j[ankle].y + 0.012 * unit};
    j[small] = {j[ankle].x + dir * 0.038 * unit, j[ankle].y + 0.016 * unit};
    j[heel] = {j[ankle].x - dir * 0.012 * unit, j[ankle].y + 0.012 * unit};
  }

  const double r = style.head_radius;
  const P head{j[kNeck].x + up.x * r * 1.25, j[kNeck].y + up.y * r * 1.25};
  j[kNose] = head;
  j[kREye] = {head.x - 0.35 * r, head.y - 0.15 * r};
  j[kLEye] = {head.x + 0.35 * r, head.y - 0.15 * r};
  j[kREar] = {head.x - 0.85 * r, head.y + 0.05 * r};
  j[kLEar] = {head.x + 0.85 * r, head.y + 0.05 * r};
  return j;
}

void draw_disc(Image& img, const P& c, double radius, const Rgb& color) {
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)));
  const int y1 = std::min(img.height - 1,
                          static_cast<int>(std::ceil(c.y + radius)));
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)));
  const int x1 = std::min(img.width - 1,
                          static_cast<int>(std::ceil(c.x + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      if (dx * dx + dy * dy > r2) continue;
      double* px = &img.pixels[(static_cast<size_t>(y) * img.width + x) * 3];
      px[0] = color.r;
      px[1] = color.g;
      px[2] = color.b;
    }
  }
}

void draw_capsule(Image& img, const P& a, const P& b, double radius,
                  const Rgb& color) {
  const int y0 = std::max(
      0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
  const int y1 = std::min(
      img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
  const int x0 = std::max(
      0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
  const int x1 = std::min(
      img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0.0 ? ((x - a.x) * vx + (y - a.y) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (a.x + t * vx), dy = y - (a.y + t * vy);
      if (dx * dx + dy * dy > r2) continue;
      double* px = &img.pixels[(static_cast<size_t>(y) * img.width + x) * 3];
      px[0] = color.r;
      px[1] = color.g;
      px[2] = color.b;
    }
  }
}

void fill_convex_quad(Image& img, const std::array<P, 4>& q,
                      const Rgb& color) {
  double min_x = q[0].x, max_x = q[0].x, min_y = q[0].y, max_y = q[0].y;
  for (const P& p : q) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(max_y)));
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(max_x)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool any_pos = false, any_neg = false;
      for (int e = 0; e < 4; ++e) {
        const P& a = q[e];
        const P& b = q[(e + 1) % 4];
        const double cross =
            (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
        any_pos |= cross > 0.0;
        any_neg |= cross < 0.0;
      }
      if (any_pos && any_neg) continue;
      double* px = &img.pixels[(static_cast<size_t>(y) * img.width + x) * 3];
      px[0] = color.r;
      px[1] = color.g;
      px[2] = color.b;
    }
  }
}

Image render_figure(const FigureStyle& s, const std::array<P, kNumJoints>& j,
                    int height, int width) {
  Image img;
  img.height = height;
  img.width = width;
  img.pixels.assign(static_cast<size_t>(height) * width * 3, s.bg_shade);

  // Arms render first so the torso probe pixel stays pure torso color.
  for (int side = 0; side < 2; ++side) {
    const int shoulder = side == 0 ? kRShoulder : kLShoulder;
    const int elbow = side == 0 ? kRElbow : kLElbow;
    const int wrist = side == 0 ? kRWrist : kLWrist;
    draw_capsule(img, j[shoulder], j[elbow], s.limb_radius, s.limb);
    draw_capsule(img, j[elbow], j[wrist], s.limb_radius, s.limb);
    const int hip = side == 0 ? kRHip : kLHip;
    const int knee = side == 0 ? kRKnee : kLKnee;
    const int ankle = side == 0 ? kRAnkle : kLAnkle;
    const int big = side == 0 ? kRBigToe : kLBigToe;
    draw_capsule(img, j[hip], j[knee], s.limb_radius, s.limb);
    draw_capsule(img, j[knee], j[ankle], s.limb_radius, s.limb);
    draw_capsule(img, j[ankle], j[big], s.limb_radius * 0.9, s.limb);
  }
  fill_convex_quad(
      img, {j[kRShoulder], j[kLShoulder], j[kLHip], j[kRHip]}, s.torso);
  draw_capsule(img, j[kNeck], j[kNose], s.limb_radius, s.head);
  draw_disc(img, j[kNose], s.head_radius, s.head);
  const double eye_r = std::max(1.5, 0.12 * s.head_radius);
  draw_disc(img, j[kREye], eye_r, {0.08, 0.08, 0.10});
  draw_disc(img, j[kLEye], eye_r, {0.08, 0.08, 0.10});
  return img;
}

PoseKeypoints skeleton_keypoints(const std::array<P, kNumJoints>& j,
                                 int height, int width) {
  PoseKeypoints kp;
  kp.height = height;
  kp.width = width;
  for (int i = 0; i < kNumJoints; ++i) {
    kp.joints[i].x = std::clamp(j[i].x, 0.0, static_cast<double>(width));
    kp.joints[i].y = std::clamp(j[i].y, 0.0, static_cast<double>(height));
    kp.joints[i].confidence = 1.0;
  }
  return kp;
}

std::string entry_stem(int identity, int image) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id%03d_%03d", identity, image);
  return buf;
}

}  // namespace

fs::path make_synthetic_dataset(const fs::path& out_dir,
                                const SynthConfig& cfg) {
  require(cfg.num_identities >= 1, Errc::config_error,
          "synth num_identities must be >= 1");
  require(cfg.images_per_identity >= 2, Errc::config_error,
          "synth images_per_identity must be >= 2");
  require(std::min(cfg.height, cfg.width) >= 32, Errc::config_error,
          "synth dims too small to render a figure");

  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "keypoints");
  const double unit = std::min(cfg.height, cfg.width);

  std::ostringstream manifest;
  for (int id = 0; id < cfg.num_identities; ++id) {
    const FigureStyle style = sample_style(cfg.seed, id, unit);
    for (int k = 0; k < cfg.images_per_identity; ++k) {
      const uint64_t image_index =
          static_cast<uint64_t>(id) * cfg.images_per_identity + k;
      const auto joints =
          sample_skeleton(cfg.seed, image_index, style, cfg.height, cfg.width);
      const Image img = render_figure(style, joints, cfg.height, cfg.width);
      const std::string stem = entry_stem(id, k);
      const std::string image_rel = "images/" + stem + ".png";
      const std::string kp_rel = "keypoints/" + stem + "_keypoints.json";
      save_png(img, out_dir / image_rel);
      std::ofstream kp_out(out_dir / kp_rel);
      if (!kp_out)
        fail(Errc::missing_file, "cannot write " + (out_dir / kp_rel).string());
      kp_out << serialize_keypoints(
                    skeleton_keypoints(joints, cfg.height, cfg.width))
             << '\n';
      manifest << image_rel << '\t' << id << '\t' << kp_rel << '\n';
    }
  }

  const fs::path manifest_path = out_dir / "manifest.tsv";
  std::ofstream out(manifest_path);
  if (!out) fail(Errc::missing_file, "cannot write " + manifest_path.string());
  out << manifest.str();
  return manifest_path;
}

Sample load_sample(const DatasetIndex& index, const TrainingPair& pair,
                   const Augmenter& augmenter, uint64_t sample_index) {
  const int n = static_cast<int>(index.entries.size());
  require(pair.source >= 0 && pair.source < n && pair.target >= 0 &&
              pair.target < n,
          Errc::dim_mismatch, "pair indices out of range");
  const IndexEntry& src = index.entries[pair.source];
  const IndexEntry& tgt = index.entries[pair.target];

  Sample sample;
  sample.source = augmenter(load_png(src.image_path), sample_index);
  sample.target = resize_and_pad(load_png(tgt.image_path),
                                 augmenter.config().target_height,
                                 augmenter.config().target_width);
  sample.target_pose = tgt.pose;
  sample.identity = tgt.identity;
  return sample;
}

}  // namespace ptgan
