#pragma once

#include <doctest.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ptgan/error.hpp"
#include "ptgan/image.hpp"
#include "ptgan/rng.hpp"
#include "ptgan/tensor.hpp"

namespace testutil {

/// Unique self-cleaning directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& hint) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ptgan_" + hint + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void fill_uniform(ptgan::Tensor& t, ptgan::RngStream& rng,
                         double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

inline ptgan::Tensor random_tensor(std::vector<int> shape, uint64_t seed,
                                   double lo = -1.0, double hi = 1.0) {
  ptgan::Tensor t(std::move(shape));
  ptgan::RngStream rng(seed, "testutil/tensor");
  fill_uniform(t, rng, lo, hi);
  return t;
}

inline ptgan::Image random_image(int h, int w, uint64_t seed) {
  ptgan::Image img(h, w);
  ptgan::RngStream rng(seed, "testutil/image");
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

inline bool images_identical(const ptgan::Image& a, const ptgan::Image& b) {
  return a.height == b.height && a.width == b.width && a.pixels == b.pixels;
}

inline double image_max_abs_diff(const ptgan::Image& a, const ptgan::Image& b) {
  REQUIRE(a.height == b.height);
  REQUIRE(a.width == b.width);
  double m = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

inline double tensor_max_abs_diff(const ptgan::Tensor& a,
                                  const ptgan::Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const ptgan::Tensor& t) {
  double m = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t[i]));
  return m;
}

/// Central-difference derivative of loss() w.r.t. theta. loss() must redo the
/// full forward computation from current parameter values.
inline double central_diff(double& theta,
                           const std::function<double()>& loss) {
  const double orig = theta;
  const double h = 1e-5 * std::max(1.0, std::abs(orig));
  theta = orig + h;
  const double lp = loss();
  theta = orig - h;
  const double lm = loss();
  theta = orig;
  return (lp - lm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::filesystem::path& p,
                            const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

}  // namespace testutil

/// Asserts that expr throws ptgan::Error with the given code.
#define CHECK_THROWS_CODE(expr, errc_)                               \
  do {                                                               \
    bool caught_expected_ = false;                                   \
    try {                                                            \
      (void)(expr);                                                  \
    } catch (const ptgan::Error& e_) {                               \
      caught_expected_ = true;                                       \
      CHECK_MESSAGE(e_.code() == (errc_),                            \
                    #expr " threw wrong code: " << e_.what());       \
    }                                                                \
    CHECK_MESSAGE(caught_expected_, #expr " did not throw");         \
  } while (0)
