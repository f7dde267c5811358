#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ptgan/error.hpp"

namespace ptgan {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

/// Dense row-major double tensor. The whole pipeline runs in double
/// precision so finite-difference checks and metric closed forms hold at
/// tight tolerances.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // NCHW accessors for feature maps.
  double& at4(int n, int c, int h, int w) {
    return data_[idx4(n, c, h, w)];
  }
  double at4(int n, int c, int h, int w) const {
    return data_[idx4(n, c, h, w)];
  }
  double& at2(int r, int c) {
    return data_[static_cast<size_t>(r) * shape_[1] + c];
  }
  double at2(int r, int c) const {
    return data_[static_cast<size_t>(r) * shape_[1] + c];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void zero_() { fill(0.0); }

  Tensor reshaped(std::vector<int> shape) const {
    require(count(shape) == size(), Errc::dim_mismatch,
            "reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

 private:
  size_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] +
           w;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Stack two batches along dim 0; trailing dims must match.
inline Tensor concat_batch(const Tensor& a, const Tensor& b) {
  require(a.ndim() == b.ndim() && a.ndim() >= 1, Errc::dim_mismatch,
          "concat_batch rank mismatch");
  for (int i = 1; i < a.ndim(); ++i)
    require(a.dim(i) == b.dim(i), Errc::dim_mismatch,
            "concat_batch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  std::vector<int> shape = a.shape();
  shape[0] = a.dim(0) + b.dim(0);
  Tensor out(shape);
  std::copy_n(a.data(), a.size(), out.data());
  std::copy_n(b.data(), b.size(), out.data() + a.size());
  return out;
}

}  // namespace ptgan
