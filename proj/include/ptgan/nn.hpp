#pragma once

#include <string>
#include <vector>

#include "ptgan/rng.hpp"
#include "ptgan/tensor.hpp"

namespace ptgan::nn {

/// Named view onto a parameter and its gradient accumulator. Collections of
/// these drive the optimizer, checkpointing and the gradient checks.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// ---------------------------------------------------------------------------
// GEMM primitives. C is M×N.
// ---------------------------------------------------------------------------
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate);
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate);  // b given as N×K
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate);  // a given as K×M

// im2col geometry: src is C×H×W, patches of size k stride s zero-pad p,
// col is (C·k·k) × (out_h·out_w).
void im2col(const double* src, int channels, int h, int w, int k, int s, int p,
            int out_h, int out_w, double* col);
void col2im(const double* col, int channels, int h, int w, int k, int s, int p,
            int out_h, int out_w, double* dst);  // accumulates into dst

inline int conv_out_dim(int in, int k, int s, int p) {
  return (in + 2 * p - k) / s + 1;
}
inline int tconv_out_dim(int in, int k, int s, int p, int op) {
  return (in - 1) * s - 2 * p + k + op;
}

// ---------------------------------------------------------------------------
// Layers. Forward caches what backward needs unless cache=false.
// Backward accumulates into the layer's grad tensors and returns dL/dinput.
// ---------------------------------------------------------------------------

class Conv2d {
 public:
  Conv2d() = default;
  /// use_bias=false for convs feeding a normalization layer (the norm
  /// cancels a per-channel constant, leaving the bias without gradient).
  Conv2d(int cin, int cout, int k, int stride, int pad, bool use_bias = true);

  void init(RngStream& rng);
  Tensor forward(const Tensor& x, bool cache = true);
  /// Cache-free forward for frozen networks.
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  Tensor w;  // (cout, cin, k, k)
  Tensor b;  // (cout), empty when use_bias=false
  Tensor dw, db;
  int cin = 0, cout = 0, k = 0, stride = 1, pad = 0;
  bool use_bias = true;

 private:
  Tensor x_cache_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int cin, int cout, int k, int stride, int pad, int out_pad,
                  bool use_bias = true);

  void init(RngStream& rng);
  Tensor forward(const Tensor& x, bool cache = true);
  Tensor backward(const Tensor& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  Tensor w;  // (cin, cout, k, k)
  Tensor b;  // (cout), empty when use_bias=false
  Tensor dw, db;
  int cin = 0, cout = 0, k = 0, stride = 1, pad = 0, out_pad = 0;
  bool use_bias = true;

 private:
  Tensor x_cache_;
};

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out);

  void init(RngStream& rng);
  Tensor forward(const Tensor& x, bool cache = true);  // x: N×in
  Tensor backward(const Tensor& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  Tensor w;  // (out, in)
  Tensor b;  // (out)
  Tensor dw, db;
  int in = 0, out = 0;

 private:
  Tensor x_cache_;
};

/// Per-sample, per-channel normalization over spatial dims with learned
/// affine.
class InstanceNorm {
 public:
  InstanceNorm() = default;
  explicit InstanceNorm(int channels, double eps = 1e-5);

  void init();
  Tensor forward(const Tensor& x, bool cache = true);
  Tensor backward(const Tensor& dy);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  Tensor gamma, beta, dgamma, dbeta;
  int channels = 0;
  double eps = 1e-5;

 private:
  Tensor xhat_cache_;
  Tensor inv_std_cache_;  // (N, C)
};

class LeakyReLU {
 public:
  explicit LeakyReLU(double slope = 0.0) : slope(slope) {}
  Tensor forward(const Tensor& x, bool cache = true);
  Tensor backward(const Tensor& dy) const;
  double slope = 0.0;

 private:
  Tensor x_cache_;
};

class Tanh {
 public:
  Tensor forward(const Tensor& x, bool cache = true);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_cache_;
};

class MaxPool {
 public:
  MaxPool() = default;
  MaxPool(int k, int stride, int pad = 0) : k(k), stride(stride), pad(pad) {}
  Tensor forward(const Tensor& x, bool cache = true);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy) const;
  int k = 2, stride = 2, pad = 0;

 private:
  std::vector<int64_t> argmax_;
  std::vector<int> x_shape_;
};

class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x, bool cache = true);  // N×C×H×W -> N×C
  Tensor backward(const Tensor& dy) const;

 private:
  std::vector<int> x_shape_;
};

/// Inference-only batch norm folded to a per-channel affine (used by the
/// frozen reference backbone).
class FrozenBatchNorm {
 public:
  FrozenBatchNorm() = default;
  explicit FrozenBatchNorm(int channels, double eps = 1e-5);

  /// Fold (gamma, beta, running_mean, running_var) into scale/shift.
  void set_stats(const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                 const Tensor& var);
  Tensor forward(const Tensor& x) const;

  Tensor scale, shift;  // (C)
  int channels = 0;
  double eps = 1e-5;
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adam with bias correction; moment slots are addressed by parameter name
/// so optimizer state survives checkpoint round-trips.
class Adam {
 public:
  Adam() = default;
  Adam(double beta1, double beta2, double eps = 1e-8)
      : beta1(beta1), beta2(beta2), eps(eps) {}

  void step(double lr, const std::vector<ParamRef>& params);
  void zero_grads(const std::vector<ParamRef>& params) const;

  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  struct Slot {
    Tensor m, v;
  };
  std::vector<std::pair<std::string, Slot>> slots;  // first-use order

 private:
  Slot& slot_for(const ParamRef& p);
};

void check_finite(const Tensor& t, const std::string& context);

}  // namespace ptgan::nn
