#include "ptgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "ptgan/error.hpp"

namespace ptgan::nn {

void check_finite(const Tensor& t, const std::string& context) {
  if (!t.all_finite())
    fail(Errc::non_finite_activation, "NaN/Inf in " + context);
}

// ---------------------------------------------------------------------------
// GEMM
// ---------------------------------------------------------------------------

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      if (accumulate)
        crow[j] += s;
      else
        crow[j] = s;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  for (int kk = 0; kk < k; ++kk) {
    const double* arow = a + static_cast<size_t>(kk) * m;
    const double* brow = b + static_cast<size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

void im2col(const double* src, int channels, int h, int w, int k, int s, int p,
            int out_h, int out_w, double* col) {
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v) {
        double* dst = col + ((static_cast<int64_t>(c) * k + u) * k + v) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s - p + u;
          if (iy < 0 || iy >= h) {
            std::memset(dst + static_cast<int64_t>(oy) * out_w, 0,
                        sizeof(double) * out_w);
            continue;
          }
          const double* srow = src + (static_cast<int64_t>(c) * h + iy) * w;
          double* drow = dst + static_cast<int64_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s - p + v;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int channels, int h, int w, int k, int s, int p,
            int out_h, int out_w, double* dst) {
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v) {
        const double* srcp =
            col + ((static_cast<int64_t>(c) * k + u) * k + v) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s - p + u;
          if (iy < 0 || iy >= h) continue;
          double* drow = dst + (static_cast<int64_t>(c) * h + iy) * w;
          const double* srow = srcp + static_cast<int64_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s - p + v;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int cin, int cout, int k, int stride, int pad, bool use_bias)
    : w({cout, cin, k, k}),
      dw({cout, cin, k, k}),
      cin(cin),
      cout(cout),
      k(k),
      stride(stride),
      pad(pad),
      use_bias(use_bias) {
  if (use_bias) {
    b = Tensor({cout});
    db = Tensor({cout});
  }
}

void Conv2d::init(RngStream& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
  if (use_bias) b.zero_();
}

Tensor Conv2d::forward(const Tensor& x, bool cache) {
  require(x.ndim() == 4 && x.dim(1) == cin, Errc::dim_mismatch,
          "conv2d input " + shape_str(x.shape()));
  const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(width, k, stride, pad);
  require(oh > 0 && ow > 0, Errc::dim_mismatch, "conv2d output would be empty");

  Tensor y({n, cout, oh, ow});
  const int ckk = cin * k * k;
  const int64_t plane = static_cast<int64_t>(oh) * ow;
  std::vector<double> col(static_cast<size_t>(ckk) * plane);
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<int64_t>(i) * cin * h * width, cin, h, width,
           k, stride, pad, oh, ow, col.data());
    double* yp = y.data() + static_cast<int64_t>(i) * cout * plane;
    mm_nn(w.data(), col.data(), yp, cout, ckk, static_cast<int>(plane), false);
    if (use_bias) {
      for (int co = 0; co < cout; ++co) {
        const double bias = b[co];
        double* row = yp + static_cast<int64_t>(co) * plane;
        for (int64_t j = 0; j < plane; ++j) row[j] += bias;
      }
    }
  }
  if (cache) x_cache_ = x;
  return y;
}

Tensor Conv2d::infer(const Tensor& x) const {
  return const_cast<Conv2d*>(this)->forward(x, false);
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  require(!x.empty(), Errc::dim_mismatch, "conv2d backward without forward");
  const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int ckk = cin * k * k;
  const int64_t plane = static_cast<int64_t>(oh) * ow;

  Tensor dx(x.shape());
  std::vector<double> col(static_cast<size_t>(ckk) * plane);
  std::vector<double> colg(static_cast<size_t>(ckk) * plane);
  for (int i = 0; i < n; ++i) {
    const double* dyp = dy.data() + static_cast<int64_t>(i) * cout * plane;
    // dW += dy · colᵀ
    im2col(x.data() + static_cast<int64_t>(i) * cin * h * width, cin, h, width,
           k, stride, pad, oh, ow, col.data());
    mm_nt(dyp, col.data(), dw.data(), cout, static_cast<int>(plane), ckk, true);
    if (use_bias) {
      // db += row sums of dy
      for (int co = 0; co < cout; ++co) {
        double s = 0.0;
        const double* row = dyp + static_cast<int64_t>(co) * plane;
        for (int64_t j = 0; j < plane; ++j) s += row[j];
        db[co] += s;
      }
    }
    // dX = col2im(Wᵀ · dy)
    mm_tn(w.data(), dyp, colg.data(), ckk, cout, static_cast<int>(plane), false);
    col2im(colg.data(), cin, h, width, k, stride, pad, oh, ow,
           dx.data() + static_cast<int64_t>(i) * cin * h * width);
  }
  return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w, &dw});
  if (use_bias) out.push_back({prefix + ".b", &b, &db});
}

// ---------------------------------------------------------------------------
// ConvTranspose2d
//
// Forward is the adjoint of a Conv2d with weight roles swapped, so the
// implementation reuses the conv primitives with input/output frames
// exchanged: forward = col2im path, input-backward = im2col path.
// ---------------------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(int cin, int cout, int k, int stride, int pad,
                                 int out_pad, bool use_bias)
    : w({cin, cout, k, k}),
      dw({cin, cout, k, k}),
      cin(cin),
      cout(cout),
      k(k),
      stride(stride),
      pad(pad),
      out_pad(out_pad),
      use_bias(use_bias) {
  if (use_bias) {
    b = Tensor({cout});
    db = Tensor({cout});
  }
}

void ConvTranspose2d::init(RngStream& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
  if (use_bias) b.zero_();
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool cache) {
  require(x.ndim() == 4 && x.dim(1) == cin, Errc::dim_mismatch,
          "conv_transpose2d input " + shape_str(x.shape()));
  const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
  const int oh = tconv_out_dim(h, k, stride, pad, out_pad);
  const int ow = tconv_out_dim(width, k, stride, pad, out_pad);
  require(oh > 0 && ow > 0, Errc::dim_mismatch,
          "conv_transpose2d output would be empty");

  Tensor y({n, cout, oh, ow});
  const int ckk = cout * k * k;
  const int64_t in_plane = static_cast<int64_t>(h) * width;
  const int64_t out_plane = static_cast<int64_t>(oh) * ow;
  std::vector<double> colg(static_cast<size_t>(ckk) * in_plane);
  for (int i = 0; i < n; ++i) {
    const double* xp = x.data() + static_cast<int64_t>(i) * cin * in_plane;
    double* yp = y.data() + static_cast<int64_t>(i) * cout * out_plane;
    mm_tn(w.data(), xp, colg.data(), ckk, cin, static_cast<int>(in_plane),
          false);
    col2im(colg.data(), cout, oh, ow, k, stride, pad, h, width, yp);
    if (use_bias) {
      for (int co = 0; co < cout; ++co) {
        const double bias = b[co];
        double* row = yp + static_cast<int64_t>(co) * out_plane;
        for (int64_t j = 0; j < out_plane; ++j) row[j] += bias;
      }
    }
  }
  if (cache) x_cache_ = x;
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  require(!x.empty(), Errc::dim_mismatch,
          "conv_transpose2d backward without forward");
  const int n = x.dim(0), h = x.dim(2), width = x.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int ckk = cout * k * k;
  const int64_t in_plane = static_cast<int64_t>(h) * width;
  const int64_t out_plane = static_cast<int64_t>(oh) * ow;

  Tensor dx(x.shape());
  std::vector<double> col(static_cast<size_t>(ckk) * in_plane);
  for (int i = 0; i < n; ++i) {
    const double* dyp = dy.data() + static_cast<int64_t>(i) * cout * out_plane;
    const double* xp = x.data() + static_cast<int64_t>(i) * cin * in_plane;
    im2col(dyp, cout, oh, ow, k, stride, pad, h, width, col.data());
    // dX = W · col(dy)
    mm_nn(w.data(), col.data(),
          dx.data() + static_cast<int64_t>(i) * cin * in_plane, cin, ckk,
          static_cast<int>(in_plane), false);
    // dW += x · col(dy)ᵀ
    mm_nt(xp, col.data(), dw.data(), cin, static_cast<int>(in_plane), ckk,
          true);
    if (use_bias) {
      for (int co = 0; co < cout; ++co) {
        double s = 0.0;
        const double* row = dyp + static_cast<int64_t>(co) * out_plane;
        for (int64_t j = 0; j < out_plane; ++j) s += row[j];
        db[co] += s;
      }
    }
  }
  return dx;
}

void ConvTranspose2d::collect(const std::string& prefix,
                              std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w, &dw});
  if (use_bias) out.push_back({prefix + ".b", &b, &db});
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in, int out)
    : w({out, in}), b({out}), dw({out, in}), db({out}), in(in), out(out) {}

void Linear::init(RngStream& rng) {
  const double std = std::sqrt(2.0 / in);
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
  b.zero_();
}

Tensor Linear::forward(const Tensor& x, bool cache) {
  require(x.ndim() == 2 && x.dim(1) == in, Errc::dim_mismatch,
          "linear input " + shape_str(x.shape()) + " expected (N," +
              std::to_string(in) + ")");
  const int n = x.dim(0);
  Tensor y({n, out});
  mm_nt(x.data(), w.data(), y.data(), n, in, out, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out; ++j) y.at2(i, j) += b[j];
  if (cache) x_cache_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  require(!x.empty(), Errc::dim_mismatch, "linear backward without forward");
  const int n = x.dim(0);
  Tensor dx({n, in});
  mm_nn(dy.data(), w.data(), dx.data(), n, out, in, false);
  mm_tn(dy.data(), x.data(), dw.data(), out, n, in, true);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out; ++j) db[j] += dy.at2(i, j);
  return dx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w, &dw});
  out.push_back({prefix + ".b", &b, &db});
}

// ---------------------------------------------------------------------------
// InstanceNorm
// ---------------------------------------------------------------------------

InstanceNorm::InstanceNorm(int channels, double eps)
    : gamma({channels}),
      beta({channels}),
      dgamma({channels}),
      dbeta({channels}),
      channels(channels),
      eps(eps) {}

void InstanceNorm::init() {
  gamma.fill(1.0);
  beta.zero_();
}

Tensor InstanceNorm::forward(const Tensor& x, bool cache) {
  require(x.ndim() == 4 && x.dim(1) == channels, Errc::dim_mismatch,
          "instance_norm input " + shape_str(x.shape()));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t m = static_cast<int64_t>(h) * w;
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  Tensor inv_std({n, channels});
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double* xp = x.data() + (static_cast<int64_t>(i) * channels + c) * m;
      double* yp = y.data() + (static_cast<int64_t>(i) * channels + c) * m;
      double* hp = xhat.data() + (static_cast<int64_t>(i) * channels + c) * m;
      double mean = 0.0;
      for (int64_t j = 0; j < m; ++j) mean += xp[j];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (int64_t j = 0; j < m; ++j) {
        const double d = xp[j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double istd = 1.0 / std::sqrt(var + eps);
      inv_std.at2(i, c) = istd;
      const double g = gamma[c], bb = beta[c];
      for (int64_t j = 0; j < m; ++j) {
        const double xh = (xp[j] - mean) * istd;
        hp[j] = xh;
        yp[j] = g * xh + bb;
      }
    }
  }
  if (cache) {
    xhat_cache_ = std::move(xhat);
    inv_std_cache_ = std::move(inv_std);
  }
  return y;
}

Tensor InstanceNorm::backward(const Tensor& dy) {
  const Tensor& xhat = xhat_cache_;
  require(!xhat.empty(), Errc::dim_mismatch,
          "instance_norm backward without forward");
  const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
  const int64_t m = static_cast<int64_t>(h) * w;
  Tensor dx(dy.shape());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      const int64_t base = (static_cast<int64_t>(i) * channels + c) * m;
      const double* dyp = dy.data() + base;
      const double* hp = xhat.data() + base;
      double* dxp = dx.data() + base;
      const double istd = inv_std_cache_.at2(i, c);
      const double g = gamma[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int64_t j = 0; j < m; ++j) {
        sum_dy += dyp[j];
        sum_dy_xhat += dyp[j] * hp[j];
      }
      dbeta[c] += sum_dy;
      dgamma[c] += sum_dy_xhat;
      const double inv_m = 1.0 / static_cast<double>(m);
      for (int64_t j = 0; j < m; ++j) {
        dxp[j] = g * istd *
                 (dyp[j] - inv_m * sum_dy - hp[j] * inv_m * sum_dy_xhat);
      }
    }
  }
  return dx;
}

void InstanceNorm::collect(const std::string& prefix,
                           std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma, &dgamma});
  out.push_back({prefix + ".beta", &beta, &dbeta});
}

// ---------------------------------------------------------------------------
// Activations / pooling
// ---------------------------------------------------------------------------

Tensor LeakyReLU::forward(const Tensor& x, bool cache) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i)
    y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  if (cache) x_cache_ = x;
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) const {
  const Tensor& x = x_cache_;
  require(x.same_shape(dy), Errc::dim_mismatch,
          "leaky_relu backward without matching forward");
  Tensor dx(dy.shape());
  for (int64_t i = 0; i < dy.size(); ++i)
    dx[i] = x[i] > 0.0 ? dy[i] : slope * dy[i];
  return dx;
}

Tensor Tanh::forward(const Tensor& x, bool cache) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  if (cache) y_cache_ = y;
  return y;
}

Tensor Tanh::backward(const Tensor& dy) const {
  const Tensor& y = y_cache_;
  require(y.same_shape(dy), Errc::dim_mismatch,
          "tanh backward without matching forward");
  Tensor dx(dy.shape());
  for (int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  return dx;
}

Tensor MaxPool::forward(const Tensor& x, bool cache) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  require(oh > 0 && ow > 0, Errc::dim_mismatch, "maxpool output would be empty");
  Tensor y({n, c, oh, ow});
  std::vector<int64_t> argmax(static_cast<size_t>(y.size()));
  int64_t oi = 0;
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.data() + (static_cast<int64_t>(i) * c + ch) *
                                        static_cast<int64_t>(h) * w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_idx = -1;
          for (int u = 0; u < k; ++u) {
            const int iy = oy * stride - pad + u;
            if (iy < 0 || iy >= h) continue;
            for (int v = 0; v < k; ++v) {
              const int ix = ox * stride - pad + v;
              if (ix < 0 || ix >= w) continue;
              const double val = xp[static_cast<int64_t>(iy) * w + ix];
              if (val > best) {
                best = val;
                best_idx = (static_cast<int64_t>(i) * c + ch) *
                               static_cast<int64_t>(h) * w +
                           static_cast<int64_t>(iy) * w + ix;
              }
            }
          }
          y[oi] = best;
          argmax[static_cast<size_t>(oi)] = best_idx;
        }
      }
    }
  }
  if (cache) {
    argmax_ = std::move(argmax);
    x_shape_ = x.shape();
  }
  return y;
}

Tensor MaxPool::infer(const Tensor& x) const {
  return const_cast<MaxPool*>(this)->forward(x, false);
}

Tensor MaxPool::backward(const Tensor& dy) const {
  Tensor dx(x_shape_);
  for (int64_t i = 0; i < dy.size(); ++i) {
    const int64_t src = argmax_[static_cast<size_t>(i)];
    if (src >= 0) dx[src] += dy[i];
  }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool cache) {
  const int n = x.dim(0), c = x.dim(1);
  const int64_t m = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, c});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.data() + (static_cast<int64_t>(i) * c + ch) * m;
      double s = 0.0;
      for (int64_t j = 0; j < m; ++j) s += xp[j];
      y.at2(i, ch) = s / static_cast<double>(m);
    }
  }
  if (cache) x_shape_ = x.shape();
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) const {
  Tensor dx(x_shape_);
  const int n = x_shape_[0], c = x_shape_[1];
  const int64_t m = static_cast<int64_t>(x_shape_[2]) * x_shape_[3];
  const double inv_m = 1.0 / static_cast<double>(m);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double g = dy.at2(i, ch) * inv_m;
      double* dxp = dx.data() + (static_cast<int64_t>(i) * c + ch) * m;
      for (int64_t j = 0; j < m; ++j) dxp[j] = g;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// FrozenBatchNorm
// ---------------------------------------------------------------------------

FrozenBatchNorm::FrozenBatchNorm(int channels, double eps)
    : scale({channels}), shift({channels}), channels(channels), eps(eps) {
  scale.fill(1.0);
}

void FrozenBatchNorm::set_stats(const Tensor& gamma, const Tensor& beta,
                                const Tensor& mean, const Tensor& var) {
  require(gamma.size() == channels && beta.size() == channels &&
              mean.size() == channels && var.size() == channels,
          Errc::dim_mismatch, "frozen_bn stats size");
  for (int c = 0; c < channels; ++c) {
    const double s = gamma[c] / std::sqrt(var[c] + eps);
    scale[c] = s;
    shift[c] = beta[c] - mean[c] * s;
  }
}

Tensor FrozenBatchNorm::forward(const Tensor& x) const {
  require(x.ndim() == 4 && x.dim(1) == channels, Errc::dim_mismatch,
          "frozen_bn input " + shape_str(x.shape()));
  const int n = x.dim(0);
  const int64_t m = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor y(x.shape());
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c) {
      const double s = scale[c], t = shift[c];
      const int64_t base = (static_cast<int64_t>(i) * channels + c) * m;
      for (int64_t j = 0; j < m; ++j) y[base + j] = x[base + j] * s + t;
    }
  return y;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Slot& Adam::slot_for(const ParamRef& p) {
  for (auto& [name, slot] : slots)
    if (name == p.name) return slot;
  slots.push_back({p.name, Slot{Tensor(p.value->shape()), Tensor(p.value->shape())}});
  return slots.back().second;
}

void Adam::step(double lr, const std::vector<ParamRef>& params) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (const ParamRef& p : params) {
    Slot& s = slot_for(p);
    Tensor& theta = *p.value;
    const Tensor& g = *p.grad;
    for (int64_t i = 0; i < theta.size(); ++i) {
      s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
      s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void Adam::zero_grads(const std::vector<ParamRef>& params) const {
  for (const ParamRef& p : params) p.grad->zero_();
}

}  // namespace ptgan::nn
