#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "tvnet/autograd/variable.hpp"
#include "tvnet/core/resize.hpp"
#include "tvnet/core/tensor.hpp"

namespace tvnet {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor out = a.value();
  out.add_(b.value());
  return Var::from_op(std::move(out), {a, b}, [](GraphNode& self) {
    accumulate_grad(*self.parents[0], self.grad);
    accumulate_grad(*self.parents[1], self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "sub: shape mismatch");
  Tensor out = a.value();
  out.axpy_(-1.0, b.value());
  return Var::from_op(std::move(out), {a, b}, [](GraphNode& self) {
    accumulate_grad(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor g = self.grad;
      g.scale_(-1.0);
      accumulate_grad(*self.parents[1], g);
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](GraphNode& self) {
    GraphNode& pa = *self.parents[0];
    GraphNode& pb = *self.parents[1];
    const std::int64_t n = self.value.numel();
    if (pa.requires_grad) {
      Tensor g(pa.value.shape());
      for (std::int64_t i = 0; i < n; ++i) g[i] = self.grad[i] * pb.value[i];
      accumulate_grad(pa, g);
    }
    if (pb.requires_grad) {
      Tensor g(pb.value.shape());
      for (std::int64_t i = 0; i < n; ++i) g[i] = self.grad[i] * pa.value[i];
      accumulate_grad(pb, g);
    }
  });
}

inline Var divide(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "divide: shape mismatch");
  Tensor out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] / b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](GraphNode& self) {
    GraphNode& pa = *self.parents[0];
    GraphNode& pb = *self.parents[1];
    const std::int64_t n = self.value.numel();
    if (pa.requires_grad) {
      Tensor g(pa.value.shape());
      for (std::int64_t i = 0; i < n; ++i) g[i] = self.grad[i] / pb.value[i];
      accumulate_grad(pa, g);
    }
    if (pb.requires_grad) {
      Tensor g(pb.value.shape());
      for (std::int64_t i = 0; i < n; ++i) {
        double bv = pb.value[i];
        g[i] = -self.grad[i] * pa.value[i] / (bv * bv);
      }
      accumulate_grad(pb, g);
    }
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return Var::from_op(std::move(out), {a}, [](GraphNode& self) {
    accumulate_grad(*self.parents[0], self.grad);
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.scale_(s);
  return Var::from_op(std::move(out), {a}, [s](GraphNode& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.grad;
    g.scale_(s);
    accumulate_grad(*self.parents[0], g);
  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities
// ---------------------------------------------------------------------------

inline Var relu(const Var& a) {
  Tensor out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  return Var::from_op(std::move(out), {a}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    const std::int64_t n = self.value.numel();
    for (std::int64_t i = 0; i < n; ++i) g[i] = p.value[i] > 0.0 ? self.grad[i] : 0.0;
    accumulate_grad(p, g);
  });
}

inline Var absval(const Var& a) {
  Tensor out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::fabs(a.value()[i]);
  return Var::from_op(std::move(out), {a}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    const std::int64_t n = self.value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double x = p.value[i];
      g[i] = self.grad[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
    }
    accumulate_grad(p, g);
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(a.value()[i]);
  return Var::from_op(std::move(out), {a}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    const std::int64_t n = self.value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double s = self.value[i];
      g[i] = self.grad[i] * s * (1.0 - s);
    }
    accumulate_grad(p, g);
  });
}

// Per-pixel binary cross entropy on logits, the overflow-safe formulation:
// max(x,0) - x*y + log(1 + exp(-|x|)).
inline Var bce_with_logits(const Var& logits, const Tensor& target) {
  check(logits.shape() == target.shape(), "bce_with_logits: shape mismatch");
  Tensor out(logits.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    double x = logits.value()[i];
    double y = target[i];
    out[i] = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
  }
  Tensor y = target;
  return Var::from_op(std::move(out), {logits}, [y](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    const std::int64_t n = self.value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      g[i] = self.grad[i] * (sigmoid_scalar(p.value[i]) - y[i]);
    }
    accumulate_grad(p, g);
  });
}

// ---------------------------------------------------------------------------
// Structure: concatenation and broadcast gates
// ---------------------------------------------------------------------------

inline Var concat_channels(const std::vector<Var>& xs) {
  check(!xs.empty(), "concat_channels: empty input list");
  Shape s0 = xs[0].shape();
  int total_c = 0;
  for (const Var& x : xs) {
    const Shape& s = x.shape();
    check(s.n == s0.n && s.h == s0.h && s.w == s0.w,
          "concat_channels: spatial/batch mismatch");
    total_c += s.c;
  }
  Tensor out(Shape{s0.n, total_c, s0.h, s0.w});
  int c_off = 0;
  for (const Var& x : xs) {
    const Shape& s = x.shape();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
          for (int w = 0; w < s.w; ++w)
            out.at(n, c_off + c, y, w) = x.value().at(n, c, y, w);
    c_off += s.c;
  }
  return Var::from_op(std::move(out), xs, [](GraphNode& self) {
    int c_off = 0;
    for (auto& parent : self.parents) {
      const Shape& s = parent->value.shape();
      if (parent->requires_grad) {
        Tensor g(s);
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
              for (int w = 0; w < s.w; ++w)
                g.at(n, c, y, w) = self.grad.at(n, c_off + c, y, w);
        accumulate_grad(*parent, g);
      }
      c_off += s.c;
    }
  });
}

// x:(N,C,H,W) * gate:(N,C,1,1), broadcast over space.
inline Var mul_channel_gate(const Var& x, const Var& gate) {
  const Shape& xs = x.shape();
  const Shape& gs = gate.shape();
  check(gs.n == xs.n && gs.c == xs.c && gs.h == 1 && gs.w == 1,
        "mul_channel_gate: gate must be (N,C,1,1)");
  Tensor out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      double g = gate.value().at(n, c, 0, 0);
      for (int y = 0; y < xs.h; ++y)
        for (int w = 0; w < xs.w; ++w) out.at(n, c, y, w) = x.value().at(n, c, y, w) * g;
    }
  return Var::from_op(std::move(out), {x, gate}, [](GraphNode& self) {
    GraphNode& px = *self.parents[0];
    GraphNode& pg = *self.parents[1];
    const Shape& xs = px.value.shape();
    if (px.requires_grad) {
      Tensor g(xs);
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          double gv = pg.value.at(n, c, 0, 0);
          for (int y = 0; y < xs.h; ++y)
            for (int w = 0; w < xs.w; ++w) g.at(n, c, y, w) = self.grad.at(n, c, y, w) * gv;
        }
      accumulate_grad(px, g);
    }
    if (pg.requires_grad) {
      Tensor g(pg.value.shape());
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          double s = 0.0;
          for (int y = 0; y < xs.h; ++y)
            for (int w = 0; w < xs.w; ++w) s += self.grad.at(n, c, y, w) * px.value.at(n, c, y, w);
          g.at(n, c, 0, 0) = s;
        }
      accumulate_grad(pg, g);
    }
  });
}

// x:(N,C,H,W) * gate:(N,1,H,W), broadcast over channels.
inline Var mul_spatial_gate(const Var& x, const Var& gate) {
  const Shape& xs = x.shape();
  const Shape& gs = gate.shape();
  check(gs.n == xs.n && gs.c == 1 && gs.h == xs.h && gs.w == xs.w,
        "mul_spatial_gate: gate must be (N,1,H,W), got " + gs.str() + " for x " + xs.str());
  Tensor out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int y = 0; y < xs.h; ++y)
        for (int w = 0; w < xs.w; ++w)
          out.at(n, c, y, w) = x.value().at(n, c, y, w) * gate.value().at(n, 0, y, w);
  return Var::from_op(std::move(out), {x, gate}, [](GraphNode& self) {
    GraphNode& px = *self.parents[0];
    GraphNode& pg = *self.parents[1];
    const Shape& xs = px.value.shape();
    if (px.requires_grad) {
      Tensor g(xs);
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
          for (int y = 0; y < xs.h; ++y)
            for (int w = 0; w < xs.w; ++w)
              g.at(n, c, y, w) = self.grad.at(n, c, y, w) * pg.value.at(n, 0, y, w);
      accumulate_grad(px, g);
    }
    if (pg.requires_grad) {
      Tensor g(pg.value.shape());
      for (int n = 0; n < xs.n; ++n)
        for (int y = 0; y < xs.h; ++y)
          for (int w = 0; w < xs.w; ++w) {
            double s = 0.0;
            for (int c = 0; c < xs.c; ++c)
              s += self.grad.at(n, c, y, w) * px.value.at(n, c, y, w);
            g.at(n, 0, y, w) = s;
          }
      accumulate_grad(pg, g);
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)
// ---------------------------------------------------------------------------

namespace detail {

inline void im2col(const Tensor& x, int n, int kh, int kw, int stride, int pad,
                   int oh, int ow, RowMat& col) {
  const Shape& s = x.shape();
  const int K = s.c * kh * kw;
  const int M = oh * ow;
  col.resize(K, M);
  for (int c = 0; c < s.c; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const int row = (c * kh + ki) * kw + kj;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          const bool y_ok = iy >= 0 && iy < s.h;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            col(row, oy * ow + ox) =
                (y_ok && ix >= 0 && ix < s.w) ? x.at(n, c, iy, ix) : 0.0;
          }
        }
      }
    }
  }
}

inline void col2im_add(const RowMat& col, int n, int kh, int kw, int stride, int pad,
                       int oh, int ow, Tensor& dx) {
  const Shape& s = dx.shape();
  for (int c = 0; c < s.c; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const int row = (c * kh + ki) * kw + kj;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= s.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix < 0 || ix >= s.w) continue;
            dx.at(n, c, iy, ix) += col(row, oy * ow + ox);
          }
        }
      }
    }
  }
}

}  // namespace detail

// weight:(Cout,Cin,kh,kw); bias:(1,Cout,1,1) or an undefined Var for none.
inline Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  check(ws.c == xs.c, "conv2d: input has " + std::to_string(xs.c) +
                          " channels but weight expects " + std::to_string(ws.c));
  check(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int kh = ws.h, kw = ws.w;
  const int oh = (xs.h + 2 * pad - kh) / stride + 1;
  const int ow = (xs.w + 2 * pad - kw) / stride + 1;
  check(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");
  const bool has_bias = bias.defined();
  if (has_bias) {
    check(bias.shape() == Shape{1, ws.n, 1, 1}, "conv2d: bias must be (1,Cout,1,1)");
  }

  const int K = xs.c * kh * kw;
  const int M = oh * ow;
  Tensor out(Shape{xs.n, ws.n, oh, ow});
  Eigen::Map<const RowMat> wmat(weight.value().data(), ws.n, K);
  RowMat col;
  for (int n = 0; n < xs.n; ++n) {
    detail::im2col(x.value(), n, kh, kw, stride, pad, oh, ow, col);
    Eigen::Map<RowMat> omat(out.data() + out.index(n, 0, 0, 0), ws.n, M);
    omat.noalias() = wmat * col;
    if (has_bias) {
      for (int co = 0; co < ws.n; ++co) omat.row(co).array() += bias.value().at(0, co, 0, 0);
    }
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  auto backprop = [stride, pad, kh, kw, oh, ow, has_bias](GraphNode& self) {
    GraphNode& px = *self.parents[0];
    GraphNode& pw = *self.parents[1];
    const Shape& xs = px.value.shape();
    const Shape& ws = pw.value.shape();
    const int K = xs.c * kh * kw;
    const int M = oh * ow;

    RowMat col;
    RowMat dW = RowMat::Zero(ws.n, K);
    Tensor dx;
    if (px.requires_grad) dx = Tensor::zeros(xs);
    Eigen::Map<const RowMat> wmat(pw.value.data(), ws.n, K);
    for (int n = 0; n < xs.n; ++n) {
      Eigen::Map<const RowMat> gmat(self.grad.data() + self.grad.index(n, 0, 0, 0), ws.n, M);
      if (pw.requires_grad || px.requires_grad) {
        detail::im2col(px.value, n, kh, kw, stride, pad, oh, ow, col);
      }
      if (pw.requires_grad) dW.noalias() += gmat * col.transpose();
      if (px.requires_grad) {
        RowMat dcol = wmat.transpose() * gmat;
        detail::col2im_add(dcol, n, kh, kw, stride, pad, oh, ow, dx);
      }
    }
    if (pw.requires_grad) {
      Tensor g(ws);
      Eigen::Map<RowMat>(g.data(), ws.n, K) = dW;
      accumulate_grad(pw, g);
    }
    if (px.requires_grad) accumulate_grad(px, dx);
    if (has_bias && self.parents[2]->requires_grad) {
      GraphNode& pb = *self.parents[2];
      Tensor g(pb.value.shape());
      for (int co = 0; co < ws.n; ++co) {
        double s = 0.0;
        for (int n = 0; n < xs.n; ++n) {
          const double* gp = self.grad.data() + self.grad.index(n, co, 0, 0);
          for (int i = 0; i < M; ++i) s += gp[i];
        }
        g.at(0, co, 0, 0) = s;
      }
      accumulate_grad(pb, g);
    }
  };
  return Var::from_op(std::move(out), std::move(inputs), std::move(backprop));
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

// Standard 2d batch norm. In training mode the batch statistics are used and
// the running buffers are updated in place; in eval mode the running buffers
// normalize. gamma/beta/running buffers all have shape (1,C,1,1).
inline Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
                      Tensor& running_mean, Tensor& running_var, bool training,
                      double momentum = 0.1, double eps = 1e-5) {
  const Shape& xs = x.shape();
  const Shape cs{1, xs.c, 1, 1};
  check(gamma.shape() == cs && beta.shape() == cs, "batch_norm: gamma/beta must be (1,C,1,1)");
  check(running_mean.shape() == cs && running_var.shape() == cs,
        "batch_norm: running stats must be (1,C,1,1)");
  const std::int64_t m = std::int64_t(xs.n) * xs.h * xs.w;

  Tensor mean(cs), invstd(cs);
  if (training) {
    for (int c = 0; c < xs.c; ++c) {
      double s = 0.0;
      for (int n = 0; n < xs.n; ++n)
        for (int y = 0; y < xs.h; ++y)
          for (int w = 0; w < xs.w; ++w) s += x.value().at(n, c, y, w);
      double mu = s / m;
      double v = 0.0;
      for (int n = 0; n < xs.n; ++n)
        for (int y = 0; y < xs.h; ++y)
          for (int w = 0; w < xs.w; ++w) {
            double d = x.value().at(n, c, y, w) - mu;
            v += d * d;
          }
      double var = v / m;
      mean.at(0, c, 0, 0) = mu;
      invstd.at(0, c, 0, 0) = 1.0 / std::sqrt(var + eps);
      double var_unbiased = m > 1 ? v / (m - 1) : var;
      running_mean.at(0, c, 0, 0) = (1.0 - momentum) * running_mean.at(0, c, 0, 0) + momentum * mu;
      running_var.at(0, c, 0, 0) = (1.0 - momentum) * running_var.at(0, c, 0, 0) + momentum * var_unbiased;
    }
  } else {
    for (int c = 0; c < xs.c; ++c) {
      mean.at(0, c, 0, 0) = running_mean.at(0, c, 0, 0);
      invstd.at(0, c, 0, 0) = 1.0 / std::sqrt(running_var.at(0, c, 0, 0) + eps);
    }
  }

  Tensor out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      double mu = mean.at(0, c, 0, 0);
      double is = invstd.at(0, c, 0, 0);
      double g = gamma.value().at(0, c, 0, 0);
      double b = beta.value().at(0, c, 0, 0);
      for (int y = 0; y < xs.h; ++y)
        for (int w = 0; w < xs.w; ++w)
          out.at(n, c, y, w) = (x.value().at(n, c, y, w) - mu) * is * g + b;
    }

  auto backprop = [mean, invstd, training, m](GraphNode& self) {
    GraphNode& px = *self.parents[0];
    GraphNode& pgamma = *self.parents[1];
    GraphNode& pbeta = *self.parents[2];
    const Shape& xs = px.value.shape();
    const Shape cs{1, xs.c, 1, 1};

    Tensor dgamma(cs), dbeta(cs);
    for (int c = 0; c < xs.c; ++c) {
      double mu = mean.at(0, c, 0, 0);
      double is = invstd.at(0, c, 0, 0);
      double sg = 0.0, sgx = 0.0;
      for (int n = 0; n < xs.n; ++n)
        for (int y = 0; y < xs.h; ++y)
          for (int w = 0; w < xs.w; ++w) {
            double g = self.grad.at(n, c, y, w);
            sg += g;
            sgx += g * (px.value.at(n, c, y, w) - mu) * is;
          }
      dbeta.at(0, c, 0, 0) = sg;
      dgamma.at(0, c, 0, 0) = sgx;
    }
    if (pbeta.requires_grad) accumulate_grad(pbeta, dbeta);
    if (pgamma.requires_grad) accumulate_grad(pgamma, dgamma);

    if (px.requires_grad) {
      Tensor dx(xs);
      for (int c = 0; c < xs.c; ++c) {
        double mu = mean.at(0, c, 0, 0);
        double is = invstd.at(0, c, 0, 0);
        double gm = pgamma.value.at(0, c, 0, 0);
        if (training) {
          double sum_dxhat = dbeta.at(0, c, 0, 0) * gm;
          double sum_dxhat_xhat = dgamma.at(0, c, 0, 0) * gm;
          for (int n = 0; n < xs.n; ++n)
            for (int y = 0; y < xs.h; ++y)
              for (int w = 0; w < xs.w; ++w) {
                double xhat = (px.value.at(n, c, y, w) - mu) * is;
                double dxhat = self.grad.at(n, c, y, w) * gm;
                dx.at(n, c, y, w) =
                    is * (dxhat - sum_dxhat / m - xhat * sum_dxhat_xhat / m);
              }
        } else {
          for (int n = 0; n < xs.n; ++n)
            for (int y = 0; y < xs.h; ++y)
              for (int w = 0; w < xs.w; ++w)
                dx.at(n, c, y, w) = self.grad.at(n, c, y, w) * gm * is;
        }
      }
      accumulate_grad(px, dx);
    }
  };
  return Var::from_op(std::move(out), {x, gamma, beta}, std::move(backprop));
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

inline Var resize_bilinear(const Var& x, int oh, int ow) {
  const Shape s = x.shape();
  if (oh == s.h && ow == s.w) return x;
  Tensor out = resize_bilinear_tensor(x.value(), oh, ow);
  return Var::from_op(std::move(out), {x}, [oh, ow](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    Tensor dx = Tensor::zeros(s);
    for (int oy = 0; oy < oh; ++oy) {
      BilinearTap ty = bilinear_tap(oy, s.h, oh);
      for (int ox = 0; ox < ow; ++ox) {
        BilinearTap tx = bilinear_tap(ox, s.w, ow);
        for (int n = 0; n < s.n; ++n)
          for (int c = 0; c < s.c; ++c) {
            double g = self.grad.at(n, c, oy, ox);
            dx.at(n, c, ty.i0, tx.i0) += g * (1.0 - ty.w1) * (1.0 - tx.w1);
            dx.at(n, c, ty.i0, tx.i1) += g * (1.0 - ty.w1) * tx.w1;
            dx.at(n, c, ty.i1, tx.i0) += g * ty.w1 * (1.0 - tx.w1);
            dx.at(n, c, ty.i1, tx.i1) += g * ty.w1 * tx.w1;
          }
      }
    }
    accumulate_grad(p, dx);
  });
}

// ---------------------------------------------------------------------------
// Pooling and reductions
// ---------------------------------------------------------------------------

inline Var global_avg_pool(const Var& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1});
  const double inv = 1.0 / (double(s.h) * s.w);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int y = 0; y < s.h; ++y)
        for (int w = 0; w < s.w; ++w) acc += x.value().at(n, c, y, w);
      out.at(n, c, 0, 0) = acc * inv;
    }
  return Var::from_op(std::move(out), {x}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    const double inv = 1.0 / (double(s.h) * s.w);
    Tensor g(s);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        double gv = self.grad.at(n, c, 0, 0) * inv;
        for (int y = 0; y < s.h; ++y)
          for (int w = 0; w < s.w; ++w) g.at(n, c, y, w) = gv;
      }
    accumulate_grad(p, g);
  });
}

inline Var global_max_pool(const Var& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1});
  std::vector<int> argmax(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double best = x.value().at(n, c, 0, 0);
      int best_i = 0;
      for (int y = 0; y < s.h; ++y)
        for (int w = 0; w < s.w; ++w) {
          double v = x.value().at(n, c, y, w);
          if (v > best) {
            best = v;
            best_i = y * s.w + w;
          }
        }
      out.at(n, c, 0, 0) = best;
      argmax[static_cast<std::size_t>(n) * s.c + c] = best_i;
    }
  return Var::from_op(std::move(out), {x}, [argmax](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    Tensor g = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        int i = argmax[static_cast<std::size_t>(n) * s.c + c];
        g.at(n, c, i / s.w, i % s.w) = self.grad.at(n, c, 0, 0);
      }
    accumulate_grad(p, g);
  });
}

inline Var channel_mean(const Var& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, 1, s.h, s.w});
  const double inv = 1.0 / s.c;
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int w = 0; w < s.w; ++w) {
        double acc = 0.0;
        for (int c = 0; c < s.c; ++c) acc += x.value().at(n, c, y, w);
        out.at(n, 0, y, w) = acc * inv;
      }
  return Var::from_op(std::move(out), {x}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    const double inv = 1.0 / s.c;
    Tensor g(s);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
          for (int w = 0; w < s.w; ++w) g.at(n, c, y, w) = self.grad.at(n, 0, y, w) * inv;
    accumulate_grad(p, g);
  });
}

inline Var channel_max(const Var& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, 1, s.h, s.w});
  std::vector<int> argmax(static_cast<std::size_t>(s.n) * s.h * s.w);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int w = 0; w < s.w; ++w) {
        double best = x.value().at(n, 0, y, w);
        int best_c = 0;
        for (int c = 1; c < s.c; ++c) {
          double v = x.value().at(n, c, y, w);
          if (v > best) {
            best = v;
            best_c = c;
          }
        }
        out.at(n, 0, y, w) = best;
        argmax[(static_cast<std::size_t>(n) * s.h + y) * s.w + w] = best_c;
      }
  return Var::from_op(std::move(out), {x}, [argmax](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    Tensor g = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int w = 0; w < s.w; ++w) {
          int c = argmax[(static_cast<std::size_t>(n) * s.h + y) * s.w + w];
          g.at(n, c, y, w) = self.grad.at(n, 0, y, w);
        }
    accumulate_grad(p, g);
  });
}

inline Var sum_per_sample(const Var& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, 1, 1, 1});
  const std::int64_t per = std::int64_t(s.c) * s.h * s.w;
  for (int n = 0; n < s.n; ++n) {
    double acc = 0.0;
    const double* p = x.value().data() + n * per;
    for (std::int64_t i = 0; i < per; ++i) acc += p[i];
    out.at(n, 0, 0, 0) = acc;
  }
  return Var::from_op(std::move(out), {x}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Shape& s = p.value.shape();
    const std::int64_t per = std::int64_t(s.c) * s.h * s.w;
    Tensor g(s);
    for (int n = 0; n < s.n; ++n) {
      double gv = self.grad.at(n, 0, 0, 0);
      double* gp = g.data() + n * per;
      for (std::int64_t i = 0; i < per; ++i) gp[i] = gv;
    }
    accumulate_grad(p, g);
  });
}

inline Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(x.value().sum());
  return Var::from_op(std::move(out), {x}, [](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g = Tensor::full(p.value.shape(), self.grad[0]);
    accumulate_grad(p, g);
  });
}

inline Var mean_all(const Var& x) {
  const double inv = 1.0 / x.value().numel();
  Tensor out = Tensor::scalar(x.value().sum() * inv);
  return Var::from_op(std::move(out), {x}, [inv](GraphNode& self) {
    GraphNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g = Tensor::full(p.value.shape(), self.grad[0] * inv);
    accumulate_grad(p, g);
  });
}

}  // namespace tvnet
