// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dynavsr/tensor.hpp"

namespace dynavsr::ad {

// Define-by-run reverse-mode tape. Each operation appends a node holding the
// materialized value, the parent ids and a backward rule. Backward rules are
// expressed through tape operations themselves, so grad() with
// create_graph=true yields gradients that are differentiable again; that is
// what makes exact second-order meta-gradients possible.
//
// Nodes are created in topological order by construction (parents always
// exist before children), so the reverse sweep is a single descending pass.
template <typename S>
class Tape {
 public:
  using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowMatPtr = std::shared_ptr<const RowMat>;

  // Geometry of one (possibly spatio-temporal) convolution. Temporal stride
  // is always 1; spatial stride and zero padding are configurable.
  struct ConvGeom {
    int c = 1, t = 1, h = 1, w = 1;
    int kt = 1, kh = 1, kw = 1;
    int stride = 1;
    int pt = 0, ph = 0, pw = 0;

    int to() const { return t + 2 * pt - kt + 1; }
    int ho() const { return (h + 2 * ph - kh) / stride + 1; }
    int wo() const { return (w + 2 * pw - kw) / stride + 1; }
    long rows() const { return static_cast<long>(c) * kt * kh * kw; }
    long cols() const { return static_cast<long>(to()) * ho() * wo(); }
  };

  int leaf(Tensor<S> v, bool requires_grad = false) {
    Node nd;
    nd.v = std::move(v);
    nd.rg = requires_grad;
    n_.push_back(std::move(nd));
    return static_cast<int>(n_.size()) - 1;
  }

  int constant_scalar(S v) { return leaf(Tensor<S>::scalar(v), false); }

  const Tensor<S>& val(int id) const { return n_.at(id).v; }
  bool rg(int id) const { return n_.at(id).rg; }
  size_t node_count() const { return n_.size(); }
  void clear() { n_.clear(); }

  int detach(int a) { return leaf(n_.at(a).v, false); }

  // ---- elementwise ----

  int add(int a, int b) {
    same_shape(a, b, "add");
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data + n_[b].v.data;
    return push(std::move(out), a, b, [a, b](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? g : -1, t.rg(b) ? g : -1};
    });
  }

  int sub(int a, int b) {
    same_shape(a, b, "sub");
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data - n_[b].v.data;
    return push(std::move(out), a, b, [a, b](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? g : -1, t.rg(b) ? t.scale(g, S(-1)) : -1};
    });
  }

  int mul(int a, int b) {
    same_shape(a, b, "mul");
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data * n_[b].v.data;
    return push(std::move(out), a, b, [a, b](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? t.mul(g, b) : -1, t.rg(b) ? t.mul(g, a) : -1};
    });
  }

  int div(int a, int b) {
    same_shape(a, b, "div");
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data / n_[b].v.data;
    return push(std::move(out), a, b, [a, b](Tape& t, int self, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.div(g, b);
      if (t.rg(b)) r[1] = t.scale(t.mul(g, t.div(self, b)), S(-1));
      return r;
    });
  }

  int scale(int a, S c) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data * c;
    return push(std::move(out), a, -1, [a, c](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? t.scale(g, c) : -1, -1};
    });
  }

  int addc(int a, S c) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data + c;
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? g : -1, -1};
    });
  }

  int sqrt_(int a) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data.sqrt();
    return push(std::move(out), a, -1, [a](Tape& t, int self, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.div(t.scale(g, S(0.5)), self);
      return r;
    });
  }

  int square(int a) { return mul(a, a); }

  int abs_(int a) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data.abs();
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) {
        Tensor<S> sg(t.val(a).shape);
        sg.data = t.val(a).data.sign();
        r[0] = t.mul(g, t.leaf(std::move(sg), false));
      }
      return r;
    });
  }

  int relu(int a) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data.max(S(0));
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) {
        Tensor<S> mask(t.val(a).shape);
        mask.data = (t.val(a).data > S(0)).template cast<S>();
        r[0] = t.mul(g, t.leaf(std::move(mask), false));
      }
      return r;
    });
  }

  // Clamp to [-d, d]; the derivative of the Huber penalty.
  int clamp_sym(int a, S d) {
    Tensor<S> out(n_[a].v.shape);
    out.data = n_[a].v.data.min(d).max(-d);
    return push(std::move(out), a, -1, [a, d](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) {
        Tensor<S> mask(t.val(a).shape);
        mask.data = (t.val(a).data.abs() < d).template cast<S>();
        r[0] = t.mul(g, t.leaf(std::move(mask), false));
      }
      return r;
    });
  }

  // Elementwise Huber penalty: 0.5 x^2 inside [-d, d], d(|x| - d/2) outside.
  int huber_elem(int a, S d) {
    Tensor<S> out(n_[a].v.shape);
    out.data = (n_[a].v.data.abs() <= d)
                   .select(S(0.5) * n_[a].v.data.square(), d * (n_[a].v.data.abs() - S(0.5) * d));
    return push(std::move(out), a, -1, [a, d](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.mul(g, t.clamp_sym(a, d));
      return r;
    });
  }

  // ---- reductions and broadcasts ----

  int sum(int a) {
    Tensor<S> out = Tensor<S>::scalar(n_[a].v.data.sum());
    Shape src = n_[a].v.shape;
    return push(std::move(out), a, -1, [a, src](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.broadcast_like(g, src);
      return r;
    });
  }

  int broadcast_like(int a, Shape sh) {
    if (n_[a].v.numel() != 1) fail("broadcast_like: source must be scalar");
    Tensor<S> out = Tensor<S>::full(sh, n_[a].v.data[0]);
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? t.sum(g) : -1, -1};
    });
  }

  // ---- linear algebra ----

  int matmul(int a, int b) {
    const Shape &sa = n_[a].v.shape, &sb = n_[b].v.shape;
    if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0])
      fail("matmul: incompatible shapes " + sa.str() + " x " + sb.str());
    const int m = sa[0], k = sa[1], n = sb[1];
    Tensor<S> out(Shape{m, n});
    {
      Eigen::Map<const RowMat> ma(n_[a].v.ptr(), m, k), mb(n_[b].v.ptr(), k, n);
      Eigen::Map<RowMat> mo(out.ptr(), m, n);
      mo.noalias() = ma * mb;
    }
    return push(std::move(out), a, b, [a, b](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.matmul(g, t.transp(b));
      if (t.rg(b)) r[1] = t.matmul(t.transp(a), g);
      return r;
    });
  }

  int transp(int a) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 2) fail("transp: rank-2 tensor required");
    const int m = sa[0], n = sa[1];
    Tensor<S> out(Shape{n, m});
    {
      Eigen::Map<const RowMat> ma(n_[a].v.ptr(), m, n);
      Eigen::Map<RowMat> mo(out.ptr(), n, m);
      mo = ma.transpose();
    }
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      return std::array<int, 2>{t.rg(a) ? t.transp(g) : -1, -1};
    });
  }

  int reshape(int a, Shape sh) {
    if (sh.numel() != n_[a].v.numel())
      fail("reshape: cannot view " + n_[a].v.shape.str() + " as " + sh.str());
    Tensor<S> out(sh);
    out.data = n_[a].v.data;
    Shape src = n_[a].v.shape;
    return push(std::move(out), a, -1, [a, src](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.reshape(g, src);
      return r;
    });
  }

  int slice_flat(int a, long off, long len) {
    if (off < 0 || len < 0 || off + len > n_[a].v.numel()) fail("slice_flat: range out of bounds");
    Tensor<S> out(Shape{static_cast<int>(len)});
    out.data = n_[a].v.data.segment(off, len);
    Shape src = n_[a].v.shape;
    return push(std::move(out), a, -1, [a, off, len, src](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.reshape(t.scatter_flat(g, off, src.numel()), src);
      return r;
    });
  }

  int scatter_flat(int a, long off, long total) {
    if (off < 0 || off + n_[a].v.numel() > total) fail("scatter_flat: range out of bounds");
    Tensor<S> out(Shape{static_cast<int>(total)});
    out.data.segment(off, n_[a].v.numel()) = n_[a].v.data;
    long len = n_[a].v.numel();
    return push(std::move(out), a, -1, [a, off, len](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.slice_flat(g, off, len);
      return r;
    });
  }

  // ---- convolution support ----

  // Unfolds (C,T,H,W) into a (C*kt*kh*kw, To*Ho*Wo) patch matrix with zero
  // padding, so convolution reduces to one GEMM against the weight matrix.
  int im2col(int a, const ConvGeom& g) {
    check_geom(a, g);
    const int To = g.to(), Ho = g.ho(), Wo = g.wo();
    Tensor<S> out(Shape{static_cast<int>(g.rows()), static_cast<int>(g.cols())});
    const S* x = n_[a].v.ptr();
    S* o = out.ptr();
    const long cols = g.cols();
    long r = 0;
    for (int c = 0; c < g.c; ++c)
      for (int dt = 0; dt < g.kt; ++dt)
        for (int dh = 0; dh < g.kh; ++dh)
          for (int dw = 0; dw < g.kw; ++dw, ++r) {
            S* orow = o + r * cols;
            for (int t0 = 0; t0 < To; ++t0) {
              const int tt = t0 + dt - g.pt;
              for (int i = 0; i < Ho; ++i) {
                const int ii = i * g.stride + dh - g.ph;
                S* obase = orow + (static_cast<long>(t0) * Ho + i) * Wo;
                if (tt < 0 || tt >= g.t || ii < 0 || ii >= g.h) {
                  for (int j = 0; j < Wo; ++j) obase[j] = S(0);
                  continue;
                }
                const S* xrow = x + ((static_cast<long>(c) * g.t + tt) * g.h + ii) * g.w;
                for (int j = 0; j < Wo; ++j) {
                  const int jj = j * g.stride + dw - g.pw;
                  obase[j] = (jj >= 0 && jj < g.w) ? xrow[jj] : S(0);
                }
              }
            }
          }
    ConvGeom geom = g;
    return push(std::move(out), a, -1, [a, geom](Tape& t, int, int gr) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.col2im(gr, geom);
      return r;
    });
  }

  // Adjoint of im2col: folds a patch matrix back, accumulating overlaps.
  int col2im(int a, const ConvGeom& g) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 2 || sa[0] != g.rows() || sa[1] != g.cols())
      fail("col2im: patch matrix shape mismatch");
    const int To = g.to(), Ho = g.ho(), Wo = g.wo();
    Tensor<S> out(Shape{g.c, g.t, g.h, g.w});
    const S* cm = n_[a].v.ptr();
    S* x = out.ptr();
    const long cols = g.cols();
    long r = 0;
    for (int c = 0; c < g.c; ++c)
      for (int dt = 0; dt < g.kt; ++dt)
        for (int dh = 0; dh < g.kh; ++dh)
          for (int dw = 0; dw < g.kw; ++dw, ++r) {
            const S* crow = cm + r * cols;
            for (int t0 = 0; t0 < To; ++t0) {
              const int tt = t0 + dt - g.pt;
              if (tt < 0 || tt >= g.t) continue;
              for (int i = 0; i < Ho; ++i) {
                const int ii = i * g.stride + dh - g.ph;
                if (ii < 0 || ii >= g.h) continue;
                const S* cbase = crow + (static_cast<long>(t0) * Ho + i) * Wo;
                S* xrow = x + ((static_cast<long>(c) * g.t + tt) * g.h + ii) * g.w;
                for (int j = 0; j < Wo; ++j) {
                  const int jj = j * g.stride + dw - g.pw;
                  if (jj >= 0 && jj < g.w) xrow[jj] += cbase[j];
                }
              }
            }
          }
    ConvGeom geom = g;
    return push(std::move(out), a, -1, [a, geom](Tape& t, int, int gr) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.im2col(gr, geom);
      return r;
    });
  }

  int bias_add_rows(int a, int b) {
    const Shape &sa = n_[a].v.shape, &sb = n_[b].v.shape;
    if (sa.rank() != 2 || sb.rank() != 1 || sb[0] != sa[0]) fail("bias_add_rows: shape mismatch");
    const int m = sa[0], n = sa[1];
    Tensor<S> out(sa);
    for (int i = 0; i < m; ++i)
      out.data.segment(static_cast<long>(i) * n, n) =
          n_[a].v.data.segment(static_cast<long>(i) * n, n) + n_[b].v.data[i];
    return push(std::move(out), a, b, [a, b](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = g;
      if (t.rg(b)) r[1] = t.row_sum(g);
      return r;
    });
  }

  int row_sum(int a) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 2) fail("row_sum: rank-2 tensor required");
    const int m = sa[0], n = sa[1];
    Tensor<S> out(Shape{m});
    for (int i = 0; i < m; ++i) out.data[i] = n_[a].v.data.segment(static_cast<long>(i) * n, n).sum();
    return push(std::move(out), a, -1, [a, n](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.broadcast_cols(g, n);
      return r;
    });
  }

  int broadcast_cols(int a, int n) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 1) fail("broadcast_cols: rank-1 tensor required");
    const int m = sa[0];
    Tensor<S> out(Shape{m, n});
    for (int i = 0; i < m; ++i) out.data.segment(static_cast<long>(i) * n, n).setConstant(n_[a].v.data[i]);
    return push(std::move(out), a, -1, [a](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.row_sum(g);
      return r;
    });
  }

  // ---- structured spatial ops ----

  // Per-(channel, frame) separable linear resize: Y = A * X * Bt. The
  // adjoint is the same op with both operators transposed, so arbitrary
  // linear resampling (bicubic included) is differentiable to any order.
  int resize_hw(int a, RowMatPtr A, RowMatPtr Bt) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 4) fail("resize_hw: rank-4 tensor required");
    if (A->cols() != sa[2] || Bt->rows() != sa[3]) fail("resize_hw: operator size mismatch");
    const int C = sa[0], T = sa[1], H = sa[2], W = sa[3];
    const int H2 = static_cast<int>(A->rows()), W2 = static_cast<int>(Bt->cols());
    Tensor<S> out(Shape{C, T, H2, W2});
    for (int c = 0; c < C; ++c)
      for (int t0 = 0; t0 < T; ++t0) {
        Eigen::Map<const RowMat> x(n_[a].v.ptr() + (static_cast<long>(c) * T + t0) * H * W, H, W);
        Eigen::Map<RowMat> y(out.ptr() + (static_cast<long>(c) * T + t0) * H2 * W2, H2, W2);
        y.noalias() = (*A) * x * (*Bt);
      }
    return push(std::move(out), a, -1, [a, A, Bt](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) {
        auto At = std::make_shared<const RowMat>(A->transpose());
        auto B = std::make_shared<const RowMat>(Bt->transpose());
        r[0] = t.resize_hw(g, At, B);
      }
      return r;
    });
  }

  // (C*r^2, T, H, W) -> (C, T, H*r, W*r); channel c*r^2 + dy*r + dx lands on
  // subpixel (dy, dx).
  int pixel_shuffle(int a, int r) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 4 || sa[0] % (r * r) != 0) fail("pixel_shuffle: channels not divisible by r^2");
    const int C = sa[0] / (r * r), T = sa[1], H = sa[2], W = sa[3];
    Tensor<S> out(Shape{C, T, H * r, W * r});
    const S* x = n_[a].v.ptr();
    S* o = out.ptr();
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const int cin = (c * r + dy) * r + dx;
          for (int t0 = 0; t0 < T; ++t0)
            for (int i = 0; i < H; ++i) {
              const S* src = x + ((static_cast<long>(cin) * T + t0) * H + i) * W;
              S* dst = o + ((static_cast<long>(c) * T + t0) * (H * r) + (i * r + dy)) * (W * r) + dx;
              for (int j = 0; j < W; ++j) dst[static_cast<long>(j) * r] = src[j];
            }
        }
    return push(std::move(out), a, -1, [a, r](Tape& t, int, int g) {
      std::array<int, 2> rr{-1, -1};
      if (t.rg(a)) rr[0] = t.pixel_unshuffle(g, r);
      return rr;
    });
  }

  int pixel_unshuffle(int a, int r) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 4 || sa[2] % r != 0 || sa[3] % r != 0)
      fail("pixel_unshuffle: spatial dims not divisible by r");
    const int C = sa[0], T = sa[1], H = sa[2] / r, W = sa[3] / r;
    Tensor<S> out(Shape{C * r * r, T, H, W});
    const S* x = n_[a].v.ptr();
    S* o = out.ptr();
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const int cout = (c * r + dy) * r + dx;
          for (int t0 = 0; t0 < T; ++t0)
            for (int i = 0; i < H; ++i) {
              S* dst = o + ((static_cast<long>(cout) * T + t0) * H + i) * W;
              const S* src = x + ((static_cast<long>(c) * T + t0) * (H * r) + (i * r + dy)) * (W * r) + dx;
              for (int j = 0; j < W; ++j) dst[j] = src[static_cast<long>(j) * r];
            }
        }
    return push(std::move(out), a, -1, [a, r](Tape& t, int, int g) {
      std::array<int, 2> rr{-1, -1};
      if (t.rg(a)) rr[0] = t.pixel_shuffle(g, r);
      return rr;
    });
  }

  int slice_t(int a, int t0, int n) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 4 || t0 < 0 || n < 1 || t0 + n > sa[1]) fail("slice_t: range out of bounds");
    const int C = sa[0], T = sa[1], H = sa[2], W = sa[3];
    Tensor<S> out(Shape{C, n, H, W});
    const long hw = static_cast<long>(H) * W;
    for (int c = 0; c < C; ++c)
      out.data.segment(static_cast<long>(c) * n * hw, static_cast<long>(n) * hw) =
          n_[a].v.data.segment((static_cast<long>(c) * T + t0) * hw, static_cast<long>(n) * hw);
    return push(std::move(out), a, -1, [a, t0, n, T](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.pad_t(g, t0, T);
      return r;
    });
  }

  int pad_t(int a, int t0, int T) {
    const Shape& sa = n_[a].v.shape;
    if (sa.rank() != 4 || t0 < 0 || t0 + sa[1] > T) fail("pad_t: range out of bounds");
    const int C = sa[0], n = sa[1], H = sa[2], W = sa[3];
    Tensor<S> out(Shape{C, T, H, W});
    const long hw = static_cast<long>(H) * W;
    for (int c = 0; c < C; ++c)
      out.data.segment((static_cast<long>(c) * T + t0) * hw, static_cast<long>(n) * hw) =
          n_[a].v.data.segment(static_cast<long>(c) * n * hw, static_cast<long>(n) * hw);
    return push(std::move(out), a, -1, [a, t0, n](Tape& t, int, int g) {
      std::array<int, 2> r{-1, -1};
      if (t.rg(a)) r[0] = t.slice_t(g, t0, n);
      return r;
    });
  }

  // ---- differentiation ----

  // Reverse sweep from a scalar loss. Returns one gradient per wrt entry
  // (zeros when the loss does not depend on it). With create_graph=true the
  // returned ids stay connected to the tape and can be differentiated again;
  // otherwise they are detached constants.
  std::vector<int> grad(int loss, const std::vector<int>& wrt, bool create_graph = false) {
    if (loss < 0 || loss >= static_cast<int>(n_.size())) fail("grad: bad loss id");
    if (n_[loss].v.numel() != 1) fail("grad: loss must be scalar");
    const int limit = static_cast<int>(n_.size());
    std::vector<int> adj(limit, -1);
    if (n_[loss].rg) {
      adj[loss] = constant_scalar(S(1));
      for (int id = loss; id >= 0; --id) {
        if (adj[id] < 0 || !n_[id].rg || !n_[id].vjp) continue;
        const auto pars = n_[id].par;
        const auto fn = n_[id].vjp;  // copied: vjp calls may reallocate n_
        const auto pg = fn(*this, id, adj[id]);
        for (int k = 0; k < 2; ++k) {
          if (pars[k] < 0 || pg[k] < 0) continue;
          adj[pars[k]] = adj[pars[k]] < 0 ? pg[k] : add(adj[pars[k]], pg[k]);
        }
      }
    }
    std::vector<int> out;
    out.reserve(wrt.size());
    for (int w : wrt) {
      int g = (w >= 0 && w < limit) ? adj[w] : -1;
      if (g < 0) g = leaf(Tensor<S>::zeros(n_.at(w).v.shape), false);
      out.push_back(create_graph ? g : detach(g));
    }
    return out;
  }

 private:
  using VjpFn = std::function<std::array<int, 2>(Tape&, int, int)>;

  struct Node {
    Tensor<S> v;
    std::array<int, 2> par{-1, -1};
    VjpFn vjp;
    bool rg = false;
  };

  std::vector<Node> n_;

  [[noreturn]] static void fail(const std::string& msg) { throw std::logic_error("tape: " + msg); }

  void same_shape(int a, int b, const char* op) const {
    if (n_.at(a).v.shape != n_.at(b).v.shape)
      fail(std::string(op) + ": shape mismatch " + n_[a].v.shape.str() + " vs " + n_[b].v.shape.str());
  }

  void check_geom(int a, const ConvGeom& g) const {
    const Shape& sa = n_.at(a).v.shape;
    if (sa.rank() != 4 || sa[0] != g.c || sa[1] != g.t || sa[2] != g.h || sa[3] != g.w)
      fail("im2col: input shape " + sa.str() + " does not match geometry");
    if (g.to() < 1 || g.ho() < 1 || g.wo() < 1 || g.stride < 1) fail("im2col: degenerate geometry");
  }

  int push(Tensor<S> v, int p0, int p1, VjpFn f) {
    Node nd;
    nd.v = std::move(v);
    nd.par = {p0, p1};
    nd.rg = (p0 >= 0 && n_[p0].rg) || (p1 >= 0 && n_[p1].rg);
    if (nd.rg) nd.vjp = std::move(f);
    n_.push_back(std::move(nd));
    return static_cast<int>(n_.size()) - 1;
  }
};

}  // namespace dynavsr::ad
