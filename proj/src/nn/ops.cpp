// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace groupdet::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_enabled())
    for (const auto& in : inputs)
      if (in && in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.shape.size() != rank)
    throw ShapeMismatch(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                        shape_str(t.shape));
}

struct ConvGeom {
  int c, h, w, kh, kw, stride, pad, ho, wo;
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, const ConvGeom& g, double* x) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          const double* src = row + oy * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  expect_rank(x->value, 3, "conv2d input");
  expect_rank(weight->value, 4, "conv2d weight");
  const auto& ws = weight->value.shape;
  ConvGeom g{x->value.dim(0), x->value.dim(1), x->value.dim(2), ws[2], ws[3], stride, pad, 0, 0};
  if (ws[1] != g.c)
    throw ShapeMismatch("conv2d: weight expects " + std::to_string(ws[1]) + " channels, input has " +
                        std::to_string(g.c));
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw ShapeMismatch("conv2d: input smaller than kernel");
  const int out_c = ws[0];
  const int ck = g.c * g.kh * g.kw;
  const int plane = g.ho * g.wo;
  if (bias && bias->value.numel() != static_cast<std::size_t>(out_c))
    throw ShapeMismatch("conv2d: bias length mismatch");

  Tensor out({out_c, g.ho, g.wo});
  std::vector<double> cols;
  const double* colp = x->value.ptr();
  if (!g.pointwise()) {
    cols.resize(static_cast<std::size_t>(ck) * plane);
    im2col(x->value.ptr(), g, cols.data());
    colp = cols.data();
  }
  MapR(out.ptr(), out_c, plane).noalias() =
      CMapR(weight->value.ptr(), out_c, ck) * CMapR(colp, ck, plane);
  if (bias) {
    MapR o(out.ptr(), out_c, plane);
    for (int oc = 0; oc < out_c; ++oc) o.row(oc).array() += bias->value[oc];
  }

  return make_node(std::move(out), {x, weight, bias}, [g, out_c, ck, plane](Node& self) {
    const Var& xv = self.inputs[0];
    const Var& wv = self.inputs[1];
    const Var& bv = self.inputs[2];
    CMapR gy(self.grad.ptr(), out_c, plane);
    std::vector<double> cols;
    const double* colp = xv->value.ptr();
    if (!g.pointwise() && wv->requires_grad) {
      cols.resize(static_cast<std::size_t>(ck) * plane);
      im2col(xv->value.ptr(), g, cols.data());
      colp = cols.data();
    }
    if (wv->requires_grad)
      MapR(wv->grad_buffer().ptr(), out_c, ck).noalias() += gy * CMapR(colp, ck, plane).transpose();
    if (bv && bv->requires_grad) {
      Tensor& gb = bv->grad_buffer();
      for (int oc = 0; oc < out_c; ++oc) gb[oc] += gy.row(oc).sum();
    }
    if (xv->requires_grad) {
      if (g.pointwise()) {
        MapR(xv->grad_buffer().ptr(), ck, plane).noalias() +=
            CMapR(wv->value.ptr(), out_c, ck).transpose() * gy;
      } else {
        std::vector<double> dcols(static_cast<std::size_t>(ck) * plane);
        MapR(dcols.data(), ck, plane).noalias() = CMapR(wv->value.ptr(), out_c, ck).transpose() * gy;
        col2im(dcols.data(), g, xv->grad_buffer().ptr());
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data) v = v > 0 ? v : 0.0;
  return make_node(std::move(out), {x}, [](Node& self) {
    const Var& xv = self.inputs[0];
    Tensor& gx = xv->grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i)
      if (xv->value[i] > 0) gx[i] += self.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape)
    throw ShapeMismatch("add: " + shape_str(a->value.shape) + " vs " + shape_str(b->value.shape));
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (const Var& in : self.inputs) {
      if (!in->requires_grad) continue;
      Tensor& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int pad) {
  expect_rank(x->value, 3, "max_pool2d");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  Tensor out({c, ho, wo});
  std::vector<std::size_t> argmax(out.numel());
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            const std::size_t idx = (static_cast<std::size_t>(ch) * h + iy) * w + ix;
            if (x->value[idx] > best) {
              best = x->value[idx];
              best_i = idx;
            }
          }
        }
        out[o] = best;
        argmax[o] = best_i;
      }
  return make_node(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += self.grad[i];
  });
}

Var upsample_nearest(const Var& x, int rows, int cols) {
  expect_rank(x->value, 3, "upsample_nearest");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  std::vector<int> sy(rows), sx(cols);
  for (int y = 0; y < rows; ++y) sy[y] = std::min(h - 1, static_cast<int>(static_cast<long long>(y) * h / rows));
  for (int xx = 0; xx < cols; ++xx) sx[xx] = std::min(w - 1, static_cast<int>(static_cast<long long>(xx) * w / cols));
  Tensor out({c, rows, cols});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < rows; ++y)
      for (int xx = 0; xx < cols; ++xx) out.at(ch, y, xx) = x->value.at(ch, sy[y], sx[xx]);
  return make_node(std::move(out), {x}, [sy, sx, c](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < sy.size(); ++y)
        for (std::size_t xx = 0; xx < sx.size(); ++xx)
          gx.at(ch, sy[y], sx[xx]) += self.grad.at(ch, static_cast<int>(y), static_cast<int>(xx));
  });
}

Var subsample_pad(const Var& x, int stride, int channels) {
  expect_rank(x->value, 3, "subsample_pad");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (channels < c) throw ShapeMismatch("subsample_pad: cannot drop channels");
  const int ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
  Tensor out({channels, ho, wo});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) out.at(ch, y, xx) = x->value.at(ch, y * stride, xx * stride);
  return make_node(std::move(out), {x}, [c, ho, wo, stride](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) gx.at(ch, y * stride, xx * stride) += self.grad.at(ch, y, xx);
  });
}

namespace {

// Bilinear tap set for one sample point: four flat offsets and weights.
struct Tap {
  int idx[4];
  double w[4];
};

bool bilinear_tap(double y, double x, int h, int w, Tap& tap) {
  if (y < -1.0 || y > h || x < -1.0 || x > w) return false;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);
  int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  int y1, x1;
  if (y0 >= h - 1) {
    y0 = y1 = h - 1;
    y = y0;
  } else {
    y1 = y0 + 1;
  }
  if (x0 >= w - 1) {
    x0 = x1 = w - 1;
    x = x0;
  } else {
    x1 = x0 + 1;
  }
  const double ly = y - y0, lx = x - x0, hy = 1.0 - ly, hx = 1.0 - lx;
  tap.idx[0] = y0 * w + x0;
  tap.idx[1] = y0 * w + x1;
  tap.idx[2] = y1 * w + x0;
  tap.idx[3] = y1 * w + x1;
  tap.w[0] = hy * hx;
  tap.w[1] = hy * lx;
  tap.w[2] = ly * hx;
  tap.w[3] = ly * lx;
  return true;
}

}  // namespace

Var roi_align(const Var& feature, const std::vector<Box>& rois, double spatial_scale, int out,
              int sampling) {
  expect_rank(feature->value, 3, "roi_align");
  const int c = feature->value.dim(0), h = feature->value.dim(1), w = feature->value.dim(2);
  const int n_rois = static_cast<int>(rois.size());
  const int bins = out * out;
  const int per_bin = sampling * sampling;
  const double inv_count = 1.0 / per_bin;

  // taps[(r * bins + b) * per_bin + s]; valid flag in `live`.
  auto taps = std::make_shared<std::vector<Tap>>(static_cast<std::size_t>(n_rois) * bins * per_bin);
  auto live = std::make_shared<std::vector<char>>(taps->size(), 0);
  for (int r = 0; r < n_rois; ++r) {
    const Box& b = rois[r];
    const double x0 = b.x0 * spatial_scale - 0.5, y0 = b.y0 * spatial_scale - 0.5;
    const double rw = (b.x1 - b.x0) * spatial_scale, rh = (b.y1 - b.y0) * spatial_scale;
    if (!(rw > 0) || !(rh > 0)) continue;  // degenerate: zero output
    const double bw = rw / out, bh = rh / out;
    for (int py = 0; py < out; ++py)
      for (int px = 0; px < out; ++px)
        for (int iy = 0; iy < sampling; ++iy)
          for (int ix = 0; ix < sampling; ++ix) {
            const double sy = y0 + py * bh + (iy + 0.5) * bh / sampling;
            const double sx = x0 + px * bw + (ix + 0.5) * bw / sampling;
            const std::size_t t =
                (static_cast<std::size_t>(r) * bins + py * out + px) * per_bin + iy * sampling + ix;
            (*live)[t] = bilinear_tap(sy, sx, h, w, (*taps)[t]);
          }
  }

  Tensor result({n_rois, c, out, out});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int r = 0; r < n_rois; ++r)
    for (int ch = 0; ch < c; ++ch) {
      const double* f = feature->value.ptr() + ch * plane;
      double* dst = result.ptr() + (static_cast<std::size_t>(r) * c + ch) * bins;
      for (int b = 0; b < bins; ++b) {
        double acc = 0;
        const std::size_t base = (static_cast<std::size_t>(r) * bins + b) * per_bin;
        for (int s = 0; s < per_bin; ++s) {
          if (!(*live)[base + s]) continue;
          const Tap& tp = (*taps)[base + s];
          acc += tp.w[0] * f[tp.idx[0]] + tp.w[1] * f[tp.idx[1]] + tp.w[2] * f[tp.idx[2]] +
                 tp.w[3] * f[tp.idx[3]];
        }
        dst[b] = acc * inv_count;
      }
    }

  return make_node(std::move(result), {feature},
                   [taps, live, n_rois, c, bins, per_bin, plane, inv_count](Node& self) {
                     Tensor& gf = self.inputs[0]->grad_buffer();
                     for (int r = 0; r < n_rois; ++r)
                       for (int ch = 0; ch < c; ++ch) {
                         double* g = gf.ptr() + ch * plane;
                         const double* src =
                             self.grad.ptr() + (static_cast<std::size_t>(r) * c + ch) * bins;
                         for (int b = 0; b < bins; ++b) {
                           const double gv = src[b] * inv_count;
                           if (gv == 0) continue;
                           const std::size_t base = (static_cast<std::size_t>(r) * bins + b) * per_bin;
                           for (int s = 0; s < per_bin; ++s) {
                             if (!(*live)[base + s]) continue;
                             const Tap& tp = (*taps)[base + s];
                             for (int k = 0; k < 4; ++k) g[tp.idx[k]] += tp.w[k] * gv;
                           }
                         }
                       }
                   });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  expect_rank(x->value, 2, "linear input");
  expect_rank(weight->value, 2, "linear weight");
  const int n = x->value.dim(0), in = x->value.dim(1), out_f = weight->value.dim(0);
  if (weight->value.dim(1) != in)
    throw ShapeMismatch("linear: weight expects " + std::to_string(weight->value.dim(1)) +
                        " inputs, got " + std::to_string(in));
  Tensor out({n, out_f});
  MapR o(out.ptr(), n, out_f);
  o.noalias() = CMapR(x->value.ptr(), n, in) * CMapR(weight->value.ptr(), out_f, in).transpose();
  if (bias)
    for (int i = 0; i < n; ++i) o.row(i) += Eigen::Map<const Eigen::RowVectorXd>(bias->value.ptr(), out_f);
  return make_node(std::move(out), {x, weight, bias}, [n, in, out_f](Node& self) {
    const Var& xv = self.inputs[0];
    const Var& wv = self.inputs[1];
    const Var& bv = self.inputs[2];
    CMapR gy(self.grad.ptr(), n, out_f);
    if (wv->requires_grad)
      MapR(wv->grad_buffer().ptr(), out_f, in).noalias() += gy.transpose() * CMapR(xv->value.ptr(), n, in);
    if (bv && bv->requires_grad) {
      Tensor& gb = bv->grad_buffer();
      for (int j = 0; j < out_f; ++j) gb[j] += gy.col(j).sum();
    }
    if (xv->requires_grad)
      MapR(xv->grad_buffer().ptr(), n, in).noalias() += gy * CMapR(wv->value.ptr(), out_f, in);
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  if (Tensor::count(shape) != x->value.numel())
    throw ShapeMismatch("reshape " + shape_str(x->value.shape) + " -> " + shape_str(shape));
  Tensor out = x->value;
  out.shape = std::move(shape);
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const int d = parts.front()->value.dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    expect_rank(p->value, 2, "concat_rows");
    if (p->value.dim(1) != d) throw ShapeMismatch("concat_rows: column mismatch");
    rows += p->value.dim(0);
  }
  Tensor out({rows, d});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
    off += p->value.numel();
  }
  return make_node(std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    for (const Var& p : self.inputs) {
      const std::size_t n = p->value.numel();
      if (p->requires_grad) {
        Tensor& g = p->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var to_anchor_rows(const Var& x, int anchors, int k) {
  expect_rank(x->value, 3, "to_anchor_rows");
  const int ch = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (ch != anchors * k) throw ShapeMismatch("to_anchor_rows: channel count mismatch");
  Tensor out({h * w * anchors, k});
  for (int a = 0; a < anchors; ++a)
    for (int j = 0; j < k; ++j)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out[((static_cast<std::size_t>(y) * w + xx) * anchors + a) * k + j] = x->value.at(a * k + j, y, xx);
  return make_node(std::move(out), {x}, [anchors, k, h, w](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int a = 0; a < anchors; ++a)
      for (int j = 0; j < k; ++j)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx)
            gx.at(a * k + j, y, xx) += self.grad[((static_cast<std::size_t>(y) * w + xx) * anchors + a) * k + j];
  });
}

void softmax_rows(const Tensor& logits, Tensor& probs) {
  const int n = logits.dim(0), k = logits.dim(1);
  probs = Tensor({n, k});
  for (int i = 0; i < n; ++i) {
    const double* l = logits.ptr() + static_cast<std::size_t>(i) * k;
    double* p = probs.ptr() + static_cast<std::size_t>(i) * k;
    const double m = *std::max_element(l, l + k);
    double s = 0;
    for (int j = 0; j < k; ++j) s += (p[j] = std::exp(l[j] - m));
    for (int j = 0; j < k; ++j) p[j] /= s;
  }
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels, double normalizer) {
  expect_rank(logits->value, 2, "softmax_cross_entropy");
  const int n = logits->value.dim(0), k = logits->value.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ShapeMismatch("softmax_cross_entropy: label count");
  auto probs = std::make_shared<Tensor>();
  softmax_rows(logits->value, *probs);
  double loss = 0;
  for (int i = 0; i < n; ++i)
    if (labels[i] >= 0) loss -= std::log(std::max((*probs)[static_cast<std::size_t>(i) * k + labels[i]], 1e-300));
  Tensor out({1}, loss / normalizer);
  return make_node(std::move(out), {logits}, [probs, labels, n, k, normalizer](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const double s = self.grad[0] / normalizer;
    for (int i = 0; i < n; ++i) {
      if (labels[i] < 0) continue;
      for (int j = 0; j < k; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * k + j;
        g[idx] += s * ((*probs)[idx] - (j == labels[i] ? 1.0 : 0.0));
      }
    }
  });
}

Var smooth_l1(const Var& pred, const Tensor& target, const std::vector<double>& weights,
              double beta, double normalizer) {
  expect_rank(pred->value, 2, "smooth_l1");
  if (pred->value.shape != target.shape) throw ShapeMismatch("smooth_l1: target shape");
  const int n = pred->value.dim(0), k = pred->value.dim(1);
  if (static_cast<int>(weights.size()) != n) throw ShapeMismatch("smooth_l1: weight count");
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    if (weights[i] <= 0) continue;
    for (int j = 0; j < k; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * k + j;
      const double d = std::abs(pred->value[idx] - target[idx]);
      loss += weights[i] * (d < beta ? 0.5 * d * d / beta : d - 0.5 * beta);
    }
  }
  Tensor out({1}, loss / normalizer);
  return make_node(std::move(out), {pred}, [target, weights, beta, normalizer, n, k](Node& self) {
    const Var& pv = self.inputs[0];
    Tensor& g = pv->grad_buffer();
    const double s = self.grad[0] / normalizer;
    for (int i = 0; i < n; ++i) {
      if (weights[i] <= 0) continue;
      for (int j = 0; j < k; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * k + j;
        const double d = pv->value[idx] - target[idx];
        const double gd = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0);
        g[idx] += s * weights[i] * gd;
      }
    }
  });
}

Var sum_scalars(const std::vector<Var>& terms) {
  double s = 0;
  for (const auto& t : terms) s += t->value[0];
  return make_node(Tensor({1}, s), terms, [](Node& self) {
    for (const Var& t : self.inputs)
      if (t->requires_grad) t->grad_buffer()[0] += self.grad[0];
  });
}

}  // namespace groupdet::nn
