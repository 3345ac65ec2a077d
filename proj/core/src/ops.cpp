#include "imloc/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "imloc/image_ops.hpp"

namespace imloc::ag {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Stride = Eigen::OuterStride<>;
using SMapMat = Eigen::Map<RowMat, 0, Stride>;
using CSMapMat = Eigen::Map<const RowMat, 0, Stride>;
using VecMap = Eigen::Map<Eigen::VectorXf>;
using CVecMap = Eigen::Map<const Eigen::VectorXf>;

// Sequential double accumulation; Eigen's vectorized sums peel by pointer
// alignment, which makes results depend on where a buffer landed.
float ordered_sum(const float* p, std::int64_t n) {
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += p[i];
  return static_cast<float>(acc);
}

void need_rank(const Var& v, std::size_t r, const char* what) {
  if (v.value().rank() != r) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                     shape_str(v.shape()));
  }
}

CMapMat as_mat(const Tensor& t, std::int64_t rows, std::int64_t cols) {
  return CMapMat(t.data(), rows, cols);
}
MapMat as_mat(Tensor& t, std::int64_t rows, std::int64_t cols) { return MapMat(t.data(), rows, cols); }

// Pointwise op helper: y = f(x), dy/dx = df(x, y).
template <typename F, typename DF>
Var pointwise(const Var& x, F f, DF df) {
  Tensor y(x.shape());
  const Tensor& xv = x.value();
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = f(xv[i]);
  auto xn = x.node();
  Tensor ycopy = grad_enabled() && x.requires_grad() ? y : Tensor();
  return make_result(std::move(y), {x}, [xn, ycopy = std::move(ycopy), df](const Tensor& g) {
    Tensor gx(xn->value.shape());
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] = g[i] * df(xn->value[i], ycopy[i]);
    xn->accumulate(gx);
  });
}

}  // namespace

Var linear(const Var& x, const Var& weight, const Var& bias) {
  need_rank(x, 2, "linear");
  need_rank(weight, 2, "linear weight");
  const auto n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.value().numel() != out) throw ShapeError("linear: bias size mismatch");
  Tensor y(Shape{n, out});
  auto Y = as_mat(y, n, out);
  Y.noalias() = as_mat(x.value(), n, in) * as_mat(weight.value(), out, in).transpose();
  if (bias.defined()) Y.rowwise() += CVecMap(bias.value().data(), out).transpose();
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  auto xn = x.node(), wn = weight.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  return make_result(std::move(y), std::move(inputs), [=](const Tensor& g) {
    auto G = as_mat(g, n, out);
    if (xn->requires_grad) {
      Tensor gx(Shape{n, in});
      as_mat(gx, n, in).noalias() = G * as_mat(wn->value, out, in);
      xn->accumulate(gx);
    }
    if (wn->requires_grad) {
      auto GW = as_mat(wn->grad_buffer(), out, in);
      GW.noalias() += G.transpose() * as_mat(xn->value, n, in);
    }
    if (bn && bn->requires_grad) {
      float* gb = bn->grad_buffer().data();
      const float* gr = g.data();
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t j = 0; j < out; ++j) gb[j] += gr[r * out + j];
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_shape(b.shape(), a.shape(), "add");
  Tensor y = a.value();
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] += b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_result(std::move(y), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(g);
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn](const Tensor& g) { xn->accumulate(g.reshaped(xn->value.shape())); });
}

Var scale(const Var& x, float s) {
  return pointwise(x, [s](float v) { return v * s; }, [s](float, float) { return s; });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  need_rank(x, 2, "layer_norm");
  const auto n = x.dim(0), c = x.dim(1);
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw ShapeError("layer_norm: affine size mismatch for " + shape_str(x.shape()));
  }
  Tensor y(x.shape()), xhat(x.shape());
  std::vector<float> rstd(static_cast<std::size_t>(n));
  const float* g = gamma.value().data();
  const float* b = beta.value().data();
  for (std::int64_t r = 0; r < n; ++r) {
    const float* xr = x.value().data() + r * c;
    double mean = 0;
    for (std::int64_t j = 0; j < c; ++j) mean += xr[j];
    mean /= static_cast<double>(c);
    double var = 0;
    for (std::int64_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(c);
    const auto rs = static_cast<float>(1.0 / std::sqrt(var + eps));
    rstd[static_cast<std::size_t>(r)] = rs;
    for (std::int64_t j = 0; j < c; ++j) {
      const float h = (xr[j] - static_cast<float>(mean)) * rs;
      xhat[r * c + j] = h;
      y[r * c + j] = h * g[j] + b[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result(std::move(y), {x, gamma, beta},
                     [=, xhat = std::move(xhat), rstd = std::move(rstd)](const Tensor& go) {
                       const float* gm = gn->value.data();
                       Tensor gx(Shape{n, c});
                       float* gg = gn->requires_grad ? gn->grad_buffer().data() : nullptr;
                       float* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
                       for (std::int64_t r = 0; r < n; ++r) {
                         const float* dy = go.data() + r * c;
                         const float* h = xhat.data() + r * c;
                         double s1 = 0, s2 = 0;
                         for (std::int64_t j = 0; j < c; ++j) {
                           const float d = dy[j] * gm[j];
                           s1 += d;
                           s2 += d * h[j];
                           if (gg) gg[j] += dy[j] * h[j];
                           if (gb) gb[j] += dy[j];
                         }
                         const auto m1 = static_cast<float>(s1 / static_cast<double>(c));
                         const auto m2 = static_cast<float>(s2 / static_cast<double>(c));
                         const float rs = rstd[static_cast<std::size_t>(r)];
                         for (std::int64_t j = 0; j < c; ++j) {
                           gx[r * c + j] = rs * (dy[j] * gm[j] - m1 - h[j] * m2);
                         }
                       }
                       if (xn->requires_grad) xn->accumulate(gx);
                     });
}

Var gelu(const Var& x) {
  constexpr float inv_sqrt2 = 0.70710678118654752f;
  constexpr float inv_sqrt_2pi = 0.39894228040143268f;
  return pointwise(
      x, [](float v) { return 0.5f * v * (1.0f + std::erf(v * inv_sqrt2)); },
      [](float v, float) {
        return 0.5f * (1.0f + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5f * v * v);
      });
}

Var relu(const Var& x) {
  return pointwise(
      x, [](float v) { return v > 0 ? v : 0.0f; }, [](float v, float) { return v > 0 ? 1.0f : 0.0f; });
}

Var sigmoid(const Var& x) {
  return pointwise(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); }, [](float, float y) { return y * (1 - y); });
}

Var multihead_attention(const Var& qkv, std::int64_t groups, std::int64_t seq, std::int64_t heads,
                        Tensor* probs_out) {
  need_rank(qkv, 2, "multihead_attention");
  const auto rows = qkv.dim(0), c3 = qkv.dim(1);
  if (c3 % 3 != 0 || rows != groups * seq) {
    throw ShapeError("multihead_attention: qkv " + shape_str(qkv.shape()) + " incompatible with " +
                     std::to_string(groups) + " groups of " + std::to_string(seq));
  }
  const auto c = c3 / 3;
  if (heads <= 0 || c % heads != 0) throw ShapeError("multihead_attention: channels not divisible by heads");
  const auto d = c / heads;
  const float sc = 1.0f / std::sqrt(static_cast<float>(d));
  const bool keep = (grad_enabled() && qkv.requires_grad()) || probs_out != nullptr;
  Tensor probs = keep ? Tensor(Shape{groups, heads, seq, seq}) : Tensor();
  Tensor out(Shape{rows, c});
  RowMat s(seq, seq);
  for (std::int64_t g = 0; g < groups; ++g) {
    const float* base = qkv.value().data() + g * seq * c3;
    for (std::int64_t h = 0; h < heads; ++h) {
      CSMapMat q(base + h * d, seq, d, Stride(c3));
      CSMapMat k(base + c + h * d, seq, d, Stride(c3));
      CSMapMat v(base + 2 * c + h * d, seq, d, Stride(c3));
      s.noalias() = (q * k.transpose()) * sc;
      for (std::int64_t i = 0; i < seq; ++i) {
        auto row = s.row(i);
        const float m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= ordered_sum(row.data(), seq);
      }
      SMapMat o(out.data() + g * seq * c + h * d, seq, d, Stride(c));
      o.noalias() = s * v;
      if (keep) MapMat(probs.data() + ((g * heads + h) * seq * seq), seq, seq) = s;
    }
  }
  if (probs_out) *probs_out = probs;
  auto qn = qkv.node();
  return make_result(std::move(out), {qkv}, [=, probs = std::move(probs)](const Tensor& go) {
    Tensor gqkv(Shape{rows, c3});
    RowMat dp(seq, seq), ds(seq, seq);
    for (std::int64_t g = 0; g < groups; ++g) {
      const float* base = qn->value.data() + g * seq * c3;
      float* gbase = gqkv.data() + g * seq * c3;
      for (std::int64_t h = 0; h < heads; ++h) {
        CSMapMat q(base + h * d, seq, d, Stride(c3));
        CSMapMat k(base + c + h * d, seq, d, Stride(c3));
        CSMapMat v(base + 2 * c + h * d, seq, d, Stride(c3));
        CMapMat p(probs.data() + ((g * heads + h) * seq * seq), seq, seq);
        CSMapMat dout(go.data() + g * seq * c + h * d, seq, d, Stride(c));
        SMapMat dq(gbase + h * d, seq, d, Stride(c3));
        SMapMat dk(gbase + c + h * d, seq, d, Stride(c3));
        SMapMat dv(gbase + 2 * c + h * d, seq, d, Stride(c3));
        dv.noalias() = p.transpose() * dout;
        dp.noalias() = dout * v.transpose();
        Eigen::VectorXf rs(seq);
        for (std::int64_t i = 0; i < seq; ++i) {
          double acc = 0;
          for (std::int64_t j = 0; j < seq; ++j) acc += double(dp(i, j)) * p(i, j);
          rs[i] = static_cast<float>(acc);
        }
        ds = p.array() * (dp.array().colwise() - rs.array());
        dq.noalias() = (ds * k) * sc;
        dk.noalias() = (ds.transpose() * q) * sc;
      }
    }
    qn->accumulate(gqkv);
  });
}

WindowLayout window_layout(std::int64_t height, std::int64_t width, std::int64_t window) {
  if (window <= 0) throw std::invalid_argument("window size must be positive");
  WindowLayout l;
  l.height = height;
  l.width = width;
  l.window = window;
  l.padded_h = (height + window - 1) / window * window;
  l.padded_w = (width + window - 1) / window * window;
  return l;
}

namespace {

// For each windowed row, the source grid row or -1 for padding.
std::vector<std::int64_t> window_index(const WindowLayout& l) {
  const auto ws = l.window;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(l.num_windows() * ws * ws));
  for (std::int64_t wy = 0; wy < l.windows_h(); ++wy)
    for (std::int64_t wx = 0; wx < l.windows_w(); ++wx)
      for (std::int64_t iy = 0; iy < ws; ++iy)
        for (std::int64_t ix = 0; ix < ws; ++ix) {
          const auto y = wy * ws + iy, x = wx * ws + ix;
          idx.push_back(y < l.height && x < l.width ? y * l.width + x : -1);
        }
  return idx;
}

}  // namespace

Var window_partition(const Var& tokens, const WindowLayout& layout) {
  need_rank(tokens, 2, "window_partition");
  if (tokens.dim(0) != layout.height * layout.width) {
    throw ShapeError("window_partition: token count does not match grid");
  }
  const auto c = tokens.dim(1);
  auto idx = window_index(layout);
  const auto n = static_cast<std::int64_t>(idx.size());
  Tensor out(Shape{n, c});
  for (std::int64_t r = 0; r < n; ++r) {
    const auto s = idx[static_cast<std::size_t>(r)];
    if (s >= 0) std::copy_n(tokens.value().data() + s * c, c, out.data() + r * c);
  }
  auto tn = tokens.node();
  return make_result(std::move(out), {tokens}, [tn, idx = std::move(idx), c, n](const Tensor& g) {
    Tensor gt(tn->value.shape());
    for (std::int64_t r = 0; r < n; ++r) {
      const auto s = idx[static_cast<std::size_t>(r)];
      if (s >= 0) std::copy_n(g.data() + r * c, c, gt.data() + s * c);
    }
    tn->accumulate(gt);
  });
}

Var window_unpartition(const Var& windows, const WindowLayout& layout) {
  need_rank(windows, 2, "window_unpartition");
  auto idx = window_index(layout);
  const auto n = static_cast<std::int64_t>(idx.size());
  if (windows.dim(0) != n) throw ShapeError("window_unpartition: row count does not match layout");
  const auto c = windows.dim(1);
  Tensor out(Shape{layout.height * layout.width, c});
  for (std::int64_t r = 0; r < n; ++r) {
    const auto s = idx[static_cast<std::size_t>(r)];
    if (s >= 0) std::copy_n(windows.value().data() + r * c, c, out.data() + s * c);
  }
  auto wn = windows.node();
  return make_result(std::move(out), {windows}, [wn, idx = std::move(idx), c, n](const Tensor& g) {
    Tensor gw(wn->value.shape());
    for (std::int64_t r = 0; r < n; ++r) {
      const auto s = idx[static_cast<std::size_t>(r)];
      if (s >= 0) std::copy_n(g.data() + s * c, c, gw.data() + r * c);
    }
    wn->accumulate(gw);
  });
}

Var tokens_to_chw(const Var& tokens, std::int64_t height, std::int64_t width) {
  need_rank(tokens, 2, "tokens_to_chw");
  if (tokens.dim(0) != height * width) throw ShapeError("tokens_to_chw: grid mismatch");
  const auto c = tokens.dim(1), hw = height * width;
  Tensor out(Shape{c, height, width});
  as_mat(out, c, hw) = as_mat(tokens.value(), hw, c).transpose();
  auto tn = tokens.node();
  return make_result(std::move(out), {tokens}, [tn, c, hw](const Tensor& g) {
    Tensor gt(Shape{hw, c});
    as_mat(gt, hw, c) = as_mat(g, c, hw).transpose();
    tn->accumulate(gt);
  });
}

namespace {

// Rows of the input needed to produce output rows [y0, y1).
void im2col_rows(const float* x, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t k,
                 std::int64_t pad, std::int64_t y0, std::int64_t y1, std::int64_t out_w, float* col) {
  const auto cols = (y1 - y0) * out_w;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t ky = 0; ky < k; ++ky)
      for (std::int64_t kx = 0; kx < k; ++kx) {
        float* dst = col + ((ch * k + ky) * k + kx) * cols;
        for (std::int64_t oy = y0; oy < y1; ++oy) {
          const auto iy = oy + ky - pad;
          float* drow = dst + (oy - y0) * out_w;
          if (iy < 0 || iy >= h) {
            std::fill_n(drow, out_w, 0.0f);
            continue;
          }
          const float* srow = x + (ch * h + iy) * w;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const auto ix = ox + kx - pad;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
          }
        }
      }
}

void col2im_rows(const float* col, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t k,
                 std::int64_t pad, std::int64_t y0, std::int64_t y1, std::int64_t out_w, float* gx) {
  const auto cols = (y1 - y0) * out_w;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t ky = 0; ky < k; ++ky)
      for (std::int64_t kx = 0; kx < k; ++kx) {
        const float* src = col + ((ch * k + ky) * k + kx) * cols;
        for (std::int64_t oy = y0; oy < y1; ++oy) {
          const auto iy = oy + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const float* srow = src + (oy - y0) * out_w;
          float* grow = gx + (ch * h + iy) * w;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const auto ix = ox + kx - pad;
            if (ix >= 0 && ix < w) grow[ix] += srow[ox];
          }
        }
      }
}

constexpr std::int64_t kColBudget = 8 << 20;  // floats per im2col chunk

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::int64_t pad) {
  need_rank(x, 3, "conv2d");
  need_rank(weight, 4, "conv2d weight");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto o = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c || weight.dim(3) != k) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.value().numel() != o) throw ShapeError("conv2d: bias size mismatch");
  const auto oh = h + 2 * pad - k + 1, ow = w + 2 * pad - k + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  const auto ckk = c * k * k;
  Tensor y(Shape{o, oh, ow});
  auto W = as_mat(weight.value(), o, ckk);
  const bool pointwise_conv = k == 1 && pad == 0;
  const auto chunk_rows = std::max<std::int64_t>(1, kColBudget / std::max<std::int64_t>(1, ckk * ow));
  if (pointwise_conv) {
    as_mat(y, o, oh * ow).noalias() = W * as_mat(x.value(), c, h * w);
  } else {
    std::vector<float> col;
    for (std::int64_t y0 = 0; y0 < oh; y0 += chunk_rows) {
      const auto y1 = std::min(oh, y0 + chunk_rows);
      const auto cols = (y1 - y0) * ow;
      col.resize(static_cast<std::size_t>(ckk * cols));
      im2col_rows(x.value().data(), c, h, w, k, pad, y0, y1, ow, col.data());
      RowMat chunk = W * CMapMat(col.data(), ckk, cols);
      for (std::int64_t oc = 0; oc < o; ++oc)
        std::copy_n(chunk.data() + oc * cols, cols, y.data() + oc * oh * ow + y0 * ow);
    }
  }
  if (bias.defined()) {
    auto Y = as_mat(y, o, oh * ow);
    Y.colwise() += CVecMap(bias.value().data(), o);
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  auto xn = x.node(), wn = weight.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  return make_result(std::move(y), std::move(inputs), [=](const Tensor& g) {
    auto Wm = as_mat(wn->value, o, ckk);
    if (bn && bn->requires_grad) {
      float* gb = bn->grad_buffer().data();
      for (std::int64_t i = 0; i < o; ++i) gb[i] += ordered_sum(g.data() + i * oh * ow, oh * ow);
    }
    if (pointwise_conv) {
      auto G = as_mat(g, o, h * w);
      if (wn->requires_grad) as_mat(wn->grad_buffer(), o, c).noalias() += G * as_mat(xn->value, c, h * w).transpose();
      if (xn->requires_grad) {
        Tensor gx(Shape{c, h, w});
        as_mat(gx, c, h * w).noalias() = Wm.transpose() * G;
        xn->accumulate(gx);
      }
      return;
    }
    Tensor gx = xn->requires_grad ? Tensor(Shape{c, h, w}) : Tensor();
    std::vector<float> col, gchunk;
    for (std::int64_t y0 = 0; y0 < oh; y0 += chunk_rows) {
      const auto y1 = std::min(oh, y0 + chunk_rows);
      const auto cols = (y1 - y0) * ow;
      gchunk.resize(static_cast<std::size_t>(o * cols));
      for (std::int64_t oc = 0; oc < o; ++oc)
        std::copy_n(g.data() + oc * oh * ow + y0 * ow, cols, gchunk.data() + oc * cols);
      CMapMat G(gchunk.data(), o, cols);
      col.resize(static_cast<std::size_t>(ckk * cols));
      if (wn->requires_grad) {
        im2col_rows(xn->value.data(), c, h, w, k, pad, y0, y1, ow, col.data());
        as_mat(wn->grad_buffer(), o, ckk).noalias() += G * CMapMat(col.data(), ckk, cols).transpose();
      }
      if (xn->requires_grad) {
        MapMat(col.data(), ckk, cols).noalias() = Wm.transpose() * G;
        col2im_rows(col.data(), c, h, w, k, pad, y0, y1, ow, gx.data());
      }
    }
    if (xn->requires_grad) xn->accumulate(gx);
  });
}

Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias) {
  need_rank(x, 3, "conv_transpose2x2");
  need_rank(weight, 4, "conv_transpose2x2 weight");
  const auto ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (weight.dim(0) != ci || weight.dim(2) != 2 || weight.dim(3) != 2) {
    throw ShapeError("conv_transpose2x2: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  const auto co = weight.dim(1), hw = h * w, oh = 2 * h, ow = 2 * w;
  if (bias.defined() && bias.value().numel() != co) throw ShapeError("conv_transpose2x2: bias size mismatch");
  RowMat z = as_mat(weight.value(), ci, co * 4).transpose() * as_mat(x.value(), ci, hw);
  Tensor y(Shape{co, oh, ow});
  for (std::int64_t o = 0; o < co; ++o) {
    const float b = bias.defined() ? bias.value()[o] : 0.0f;
    for (int a = 0; a < 2; ++a)
      for (int bb = 0; bb < 2; ++bb) {
        const float* zr = z.data() + (o * 4 + a * 2 + bb) * hw;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j) y.at(o, 2 * i + a, 2 * j + bb) = zr[i * w + j] + b;
      }
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  auto xn = x.node(), wn = weight.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  return make_result(std::move(y), std::move(inputs), [=](const Tensor& g) {
    RowMat dz(co * 4, hw);
    for (std::int64_t o = 0; o < co; ++o)
      for (int a = 0; a < 2; ++a)
        for (int bb = 0; bb < 2; ++bb) {
          float* zr = dz.data() + (o * 4 + a * 2 + bb) * hw;
          for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j) zr[i * w + j] = g.at(o, 2 * i + a, 2 * j + bb);
        }
    if (bn && bn->requires_grad) {
      float* gb = bn->grad_buffer().data();
      for (std::int64_t o = 0; o < co; ++o) gb[o] += ordered_sum(dz.data() + o * 4 * hw, 4 * hw);
    }
    if (wn->requires_grad) {
      as_mat(wn->grad_buffer(), ci, co * 4).noalias() += as_mat(xn->value, ci, hw) * dz.transpose();
    }
    if (xn->requires_grad) {
      Tensor gx(Shape{ci, h, w});
      as_mat(gx, ci, hw).noalias() = as_mat(wn->value, ci, co * 4) * dz;
      xn->accumulate(gx);
    }
  });
}

Var max_pool2x2(const Var& x) {
  need_rank(x, 3, "max_pool2x2");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("max_pool2x2: input too small " + shape_str(x.shape()));
  Tensor y(Shape{c, oh, ow});
  std::vector<std::int64_t> arg(static_cast<std::size_t>(c * oh * ow));
  const Tensor& xv = x.value();
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t i = 0; i < oh; ++i)
      for (std::int64_t j = 0; j < ow; ++j) {
        std::int64_t best = (k * h + 2 * i) * w + 2 * j;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const auto idx = (k * h + 2 * i + a) * w + 2 * j + b;
            if (xv[idx] > xv[best]) best = idx;
          }
        const auto o = (k * oh + i) * ow + j;
        y[o] = xv[best];
        arg[static_cast<std::size_t>(o)] = best;
      }
  auto xn = x.node();
  return make_result(std::move(y), {x}, [xn, arg = std::move(arg)](const Tensor& g) {
    Tensor gx(xn->value.shape());
    for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += g[static_cast<std::int64_t>(o)];
    xn->accumulate(gx);
  });
}

Var channel_layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  need_rank(x, 3, "channel_layer_norm");
  const auto c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw ShapeError("channel_layer_norm: affine size mismatch");
  }
  const Tensor& xv = x.value();
  std::vector<double> mean(static_cast<std::size_t>(hw), 0.0), var(static_cast<std::size_t>(hw), 0.0);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t p = 0; p < hw; ++p) mean[static_cast<std::size_t>(p)] += xv[k * hw + p];
  for (auto& m : mean) m /= static_cast<double>(c);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t p = 0; p < hw; ++p) {
      const double d = xv[k * hw + p] - mean[static_cast<std::size_t>(p)];
      var[static_cast<std::size_t>(p)] += d * d;
    }
  std::vector<float> rstd(static_cast<std::size_t>(hw));
  for (std::int64_t p = 0; p < hw; ++p) {
    rstd[static_cast<std::size_t>(p)] =
        static_cast<float>(1.0 / std::sqrt(var[static_cast<std::size_t>(p)] / static_cast<double>(c) + eps));
  }
  Tensor xhat(x.shape()), y(x.shape());
  for (std::int64_t k = 0; k < c; ++k) {
    const float g = gamma.value()[k], b = beta.value()[k];
    for (std::int64_t p = 0; p < hw; ++p) {
      const float h = (xv[k * hw + p] - static_cast<float>(mean[static_cast<std::size_t>(p)])) *
                      rstd[static_cast<std::size_t>(p)];
      xhat[k * hw + p] = h;
      y[k * hw + p] = h * g + b;
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result(std::move(y), {x, gamma, beta},
                     [=, xhat = std::move(xhat), rstd = std::move(rstd)](const Tensor& go) {
                       std::vector<double> s1(static_cast<std::size_t>(hw), 0.0), s2(static_cast<std::size_t>(hw), 0.0);
                       float* gg = gn->requires_grad ? gn->grad_buffer().data() : nullptr;
                       float* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
                       for (std::int64_t k = 0; k < c; ++k) {
                         const float gm = gn->value[k];
                         double acc_g = 0, acc_b = 0;
                         for (std::int64_t p = 0; p < hw; ++p) {
                           const float dy = go[k * hw + p];
                           const float d = dy * gm;
                           s1[static_cast<std::size_t>(p)] += d;
                           s2[static_cast<std::size_t>(p)] += d * xhat[k * hw + p];
                           acc_g += dy * xhat[k * hw + p];
                           acc_b += dy;
                         }
                         if (gg) gg[k] += static_cast<float>(acc_g);
                         if (gb) gb[k] += static_cast<float>(acc_b);
                       }
                       if (!xn->requires_grad) return;
                       Tensor gx(xn->value.shape());
                       const auto inv_c = 1.0 / static_cast<double>(c);
                       for (std::int64_t k = 0; k < c; ++k) {
                         const float gm = gn->value[k];
                         for (std::int64_t p = 0; p < hw; ++p) {
                           const auto ps = static_cast<std::size_t>(p);
                           gx[k * hw + p] = rstd[ps] * (go[k * hw + p] * gm - static_cast<float>(s1[ps] * inv_c) -
                                                        xhat[k * hw + p] * static_cast<float>(s2[ps] * inv_c));
                         }
                       }
                       xn->accumulate(gx);
                     });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training) {
  need_rank(x, 3, "batch_norm");
  const auto c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (gamma.value().numel() != c || beta.value().numel() != c ||
      state.running_mean.value().numel() != c || state.running_var.value().numel() != c) {
    throw ShapeError("batch_norm: parameter size mismatch");
  }
  const Tensor& xv = x.value();
  std::vector<float> mean(static_cast<std::size_t>(c)), rstd(static_cast<std::size_t>(c));
  for (std::int64_t k = 0; k < c; ++k) {
    double m = 0, v = 0;
    if (training) {
      for (std::int64_t p = 0; p < hw; ++p) m += xv[k * hw + p];
      m /= static_cast<double>(hw);
      for (std::int64_t p = 0; p < hw; ++p) v += (xv[k * hw + p] - m) * (xv[k * hw + p] - m);
      v /= static_cast<double>(hw);
      auto& rm = state.running_mean.mutable_value()[k];
      auto& rv = state.running_var.mutable_value()[k];
      const double unbiased = hw > 1 ? v * static_cast<double>(hw) / static_cast<double>(hw - 1) : v;
      rm = static_cast<float>((1.0 - state.momentum) * rm + state.momentum * m);
      rv = static_cast<float>((1.0 - state.momentum) * rv + state.momentum * unbiased);
    } else {
      m = state.running_mean.value()[k];
      v = state.running_var.value()[k];
    }
    mean[static_cast<std::size_t>(k)] = static_cast<float>(m);
    rstd[static_cast<std::size_t>(k)] = static_cast<float>(1.0 / std::sqrt(v + state.eps));
  }
  Tensor xhat(x.shape()), y(x.shape());
  for (std::int64_t k = 0; k < c; ++k) {
    const float g = gamma.value()[k], b = beta.value()[k];
    const float m = mean[static_cast<std::size_t>(k)], r = rstd[static_cast<std::size_t>(k)];
    for (std::int64_t p = 0; p < hw; ++p) {
      const float h = (xv[k * hw + p] - m) * r;
      xhat[k * hw + p] = h;
      y[k * hw + p] = h * g + b;
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result(std::move(y), {x, gamma, beta},
                     [=, xhat = std::move(xhat), rstd = std::move(rstd)](const Tensor& go) {
                       float* gg = gn->requires_grad ? gn->grad_buffer().data() : nullptr;
                       float* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
                       Tensor gx = xn->requires_grad ? Tensor(xn->value.shape()) : Tensor();
                       for (std::int64_t k = 0; k < c; ++k) {
                         double sdy = 0, sdyh = 0;
                         for (std::int64_t p = 0; p < hw; ++p) {
                           sdy += go[k * hw + p];
                           sdyh += go[k * hw + p] * xhat[k * hw + p];
                         }
                         if (gg) gg[k] += static_cast<float>(sdyh);
                         if (gb) gb[k] += static_cast<float>(sdy);
                         if (!xn->requires_grad) continue;
                         const float g = gn->value[k], r = rstd[static_cast<std::size_t>(k)];
                         if (training) {
                           const auto m1 = static_cast<float>(sdy / static_cast<double>(hw));
                           const auto m2 = static_cast<float>(sdyh / static_cast<double>(hw));
                           for (std::int64_t p = 0; p < hw; ++p)
                             gx[k * hw + p] = g * r * (go[k * hw + p] - m1 - xhat[k * hw + p] * m2);
                         } else {
                           for (std::int64_t p = 0; p < hw; ++p) gx[k * hw + p] = g * r * go[k * hw + p];
                         }
                       }
                       if (xn->requires_grad) xn->accumulate(gx);
                     });
}

Var resize_bilinear(const Var& x, std::int64_t out_h, std::int64_t out_w) {
  need_rank(x, 3, "resize_bilinear");
  const auto h = x.dim(1), w = x.dim(2);
  auto xn = x.node();
  return make_result(imloc::resize_bilinear(x.value(), out_h, out_w), {x},
                     [xn, h, w](const Tensor& g) { xn->accumulate(resize_bilinear_backward(g, h, w)); });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const auto h = parts[0].dim(1), w = parts[0].dim(2);
  std::int64_t c = 0;
  for (const auto& p : parts) {
    need_rank(p, 3, "concat_channels");
    if (p.dim(1) != h || p.dim(2) != w) throw ShapeError("concat_channels: spatial size mismatch");
    c += p.dim(0);
  }
  Tensor y(Shape{c, h, w});
  std::int64_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().numel(), y.data() + off);
    off += p.value().numel();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result(std::move(y), parts, [nodes](const Tensor& g) {
    std::int64_t o = 0;
    for (const auto& n : nodes) {
      const auto cnt = n->value.numel();
      if (n->requires_grad) {
        Tensor gp(n->value.shape());
        std::copy_n(g.data() + o, cnt, gp.data());
        n->accumulate(gp);
      }
      o += cnt;
    }
  });
}

Var mean_of(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("mean_of: no inputs");
  Tensor y = parts[0].value();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    require_shape(parts[i].shape(), y.shape(), "mean_of");
    for (std::int64_t j = 0; j < y.numel(); ++j) y[j] += parts[i].value()[j];
  }
  const float inv = 1.0f / static_cast<float>(parts.size());
  for (std::int64_t j = 0; j < y.numel(); ++j) y[j] *= inv;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result(std::move(y), parts, [nodes, inv](const Tensor& g) {
    Tensor gs = g;
    for (std::int64_t j = 0; j < gs.numel(); ++j) gs[j] *= inv;
    for (const auto& n : nodes)
      if (n->requires_grad) n->accumulate(gs);
  });
}

}  // namespace imloc::ag
