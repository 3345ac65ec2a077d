#include "imloc/image_ops.hpp"

#include <cmath>
#include <numbers>

namespace imloc {

namespace {

struct Tap {
  std::int64_t i0, i1;
  float w0, w1;
};

std::vector<Tap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    const auto frac = static_cast<float>(src - static_cast<double>(i0));
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0f - frac, frac};
  }
  return taps;
}

void check_chw(const Shape& s, const char* what) {
  if (s.size() != 3) throw ShapeError(std::string(what) + ": expected (C,H,W), got " + shape_str(s));
}

template <typename T>
BasicTensor<T> flip_h_impl(const BasicTensor<T>& t) {
  check_chw(t.shape(), "flip_horizontal");
  BasicTensor<T> out(t.shape());
  const auto c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) out.at(k, y, x) = t.at(k, y, w - 1 - x);
  return out;
}

template <typename T>
BasicTensor<T> flip_v_impl(const BasicTensor<T>& t) {
  check_chw(t.shape(), "flip_vertical");
  BasicTensor<T> out(t.shape());
  const auto c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) out.at(k, y, x) = t.at(k, h - 1 - y, x);
  return out;
}

template <typename T>
BasicTensor<T> rot90_impl(const BasicTensor<T>& t, int turns) {
  check_chw(t.shape(), "rotate90");
  turns = ((turns % 4) + 4) % 4;
  if (turns == 0) return t;
  const auto c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const bool swap = turns % 2 == 1;
  BasicTensor<T> out(Shape{c, swap ? w : h, swap ? h : w});
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        // Counter-clockwise: (y, x) -> (w-1-x, y) for one quarter turn.
        std::int64_t ny = 0, nx = 0;
        switch (turns) {
          case 1: ny = w - 1 - x; nx = y; break;
          case 2: ny = h - 1 - y; nx = w - 1 - x; break;
          default: ny = x; nx = h - 1 - y; break;
        }
        out.at(k, ny, nx) = t.at(k, y, x);
      }
  return out;
}

}  // namespace

Tensor resize_bilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w) {
  check_chw(chw.shape(), "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive output size");
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out(Shape{c, out_h, out_w});
  for (std::int64_t k = 0; k < c; ++k) {
    const float* src = chw.data() + k * h * w;
    float* dst = out.data() + k * out_h * out_w;
    for (std::int64_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      const float* r0 = src + a.i0 * w;
      const float* r1 = src + a.i1 * w;
      for (std::int64_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        const float top = b.w0 * r0[b.i0] + b.w1 * r0[b.i1];
        const float bot = b.w0 * r1[b.i0] + b.w1 * r1[b.i1];
        dst[y * out_w + x] = a.w0 * top + a.w1 * bot;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, std::int64_t in_h, std::int64_t in_w) {
  check_chw(grad_out.shape(), "resize_bilinear_backward");
  const auto c = grad_out.dim(0), out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  if (in_h == out_h && in_w == out_w) return grad_out;
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  Tensor gin(Shape{c, in_h, in_w});
  for (std::int64_t k = 0; k < c; ++k) {
    const float* g = grad_out.data() + k * out_h * out_w;
    float* dst = gin.data() + k * in_h * in_w;
    for (std::int64_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      float* r0 = dst + a.i0 * in_w;
      float* r1 = dst + a.i1 * in_w;
      for (std::int64_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        const float v = g[y * out_w + x];
        r0[b.i0] += a.w0 * b.w0 * v;
        r0[b.i1] += a.w0 * b.w1 * v;
        r1[b.i0] += a.w1 * b.w0 * v;
        r1[b.i1] += a.w1 * b.w1 * v;
      }
    }
  }
  return gin;
}

MaskTensor resize_nearest(const MaskTensor& chw, std::int64_t out_h, std::int64_t out_w) {
  check_chw(chw.shape(), "resize_nearest");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_nearest: non-positive output size");
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  MaskTensor out(Shape{c, out_h, out_w});
  auto src_index = [](std::int64_t o, std::int64_t in, std::int64_t out_n) {
    const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out_n);
    return std::min(static_cast<std::int64_t>(std::floor(s)), in - 1);
  };
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < out_h; ++y) {
      const auto sy = src_index(y, h, out_h);
      for (std::int64_t x = 0; x < out_w; ++x) out.at(k, y, x) = chw.at(k, sy, src_index(x, w, out_w));
    }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const auto radius = static_cast<std::int64_t>(std::floor(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

Tensor gaussian_blur(const Tensor& chw, double sigma) {
  check_chw(chw.shape(), "gaussian_blur");
  const auto taps = gaussian_kernel(sigma);
  const auto radius = static_cast<std::int64_t>(taps.size() / 2);
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (radius == 0) return chw;
  // Reflect without repeating the edge sample (dcb|abcd|cba).
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (n == 1) return std::int64_t{0};
    const std::int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  Tensor tmp(chw.shape()), out(chw.shape());
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (std::int64_t t = -radius; t <= radius; ++t)
          acc += taps[static_cast<std::size_t>(t + radius)] * chw.at(k, y, reflect(x + t, w));
        tmp.at(k, y, x) = static_cast<float>(acc);
      }
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (std::int64_t t = -radius; t <= radius; ++t)
          acc += taps[static_cast<std::size_t>(t + radius)] * tmp.at(k, reflect(y + t, h), x);
        out.at(k, y, x) = static_cast<float>(acc);
      }
  return out;
}

Tensor flip_horizontal(const Tensor& chw) { return flip_h_impl(chw); }
MaskTensor flip_horizontal(const MaskTensor& chw) { return flip_h_impl(chw); }
Tensor flip_vertical(const Tensor& chw) { return flip_v_impl(chw); }
MaskTensor flip_vertical(const MaskTensor& chw) { return flip_v_impl(chw); }
Tensor rotate90(const Tensor& chw, int quarter_turns) { return rot90_impl(chw, quarter_turns); }
MaskTensor rotate90(const MaskTensor& chw, int quarter_turns) { return rot90_impl(chw, quarter_turns); }

namespace {

// Inverse-maps output pixel centers into the source image.
template <typename Sampler>
void rotate_map(std::int64_t h, std::int64_t w, double degrees, Sampler&& sample) {
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = (static_cast<double>(h) - 1) / 2, cx = (static_cast<double>(w) - 1) / 2;
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      // Output is the source rotated counter-clockwise (y axis points down).
      const double sx = cs * dx - sn * dy + cx;
      const double sy = sn * dx + cs * dy + cy;
      sample(y, x, sy, sx);
    }
}

}  // namespace

Tensor rotate_small(const Tensor& chw, double degrees) {
  check_chw(chw.shape(), "rotate_small");
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out(chw.shape());
  rotate_map(h, w, degrees, [&](std::int64_t y, std::int64_t x, double sy, double sx) {
    const auto y0 = static_cast<std::int64_t>(std::floor(sy));
    const auto x0 = static_cast<std::int64_t>(std::floor(sx));
    const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
    for (std::int64_t k = 0; k < c; ++k) {
      double acc = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const auto yy = y0 + dy, xx = x0 + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx) * chw.at(k, yy, xx);
        }
      out.at(k, y, x) = static_cast<float>(acc);
    }
  });
  return out;
}

MaskTensor rotate_small(const MaskTensor& chw, double degrees) {
  check_chw(chw.shape(), "rotate_small");
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  MaskTensor out(chw.shape());
  rotate_map(h, w, degrees, [&](std::int64_t y, std::int64_t x, double sy, double sx) {
    const auto yy = static_cast<std::int64_t>(std::lround(sy));
    const auto xx = static_cast<std::int64_t>(std::lround(sx));
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
    for (std::int64_t k = 0; k < c; ++k) out.at(k, y, x) = chw.at(k, yy, xx);
  });
  return out;
}

}  // namespace imloc
