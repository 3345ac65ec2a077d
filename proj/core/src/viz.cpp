#include "imloc/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace imloc {

ByteTensor visualize_feature_map(const Tensor& chw) {
  if (chw.rank() != 3) throw ShapeError("visualize_feature_map: expected (C, H, W), got " + shape_str(chw.shape()));
  const auto c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
  std::vector<double> mean(static_cast<std::size_t>(hw), 0.0);
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t i = 0; i < hw; ++i) mean[static_cast<std::size_t>(i)] += chw[k * hw + i];
  for (auto& m : mean) m /= static_cast<double>(std::max<std::int64_t>(c, 1));
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  ByteTensor out(Shape{1, chw.dim(1), chw.dim(2)}, 128);
  if (mean.empty() || !(*hi > *lo)) return out;
  const double range = *hi - *lo;
  for (std::int64_t i = 0; i < hw; ++i) {
    const double v = (mean[static_cast<std::size_t>(i)] - *lo) / range * 255.0;
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

ByteTensor visualize_feature_map(const FeatureMap& fm) { return visualize_feature_map(fm.data.value()); }

Tensor overlay_prediction(const Tensor& image, const Tensor& prob, double threshold, double alpha) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("overlay_prediction: image must be (3, H, W)");
  require_shape(prob.shape(), Shape{1, image.dim(1), image.dim(2)}, "overlay_prediction");
  Tensor out = image;
  const auto hw = image.dim(1) * image.dim(2);
  const auto a = static_cast<float>(alpha);
  for (std::int64_t i = 0; i < hw; ++i) {
    if (prob[i] < threshold) continue;
    out[i] = (1 - a) * out[i] + a;
    out[hw + i] = (1 - a) * out[hw + i];
    out[2 * hw + i] = (1 - a) * out[2 * hw + i];
  }
  return out;
}

namespace {

// 3x5 glyphs, one row per nibble (bit 2 = left column).
constexpr std::array<std::array<std::uint8_t, 5>, 13> kGlyphs{{
    {7, 5, 5, 5, 7},  // 0
    {2, 6, 2, 2, 7},  // 1
    {7, 1, 7, 4, 7},  // 2
    {7, 1, 7, 1, 7},  // 3
    {5, 5, 7, 1, 1},  // 4
    {7, 4, 7, 1, 7},  // 5
    {7, 4, 7, 5, 7},  // 6
    {7, 1, 1, 1, 1},  // 7
    {7, 5, 7, 5, 7},  // 8
    {7, 5, 7, 1, 7},  // 9
    {0, 0, 0, 0, 2},  // .
    {0, 0, 7, 0, 0},  // -
    {0, 0, 0, 0, 0},  // space
}};

struct Canvas2d {
  Tensor img;
  int w, h;

  Canvas2d(int width, int height) : img(Shape{3, height, width}, 1.0f), w(width), h(height) {}

  void put(int x, int y, const std::array<float, 3>& c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int k = 0; k < 3; ++k) img.at(k, y, x) = c[static_cast<std::size_t>(k)];
  }

  void dot(int x, int y, const std::array<float, 3>& c, int r) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) put(x + dx, y + dy, c);
  }

  void line(double x0, double y0, double x1, double y1, const std::array<float, 3>& c, bool dashed, int thick = 1) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= n; ++i) {
      if (dashed && (i / 6) % 2 == 1) continue;
      const double t = static_cast<double>(i) / n;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      dot(x, y, c, thick - 1);
    }
  }

  void text(int x, int y, const std::string& s, int scale = 2) {
    const std::array<float, 3> ink{0.1f, 0.1f, 0.1f};
    for (char ch : s) {
      std::size_t g = 12;
      if (ch >= '0' && ch <= '9') g = static_cast<std::size_t>(ch - '0');
      if (ch == '.') g = 10;
      if (ch == '-') g = 11;
      for (int r = 0; r < 5; ++r)
        for (int col = 0; col < 3; ++col)
          if (kGlyphs[g][static_cast<std::size_t>(r)] & (4 >> col))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx) put(x + col * scale + sx, y + r * scale + sy, ink);
      x += 4 * scale;
    }
  }
};

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

Tensor render_plot(const std::vector<PlotSeries>& series, const PlotOptions& opts) {
  if (opts.width < 100 || opts.height < 80) throw std::invalid_argument("render_plot: image too small");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_plot: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (opts.y_range) ymin = (*opts.y_range)[0], ymax = (*opts.y_range)[1];
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  Canvas2d cv(opts.width, opts.height);
  const int left = 60, right = opts.width - 20, top = 20, bottom = opts.height - 40;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };
  const std::array<float, 3> axis{0.2f, 0.2f, 0.2f}, grid{0.88f, 0.88f, 0.88f};

  for (int t = 0; t <= 4; ++t) {
    const double yv = ymin + (ymax - ymin) * t / 4.0, xv = xmin + (xmax - xmin) * t / 4.0;
    cv.line(left, py(yv), right, py(yv), grid, false);
    cv.line(px(xv), top, px(xv), bottom, grid, false);
    const auto yl = tick_label(yv), xl = tick_label(xv);
    cv.text(left - 8 - static_cast<int>(yl.size()) * 8, static_cast<int>(py(yv)) - 5, yl);
    cv.text(static_cast<int>(px(xv)) - static_cast<int>(xl.size()) * 4, bottom + 8, xl);
  }
  cv.line(left, bottom, right, bottom, axis, false);
  cv.line(left, top, left, bottom, axis, false);

  for (const auto& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i)
      cv.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color, s.dashed, 2);
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        cv.dot(static_cast<int>(std::lround(px(s.x[i]))), static_cast<int>(std::lround(py(s.y[i]))), s.color, 3);
  }
  return cv.img;
}

}  // namespace imloc
