#include "imloc/image_io.hpp"

#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace imloc {

namespace {

cv::Mat to_mat_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("expected (3,h,w) image, got " + shape_str(image.shape()));
  }
  const auto h = static_cast<int>(image.dim(1)), w = static_cast<int>(image.dim(2));
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));  // BGR
      }
  }
  return m;
}

Tensor from_mat_bgr(const cv::Mat& m) {
  Tensor out(Shape{3, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<float>(row[x][2 - c]) / 255.0f;
  }
  return out;
}

void write_mat(const std::filesystem::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw ImageIoError("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw ImageIoError("cannot write image " + path.string());
}

cv::Mat read_mat(const std::filesystem::path& path, int flags) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw ImageIoError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (m.empty()) throw ImageIoError("cannot read image " + path.string());
  return m;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) { return from_mat_bgr(read_mat(path, cv::IMREAD_COLOR)); }

MaskTensor decode_mask(const std::filesystem::path& path) {
  const cv::Mat m = read_mat(path, cv::IMREAD_GRAYSCALE);
  MaskTensor out(Shape{1, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) out.at(0, y, x) = row[x] > 127 ? 1 : 0;
  }
  return out;
}

void write_rgb_png(const std::filesystem::path& path, const Tensor& image) { write_mat(path, to_mat_rgb(image)); }

void write_gray_png(const std::filesystem::path& path, const ByteTensor& gray) {
  if (gray.rank() != 3 || gray.dim(0) != 1) {
    throw ShapeError("write_gray_png: expected (1,h,w), got " + shape_str(gray.shape()));
  }
  cv::Mat m(static_cast<int>(gray.dim(1)), static_cast<int>(gray.dim(2)), CV_8UC1);
  std::copy_n(gray.data(), gray.numel(), m.ptr<std::uint8_t>(0));
  write_mat(path, m);
}

void write_mask_png(const std::filesystem::path& path, const MaskTensor& mask) {
  ByteTensor g(mask.shape());
  for (std::int64_t i = 0; i < g.numel(); ++i) g[i] = mask[i] ? 255 : 0;
  write_gray_png(path, g);
}

void write_probability_png(const std::filesystem::path& path, const Tensor& prob) {
  write_gray_png(path, to_bytes(prob));
}

ByteTensor to_bytes(const Tensor& unit_range) {
  ByteTensor out(unit_range.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(unit_range[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

Tensor from_bytes(const ByteTensor& bytes) {
  Tensor out(bytes.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<float>(bytes[i]) / 255.0f;
  return out;
}

Tensor jpeg_round_trip(const Tensor& image, int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must lie in [1, 100]");
  std::vector<std::uint8_t> buf;
  cv::Mat decoded;
  try {
    if (!cv::imencode(".jpg", to_mat_rgb(image), buf, {cv::IMWRITE_JPEG_QUALITY, quality})) {
      throw ImageIoError("JPEG encode failed");
    }
    decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw ImageIoError(std::string("JPEG codec failure: ") + e.what());
  }
  if (decoded.empty()) throw ImageIoError("JPEG decode failed");
  return from_mat_bgr(decoded);
}

}  // namespace imloc
