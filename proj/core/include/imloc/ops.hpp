#pragma once

// Differentiable building blocks. Token tensors are (N, C) row-major;
// spatial tensors are channel-major (C, H, W).

#include <optional>
#include <vector>

#include "imloc/autograd.hpp"

namespace imloc::ag {

// ---- token (N, C) ops ----

/// y = x W^T + b with W of shape (out, in).
Var linear(const Var& x, const Var& weight, const Var& bias);
Var add(const Var& a, const Var& b);
/// Same data, new shape (element count must match).
Var reshape(const Var& x, Shape shape);
Var scale(const Var& x, float s);
/// Normalizes each row over its last dimension.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-6f);
Var gelu(const Var& x);
Var relu(const Var& x);

/// Multi-head scaled dot-product self-attention. `qkv` is (groups * seq, 3C)
/// laid out [q | k | v]; attention is confined to each group of `seq`
/// consecutive rows. Returns (groups * seq, C). If `probs_out` is given, the
/// softmax matrices are copied there as (groups, heads, seq, seq).
Var multihead_attention(const Var& qkv, std::int64_t groups, std::int64_t seq,
                        std::int64_t heads, Tensor* probs_out = nullptr);

struct WindowLayout {
  std::int64_t height = 0, width = 0;  // original grid
  std::int64_t padded_h = 0, padded_w = 0;
  std::int64_t window = 0;
  std::int64_t windows_h() const { return padded_h / window; }
  std::int64_t windows_w() const { return padded_w / window; }
  std::int64_t num_windows() const { return windows_h() * windows_w(); }
};

WindowLayout window_layout(std::int64_t height, std::int64_t width, std::int64_t window);
/// (H*W, C) grid -> (num_windows * window^2, C), zero-padded bottom/right.
Var window_partition(const Var& tokens, const WindowLayout& layout);
/// Inverse of window_partition; drops padded tokens.
Var window_unpartition(const Var& windows, const WindowLayout& layout);

/// (H*W, C) -> (C, H, W)
Var tokens_to_chw(const Var& tokens, std::int64_t height, std::int64_t width);

// ---- spatial (C, H, W) ops ----

/// Stride-1 convolution, weight (O, C, k, k), zero padding `pad`.
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::int64_t pad);
/// Kernel-2 stride-2 transposed convolution, weight (C_in, C_out, 2, 2).
Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias);
Var max_pool2x2(const Var& x);
/// Layer norm over channels at each spatial location.
Var channel_layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-6f);

struct BatchNormState {
  Var running_mean;  // (C)
  Var running_var;   // (C)
  float momentum = 0.1f;
  float eps = 1e-5f;
};
/// Batch norm over the spatial positions of one sample. In training mode the
/// running statistics are updated in place.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
               bool training);

/// Bilinear resize with half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& x, std::int64_t out_h, std::int64_t out_w);
Var concat_channels(const std::vector<Var>& parts);
Var sigmoid(const Var& x);
/// Mean of same-shaped values.
Var mean_of(const std::vector<Var>& parts);

}  // namespace imloc::ag
