#pragma once

#include "picat/tensor.hpp"

namespace picat::ops {

enum class Pad { Zero, Replicate };

// elementwise, same shape
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
// broadcast a single-element tensor across a
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);

Tensor exp(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_channels(const Tensor& a, const Tensor& b); // CHW inputs

// 2-D
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

// softmax(Q K^T / sqrt(d)) V;  Q: N x d, K: M x d, V: M x d_v
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// stride-1 cross-correlation, padding k/2, output spatial dims preserved.
// input: C_in x H x W, weight: C_out x C_in x k x k, bias: C_out or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Pad pad);
// kernel: C x k x k, per-channel, no cross-channel mixing
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, Pad pad);

// C x H x W -> C x k x k; cell (i,j) averages rows floor(iH/k)..floor((i+1)H/k)-1
Tensor adaptive_avg_pool(const Tensor& input, int k);

Tensor avg_pool2(const Tensor& input);        // 2x2 stride-2, dims must be even
Tensor upsample_nearest2(const Tensor& input); // inverse spatial mapping

// C x H x W <-> (H*W) x C token matrix
Tensor chw_to_tokens(const Tensor& a);
Tensor tokens_to_chw(const Tensor& a, int channels, int height, int width);

} // namespace picat::ops
