#pragma once

#include "picat/ops.hpp"
#include "picat/rng.hpp"
#include "picat/tensor.hpp"

#include <string>

namespace picat {

// two 3x3 convs (replicate padding) with leaky-ReLU(0.2) between
struct ConvStack {
    Tensor w1, b1, w2, b2;

    static ConvStack init(int in_ch, int mid_ch, int out_ch, Rng& rng,
                          bool zero_last = false);
    void register_params(ParamSet& set, const std::string& prefix);
};

Tensor conv_stack_forward(const Tensor& input, const ConvStack& stack);

// single-head attention projections over pixel tokens; the output projection
// is zero-initialized so the residual paths start as identities
struct AttnParams {
    Tensor wq, wk, wv, wo;

    static AttnParams init(int dim, Rng& rng);
    void register_params(ParamSet& set, const std::string& prefix);
};

// token count above which embeddings are attended at stride 2
inline constexpr int kMaxAttnTokens = 1024;

// residual cross-attention: query + proj(Attn(Q(query), K(context), V(context)))
Tensor cross_attend(const Tensor& query, const Tensor& context,
                    const AttnParams& params);
Tensor self_attend(const Tensor& input, const AttnParams& params);

struct CndnParams {
    int embed_dim = 16;
    ConvStack embed_x;  // image branch, 3 -> d
    ConvStack embed_y;  // descriptor branch, y channels -> d
    AttnParams cross_attn;
    AttnParams self_attn;
    ConvStack fuse_out;  // d -> 3, residual on the input image
    ConvStack noise_out; // d -> d

    static CndnParams init(int y_channels, int embed_dim, Rng& rng);
    void register_params(ParamSet& set, const std::string& prefix);
};

struct CndnOutput {
    Tensor x_tilde; // 3 x H x W
    Tensor noise;   // d x H x W
};

// x' = Convs(x), y' = Convs(y), x'' = CA(x', y'), y'' = SA(y'),
// x_tilde = x + Convs(x'' + y''), n = Convs(y' - y'')
CndnOutput cndn_decompose(const Tensor& x, const Tensor& y,
                          const CndnParams& params);

} // namespace picat
