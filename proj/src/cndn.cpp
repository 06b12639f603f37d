#include "picat/cndn.hpp"

#include <cmath>

namespace picat {

namespace {

Tensor conv_weight(int co, int ci, int k, Rng& rng, bool zero) {
    Tensor t = Tensor::zeros({co, ci, k, k}, true);
    if (!zero) {
        const double std = std::sqrt(2.0 / (ci * k * k));
        for (double& v : t.data()) v = rng.normal(0.0, std);
    }
    return t;
}

Tensor linear_weight(int dim, Rng& rng, bool zero) {
    Tensor t = Tensor::zeros({dim, dim}, true);
    if (!zero) {
        const double std = std::sqrt(1.0 / dim);
        for (double& v : t.data()) v = rng.normal(0.0, std);
    }
    return t;
}

} // namespace

ConvStack ConvStack::init(int in_ch, int mid_ch, int out_ch, Rng& rng,
                          bool zero_last) {
    ConvStack s;
    s.w1 = conv_weight(mid_ch, in_ch, 3, rng, false);
    s.b1 = Tensor::zeros({mid_ch}, true);
    s.w2 = conv_weight(out_ch, mid_ch, 3, rng, zero_last);
    s.b2 = Tensor::zeros({out_ch}, true);
    return s;
}

void ConvStack::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + "w1", w1);
    set.add(prefix + "b1", b1);
    set.add(prefix + "w2", w2);
    set.add(prefix + "b2", b2);
}

Tensor conv_stack_forward(const Tensor& input, const ConvStack& stack) {
    Tensor h = ops::conv2d(input, stack.w1, stack.b1, ops::Pad::Replicate);
    h = ops::leaky_relu(h, 0.2);
    return ops::conv2d(h, stack.w2, stack.b2, ops::Pad::Replicate);
}

AttnParams AttnParams::init(int dim, Rng& rng) {
    AttnParams p;
    p.wq = linear_weight(dim, rng, false);
    p.wk = linear_weight(dim, rng, false);
    p.wv = linear_weight(dim, rng, false);
    p.wo = linear_weight(dim, rng, true); // zero init: residual starts as identity
    return p;
}

void AttnParams::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + "wq", wq);
    set.add(prefix + "wk", wk);
    set.add(prefix + "wv", wv);
    set.add(prefix + "wo", wo);
}

namespace {

// attention over pixel tokens, at stride 2 when the token count is too large
Tensor attend(const Tensor& query, const Tensor& context, const AttnParams& p) {
    if (query.shape().size() != 3 || context.shape().size() != 3 ||
        query.dim(1) != context.dim(1) || query.dim(2) != context.dim(2))
        throw TensorError("attention: spatial dims mismatch");
    const int c = query.dim(0);
    int h = query.dim(1), w = query.dim(2);
    Tensor q_map = query, kv_map = context;
    bool downsampled = false;
    if (h * w > kMaxAttnTokens) {
        q_map = ops::avg_pool2(q_map);
        kv_map = ops::avg_pool2(kv_map);
        h /= 2;
        w /= 2;
        downsampled = true;
    }
    Tensor q = ops::matmul(ops::chw_to_tokens(q_map), p.wq);
    Tensor k = ops::matmul(ops::chw_to_tokens(kv_map), p.wk);
    Tensor v = ops::matmul(ops::chw_to_tokens(kv_map), p.wv);
    Tensor out = ops::matmul(ops::attention(q, k, v), p.wo);
    Tensor out_map = ops::tokens_to_chw(out, c, h, w);
    if (downsampled) out_map = ops::upsample_nearest2(out_map);
    return ops::add(query, out_map);
}

} // namespace

Tensor cross_attend(const Tensor& query, const Tensor& context,
                    const AttnParams& params) {
    return attend(query, context, params);
}

Tensor self_attend(const Tensor& input, const AttnParams& params) {
    return attend(input, input, params);
}

CndnParams CndnParams::init(int y_channels, int embed_dim, Rng& rng) {
    CndnParams p;
    p.embed_dim = embed_dim;
    p.embed_x = ConvStack::init(3, embed_dim, embed_dim, rng);
    p.embed_y = ConvStack::init(y_channels, embed_dim, embed_dim, rng);
    p.cross_attn = AttnParams::init(embed_dim, rng);
    p.self_attn = AttnParams::init(embed_dim, rng);
    p.fuse_out = ConvStack::init(embed_dim, embed_dim, 3, rng, /*zero_last=*/true);
    p.noise_out = ConvStack::init(embed_dim, embed_dim, embed_dim, rng);
    return p;
}

void CndnParams::register_params(ParamSet& set, const std::string& prefix) {
    embed_x.register_params(set, prefix + "embed_x.");
    embed_y.register_params(set, prefix + "embed_y.");
    cross_attn.register_params(set, prefix + "cross_attn.");
    self_attn.register_params(set, prefix + "self_attn.");
    fuse_out.register_params(set, prefix + "fuse_out.");
    noise_out.register_params(set, prefix + "noise_out.");
}

CndnOutput cndn_decompose(const Tensor& x, const Tensor& y,
                          const CndnParams& params) {
    if (x.shape().size() != 3 || y.shape().size() != 3 || x.dim(1) != y.dim(1) ||
        x.dim(2) != y.dim(2))
        throw TensorError("cndn_decompose: misaligned inputs");
    Tensor x1 = conv_stack_forward(x, params.embed_x);
    Tensor y1 = conv_stack_forward(y, params.embed_y);
    Tensor x2 = cross_attend(x1, y1, params.cross_attn);
    Tensor y2 = self_attend(y1, params.self_attn);
    CndnOutput out;
    // residual fuse: the enhanced image starts at the input when the final
    // fuse conv is zero
    out.x_tilde = ops::add(x, conv_stack_forward(ops::add(x2, y2), params.fuse_out));
    out.noise = conv_stack_forward(ops::sub(y1, y2), params.noise_out);
    return out;
}

} // namespace picat
