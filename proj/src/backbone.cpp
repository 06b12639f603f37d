#include "picat/backbone.hpp"

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

} // namespace

BackboneParams BackboneParams::init(int dim, int block_count, Rng& rng) {
    BackboneParams p;
    p.dim = dim;
    p.in_weight = conv_weight(dim, 3, 3, rng, false);
    p.in_bias = Tensor::zeros({dim}, true);
    for (int b = 0; b < block_count; ++b) {
        Block blk;
        blk.w1 = conv_weight(dim, dim, 3, rng, false);
        blk.b1 = Tensor::zeros({dim}, true);
        blk.w2 = conv_weight(dim, dim, 3, rng, false);
        blk.b2 = Tensor::zeros({dim}, true);
        blk.attn = AttnParams::init(dim, rng);
        p.blocks.push_back(std::move(blk));
    }
    p.out_weight = conv_weight(3, dim, 3, rng, true);
    p.out_bias = Tensor::zeros({3}, true);
    return p;
}

void BackboneParams::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + "in_weight", in_weight);
    set.add(prefix + "in_bias", in_bias);
    for (size_t b = 0; b < blocks.size(); ++b) {
        const std::string bp = prefix + "block" + std::to_string(b) + ".";
        set.add(bp + "w1", blocks[b].w1);
        set.add(bp + "b1", blocks[b].b1);
        set.add(bp + "w2", blocks[b].w2);
        set.add(bp + "b2", blocks[b].b2);
        blocks[b].attn.register_params(set, bp + "attn.");
    }
    set.add(prefix + "out_weight", out_weight);
    set.add(prefix + "out_bias", out_bias);
}

Tensor backbone_forward(const Tensor& x_tilde, const BackboneParams& params) {
    if (x_tilde.shape().size() != 3 || x_tilde.dim(0) != 3)
        throw TensorError("backbone_forward: expected 3xHxW input");
    Tensor h = ops::leaky_relu(
        ops::conv2d(x_tilde, params.in_weight, params.in_bias, ops::Pad::Replicate),
        0.2);
    for (const auto& blk : params.blocks) {
        Tensor t = ops::leaky_relu(
            ops::conv2d(h, blk.w1, blk.b1, ops::Pad::Replicate), 0.2);
        t = self_attend(t, blk.attn);
        t = ops::conv2d(t, blk.w2, blk.b2, ops::Pad::Replicate);
        h = ops::add(h, t);
    }
    Tensor res = ops::conv2d(h, params.out_weight, params.out_bias,
                             ops::Pad::Replicate);
    return ops::add(x_tilde, res);
}

Tensor training_loss(const Tensor& enhanced, const Tensor& target,
                     const Tensor& noise, const LossWeights& weights) {
    if (enhanced.shape() != target.shape())
        throw TensorError("training_loss: shape mismatch");
    Tensor rec = ops::mean(ops::abs(ops::sub(enhanced, target)));
    Tensor loss = ops::mul_scalar(rec, weights.rec);
    if (noise.defined()) {
        Tensor reg = ops::mean(ops::square(noise));
        loss = ops::add(loss, ops::mul_scalar(reg, weights.noise));
    }
    return loss;
}

} // namespace picat
