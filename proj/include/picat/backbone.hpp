#pragma once

#include "picat/cndn.hpp"
#include "picat/ops.hpp"
#include "picat/tensor.hpp"

namespace picat {

// Toy conv-attention enhancement stack. Residual throughout: with the
// zero-initialized output conv the network is the identity at init.
struct BackboneParams {
    int dim = 16;
    Tensor in_weight, in_bias;
    struct Block {
        Tensor w1, b1, w2, b2;
        AttnParams attn;
    };
    std::vector<Block> blocks;
    Tensor out_weight, out_bias; // zero-initialized

    static BackboneParams init(int dim, int block_count, Rng& rng);
    void register_params(ParamSet& set, const std::string& prefix);
};

// enhanced = x_tilde + stack(x_tilde); no clamping (export-side only)
Tensor backbone_forward(const Tensor& x_tilde, const BackboneParams& params);

struct LossWeights {
    double rec = 1.0;    // lambda_rec, L1 reconstruction
    double noise = 0.01; // lambda_noise, noise-energy regularizer
};

// lambda_rec * mean|enhanced - target| + lambda_noise * mean(noise^2);
// noise may be undefined (variants without a CNDN branch)
Tensor training_loss(const Tensor& enhanced, const Tensor& target,
                     const Tensor& noise, const LossWeights& weights);

} // namespace picat
