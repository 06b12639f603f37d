#include "picat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace picat::ops {

namespace {

using Node = Tensor::Node;
using NodePtr = std::shared_ptr<Node>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw TensorError(std::string(op) + ": shape mismatch");
}

// grad buffers for requires_grad parents are preallocated by backward()
void accumulate(Node& parent, const std::vector<double>& delta) {
    for (size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(Node&, Node&, Node&)) {
    check_same_shape(a, b, name);
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), name, {pa, pb},
                             [pa, pb, bwd](Node& n) { bwd(n, *pa, *pb); });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](Node& n, Node& pa, Node& pb) {
            if (pa.requires_grad) accumulate(pa, n.grad);
            if (pb.requires_grad) accumulate(pb, n.grad);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](Node& n, Node& pa, Node& pb) {
            if (pa.requires_grad) accumulate(pa, n.grad);
            if (pb.requires_grad)
                for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](Node& n, Node& pa, Node& pb) {
            if (pa.requires_grad)
                for (size_t i = 0; i < n.grad.size(); ++i)
                    pa.grad[i] += n.grad[i] * pb.value[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < n.grad.size(); ++i)
                    pb.grad[i] += n.grad[i] * pa.value[i];
        });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& v : out) v += c;
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "add_scalar", {pa},
                             [pa](Node& n) {
                                 if (pa->requires_grad) accumulate(*pa, n.grad);
                             });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& v : out) v *= c;
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "mul_scalar", {pa},
                             [pa, c](Node& n) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < n.grad.size(); ++i)
                                         pa->grad[i] += n.grad[i] * c;
                             });
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) throw TensorError("mul_scalar_tensor: s must be scalar");
    const double sv = s.data()[0];
    std::vector<double> out(a.data());
    for (double& v : out) v *= sv;
    auto pa = a.node_ptr();
    auto ps = s.node_ptr();
    return Tensor::make_node(
        a.shape(), std::move(out), "mul_scalar_tensor", {pa, ps},
        [pa, ps, sv](Node& n) {
            if (pa->requires_grad)
                for (size_t i = 0; i < n.grad.size(); ++i)
                    pa->grad[i] += n.grad[i] * sv;
            if (ps->requires_grad) {
                double acc = 0.0;
                for (size_t i = 0; i < n.grad.size(); ++i)
                    acc += n.grad[i] * pa->value[i];
                ps->grad[0] += acc;
            }
        });
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "exp", {pa},
                             [pa](Node& n) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < n.grad.size(); ++i)
                                         pa->grad[i] += n.grad[i] * n.value[i];
                             });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        double v = a.data()[i];
        out[i] = v > 0.0 ? v : slope * v;
    }
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "leaky_relu", {pa},
                             [pa, slope](Node& n) {
                                 if (!pa->requires_grad) return;
                                 for (size_t i = 0; i < n.grad.size(); ++i)
                                     pa->grad[i] += n.grad[i] *
                                                    (pa->value[i] > 0.0 ? 1.0 : slope);
                             });
}

Tensor abs(const Tensor& a) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a.data()[i]);
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "abs", {pa},
                             [pa](Node& n) {
                                 if (!pa->requires_grad) return;
                                 for (size_t i = 0; i < n.grad.size(); ++i) {
                                     double v = pa->value[i];
                                     double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                                     pa->grad[i] += n.grad[i] * sign;
                                 }
                             });
}

Tensor square(const Tensor& a) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
    auto pa = a.node_ptr();
    return Tensor::make_node(a.shape(), std::move(out), "square", {pa},
                             [pa](Node& n) {
                                 if (!pa->requires_grad) return;
                                 for (size_t i = 0; i < n.grad.size(); ++i)
                                     pa->grad[i] += n.grad[i] * 2.0 * pa->value[i];
                             });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    auto pa = a.node_ptr();
    return Tensor::make_node({1}, {acc}, "sum", {pa}, [pa](Node& n) {
        if (!pa->requires_grad) return;
        for (double& g : pa->grad) g += n.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    auto pa = a.node_ptr();
    return Tensor::make_node({1}, {acc * inv_n}, "mean", {pa},
                             [pa, inv_n](Node& n) {
                                 if (!pa->requires_grad) return;
                                 const double g = n.grad[0] * inv_n;
                                 for (double& pg : pa->grad) pg += g;
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) throw TensorError("reshape: numel mismatch");
    auto pa = a.node_ptr();
    return Tensor::make_node(std::move(shape), a.data(), "reshape", {pa},
                             [pa](Node& n) {
                                 if (pa->requires_grad) accumulate(*pa, n.grad);
                             });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3 ||
        a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw TensorError("concat_channels: spatial dims mismatch");
    std::vector<double> out;
    out.reserve(a.data().size() + b.data().size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    const size_t na = a.data().size();
    return Tensor::make_node({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)},
                             std::move(out), "concat_channels", {pa, pb},
                             [pa, pb, na](Node& n) {
                                 if (pa->requires_grad)
                                     for (size_t i = 0; i < na; ++i)
                                         pa->grad[i] += n.grad[i];
                                 if (pb->requires_grad)
                                     for (size_t i = na; i < n.grad.size(); ++i)
                                         pb->grad[i - na] += n.grad[i];
                             });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw TensorError("matmul: incompatible shapes");
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    std::vector<double> out(static_cast<size_t>(n) * m, 0.0);
    const double* pa_v = a.data().data();
    const double* pb_v = b.data().data();
    for (int i = 0; i < n; ++i) {
        double* out_row = out.data() + static_cast<size_t>(i) * m;
        for (int kk = 0; kk < k; ++kk) {
            const double av = pa_v[static_cast<size_t>(i) * k + kk];
            const double* b_row = pb_v + static_cast<size_t>(kk) * m;
            for (int j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return Tensor::make_node(
        {n, m}, std::move(out), "matmul", {pa, pb}, [pa, pb, n, k, m](Node& nd) {
            const double* g = nd.grad.data();
            if (pa->requires_grad) {
                // gA = g * B^T
                for (int i = 0; i < n; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* g_row = g + static_cast<size_t>(i) * m;
                        const double* b_row =
                            pb->value.data() + static_cast<size_t>(kk) * m;
                        for (int j = 0; j < m; ++j) acc += g_row[j] * b_row[j];
                        pa->grad[static_cast<size_t>(i) * k + kk] += acc;
                    }
            }
            if (pb->requires_grad) {
                // gB = A^T * g
                for (int i = 0; i < n; ++i) {
                    const double* g_row = g + static_cast<size_t>(i) * m;
                    for (int kk = 0; kk < k; ++kk) {
                        const double av = pa->value[static_cast<size_t>(i) * k + kk];
                        double* gb_row = pb->grad.data() + static_cast<size_t>(kk) * m;
                        for (int j = 0; j < m; ++j) gb_row[j] += av * g_row[j];
                    }
                }
            }
        });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw TensorError("transpose: 2-D only");
    const int n = a.dim(0), m = a.dim(1);
    std::vector<double> out(a.data().size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out[static_cast<size_t>(j) * n + i] = a.data()[static_cast<size_t>(i) * m + j];
    auto pa = a.node_ptr();
    return Tensor::make_node({m, n}, std::move(out), "transpose", {pa},
                             [pa, n, m](Node& nd) {
                                 if (!pa->requires_grad) return;
                                 for (int i = 0; i < n; ++i)
                                     for (int j = 0; j < m; ++j)
                                         pa->grad[static_cast<size_t>(i) * m + j] +=
                                             nd.grad[static_cast<size_t>(j) * n + i];
                             });
}

Tensor softmax_rows(const Tensor& a) {
    if (a.shape().size() != 2) throw TensorError("softmax_rows: 2-D only");
    const int n = a.dim(0), m = a.dim(1);
    std::vector<double> out(a.data().size());
    for (int i = 0; i < n; ++i) {
        const double* row = a.data().data() + static_cast<size_t>(i) * m;
        double* orow = out.data() + static_cast<size_t>(i) * m;
        double mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < m; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < m; ++j) orow[j] /= z;
    }
    auto pa = a.node_ptr();
    return Tensor::make_node(
        a.shape(), std::move(out), "softmax_rows", {pa}, [pa, n, m](Node& nd) {
            if (!pa->requires_grad) return;
            for (int i = 0; i < n; ++i) {
                const double* s = nd.value.data() + static_cast<size_t>(i) * m;
                const double* g = nd.grad.data() + static_cast<size_t>(i) * m;
                double dot = 0.0;
                for (int j = 0; j < m; ++j) dot += s[j] * g[j];
                double* pg = pa->grad.data() + static_cast<size_t>(i) * m;
                for (int j = 0; j < m; ++j) pg[j] += s[j] * (g[j] - dot);
            }
        });
}

// Fused softmax(Q K^T / sqrt(d)) V. One primitive instead of a
// matmul/softmax/matmul chain: the N x M probability matrix is kept once for
// the backward pass rather than materialized twice with gradients, which is
// what dominates at the 1024-token budget.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape().size() != 2 ||
        q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0))
        throw TensorError("attention: incompatible shapes");
    const int n = q.dim(0), d = q.dim(1), m = k.dim(0), dv = v.dim(1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * m);
    std::vector<double> out(static_cast<size_t>(n) * dv, 0.0);
    const double* qv = q.data().data();
    const double* kv = k.data().data();
    const double* vv = v.data().data();
    for (int i = 0; i < n; ++i) {
        const double* q_row = qv + static_cast<size_t>(i) * d;
        double* p_row = probs->data() + static_cast<size_t>(i) * m;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) {
            const double* k_row = kv + static_cast<size_t>(j) * d;
            double acc = 0.0;
            for (int t = 0; t < d; ++t) acc += q_row[t] * k_row[t];
            p_row[j] = acc * scale;
            mx = std::max(mx, p_row[j]);
        }
        // separate passes so the exp loop stays vectorizable
        for (int j = 0; j < m; ++j) p_row[j] -= mx;
        for (int j = 0; j < m; ++j) p_row[j] = std::exp(p_row[j]);
        double z = 0.0;
        for (int j = 0; j < m; ++j) z += p_row[j];
        const double inv_z = 1.0 / z;
        double* out_row = out.data() + static_cast<size_t>(i) * dv;
        for (int j = 0; j < m; ++j) {
            p_row[j] *= inv_z;
            const double p = p_row[j];
            const double* v_row = vv + static_cast<size_t>(j) * dv;
            for (int t = 0; t < dv; ++t) out_row[t] += p * v_row[t];
        }
    }

    auto pq = q.node_ptr();
    auto pk = k.node_ptr();
    auto pv = v.node_ptr();
    return Tensor::make_node(
        {n, dv}, std::move(out), "attention", {pq, pk, pv},
        [pq, pk, pv, probs, n, d, m, dv, scale](Node& nd) {
            const double* g = nd.grad.data();
            const bool need_qk = pq->requires_grad || pk->requires_grad;
            std::vector<double> dp(need_qk ? m : 0);
            for (int i = 0; i < n; ++i) {
                const double* g_row = g + static_cast<size_t>(i) * dv;
                const double* p_row = probs->data() + static_cast<size_t>(i) * m;
                if (pv->requires_grad) {
                    for (int j = 0; j < m; ++j) {
                        const double p = p_row[j];
                        double* gv_row = pv->grad.data() + static_cast<size_t>(j) * dv;
                        for (int t = 0; t < dv; ++t) gv_row[t] += p * g_row[t];
                    }
                }
                if (!need_qk) continue;
                // dP = G V^T, then the softmax jacobian, then scaled Q/K rules
                double dot = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double* v_row = pv->value.data() + static_cast<size_t>(j) * dv;
                    double acc = 0.0;
                    for (int t = 0; t < dv; ++t) acc += g_row[t] * v_row[t];
                    dp[j] = acc;
                    dot += acc * p_row[j];
                }
                const double* q_row = pq->value.data() + static_cast<size_t>(i) * d;
                double* gq_row =
                    pq->requires_grad ? pq->grad.data() + static_cast<size_t>(i) * d
                                      : nullptr;
                for (int j = 0; j < m; ++j) {
                    const double ds = scale * p_row[j] * (dp[j] - dot);
                    if (ds == 0.0) continue;
                    const double* k_row =
                        pk->value.data() + static_cast<size_t>(j) * d;
                    if (gq_row)
                        for (int t = 0; t < d; ++t) gq_row[t] += ds * k_row[t];
                    if (pk->requires_grad) {
                        double* gk_row = pk->grad.data() + static_cast<size_t>(j) * d;
                        for (int t = 0; t < d; ++t) gk_row[t] += ds * q_row[t];
                    }
                }
            }
        });
}

namespace {

// shared loop for conv2d/depthwise forward: accumulate w * shifted input row
// out[x] reads in[x+dx]; positions past either edge clamp (replicate) or drop
// (zero). lo/hi bound the in-range span; with |dx| >= width it is empty and
// one edge covers the whole row.
inline void accumulate_shifted_row(double* out_row, const double* in_row, double w,
                                   int width, int dx, Pad pad) {
    const int lo = std::max(0, -dx);
    const int hi = std::min(width, width - dx);
    if (pad == Pad::Replicate) {
        for (int x = 0; x < std::min(lo, width); ++x) out_row[x] += w * in_row[0];
        for (int x = std::max(lo, hi); x < width; ++x)
            out_row[x] += w * in_row[width - 1];
    }
    for (int x = lo; x < hi; ++x) out_row[x] += w * in_row[x + dx];
}

// backward counterparts: scatter grad into input, gather grad for weight
inline void scatter_shifted_row(double* gin_row, const double* g_row, double w,
                                int width, int dx, Pad pad) {
    const int lo = std::max(0, -dx);
    const int hi = std::min(width, width - dx);
    if (pad == Pad::Replicate) {
        for (int x = 0; x < std::min(lo, width); ++x) gin_row[0] += w * g_row[x];
        for (int x = std::max(lo, hi); x < width; ++x)
            gin_row[width - 1] += w * g_row[x];
    }
    for (int x = lo; x < hi; ++x) gin_row[x + dx] += w * g_row[x];
}

inline double dot_shifted_row(const double* in_row, const double* g_row, int width,
                              int dx, Pad pad) {
    const int lo = std::max(0, -dx);
    const int hi = std::min(width, width - dx);
    double acc = 0.0;
    if (pad == Pad::Replicate) {
        for (int x = 0; x < std::min(lo, width); ++x) acc += in_row[0] * g_row[x];
        for (int x = std::max(lo, hi); x < width; ++x)
            acc += in_row[width - 1] * g_row[x];
    }
    for (int x = lo; x < hi; ++x) acc += in_row[x + dx] * g_row[x];
    return acc;
}

inline int clamp_row(int ih, int h) { return std::clamp(ih, 0, h - 1); }

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              Pad pad) {
    if (input.shape().size() != 3 || weight.shape().size() != 4)
        throw TensorError("conv2d: input must be CHW, weight OIkk");
    const int ci_n = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int co_n = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != ci_n || weight.dim(3) != k || k % 2 == 0)
        throw TensorError("conv2d: weight shape mismatch or even kernel");
    const bool has_bias = bias.defined();
    if (has_bias && (bias.shape().size() != 1 || bias.dim(0) != co_n))
        throw TensorError("conv2d: bias shape mismatch");
    const int p = k / 2;

    std::vector<double> out(static_cast<size_t>(co_n) * h * w, 0.0);
    const double* in = input.data().data();
    const double* wt = weight.data().data();
    for (int co = 0; co < co_n; ++co) {
        for (int oh = 0; oh < h; ++oh) {
            double* out_row = out.data() + (static_cast<size_t>(co) * h + oh) * w;
            for (int ci = 0; ci < ci_n; ++ci) {
                for (int kh = 0; kh < k; ++kh) {
                    int ih = oh + kh - p;
                    if (pad == Pad::Zero && (ih < 0 || ih >= h)) continue;
                    const double* in_row =
                        in + (static_cast<size_t>(ci) * h + clamp_row(ih, h)) * w;
                    const double* w_row =
                        wt + ((static_cast<size_t>(co) * ci_n + ci) * k + kh) * k;
                    for (int kw = 0; kw < k; ++kw)
                        accumulate_shifted_row(out_row, in_row, w_row[kw], w,
                                               kw - p, pad);
                }
            }
            if (has_bias) {
                const double bv = bias.data()[co];
                for (int x = 0; x < w; ++x) out_row[x] += bv;
            }
        }
    }

    auto pin = input.node_ptr();
    auto pwt = weight.node_ptr();
    auto pbs = has_bias ? bias.node_ptr() : nullptr;
    std::vector<NodePtr> parents{pin, pwt};
    if (pbs) parents.push_back(pbs);
    return Tensor::make_node(
        {co_n, h, w}, std::move(out), "conv2d", std::move(parents),
        [pin, pwt, pbs, ci_n, co_n, h, w, k, p, pad](Node& nd) {
            const double* g = nd.grad.data();
            for (int co = 0; co < co_n; ++co) {
                for (int oh = 0; oh < h; ++oh) {
                    const double* g_row =
                        g + (static_cast<size_t>(co) * h + oh) * w;
                    for (int ci = 0; ci < ci_n; ++ci) {
                        for (int kh = 0; kh < k; ++kh) {
                            int ih = oh + kh - p;
                            if (pad == Pad::Zero && (ih < 0 || ih >= h)) continue;
                            const size_t row_off =
                                (static_cast<size_t>(ci) * h + clamp_row(ih, h)) * w;
                            const size_t w_off =
                                ((static_cast<size_t>(co) * ci_n + ci) * k + kh) * k;
                            for (int kw = 0; kw < k; ++kw) {
                                if (pin->requires_grad)
                                    scatter_shifted_row(pin->grad.data() + row_off,
                                                        g_row,
                                                        pwt->value[w_off + kw], w,
                                                        kw - p, pad);
                                if (pwt->requires_grad)
                                    pwt->grad[w_off + kw] += dot_shifted_row(
                                        pin->value.data() + row_off, g_row, w,
                                        kw - p, pad);
                            }
                        }
                    }
                    if (pbs && pbs->requires_grad) {
                        double acc = 0.0;
                        for (int x = 0; x < w; ++x) acc += g_row[x];
                        pbs->grad[co] += acc;
                    }
                }
            }
        });
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, Pad pad) {
    if (input.shape().size() != 3 || kernel.shape().size() != 3 ||
        kernel.dim(0) != input.dim(0) || kernel.dim(1) != kernel.dim(2) ||
        kernel.dim(1) % 2 == 0)
        throw TensorError("depthwise_conv2d: shape mismatch");
    const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int k = kernel.dim(1);
    const int p = k / 2;

    std::vector<double> out(input.data().size(), 0.0);
    const double* in = input.data().data();
    const double* kt = kernel.data().data();
    for (int c = 0; c < c_n; ++c) {
        for (int oh = 0; oh < h; ++oh) {
            double* out_row = out.data() + (static_cast<size_t>(c) * h + oh) * w;
            for (int kh = 0; kh < k; ++kh) {
                int ih = oh + kh - p;
                if (pad == Pad::Zero && (ih < 0 || ih >= h)) continue;
                const double* in_row =
                    in + (static_cast<size_t>(c) * h + clamp_row(ih, h)) * w;
                const double* k_row = kt + (static_cast<size_t>(c) * k + kh) * k;
                for (int kw = 0; kw < k; ++kw)
                    accumulate_shifted_row(out_row, in_row, k_row[kw], w, kw - p, pad);
            }
        }
    }

    auto pin = input.node_ptr();
    auto pkt = kernel.node_ptr();
    return Tensor::make_node(
        input.shape(), std::move(out), "depthwise_conv2d", {pin, pkt},
        [pin, pkt, c_n, h, w, k, p, pad](Node& nd) {
            const double* g = nd.grad.data();
            for (int c = 0; c < c_n; ++c) {
                for (int oh = 0; oh < h; ++oh) {
                    const double* g_row = g + (static_cast<size_t>(c) * h + oh) * w;
                    for (int kh = 0; kh < k; ++kh) {
                        int ih = oh + kh - p;
                        if (pad == Pad::Zero && (ih < 0 || ih >= h)) continue;
                        const size_t row_off =
                            (static_cast<size_t>(c) * h + clamp_row(ih, h)) * w;
                        const size_t k_off = (static_cast<size_t>(c) * k + kh) * k;
                        for (int kw = 0; kw < k; ++kw) {
                            if (pin->requires_grad)
                                scatter_shifted_row(pin->grad.data() + row_off, g_row,
                                                    pkt->value[k_off + kw], w, kw - p,
                                                    pad);
                            if (pkt->requires_grad)
                                pkt->grad[k_off + kw] +=
                                    dot_shifted_row(pin->value.data() + row_off, g_row,
                                                    w, kw - p, pad);
                        }
                    }
                }
            }
        });
}

Tensor adaptive_avg_pool(const Tensor& input, int k) {
    if (input.shape().size() != 3) throw TensorError("adaptive_avg_pool: CHW only");
    const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (k < 1 || k > h || k > w)
        throw TensorError("adaptive_avg_pool: output size exceeds input");

    auto lo = [](int i, int n, int kk) { return (i * n) / kk; };
    std::vector<double> out(static_cast<size_t>(c_n) * k * k);
    for (int c = 0; c < c_n; ++c) {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                int y0 = lo(i, h, k), y1 = lo(i + 1, h, k);
                int x0 = lo(j, w, k), x1 = lo(j + 1, w, k);
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        acc += input.data()[(static_cast<size_t>(c) * h + y) * w + x];
                out[(static_cast<size_t>(c) * k + i) * k + j] =
                    acc / ((y1 - y0) * (x1 - x0));
            }
        }
    }
    auto pin = input.node_ptr();
    return Tensor::make_node(
        {c_n, k, k}, std::move(out), "adaptive_avg_pool", {pin},
        [pin, c_n, h, w, k, lo](Node& nd) {
            if (!pin->requires_grad) return;
            for (int c = 0; c < c_n; ++c)
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        int y0 = lo(i, h, k), y1 = lo(i + 1, h, k);
                        int x0 = lo(j, w, k), x1 = lo(j + 1, w, k);
                        const double g =
                            nd.grad[(static_cast<size_t>(c) * k + i) * k + j] /
                            ((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y)
                            for (int x = x0; x < x1; ++x)
                                pin->grad[(static_cast<size_t>(c) * h + y) * w + x] += g;
                    }
        });
}

Tensor avg_pool2(const Tensor& input) {
    if (input.shape().size() != 3 || input.dim(1) % 2 != 0 || input.dim(2) % 2 != 0)
        throw TensorError("avg_pool2: CHW with even spatial dims required");
    const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<size_t>(c_n) * oh * ow);
    for (int c = 0; c < c_n; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const size_t base = (static_cast<size_t>(c) * h + 2 * y) * w + 2 * x;
                out[(static_cast<size_t>(c) * oh + y) * ow + x] =
                    0.25 * (input.data()[base] + input.data()[base + 1] +
                            input.data()[base + w] + input.data()[base + w + 1]);
            }
    auto pin = input.node_ptr();
    return Tensor::make_node(
        {c_n, oh, ow}, std::move(out), "avg_pool2", {pin},
        [pin, c_n, h, w, oh, ow](Node& nd) {
            if (!pin->requires_grad) return;
            for (int c = 0; c < c_n; ++c)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        const double g =
                            0.25 * nd.grad[(static_cast<size_t>(c) * oh + y) * ow + x];
                        const size_t base =
                            (static_cast<size_t>(c) * h + 2 * y) * w + 2 * x;
                        pin->grad[base] += g;
                        pin->grad[base + 1] += g;
                        pin->grad[base + w] += g;
                        pin->grad[base + w + 1] += g;
                    }
        });
}

Tensor upsample_nearest2(const Tensor& input) {
    if (input.shape().size() != 3) throw TensorError("upsample_nearest2: CHW only");
    const int c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int oh = h * 2, ow = w * 2;
    std::vector<double> out(static_cast<size_t>(c_n) * oh * ow);
    for (int c = 0; c < c_n; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out[(static_cast<size_t>(c) * oh + y) * ow + x] =
                    input.data()[(static_cast<size_t>(c) * h + y / 2) * w + x / 2];
    auto pin = input.node_ptr();
    return Tensor::make_node(
        {c_n, oh, ow}, std::move(out), "upsample_nearest2", {pin},
        [pin, c_n, h, w, oh, ow](Node& nd) {
            if (!pin->requires_grad) return;
            for (int c = 0; c < c_n; ++c)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        pin->grad[(static_cast<size_t>(c) * h + y / 2) * w + x / 2] +=
                            nd.grad[(static_cast<size_t>(c) * oh + y) * ow + x];
        });
}

Tensor chw_to_tokens(const Tensor& a) {
    if (a.shape().size() != 3) throw TensorError("chw_to_tokens: CHW only");
    const int c_n = a.dim(0), h = a.dim(1), w = a.dim(2);
    const int tokens = h * w;
    std::vector<double> out(a.data().size());
    for (int c = 0; c < c_n; ++c)
        for (int t = 0; t < tokens; ++t)
            out[static_cast<size_t>(t) * c_n + c] =
                a.data()[static_cast<size_t>(c) * tokens + t];
    auto pa = a.node_ptr();
    return Tensor::make_node({tokens, c_n}, std::move(out), "chw_to_tokens", {pa},
                             [pa, c_n, tokens](Node& nd) {
                                 if (!pa->requires_grad) return;
                                 for (int c = 0; c < c_n; ++c)
                                     for (int t = 0; t < tokens; ++t)
                                         pa->grad[static_cast<size_t>(c) * tokens + t] +=
                                             nd.grad[static_cast<size_t>(t) * c_n + c];
                             });
}

Tensor tokens_to_chw(const Tensor& a, int channels, int height, int width) {
    if (a.shape().size() != 2 || a.dim(0) != height * width || a.dim(1) != channels)
        throw TensorError("tokens_to_chw: shape mismatch");
    const int tokens = height * width;
    std::vector<double> out(a.data().size());
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < tokens; ++t)
            out[static_cast<size_t>(c) * tokens + t] =
                a.data()[static_cast<size_t>(t) * channels + c];
    auto pa = a.node_ptr();
    return Tensor::make_node({channels, height, width}, std::move(out),
                             "tokens_to_chw", {pa},
                             [pa, channels, tokens](Node& nd) {
                                 if (!pa->requires_grad) return;
                                 for (int c = 0; c < channels; ++c)
                                     for (int t = 0; t < tokens; ++t)
                                         pa->grad[static_cast<size_t>(t) * channels + c] +=
                                             nd.grad[static_cast<size_t>(c) * tokens + t];
                             });
}

} // namespace picat::ops
