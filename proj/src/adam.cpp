#include "picat/adam.hpp"

#include <cmath>

namespace picat {

double cosine_lr(double lr0, int64_t step, int64_t total_steps) {
    if (total_steps < 1) throw TensorError("cosine_lr: total_steps must be >= 1");
    if (step < 0) step = 0;
    if (step > total_steps) step = total_steps;
    const double pi = 3.14159265358979323846;
    return lr0 * 0.5 * (1.0 + std::cos(pi * static_cast<double>(step) /
                                       static_cast<double>(total_steps)));
}

Adam::Adam(ParamSet& params, double lr0, int64_t total_steps, double beta1,
           double beta2, double eps)
    : params_(params), lr0_(lr0), beta1_(beta1), beta2_(beta2), eps_(eps),
      total_steps_(total_steps) {
    for (auto& [name, t] : params_.items) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step() {
    const double lr = current_lr();
    const double t = static_cast<double>(step_ + 1);
    const double bc1 = 1.0 - std::pow(beta1_, t);
    const double bc2 = 1.0 - std::pow(beta2_, t);
    for (size_t p = 0; p < params_.items.size(); ++p) {
        auto& tensor = params_.items[p].second;
        if (!tensor.has_grad())
            throw TensorError("adam_step: missing gradient for " +
                              params_.items[p].first);
        auto& value = tensor.data();
        const auto& grad = tensor.grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
        tensor.zero_grad();
    }
    ++step_;
}

} // namespace picat
