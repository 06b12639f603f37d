#pragma once

#include "picat/tensor.hpp"

namespace picat {

// lr(t) = lr0 * 0.5 * (1 + cos(pi * t / total_steps))
double cosine_lr(double lr0, int64_t step, int64_t total_steps);

// Bias-corrected Adam with a cosine-annealed learning rate.
class Adam {
public:
    Adam(ParamSet& params, double lr0 = 2e-4, int64_t total_steps = 1,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // applies one update from populated grads, then zeroes them
    void step();

    int64_t step_count() const { return step_; }
    double current_lr() const { return cosine_lr(lr0_, step_, total_steps_); }

private:
    ParamSet& params_;
    double lr0_, beta1_, beta2_, eps_;
    int64_t total_steps_;
    int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace picat
