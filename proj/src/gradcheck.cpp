#include "picat/gradcheck.hpp"
#include "picat/rng.hpp"

#include <algorithm>
#include <cmath>

namespace picat {

GradCheckReport grad_check(const std::function<Tensor()>& closure,
                           ParamSet& params, double step, double rel_tol,
                           double abs_floor, int samples_per_tensor,
                           std::uint64_t sample_seed) {
    params.zero_grad();
    Tensor loss = closure();
    backward(loss);
    std::vector<std::vector<double>> tape_grads;
    for (auto& [name, t] : params.items) tape_grads.push_back(t.grad());

    Rng rng(sample_seed);
    GradCheckReport report;
    for (size_t p = 0; p < params.items.size(); ++p) {
        auto& [name, t] = params.items[p];
        GradCheckReport::Entry entry;
        entry.name = name;

        std::vector<size_t> indices;
        const size_t n = t.data().size();
        if (samples_per_tensor <= 0 || static_cast<size_t>(samples_per_tensor) >= n) {
            indices.resize(n);
            for (size_t i = 0; i < n; ++i) indices[i] = i;
        } else {
            for (int s = 0; s < samples_per_tensor; ++s)
                indices.push_back(rng.uniform_index(n));
            std::sort(indices.begin(), indices.end());
            indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
        }

        for (size_t i : indices) {
            const double saved = t.data()[i];
            t.data()[i] = saved + step;
            const double plus = closure().item();
            t.data()[i] = saved - step;
            const double minus = closure().item();
            t.data()[i] = saved;
            const double fd = (plus - minus) / (2.0 * step);
            const double ad = tape_grads[p][i];
            const double diff = std::fabs(fd - ad);
            double rel = 0.0;
            if (diff > abs_floor) rel = diff / std::max(std::fabs(fd), std::fabs(ad));
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    report.passed = report.max_rel_err < rel_tol;
    params.zero_grad();
    return report;
}

} // namespace picat
