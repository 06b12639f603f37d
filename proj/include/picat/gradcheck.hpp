#pragma once

#include "picat/tensor.hpp"

#include <functional>
#include <string>

namespace picat {

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
        int checked = 0;
    };
    std::vector<Entry> entries;
    double max_rel_err = 0.0;
    bool passed = false;
};

// Compares tape gradients against central finite differences of a
// deterministic scalar closure. Relative error uses an absolute floor:
// differences below abs_floor count as zero. samples_per_tensor = 0 checks
// every element.
GradCheckReport grad_check(const std::function<Tensor()>& closure,
                           ParamSet& params, double step = 1e-3,
                           double rel_tol = 1e-4, double abs_floor = 1e-6,
                           int samples_per_tensor = 0,
                           std::uint64_t sample_seed = 0);

} // namespace picat
