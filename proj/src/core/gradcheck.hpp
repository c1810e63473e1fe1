#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/params.hpp"

namespace idminer::num {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0.0;
    std::string worst_param;

    bool passed(double rel_tol) const { return max_rel_err < rel_tol; }
};

// Compares the gradients currently stored in `store` against central
// differences of `loss_fn`, which must be a deterministic function of the
// parameter values alone. Relative error uses |a - n| / max(1e-6, |a| + |n|)
// so that near-zero gradient pairs do not blow up the ratio.
GradCheckReport gradient_check(const std::function<double()>& loss_fn, ParamStore& store,
                               double eps = 1e-5);

}  // namespace idminer::num
