#include "core/gradcheck.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace idminer::num {

GradCheckReport gradient_check(const std::function<double()>& loss_fn, ParamStore& store,
                               double eps) {
    GradCheckReport report;
    for (auto& [name, p] : store.entries()) {
        const Eigen::MatrixXd analytic = p.grad;
        GradCheckEntry entry{name, 0.0};
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            const double original = p.value.data()[i];
            p.value.data()[i] = original + eps;
            const double plus = loss_fn();
            p.value.data()[i] = original - eps;
            const double minus = loss_fn();
            p.value.data()[i] = original;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                raise(ErrorKind::Numeric, "gradient_check: non-finite loss probing '" + name + "'");
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic.data()[i];
            const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        if (entry.max_rel_err > report.max_rel_err) {
            report.max_rel_err = entry.max_rel_err;
            report.worst_param = name;
        }
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

}  // namespace idminer::num
