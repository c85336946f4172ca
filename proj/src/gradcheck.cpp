#include "visnet/gradcheck.hpp"

#include <cmath>
#include <cstring>

#include "visnet/errors.hpp"

namespace visnet::num {

GradCheckReport finite_diff_check_report(const ScalarFn& f, const ParamMap& params,
                                         double step) {
    if (step <= 0.0) throw ContractError("finite_diff_check: step must be positive");
    const double v1 = f.value(params);
    const double v2 = f.value(params);
    if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
        throw ContractError("finite_diff_check: function is not deterministic");
    }
    GradMap analytic = f.gradients(params);
    GradCheckReport report;
    ParamMap work = params;
    for (const auto& [name, tensor] : params) {
        auto it = analytic.find(name);
        if (it == analytic.end()) {
            throw ContractError("finite_diff_check: no analytic gradient for " + name);
        }
        const Tensor& grad = it->second;
        if (!grad.same_shape(tensor)) {
            throw DimensionError("finite_diff_check: gradient shape mismatch for " + name);
        }
        Tensor& slot = work[name];
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            const double orig = tensor.data[i];
            slot.data[i] = orig + step;
            const double fp = f.value(work);
            slot.data[i] = orig - step;
            const double fm = f.value(work);
            slot.data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = grad.data[i];
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1e-8});
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

double finite_diff_check(const ScalarFn& f, const ParamMap& params, double step) {
    return finite_diff_check_report(f, params, step).max_rel_error;
}

}  // namespace visnet::num
