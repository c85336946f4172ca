#pragma once

#include <functional>
#include <string>

#include "visnet/tape.hpp"

namespace visnet::num {

using ParamMap = std::map<std::string, Tensor>;

// A deterministic scalar function of a parameter map, together with its
// analytic gradients. The two callables must describe the same function.
struct ScalarFn {
    std::function<double(const ParamMap&)> value;
    std::function<GradMap(const ParamMap&)> gradients;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coords_checked = 0;
};

// Central finite differences against the analytic gradient, per coordinate.
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// f is evaluated twice up front; a bitwise mismatch means it is not
// deterministic and raises ContractError.
GradCheckReport finite_diff_check_report(const ScalarFn& f, const ParamMap& params, double step);

// Convenience wrapper returning just the max relative error.
double finite_diff_check(const ScalarFn& f, const ParamMap& params, double step);

}  // namespace visnet::num
