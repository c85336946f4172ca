#include "visnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "visnet/errors.hpp"

namespace visnet::num {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

Tensor Tensor::zeros(Shape shape) {
    Tensor t;
    t.data.assign(shape_numel(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    if (!std::isfinite(value)) throw ContractError("Tensor::full: non-finite fill value");
    Tensor t;
    t.data.assign(shape_numel(shape), value);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("Tensor::from: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    t.check_finite("Tensor::from");
    return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::raw(Shape shape) { return zeros(std::move(shape)); }

Tensor Tensor::random_uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t = raw(std::move(shape));
    for (double& x : t.data) x = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::random_gaussian(Shape shape, Rng& rng, double mean, double stddev) {
    Tensor t = raw(std::move(shape));
    for (double& x : t.data) x = rng.gaussian(mean, stddev);
    return t;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
    if (shape != other.shape || requires_grad != other.requires_grad) return false;
    if (data.size() != other.data.size()) return false;
    return data.empty() ||
           std::memcmp(data.data(), other.data.data(), data.size() * sizeof(double)) == 0;
}

void Tensor::check_finite(const char* context) const {
    for (double x : data) {
        if (!std::isfinite(x)) {
            throw ContractError(std::string(context) + ": non-finite value in tensor " +
                                shape_str(shape));
        }
    }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("max_abs_diff: shapes " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

double sorted_sum(std::vector<double> addends) {
    std::sort(addends.begin(), addends.end());
    double s = 0.0;
    for (double x : addends) s += x;
    return s;
}

}  // namespace visnet::num
