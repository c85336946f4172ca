#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "visnet/rng.hpp"

namespace visnet::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f64 tensor. Public constructors validate that every
// value is finite; kernels that derive values from already-validated
// inputs build through raw() and skip the scan.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    // Validating constructor: sizes must agree, values must be finite.
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);
    // Unchecked: zero-filled buffer for kernel outputs.
    static Tensor raw(Shape shape);
    static Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi);
    static Tensor random_gaussian(Shape shape, Rng& rng, double mean, double stddev);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    // True if shape, data and requires_grad are all bitwise identical.
    bool bitwise_equal(const Tensor& other) const;

    void check_finite(const char* context) const;
};

// Sum of |a - b| over all entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Accumulates the addends in ascending value order, so the result depends
// only on the multiset of values, not on their original indexing. Used
// wherever permutation-exact reductions are required.
double sorted_sum(std::vector<double> addends);

}  // namespace visnet::num
