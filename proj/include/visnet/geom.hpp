#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "visnet/rng.hpp"
#include "visnet/tensor.hpp"

namespace visnet::geom {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

enum class Modality { optimized, generated };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// Atom positions and types for one molecule in one structural modality.
// Construction rejects coincident atoms: direction vectors must be
// well-defined everywhere.
struct Conformer {
    std::string id;
    std::vector<Vec3> positions;      // angstrom
    std::vector<int> atomic_numbers;  // >= 1
    Modality modality = Modality::optimized;

    std::size_t n_atoms() const { return positions.size(); }
    void validate() const;

    Conformer rotated(const Mat3& q) const;
    Conformer translated(const Vec3& t) const;
    // perm[k] = original index of the atom that moves to slot k.
    Conformer permuted(const std::vector<std::size_t>& perm) const;
};

// All pairwise unit directions and distances of one conformer.
// unit(i,j) points from atom i to atom j; unit(j,i) is its exact negation.
struct DirectionField {
    std::size_t n = 0;
    std::vector<double> units;  // (N,N,3) row-major, zero diagonal
    std::vector<double> dists;  // (N,N), zero diagonal

    const double* unit(std::size_t i, std::size_t j) const { return &units[(i * n + j) * 3]; }
    double dist(std::size_t i, std::size_t j) const { return dists[i * n + j]; }
};

// Per-node spatially equivariant feature block, shape (N, 3, F).
struct VecFeat {
    std::size_t n = 0;
    std::size_t channels = 0;
    std::vector<double> values;  // (N,3,F) row-major

    static VecFeat zeros(std::size_t n, std::size_t channels);
    double& at(std::size_t i, std::size_t axis, std::size_t f) {
        return values[(i * 3 + axis) * channels + f];
    }
    double at(std::size_t i, std::size_t axis, std::size_t f) const {
        return values[(i * 3 + axis) * channels + f];
    }
    VecFeat rotated(const Mat3& q) const;
};

DirectionField direction_field(const Conformer& c);

// Outer product of channel scalars with a direction: out[a][f] = v[a] * s[f].
// Equivariant: tensor_product(s, Q v) = Q tensor_product(s, v).
num::Tensor tensor_product(const num::Tensor& s, const Vec3& v);

// Component of each channel column orthogonal to a unit axis.
// v is (3,F); axis must have unit norm within 1e-9.
num::Tensor reject(const num::Tensor& v, const Vec3& axis);

// Single-column rejection on a plain 3-vector.
Vec3 reject_vec(const Vec3& v, const Vec3& axis);

// Uniform SO(3) sample from a normalized quaternion. det = +1.
Mat3 random_rotation(Rng& rng);
Mat3 identity_rotation();

Vec3 apply(const Mat3& q, const Vec3& v);

double norm(const Vec3& v);
double dot(const Vec3& a, const Vec3& b);

namespace testhook {
// When set, reject() returns a slightly perturbed result. Exists only so
// the verification CLI can prove its property checks catch a planted fault.
extern bool break_rejection;
}  // namespace testhook

}  // namespace visnet::geom
