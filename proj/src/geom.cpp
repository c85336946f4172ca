#include "visnet/geom.hpp"

#include <cmath>

#include "visnet/errors.hpp"

namespace visnet::geom {

namespace testhook {
bool break_rejection = false;
}

std::string modality_name(Modality m) {
    return m == Modality::optimized ? "optimized" : "generated";
}

Modality modality_from_name(const std::string& name) {
    if (name == "optimized") return Modality::optimized;
    if (name == "generated") return Modality::generated;
    throw SchemaError("unknown modality '" + name + "'");
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 apply(const Mat3& q, const Vec3& v) {
    Vec3 out{};
    for (std::size_t i = 0; i < 3; ++i)
        out[i] = q[i][0] * v[0] + q[i][1] * v[1] + q[i][2] * v[2];
    return out;
}

void Conformer::validate() const {
    if (positions.empty()) throw ContractError("Conformer: n_atoms must be >= 1");
    if (positions.size() != atomic_numbers.size()) {
        throw ContractError("Conformer: positions and atomic_numbers length mismatch");
    }
    for (std::size_t i = 0; i < atomic_numbers.size(); ++i) {
        if (atomic_numbers[i] < 1) {
            throw ContractError("Conformer: atomic number < 1 at atom " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            const Vec3 d{positions[j][0] - positions[i][0], positions[j][1] - positions[i][1],
                         positions[j][2] - positions[i][2]};
            if (norm(d) < 1e-6) {
                throw DegenerateGeometryError("Conformer '" + id + "': atoms " +
                                              std::to_string(i) + " and " + std::to_string(j) +
                                              " are closer than 1e-6 A");
            }
        }
}

Conformer Conformer::rotated(const Mat3& q) const {
    Conformer out = *this;
    for (auto& p : out.positions) p = apply(q, p);
    return out;
}

Conformer Conformer::translated(const Vec3& t) const {
    Conformer out = *this;
    for (auto& p : out.positions) {
        p[0] += t[0];
        p[1] += t[1];
        p[2] += t[2];
    }
    return out;
}

Conformer Conformer::permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != n_atoms()) throw ContractError("Conformer::permuted: bad permutation");
    Conformer out = *this;
    for (std::size_t k = 0; k < perm.size(); ++k) {
        out.positions[k] = positions[perm[k]];
        out.atomic_numbers[k] = atomic_numbers[perm[k]];
    }
    return out;
}

VecFeat VecFeat::zeros(std::size_t n, std::size_t channels) {
    VecFeat v;
    v.n = n;
    v.channels = channels;
    v.values.assign(n * 3 * channels, 0.0);
    return v;
}

VecFeat VecFeat::rotated(const Mat3& q) const {
    VecFeat out = VecFeat::zeros(n, channels);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < channels; ++f) {
            const Vec3 col{at(i, 0, f), at(i, 1, f), at(i, 2, f)};
            const Vec3 r = apply(q, col);
            out.at(i, 0, f) = r[0];
            out.at(i, 1, f) = r[1];
            out.at(i, 2, f) = r[2];
        }
    return out;
}

DirectionField direction_field(const Conformer& c) {
    c.validate();
    const std::size_t n = c.n_atoms();
    DirectionField df;
    df.n = n;
    df.units.assign(n * n * 3, 0.0);
    df.dists.assign(n * n, 0.0);
    // Compute each pair once, negate for the mirror entry so that
    // unit(i,j) == -unit(j,i) holds exactly.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            Vec3 d{c.positions[j][0] - c.positions[i][0], c.positions[j][1] - c.positions[i][1],
                   c.positions[j][2] - c.positions[i][2]};
            const double len = norm(d);
            if (len < 1e-6) {
                throw DegenerateGeometryError("direction_field: atoms " + std::to_string(i) +
                                              " and " + std::to_string(j) + " coincide");
            }
            df.dists[i * n + j] = len;
            df.dists[j * n + i] = len;
            for (std::size_t a = 0; a < 3; ++a) {
                const double u = d[a] / len;
                df.units[(i * n + j) * 3 + a] = u;
                df.units[(j * n + i) * 3 + a] = -u;
            }
        }
    return df;
}

num::Tensor tensor_product(const num::Tensor& s, const Vec3& v) {
    if (s.rank() != 1) {
        throw DimensionError("tensor_product: scalar features must be rank 1, got " +
                             num::shape_str(s.shape));
    }
    const std::size_t f_dim = s.shape[0];
    num::Tensor out = num::Tensor::raw({3, f_dim});
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t f = 0; f < f_dim; ++f) out.data[a * f_dim + f] = v[a] * s.data[f];
    return out;
}

num::Tensor reject(const num::Tensor& v, const Vec3& axis) {
    if (v.rank() != 2 || v.shape[0] != 3) {
        throw DimensionError("reject: features must be (3,F), got " + num::shape_str(v.shape));
    }
    if (std::abs(norm(axis) - 1.0) > 1e-9) {
        throw ContractError("reject: axis is not unit length");
    }
    const std::size_t f_dim = v.shape[1];
    num::Tensor out = num::Tensor::raw({3, f_dim});
    for (std::size_t f = 0; f < f_dim; ++f) {
        const Vec3 col{v.data[0 * f_dim + f], v.data[1 * f_dim + f], v.data[2 * f_dim + f]};
        const double proj = dot(col, axis);
        for (std::size_t a = 0; a < 3; ++a) out.data[a * f_dim + f] = col[a] - proj * axis[a];
    }
    if (testhook::break_rejection) {
        for (double& x : out.data) x += 1e-3;
    }
    return out;
}

Vec3 reject_vec(const Vec3& v, const Vec3& axis) {
    const double proj = dot(v, axis);
    Vec3 out{v[0] - proj * axis[0], v[1] - proj * axis[1], v[2] - proj * axis[2]};
    if (testhook::break_rejection) {
        out[0] += 1e-3;
        out[1] += 1e-3;
        out[2] += 1e-3;
    }
    return out;
}

Mat3 identity_rotation() {
    return Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 random_rotation(Rng& rng) {
    // Normalized quaternion from four gaussians is uniform over SO(3).
    double q[4];
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& x : q) {
            x = rng.gaussian();
            n2 += x * x;
        }
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Mat3 m;
    m[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)};
    m[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)};
    m[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    return m;
}

}  // namespace visnet::geom
