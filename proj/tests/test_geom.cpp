#include <doctest.h>

#include <cmath>

#include "visnet/errors.hpp"
#include "visnet/geom.hpp"
#include "visnet/synth.hpp"

using namespace visnet;

TEST_CASE("conformer validation rejects coincident atoms") {
    geom::Conformer c;
    c.id = "bad";
    c.positions = {{0.0, 0.0, 0.0}, {0.0, 0.0, 1e-9}};
    c.atomic_numbers = {1, 1};
    CHECK_THROWS_AS(c.validate(), DegenerateGeometryError);
}

TEST_CASE("direction field: exact mirror negation and unit norms") {
    Rng rng(5);
    const geom::Conformer c = synth::random_conformer(7, rng);
    const geom::DirectionField df = geom::direction_field(c);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) {
            if (i == j) continue;
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(df.unit(i, j)[a] == -df.unit(j, i)[a]);  // bitwise
            }
            const geom::Vec3 u{df.unit(i, j)[0], df.unit(i, j)[1], df.unit(i, j)[2]};
            CHECK(std::abs(geom::norm(u) - 1.0) < 1e-14);
            CHECK(df.dist(i, j) == df.dist(j, i));
        }
}

TEST_CASE("tensor_product is rotation-equivariant") {
    Rng rng(7);
    const num::Tensor s = num::Tensor::random_gaussian({4}, rng, 0.0, 1.0);
    const geom::Vec3 v{0.3, -1.2, 0.8};
    const geom::Mat3 q = geom::random_rotation(rng);
    const num::Tensor direct = geom::tensor_product(s, geom::apply(q, v));
    const num::Tensor rotated_after = [&] {
        const num::Tensor t = geom::tensor_product(s, v);
        num::Tensor out = num::Tensor::raw({3, 4});
        for (std::size_t f = 0; f < 4; ++f) {
            const geom::Vec3 col{t.at2(0, f), t.at2(1, f), t.at2(2, f)};
            const geom::Vec3 rc = geom::apply(q, col);
            for (std::size_t a = 0; a < 3; ++a) out.at2(a, f) = rc[a];
        }
        return out;
    }();
    CHECK(num::max_abs_diff(direct, rotated_after) < 1e-14);
}

TEST_CASE("reject removes the axis component entirely") {
    Rng rng(9);
    const num::Tensor v = num::Tensor::random_gaussian({3, 5}, rng, 0.0, 1.0);
    geom::Vec3 axis{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double n = geom::norm(axis);
    for (double& x : axis) x /= n;
    const num::Tensor r = geom::reject(v, axis);
    for (std::size_t f = 0; f < 5; ++f) {
        const geom::Vec3 col{r.at2(0, f), r.at2(1, f), r.at2(2, f)};
        CHECK(std::abs(geom::dot(col, axis)) < 1e-14);
    }
    // A column already along the axis is annihilated.
    num::Tensor along = num::Tensor::raw({3, 1});
    for (std::size_t a = 0; a < 3; ++a) along.data[a] = 2.5 * axis[a];
    const num::Tensor gone = geom::reject(along, axis);
    for (double x : gone.data) CHECK(std::abs(x) < 1e-14);
}

TEST_CASE("reject demands a unit axis") {
    const num::Tensor v = num::Tensor::zeros({3, 2});
    CHECK_THROWS_AS(geom::reject(v, geom::Vec3{1.0, 1.0, 0.0}), ContractError);
}

TEST_CASE("random_rotation is orthogonal with det +1") {
    Rng rng(21);
    for (int t = 0; t < 20; ++t) {
        const geom::Mat3 q = geom::random_rotation(rng);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dotij = 0.0;
                for (int k = 0; k < 3; ++k) dotij += q[k][i] * q[k][j];
                CHECK(std::abs(dotij - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        const double det = q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1]) -
                           q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0]) +
                           q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
        CHECK(std::abs(det - 1.0) < 1e-12);
    }
}

TEST_CASE("conformer transforms: rotated/translated/permuted") {
    Rng rng(23);
    const geom::Conformer c = synth::random_conformer(5, rng);
    const geom::Mat3 q = geom::random_rotation(rng);
    const geom::Conformer r = c.rotated(q);
    for (std::size_t i = 0; i < 5; ++i) {
        const geom::Vec3 expect = geom::apply(q, c.positions[i]);
        for (std::size_t a = 0; a < 3; ++a) CHECK(r.positions[i][a] == expect[a]);
    }
    const geom::Conformer t = c.translated({1.0, -2.0, 0.5});
    CHECK(t.positions[2][1] == c.positions[2][1] - 2.0);

    const std::vector<std::size_t> perm{4, 2, 0, 1, 3};
    const geom::Conformer p = c.permuted(perm);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(p.atomic_numbers[k] == c.atomic_numbers[perm[k]]);
        CHECK(p.positions[k][0] == c.positions[perm[k]][0]);
    }
}

TEST_CASE("modality names round-trip") {
    CHECK(geom::modality_from_name("optimized") == geom::Modality::optimized);
    CHECK(geom::modality_from_name("generated") == geom::Modality::generated);
    CHECK(geom::modality_name(geom::Modality::generated) == "generated");
    CHECK_THROWS_AS(geom::modality_from_name("other"), SchemaError);
}

TEST_CASE("VecFeat rotation helper matches per-column rotation") {
    Rng rng(29);
    geom::VecFeat v = geom::VecFeat::zeros(2, 3);
    for (double& x : v.values) x = rng.gaussian();
    const geom::Mat3 q = geom::random_rotation(rng);
    const geom::VecFeat r = v.rotated(q);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t f = 0; f < 3; ++f) {
            const geom::Vec3 col{v.at(i, 0, f), v.at(i, 1, f), v.at(i, 2, f)};
            const geom::Vec3 rc = geom::apply(q, col);
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(std::abs(r.at(i, a, f) - rc[a]) < 1e-15);
            }
        }
}
