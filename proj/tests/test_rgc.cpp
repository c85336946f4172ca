#include <doctest.h>

#include <cmath>

#include "visnet/errors.hpp"
#include "visnet/rgc.hpp"
#include "visnet/synth.hpp"

using namespace visnet;

namespace {

num::Tensor identity(std::size_t n) {
    num::Tensor t = num::Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at2(i, i) = 1.0;
    return t;
}

rgc::RgcFeatures unit_features(const geom::Conformer& c, std::size_t f_dim) {
    const geom::DirectionField df = geom::direction_field(c);
    const num::Tensor eye = identity(f_dim);
    return rgc::compute_features(df, rgc::unit_scales(c.n_atoms(), f_dim), eye, eye, eye, eye);
}

}  // namespace

TEST_CASE("equilateral triangle: angle feature is exactly 3") {
    geom::Conformer c;
    c.id = "triangle";
    const double h = std::sqrt(3.0) / 2.0;
    c.positions = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, h, 0.0}};
    c.atomic_numbers = {6, 6, 6};
    const rgc::RgcFeatures f = unit_features(c, 2);
    // |u_ij + u_ik|^2 = 2 + 2 cos(60 deg) = 3 at every vertex.
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t ch = 0; ch < 2; ++ch) {
            CHECK(std::abs(f.angle_scalar.at2(i, ch) - 3.0) < 1e-12);
        }
}

TEST_CASE("fast path matches brute-force oracles on random conformers") {
    Rng rng(31);
    for (std::size_t n : {3, 5, 9, 16}) {
        const geom::Conformer c = synth::random_conformer(n, rng);
        const geom::DirectionField df = geom::direction_field(c);
        const rgc::RgcFeatures f = unit_features(c, 3);
        const num::Tensor angle_ref = rgc::angle_oracle(df);
        const num::Tensor dihedral_ref = rgc::dihedral_oracle(df);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(f.angle_scalar.at2(i, 0) - angle_ref.data[i]) < 1e-12);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(std::abs(f.dihedral_scalar.at3(i, j, 0) - dihedral_ref.at2(i, j)) < 1e-11);
            }
        }
    }
}

TEST_CASE("rigid-motion invariance of the scalar features") {
    Rng rng(37);
    const geom::Conformer c = synth::random_conformer(6, rng);
    const std::size_t f_dim = 4;
    const num::Tensor scales = num::Tensor::random_uniform({6, 6, f_dim}, rng, 0.5, 1.5);
    const num::Tensor was = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wat = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wds = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wdt = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const rgc::RgcFeatures base =
        rgc::compute_features(geom::direction_field(c), scales, was, wat, wds, wdt);
    for (int t = 0; t < 20; ++t) {
        const geom::Mat3 q = geom::random_rotation(rng);
        const geom::Conformer moved =
            c.rotated(q).translated({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                                     rng.uniform(-3.0, 3.0)});
        const rgc::RgcFeatures f =
            rgc::compute_features(geom::direction_field(moved), scales, was, wat, wds, wdt);
        CHECK(num::max_abs_diff(base.angle_scalar, f.angle_scalar) < 1e-10);
        CHECK(num::max_abs_diff(base.dihedral_scalar, f.dihedral_scalar) < 1e-10);

        const geom::VecFeat rotated = base.agg_vec.rotated(q);
        double dev = 0.0;
        for (std::size_t i = 0; i < rotated.values.size(); ++i) {
            dev = std::max(dev, std::abs(rotated.values[i] - f.agg_vec.values[i]));
        }
        CHECK(dev < 1e-12);
    }
}

TEST_CASE("permutation equivariance is bitwise exact") {
    Rng rng(41);
    const std::size_t n = 7, f_dim = 3;
    const geom::Conformer c = synth::random_conformer(n, rng);
    const num::Tensor scales = num::Tensor::random_uniform({n, n, f_dim}, rng, 0.5, 1.5);
    const num::Tensor eye = identity(f_dim);
    const rgc::RgcFeatures base =
        rgc::compute_features(geom::direction_field(c), scales, eye, eye, eye, eye);

    const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    num::Tensor perm_scales = num::Tensor::raw({n, n, f_dim});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t f = 0; f < f_dim; ++f)
                perm_scales.at3(i, j, f) = scales.at3(perm[i], perm[j], f);
    const rgc::RgcFeatures permuted = rgc::compute_features(
        geom::direction_field(c.permuted(perm)), perm_scales, eye, eye, eye, eye);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < f_dim; ++f) {
            CHECK(permuted.angle_scalar.at2(i, f) == base.angle_scalar.at2(perm[i], f));
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t f = 0; f < f_dim; ++f) {
                CHECK(permuted.dihedral_scalar.at3(i, j, f) ==
                      base.dihedral_scalar.at3(perm[i], perm[j], f));
            }
}

TEST_CASE("visis update with zero geometry is the identity") {
    Rng rng(43);
    const std::size_t n = 4, f_dim = 5;
    const geom::Conformer c = synth::random_conformer(n, rng);
    const geom::DirectionField df = geom::direction_field(c);
    const num::Tensor zero_scales = num::Tensor::zeros({n, n, f_dim});
    const num::Tensor eye = identity(f_dim);
    const rgc::RgcFeatures feat = rgc::compute_features(df, zero_scales, eye, eye, eye, eye);
    rgc::VisisParams params = rgc::VisisParams::init(f_dim, rng);
    const num::Tensor h = num::Tensor::random_gaussian({n, f_dim}, rng, 0.0, 1.0);
    const num::Tensor f_edge = num::Tensor::random_gaussian({n, n, f_dim}, rng, 0.0, 1.0);
    const rgc::VisisResult out = rgc::visis_update(h, f_edge, feat, df, params);
    CHECK(out.h.bitwise_equal(h));
    CHECK(out.f_edge.bitwise_equal(f_edge));
}

TEST_CASE("loglog_slope recovers exact power laws") {
    std::vector<double> x{16, 32, 64, 128};
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v * v * v);
    CHECK(std::abs(rgc::loglog_slope(x, y) - 3.0) < 1e-12);
    std::vector<double> lin;
    for (double v : x) lin.push_back(7.0 * v);
    CHECK(std::abs(rgc::loglog_slope(x, lin) - 1.0) < 1e-12);
}

TEST_CASE("scaling_benchmark validates its size list") {
    CHECK_THROWS_AS(rgc::scaling_benchmark({16, 8, 32, 64}, 1, 0), ContractError);
    CHECK_THROWS_AS(rgc::scaling_benchmark({16, 32, 64}, 1, 0), ContractError);
    CHECK_THROWS_AS(rgc::scaling_benchmark({16, 18, 20, 22}, 1, 0), ContractError);
}

TEST_CASE("benchmark_csv carries rows and slope comment") {
    rgc::BenchResult r;
    r.rows = {{8, 10.0, 100.0, 1000.0}, {16, 20.0, 800.0, 16000.0}};
    r.slope_fast = 1.0;
    r.slope_angle_oracle = 3.0;
    r.slope_dihedral_oracle = 4.0;
    const std::string csv = rgc::benchmark_csv(r);
    CHECK(csv.find("N,fast_ns,angle_oracle_ns,dihedral_oracle_ns") == 0);
    CHECK(csv.find("# slopes") != std::string::npos);
    CHECK(csv.find("16,") != std::string::npos);
}
