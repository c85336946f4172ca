#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visnet/geom.hpp"
#include "visnet/tensor.hpp"

namespace visnet::rgc {

// Aggregated-vector angular and dihedral features for one conformer.
// angle_scalar and dihedral_scalar are rigid-motion invariant; agg_vec
// rotates with the conformer.
struct RgcFeatures {
    num::Tensor angle_scalar;     // (N,F)
    num::Tensor dihedral_scalar;  // (N,N,F), zero diagonal
    geom::VecFeat agg_vec;
};

// (N,N,F) per-edge scales of ones; the plain unit-vector sum case.
num::Tensor unit_scales(std::size_t n, std::size_t channels);

// v_i[:,f] = sum_{j != i} scale[i][j][f] * r_ij_hat. The per-entry sums
// run in ascending value order, so relabeling atoms permutes the result
// bitwise exactly.
geom::VecFeat aggregate_vectors(const geom::DirectionField& df,
                                const num::Tensor& per_edge_scale);

// out[i][f] = <(v_i Was)[:,f], (v_i Wat)[:,f]> over the 3 spatial axes.
num::Tensor angle_feature(const geom::VecFeat& v, const num::Tensor& was,
                          const num::Tensor& wat);

// out[i][j][f] = <(rej(v_i, r_ij) Wds)[:,f], (rej(v_j, r_ji) Wdt)[:,f]>.
num::Tensor dihedral_feature(const geom::VecFeat& v, const geom::DirectionField& df,
                             const num::Tensor& wds, const num::Tensor& wdt);

RgcFeatures compute_features(const geom::DirectionField& df, const num::Tensor& per_edge_scale,
                             const num::Tensor& was, const num::Tensor& wat,
                             const num::Tensor& wds, const num::Tensor& wdt);

// Brute-force references. Unit scales and identity weights assumed.
// angle_oracle: out[i] = sum over ordered neighbor pairs (j,k) of cos(theta_jik).
num::Tensor angle_oracle(const geom::DirectionField& df);  // (N), O(N^3)
// dihedral_oracle: explicit quadruplet enumeration about every axis (i,j).
num::Tensor dihedral_oracle(const geom::DirectionField& df);  // (N,N), O(N^4)

// One-hidden-layer MLP used as the phi update of ViS-IS. Zero biases give
// phi(0) = 0, so a zero-geometry update is the identity.
struct VisisParams {
    num::Tensor h_w1, h_b1, h_w2, h_b2;  // (F,F),(F),(F,F),(F)
    num::Tensor f_w1, f_b1, f_w2, f_b2;
    static VisisParams init(std::size_t channels, Rng& rng, double scale = 0.1);
};

struct VisisResult {
    num::Tensor h;       // (N,F)
    num::Tensor f_edge;  // (N,N,F)
};

// Residual node/edge update: h' = h + phi_h(<v_i, v_i>),
// f' = f + phi_f(<rej(v_i, r_ij), rej(v_j, r_ji)>).
VisisResult visis_update(const num::Tensor& h, const num::Tensor& f_edge,
                         const RgcFeatures& features, const geom::DirectionField& df,
                         const VisisParams& params);

struct BenchRow {
    std::size_t n = 0;
    double fast_ns = 0.0;
    double angle_oracle_ns = 0.0;
    double dihedral_oracle_ns = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double slope_fast = 0.0;
    double slope_angle_oracle = 0.0;
    double slope_dihedral_oracle = 0.0;
    // Largest |fast - oracle| over the instances small enough to cross-check.
    double max_angle_diff = 0.0;
    double max_dihedral_diff = 0.0;
};

// Median wall times per size plus fitted log-log slopes. Sizes must be
// ascending, at least 4 of them, spanning a factor >= 8. Instances with
// N <= cross_check_max are verified against the oracles as they run.
BenchResult scaling_benchmark(const std::vector<std::size_t>& sizes, int repeats,
                              std::uint64_t seed, std::size_t cross_check_max = 16);

// CSV per External Interfaces: N,fast_ns,angle_oracle_ns,dihedral_oracle_ns
// plus a trailing comment line with the fitted slopes.
std::string benchmark_csv(const BenchResult& result);

// Least-squares slope of ln(y) against ln(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace visnet::rgc
