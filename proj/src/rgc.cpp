#include "visnet/rgc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "visnet/errors.hpp"
#include "visnet/synth.hpp"

namespace visnet::rgc {

namespace {

using geom::DirectionField;
using geom::VecFeat;
using num::Tensor;

// (3,F) x (F,F) channel map, out[a][f] = sum_g in[a][g] w[g][f].
void channel_map(const double* in, const Tensor& w, std::size_t f_dim, double* out) {
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t f = 0; f < f_dim; ++f) out[a * f_dim + f] = 0.0;
        for (std::size_t g = 0; g < f_dim; ++g) {
            const double x = in[a * f_dim + g];
            if (x == 0.0) continue;
            const double* wrow = &w.data[g * f_dim];
            for (std::size_t f = 0; f < f_dim; ++f) out[a * f_dim + f] += x * wrow[f];
        }
    }
}

void check_square_weight(const Tensor& w, std::size_t f_dim, const char* name) {
    if (w.rank() != 2 || w.shape[0] != f_dim || w.shape[1] != f_dim) {
        throw DimensionError(std::string(name) + ": expected (" + std::to_string(f_dim) + "," +
                             std::to_string(f_dim) + "), got " + num::shape_str(w.shape));
    }
}

double now_ns() {
    return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                   std::chrono::steady_clock::now().time_since_epoch())
                                   .count());
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

num::Tensor unit_scales(std::size_t n, std::size_t channels) {
    return Tensor::full({n, n, channels}, 1.0);
}

geom::VecFeat aggregate_vectors(const DirectionField& df, const Tensor& per_edge_scale) {
    const std::size_t n = df.n;
    if (per_edge_scale.rank() != 3 || per_edge_scale.shape[0] != n ||
        per_edge_scale.shape[1] != n) {
        throw DimensionError("aggregate_vectors: per_edge_scale must be (N,N,F), got " +
                             num::shape_str(per_edge_scale.shape));
    }
    const std::size_t f_dim = per_edge_scale.shape[2];
    VecFeat v = VecFeat::zeros(n, f_dim);
    std::vector<double> addends;
    addends.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t f = 0; f < f_dim; ++f) {
                addends.clear();
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    addends.push_back(per_edge_scale.data[(i * n + j) * f_dim + f] *
                                      df.unit(i, j)[a]);
                }
                v.at(i, a, f) = num::sorted_sum(addends);
            }
    return v;
}

num::Tensor angle_feature(const VecFeat& v, const Tensor& was, const Tensor& wat) {
    const std::size_t n = v.n, f_dim = v.channels;
    check_square_weight(was, f_dim, "angle_feature: Was");
    check_square_weight(wat, f_dim, "angle_feature: Wat");
    Tensor out = Tensor::raw({n, f_dim});
    std::vector<double> s(3 * f_dim), t(3 * f_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double* vi = &v.values[i * 3 * f_dim];
        channel_map(vi, was, f_dim, s.data());
        channel_map(vi, wat, f_dim, t.data());
        for (std::size_t f = 0; f < f_dim; ++f) {
            out.data[i * f_dim + f] = s[0 * f_dim + f] * t[0 * f_dim + f] +
                                      s[1 * f_dim + f] * t[1 * f_dim + f] +
                                      s[2 * f_dim + f] * t[2 * f_dim + f];
        }
    }
    return out;
}

num::Tensor dihedral_feature(const VecFeat& v, const DirectionField& df, const Tensor& wds,
                             const Tensor& wdt) {
    const std::size_t n = v.n, f_dim = v.channels;
    if (df.n != n) throw DimensionError("dihedral_feature: VecFeat/DirectionField size mismatch");
    check_square_weight(wds, f_dim, "dihedral_feature: Wds");
    check_square_weight(wdt, f_dim, "dihedral_feature: Wdt");
    Tensor out = Tensor::raw({n, n, f_dim});
    std::vector<double> rs(3 * f_dim), rt(3 * f_dim);
    Tensor vi_block = Tensor::raw({3, f_dim});
    Tensor vj_block = Tensor::raw({3, f_dim});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double* u = df.unit(i, j);
            const geom::Vec3 axis_ij{u[0], u[1], u[2]};
            const double* w = df.unit(j, i);
            const geom::Vec3 axis_ji{w[0], w[1], w[2]};
            std::copy(&v.values[i * 3 * f_dim], &v.values[(i + 1) * 3 * f_dim],
                      vi_block.data.begin());
            std::copy(&v.values[j * 3 * f_dim], &v.values[(j + 1) * 3 * f_dim],
                      vj_block.data.begin());
            const Tensor rej_i = geom::reject(vi_block, axis_ij);
            const Tensor rej_j = geom::reject(vj_block, axis_ji);
            channel_map(rej_i.data.data(), wds, f_dim, rs.data());
            channel_map(rej_j.data.data(), wdt, f_dim, rt.data());
            for (std::size_t f = 0; f < f_dim; ++f) {
                out.data[(i * n + j) * f_dim + f] = rs[0 * f_dim + f] * rt[0 * f_dim + f] +
                                                    rs[1 * f_dim + f] * rt[1 * f_dim + f] +
                                                    rs[2 * f_dim + f] * rt[2 * f_dim + f];
            }
        }
    return out;
}

RgcFeatures compute_features(const DirectionField& df, const Tensor& per_edge_scale,
                             const Tensor& was, const Tensor& wat, const Tensor& wds,
                             const Tensor& wdt) {
    RgcFeatures out;
    out.agg_vec = aggregate_vectors(df, per_edge_scale);
    out.angle_scalar = angle_feature(out.agg_vec, was, wat);
    out.dihedral_scalar = dihedral_feature(out.agg_vec, df, wds, wdt);
    return out;
}

num::Tensor angle_oracle(const DirectionField& df) {
    const std::size_t n = df.n;
    Tensor out = Tensor::raw({n});
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* uij = df.unit(i, j);
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                const double* uik = df.unit(i, k);
                acc += uij[0] * uik[0] + uij[1] * uik[1] + uij[2] * uik[2];
            }
        }
        out.data[i] = acc;
    }
    return out;
}

num::Tensor dihedral_oracle(const DirectionField& df) {
    const std::size_t n = df.n;
    Tensor out = Tensor::raw({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double* u = df.unit(i, j);
            const geom::Vec3 axis_ij{u[0], u[1], u[2]};
            const double* w = df.unit(j, i);
            const geom::Vec3 axis_ji{w[0], w[1], w[2]};
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                const double* uik = df.unit(i, k);
                const geom::Vec3 rk =
                    geom::reject_vec({uik[0], uik[1], uik[2]}, axis_ij);
                for (std::size_t l = 0; l < n; ++l) {
                    if (l == j || l == i) continue;
                    const double* ujl = df.unit(j, l);
                    const geom::Vec3 rl =
                        geom::reject_vec({ujl[0], ujl[1], ujl[2]}, axis_ji);
                    acc += rk[0] * rl[0] + rk[1] * rl[1] + rk[2] * rl[2];
                }
            }
            out.data[i * n + j] = acc;
        }
    return out;
}

VisisParams VisisParams::init(std::size_t channels, Rng& rng, double scale) {
    VisisParams p;
    p.h_w1 = Tensor::random_gaussian({channels, channels}, rng, 0.0, scale);
    p.h_b1 = Tensor::zeros({channels});
    p.h_w2 = Tensor::random_gaussian({channels, channels}, rng, 0.0, scale);
    p.h_b2 = Tensor::zeros({channels});
    p.f_w1 = Tensor::random_gaussian({channels, channels}, rng, 0.0, scale);
    p.f_b1 = Tensor::zeros({channels});
    p.f_w2 = Tensor::random_gaussian({channels, channels}, rng, 0.0, scale);
    p.f_b2 = Tensor::zeros({channels});
    return p;
}

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Row-wise phi: y = silu(x W1 + b1) W2 + b2 applied to every F-row of x.
Tensor mlp_rows(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                const Tensor& b2) {
    const std::size_t f_dim = w1.shape[0];
    const std::size_t rows = x.numel() / f_dim;
    Tensor out = Tensor::raw(x.shape);
    std::vector<double> hidden(f_dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = &x.data[r * f_dim];
        for (std::size_t h = 0; h < f_dim; ++h) {
            double s = b1.data[h];
            for (std::size_t c = 0; c < f_dim; ++c) s += xr[c] * w1.data[c * f_dim + h];
            hidden[h] = silu(s);
        }
        for (std::size_t o = 0; o < f_dim; ++o) {
            double s = b2.data[o];
            for (std::size_t h = 0; h < f_dim; ++h) s += hidden[h] * w2.data[h * f_dim + o];
            out.data[r * f_dim + o] = s;
        }
    }
    return out;
}

}  // namespace

VisisResult visis_update(const Tensor& h, const Tensor& f_edge, const RgcFeatures& features,
                         const DirectionField& df, const VisisParams& params) {
    const std::size_t n = features.agg_vec.n;
    const std::size_t f_dim = features.agg_vec.channels;
    if (h.rank() != 2 || h.shape[0] != n || h.shape[1] != f_dim) {
        throw DimensionError("visis_update: h must be (N,F), got " + num::shape_str(h.shape));
    }
    if (f_edge.rank() != 3 || f_edge.shape[0] != n || f_edge.shape[1] != n ||
        f_edge.shape[2] != f_dim) {
        throw DimensionError("visis_update: f_edge must be (N,N,F), got " +
                             num::shape_str(f_edge.shape));
    }
    // Geometric precursors with identity maps: <v_i, v_i> and the rejected
    // pair inner products.
    Tensor eye = Tensor::zeros({f_dim, f_dim});
    for (std::size_t f = 0; f < f_dim; ++f) eye.data[f * f_dim + f] = 1.0;
    const Tensor node_term = angle_feature(features.agg_vec, eye, eye);
    const Tensor edge_term = dihedral_feature(features.agg_vec, df, eye, eye);

    VisisResult out;
    out.h = h;
    const Tensor dh = mlp_rows(node_term, params.h_w1, params.h_b1, params.h_w2, params.h_b2);
    for (std::size_t i = 0; i < out.h.data.size(); ++i) out.h.data[i] += dh.data[i];
    out.f_edge = f_edge;
    const Tensor dfe = mlp_rows(edge_term, params.f_w1, params.f_b1, params.f_w2, params.f_b2);
    for (std::size_t i = 0; i < out.f_edge.data.size(); ++i) out.f_edge.data[i] += dfe.data[i];
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ContractError("loglog_slope: need at least two matched points");
    }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchResult scaling_benchmark(const std::vector<std::size_t>& sizes, int repeats,
                              std::uint64_t seed, std::size_t cross_check_max) {
    if (sizes.size() < 4) throw ContractError("scaling_benchmark: need at least 4 sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] <= sizes[i - 1]) throw ContractError("scaling_benchmark: sizes must ascend");
    }
    if (sizes.back() < sizes.front() * 8) {
        throw ContractError("scaling_benchmark: sizes must span at least 8x");
    }
    if (repeats < 1) throw ContractError("scaling_benchmark: repeats must be >= 1");

    BenchResult result;
    volatile double sink = 0.0;
    for (std::size_t n : sizes) {
        Rng rng(seed);
        const geom::Conformer c = synth::random_conformer(n, rng);
        const DirectionField df = geom::direction_field(c);
        const Tensor scales = unit_scales(n, 1);
        const Tensor eye = Tensor::from({1, 1}, {1.0});

        std::vector<double> t_fast, t_angle, t_dih;
        Tensor fast_angle, fast_dih, oracle_angle, oracle_dih;
        for (int r = 0; r < repeats; ++r) {
            double t0 = now_ns();
            const VecFeat v = aggregate_vectors(df, scales);
            fast_angle = angle_feature(v, eye, eye);
            fast_dih = dihedral_feature(v, df, eye, eye);
            t_fast.push_back(now_ns() - t0);
            sink = sink + fast_angle.data[0] + fast_dih.data.back();

            t0 = now_ns();
            oracle_angle = angle_oracle(df);
            t_angle.push_back(now_ns() - t0);
            sink = sink + oracle_angle.data[0];

            t0 = now_ns();
            oracle_dih = dihedral_oracle(df);
            t_dih.push_back(now_ns() - t0);
            sink = sink + oracle_dih.data.back();
        }
        if (n <= cross_check_max) {
            for (std::size_t i = 0; i < n; ++i) {
                result.max_angle_diff = std::max(
                    result.max_angle_diff, std::abs(fast_angle.data[i] - oracle_angle.data[i]));
            }
            for (std::size_t e = 0; e < n * n; ++e) {
                result.max_dihedral_diff = std::max(
                    result.max_dihedral_diff, std::abs(fast_dih.data[e] - oracle_dih.data[e]));
            }
        }
        result.rows.push_back({n, median(t_fast), median(t_angle), median(t_dih)});
    }
    std::vector<double> ns, fast, ang, dih;
    for (const BenchRow& row : result.rows) {
        ns.push_back(static_cast<double>(row.n));
        fast.push_back(row.fast_ns);
        ang.push_back(row.angle_oracle_ns);
        dih.push_back(row.dihedral_oracle_ns);
    }
    result.slope_fast = loglog_slope(ns, fast);
    result.slope_angle_oracle = loglog_slope(ns, ang);
    result.slope_dihedral_oracle = loglog_slope(ns, dih);
    return result;
}

std::string benchmark_csv(const BenchResult& result) {
    std::string out = "N,fast_ns,angle_oracle_ns,dihedral_oracle_ns\n";
    char buf[256];
    for (const BenchRow& row : result.rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.0f,%.0f,%.0f\n", row.n, row.fast_ns,
                      row.angle_oracle_ns, row.dihedral_oracle_ns);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "# slopes fast=%.3f angle_oracle=%.3f dihedral_oracle=%.3f\n",
                  result.slope_fast, result.slope_angle_oracle, result.slope_dihedral_oracle);
    out += buf;
    return out;
}

}  // namespace visnet::rgc
