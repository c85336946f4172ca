#include "visnet/tape.hpp"

#include <algorithm>
#include <cmath>

#include "visnet/errors.hpp"

namespace visnet::num {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace

void Tape::check_same_tape(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw ContractError("Tape: variable does not belong to this tape");
    }
}

Var Tape::make(Tensor value, const std::vector<Var>& parents, Backward fn) {
    Node n;
    n.value = std::move(value);
    for (Var p : parents) {
        check_same_tape(p);
        if (grad_enabled_ && nodes_[p.id].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<double>& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
}

Var Tape::leaf(Tensor value) { return make(std::move(value), {}, nullptr); }

Var Tape::input(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const std::string& name, Tensor value) {
    // Re-registration returns the existing node so that several forward
    // passes on one tape share parameters (and accumulate their grads).
    const auto it = params_.find(name);
    if (it != params_.end()) return Var{this, it->second};
    Var v = input(std::move(value));
    params_[name] = v.id;
    return v;
}

const Tensor& Tape::value(Var v) const {
    check_same_tape(v);
    return nodes_[v.id].value;
}

Tensor Tape::grad(Var v) const {
    check_same_tape(v);
    const Node& n = nodes_[v.id];
    Tensor g = Tensor::zeros(n.value.shape);
    if (!n.grad.empty()) g.data = n.grad;
    return g;
}

GradMap Tape::backward(Var loss) {
    check_same_tape(loss);
    if (!grad_enabled_) throw ContractError("backward: tape was built without gradients");
    if (value(loss).numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(value(loss).shape));
    }
    for (Node& n : nodes_) n.grad.clear();
    grad_buf(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.requires_grad && !n.grad.empty() && n.backward) n.backward(*this, id);
    }
    GradMap out;
    for (const auto& [name, id] : params_) {
        out[name] = grad(Var{this, id});
    }
    return out;
}

// --- elementwise -----------------------------------------------------------

Var Tape::add(Var a, Var b) {
    require(value(a).same_shape(value(b)), "add: shapes " + shape_str(value(a).shape) +
                                               " vs " + shape_str(value(b).shape));
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] + bv[i];
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        for (int p : {pa, pb}) {
            if (!t.nodes_[p].requires_grad) continue;
            auto& gp = t.grad_buf(p);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    require(value(a).same_shape(value(b)), "sub: shapes " + shape_str(value(a).shape) +
                                               " vs " + shape_str(value(b).shape));
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] - bv[i];
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        if (t.nodes_[pa].requires_grad) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    require(value(a).same_shape(value(b)), "mul: shapes " + shape_str(value(a).shape) +
                                               " vs " + shape_str(value(b).shape));
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * bv[i];
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        const auto& bv = t.nodes_[pb].value.data;
        if (t.nodes_[pa].requires_grad) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var Tape::scale(Var a, double c) {
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * c;
    int pa = a.id;
    return make(std::move(out), {a}, [pa, c](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
}

Var Tape::abs_elem(Var a) {
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::abs(av[i]);
    int pa = a.id;
    return make(std::move(out), {a}, [pa](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * (av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0));
        }
    });
}

Var Tape::log_elem(Var a) {
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (av[i] <= 0.0) throw ContractError("log_elem: non-positive input");
        out.data[i] = std::log(av[i]);
    }
    int pa = a.id;
    return make(std::move(out), {a}, [pa](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
    });
}

Var Tape::silu(Var a) {
    Tensor out = Tensor::raw(value(a).shape);
    const auto& av = value(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * sigmoid(av[i]);
    int pa = a.id;
    return make(std::move(out), {a}, [pa](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = sigmoid(av[i]);
            ga[i] += g[i] * s * (1.0 + av[i] * (1.0 - s));
        }
    });
}

// --- linear algebra ----------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.shape[1] == bv.shape[0],
            "matmul: incompatible shapes " + shape_str(av.shape) + " and " +
                shape_str(bv.shape));
    const std::size_t M = av.shape[0], K = av.shape[1], P = bv.shape[1];
    Tensor out = Tensor::raw({M, P});
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            const double x = av.data[i * K + k];
            const double* brow = &bv.data[k * P];
            double* orow = &out.data[i * P];
            for (std::size_t j = 0; j < P; ++j) orow[j] += x * brow[j];
        }
    }
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb, M, K, P](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        const auto& bv = t.nodes_[pb].value.data;
        if (t.nodes_[pa].requires_grad) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t k = 0; k < K; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < P; ++j) s += g[i * P + j] * bv[k * P + j];
                    ga[i * K + k] += s;
                }
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < M; ++i) {
                    const double x = av[i * K + k];
                    for (std::size_t j = 0; j < P; ++j) gb[k * P + j] += x * g[i * P + j];
                }
        }
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.shape[1] == bv.shape[1],
            "matmul_nt: incompatible shapes " + shape_str(av.shape) + " and " +
                shape_str(bv.shape));
    const std::size_t M = av.shape[0], K = av.shape[1], P = bv.shape[0];
    Tensor out = Tensor::raw({M, P});
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < P; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += av.data[i * K + k] * bv.data[j * K + k];
            out.data[i * P + j] = s;
        }
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb, M, K, P](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        const auto& bv = t.nodes_[pb].value.data;
        if (t.nodes_[pa].requires_grad) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < P; ++j) {
                    const double gij = g[i * P + j];
                    for (std::size_t k = 0; k < K; ++k) ga[i * K + k] += gij * bv[j * K + k];
                }
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < P; ++j) {
                    const double gij = g[i * P + j];
                    for (std::size_t k = 0; k < K; ++k) gb[j * K + k] += gij * av[i * K + k];
                }
        }
    });
}

Var Tape::transpose2d(Var a) {
    const Tensor& av = value(a);
    require(av.rank() == 2, "transpose2d: need rank 2, got " + shape_str(av.shape));
    const std::size_t R = av.shape[0], C = av.shape[1];
    Tensor out = Tensor::raw({C, R});
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out.data[j * R + i] = av.data[i * C + j];
    int pa = a.id;
    return make(std::move(out), {a}, [pa, R, C](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j) ga[i * C + j] += g[j * R + i];
    });
}

Var Tape::last_linear(Var x, Var w) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    require(wv.rank() == 2 && xv.rank() >= 1 && xv.shape.back() == wv.shape[0],
            "last_linear: incompatible shapes " + shape_str(xv.shape) + " and " +
                shape_str(wv.shape));
    const std::size_t C = wv.shape[0], D = wv.shape[1];
    const std::size_t R = xv.numel() / C;
    Shape oshape = xv.shape;
    oshape.back() = D;
    Tensor out = Tensor::raw(oshape);
    for (std::size_t r = 0; r < R; ++r) {
        const double* xr = &xv.data[r * C];
        double* orow = &out.data[r * D];
        for (std::size_t c = 0; c < C; ++c) {
            const double xc = xr[c];
            if (xc == 0.0) continue;
            const double* wr = &wv.data[c * D];
            for (std::size_t d = 0; d < D; ++d) orow[d] += xc * wr[d];
        }
    }
    int px = x.id, pw = w.id;
    return make(std::move(out), {x, w}, [px, pw, R, C, D](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& xv = t.nodes_[px].value.data;
        const auto& wv = t.nodes_[pw].value.data;
        if (t.nodes_[px].requires_grad) {
            auto& gx = t.grad_buf(px);
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                    double s = 0.0;
                    for (std::size_t d = 0; d < D; ++d) s += g[r * D + d] * wv[c * D + d];
                    gx[r * C + c] += s;
                }
        }
        if (t.nodes_[pw].requires_grad) {
            auto& gw = t.grad_buf(pw);
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                    const double xc = xv[r * C + c];
                    if (xc == 0.0) continue;
                    for (std::size_t d = 0; d < D; ++d) gw[c * D + d] += xc * g[r * D + d];
                }
        }
    });
}

Var Tape::add_bias_last(Var x, Var b) {
    const Tensor& xv = value(x);
    const Tensor& bv = value(b);
    require(bv.rank() == 1 && xv.shape.back() == bv.shape[0],
            "add_bias_last: shapes " + shape_str(xv.shape) + " and " + shape_str(bv.shape));
    const std::size_t D = bv.shape[0];
    const std::size_t R = xv.numel() / D;
    Tensor out = xv;
    out.requires_grad = false;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t d = 0; d < D; ++d) out.data[r * D + d] += bv.data[d];
    int px = x.id, pb = b.id;
    return make(std::move(out), {x, b}, [px, pb, R, D](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        if (t.nodes_[px].requires_grad) {
            auto& gx = t.grad_buf(px);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t d = 0; d < D; ++d) gb[d] += g[r * D + d];
        }
    });
}

Var Tape::softmax_rows(Var a) {
    const Tensor& av = value(a);
    require(av.rank() == 2, "softmax_rows: need rank 2, got " + shape_str(av.shape));
    av.check_finite("softmax_rows");
    const std::size_t R = av.shape[0], C = av.shape[1];
    Tensor out = Tensor::raw({R, C});
    for (std::size_t r = 0; r < R; ++r) {
        const double* xr = &av.data[r * C];
        double* yr = &out.data[r * C];
        double m = xr[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, xr[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            yr[c] = std::exp(xr[c] - m);
            z += yr[c];
        }
        for (std::size_t c = 0; c < C; ++c) yr[c] /= z;
    }
    int pa = a.id;
    return make(std::move(out), {a}, [pa, R, C](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value.data;
        auto& ga = t.grad_buf(pa);
        for (std::size_t r = 0; r < R; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
            for (std::size_t c = 0; c < C; ++c)
                ga[r * C + c] += y[r * C + c] * (g[r * C + c] - dot);
        }
    });
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    const Tensor& xv = value(x);
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);
    require(xv.rank() == 2 && gv.rank() == 1 && bv.rank() == 1 &&
                gv.shape[0] == xv.shape[1] && bv.shape[0] == xv.shape[1],
            "layer_norm_rows: shapes " + shape_str(xv.shape) + ", " + shape_str(gv.shape) +
                ", " + shape_str(bv.shape));
    const std::size_t R = xv.shape[0], C = xv.shape[1];
    Tensor out = Tensor::raw({R, C});
    for (std::size_t r = 0; r < R; ++r) {
        const double* xr = &xv.data[r * C];
        double mu = 0.0;
        for (std::size_t c = 0; c < C; ++c) mu += xr[c];
        mu /= static_cast<double>(C);
        double var = 0.0;
        for (std::size_t c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= static_cast<double>(C);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < C; ++c)
            out.data[r * C + c] = gv.data[c] * (xr[c] - mu) * inv + bv.data[c];
    }
    int px = x.id, pg = gamma.id, pb = beta.id;
    return make(std::move(out), {x, gamma, beta}, [px, pg, pb, R, C, eps](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& xv = t.nodes_[px].value.data;
        const auto& gv = t.nodes_[pg].value.data;
        const bool need_x = t.nodes_[px].requires_grad;
        const bool need_g = t.nodes_[pg].requires_grad;
        const bool need_b = t.nodes_[pb].requires_grad;
        std::vector<double> xhat(C), gy(C);
        for (std::size_t r = 0; r < R; ++r) {
            const double* xr = &xv[r * C];
            double mu = 0.0;
            for (std::size_t c = 0; c < C; ++c) mu += xr[c];
            mu /= static_cast<double>(C);
            double var = 0.0;
            for (std::size_t c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
            var /= static_cast<double>(C);
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t c = 0; c < C; ++c) xhat[c] = (xr[c] - mu) * inv;
            if (need_b) {
                auto& gb = t.grad_buf(pb);
                for (std::size_t c = 0; c < C; ++c) gb[c] += g[r * C + c];
            }
            if (need_g) {
                auto& gg = t.grad_buf(pg);
                for (std::size_t c = 0; c < C; ++c) gg[c] += g[r * C + c] * xhat[c];
            }
            if (need_x) {
                auto& gx = t.grad_buf(px);
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    gy[c] = g[r * C + c] * gv[c];
                    m1 += gy[c];
                    m2 += gy[c] * xhat[c];
                }
                m1 /= static_cast<double>(C);
                m2 /= static_cast<double>(C);
                for (std::size_t c = 0; c < C; ++c)
                    gx[r * C + c] += (gy[c] - m1 - xhat[c] * m2) * inv;
            }
        }
    });
}

// --- reductions / restructuring ---------------------------------------------

Var Tape::sum_all(Var a) {
    const Tensor& av = value(a);
    double s = 0.0;
    for (double x : av.data) s += x;
    int pa = a.id;
    return make(Tensor::scalar(s), {a}, [pa](Tape& t, int self) {
        const double g = t.nodes_[self].grad[0];
        auto& ga = t.grad_buf(pa);
        for (double& x : ga) x += g;
    });
}

Var Tape::mean_all(Var a) {
    const Tensor& av = value(a);
    const double n = static_cast<double>(av.numel());
    double s = 0.0;
    for (double x : av.data) s += x;
    int pa = a.id;
    return make(Tensor::scalar(s / n), {a}, [pa, n](Tape& t, int self) {
        const double g = t.nodes_[self].grad[0] / n;
        auto& ga = t.grad_buf(pa);
        for (double& x : ga) x += g;
    });
}

Var Tape::mean_rows_range(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = value(x);
    require(xv.rank() == 2 && begin < end && end <= xv.shape[0],
            "mean_rows_range: bad range on " + shape_str(xv.shape));
    const std::size_t F = xv.shape[1];
    const double inv = 1.0 / static_cast<double>(end - begin);
    Tensor out = Tensor::raw({F});
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t f = 0; f < F; ++f) out.data[f] += xv.data[r * F + f];
    for (std::size_t f = 0; f < F; ++f) out.data[f] *= inv;
    int px = x.id;
    return make(std::move(out), {x}, [px, begin, end, F, inv](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gx = t.grad_buf(px);
        for (std::size_t r = begin; r < end; ++r)
            for (std::size_t f = 0; f < F; ++f) gx[r * F + f] += g[f] * inv;
    });
}

Var Tape::take_diag(Var a) {
    const Tensor& av = value(a);
    require(av.rank() == 2 && av.shape[0] == av.shape[1],
            "take_diag: need square matrix, got " + shape_str(av.shape));
    const std::size_t B = av.shape[0];
    Tensor out = Tensor::raw({B});
    for (std::size_t i = 0; i < B; ++i) out.data[i] = av.data[i * B + i];
    int pa = a.id;
    return make(std::move(out), {a}, [pa, B](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& ga = t.grad_buf(pa);
        for (std::size_t i = 0; i < B; ++i) ga[i * B + i] += g[i];
    });
}

Var Tape::concat_last(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_last: no parts");
    Shape lead = value(parts[0]).shape;
    lead.pop_back();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        Shape s = value(p).shape;
        const std::size_t w = s.back();
        s.pop_back();
        require(s == lead, "concat_last: leading dims disagree");
        widths.push_back(w);
        total += w;
    }
    const std::size_t R = shape_numel(lead);
    Shape oshape = lead;
    oshape.push_back(total);
    Tensor out = Tensor::raw(oshape);
    std::vector<int> pids;
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& pd = value(parts[k]).data;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c)
                out.data[r * total + off + c] = pd[r * widths[k] + c];
        off += widths[k];
        pids.push_back(parts[k].id);
    }
    return make(std::move(out), parts, [pids, widths, R, total](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        std::size_t off = 0;
        for (std::size_t k = 0; k < pids.size(); ++k) {
            if (t.nodes_[pids[k]].requires_grad) {
                auto& gp = t.grad_buf(pids[k]);
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        gp[r * widths[k] + c] += g[r * total + off + c];
            }
            off += widths[k];
        }
    });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    Shape tail = value(parts[0]).shape;
    tail.erase(tail.begin());
    std::size_t rows = 0;
    std::vector<std::size_t> counts;
    for (Var p : parts) {
        Shape s = value(p).shape;
        const std::size_t r = s[0];
        s.erase(s.begin());
        require(s == tail, "concat_rows: trailing dims disagree");
        counts.push_back(r * shape_numel(tail));
        rows += r;
    }
    Shape oshape = tail;
    oshape.insert(oshape.begin(), rows);
    Tensor out = Tensor::raw(oshape);
    std::vector<int> pids;
    std::size_t off = 0;
    for (Var p : parts) {
        const auto& pd = value(p).data;
        std::copy(pd.begin(), pd.end(), out.data.begin() + off);
        off += pd.size();
        pids.push_back(p.id);
    }
    return make(std::move(out), parts, [pids, counts](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        std::size_t off = 0;
        for (std::size_t k = 0; k < pids.size(); ++k) {
            if (t.nodes_[pids[k]].requires_grad) {
                auto& gp = t.grad_buf(pids[k]);
                for (std::size_t i = 0; i < counts[k]; ++i) gp[i] += g[off + i];
            }
            off += counts[k];
        }
    });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: no rows");
    const std::size_t F = value(rows[0]).numel();
    for (Var r : rows)
        require(value(r).rank() == 1 && value(r).numel() == F, "stack_rows: rank-1 rows of equal length required");
    Tensor out = Tensor::raw({rows.size(), F});
    std::vector<int> pids;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& rd = value(rows[k]).data;
        std::copy(rd.begin(), rd.end(), out.data.begin() + k * F);
        pids.push_back(rows[k].id);
    }
    return make(std::move(out), rows, [pids, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        for (std::size_t k = 0; k < pids.size(); ++k) {
            if (!t.nodes_[pids[k]].requires_grad) continue;
            auto& gp = t.grad_buf(pids[k]);
            for (std::size_t f = 0; f < F; ++f) gp[f] += g[k * F + f];
        }
    });
}

Var Tape::embedding_rows(Var table, const std::vector<std::size_t>& indices) {
    const Tensor& tv = value(table);
    require(tv.rank() == 2, "embedding_rows: table must be rank 2");
    const std::size_t V = tv.shape[0], F = tv.shape[1];
    for (std::size_t idx : indices) {
        if (idx >= V) {
            throw ContractError("embedding_rows: index " + std::to_string(idx) +
                                " out of vocabulary " + std::to_string(V));
        }
    }
    Tensor out = Tensor::raw({indices.size(), F});
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t f = 0; f < F; ++f) out.data[i * F + f] = tv.data[indices[i] * F + f];
    int pt = table.id;
    return make(std::move(out), {table}, [pt, indices, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gt = t.grad_buf(pt);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t f = 0; f < F; ++f) gt[indices[i] * F + f] += g[i * F + f];
    });
}

Var Tape::bias_lookup(Var table, const std::vector<std::size_t>& codes, std::size_t m) {
    const Tensor& tv = value(table);
    require(tv.rank() == 2 && codes.size() == m * m, "bias_lookup: bad shapes");
    const std::size_t V = tv.shape[0], H = tv.shape[1];
    for (std::size_t c : codes) {
        if (c >= V)
            throw ContractError("bias_lookup: code " + std::to_string(c) + " out of table " +
                                std::to_string(V));
    }
    Tensor out = Tensor::raw({m, m, H});
    for (std::size_t e = 0; e < codes.size(); ++e)
        for (std::size_t h = 0; h < H; ++h) out.data[e * H + h] = tv.data[codes[e] * H + h];
    int pt = table.id;
    return make(std::move(out), {table}, [pt, codes, H](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gt = t.grad_buf(pt);
        for (std::size_t e = 0; e < codes.size(); ++e)
            for (std::size_t h = 0; h < H; ++h) gt[codes[e] * H + h] += g[e * H + h];
    });
}

Var Tape::select_last(Var x, std::size_t channel) {
    const Tensor& xv = value(x);
    require(xv.rank() >= 2 && channel < xv.shape.back(),
            "select_last: channel out of range on " + shape_str(xv.shape));
    const std::size_t H = xv.shape.back();
    const std::size_t R = xv.numel() / H;
    Shape oshape = xv.shape;
    oshape.pop_back();
    Tensor out = Tensor::raw(oshape);
    for (std::size_t r = 0; r < R; ++r) out.data[r] = xv.data[r * H + channel];
    int px = x.id;
    return make(std::move(out), {x}, [px, H, R, channel](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gx = t.grad_buf(px);
        for (std::size_t r = 0; r < R; ++r) gx[r * H + channel] += g[r];
    });
}

Var Tape::l2_normalize_rows(Var x) {
    const Tensor& xv = value(x);
    require(xv.rank() == 2, "l2_normalize_rows: need rank 2");
    const std::size_t R = xv.shape[0], C = xv.shape[1];
    Tensor out = Tensor::raw({R, C});
    for (std::size_t r = 0; r < R; ++r) {
        double n2 = 0.0;
        for (std::size_t c = 0; c < C; ++c) n2 += xv.data[r * C + c] * xv.data[r * C + c];
        const double n = std::max(std::sqrt(n2), 1e-300);
        for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] = xv.data[r * C + c] / n;
    }
    int px = x.id;
    return make(std::move(out), {x}, [px, R, C](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& xv = t.nodes_[px].value.data;
        const auto& y = t.nodes_[self].value.data;
        auto& gx = t.grad_buf(px);
        for (std::size_t r = 0; r < R; ++r) {
            double n2 = 0.0, dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                n2 += xv[r * C + c] * xv[r * C + c];
                dot += g[r * C + c] * y[r * C + c];
            }
            const double n = std::max(std::sqrt(n2), 1e-300);
            for (std::size_t c = 0; c < C; ++c)
                gx[r * C + c] += (g[r * C + c] - dot * y[r * C + c]) / n;
        }
    });
}

Var Tape::add_rows_offset(Var x, Var y, std::size_t offset) {
    const Tensor& xv = value(x);
    const Tensor& yv = value(y);
    require(xv.rank() == 2 && yv.rank() == 2 && xv.shape[1] == yv.shape[1] &&
                offset + yv.shape[0] <= xv.shape[0],
            "add_rows_offset: shapes " + shape_str(xv.shape) + " and " + shape_str(yv.shape));
    const std::size_t F = xv.shape[1], N = yv.shape[0];
    Tensor out = xv;
    out.requires_grad = false;
    for (std::size_t r = 0; r < N; ++r)
        for (std::size_t f = 0; f < F; ++f) out.data[(offset + r) * F + f] += yv.data[r * F + f];
    int px = x.id, py = y.id;
    return make(std::move(out), {x, y}, [px, py, offset, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        if (t.nodes_[px].requires_grad) {
            auto& gx = t.grad_buf(px);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (t.nodes_[py].requires_grad) {
            auto& gy = t.grad_buf(py);
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t f = 0; f < F; ++f) gy[r * F + f] += g[(offset + r) * F + f];
        }
    });
}

// --- geometry ----------------------------------------------------------------

Var Tape::pairwise_dists(Var positions) {
    const Tensor& pv = value(positions);
    require(pv.rank() == 2 && pv.shape[1] == 3, "pairwise_dists: positions must be (N,3)");
    const std::size_t N = pv.shape[0];
    Tensor out = Tensor::raw({N, N});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            double d2 = 0.0;
            for (std::size_t a = 0; a < 3; ++a) {
                const double dx = pv.data[j * 3 + a] - pv.data[i * 3 + a];
                d2 += dx * dx;
            }
            const double d = std::sqrt(d2);
            if (d < 1e-9)
                throw DegenerateGeometryError("pairwise_dists: atoms " + std::to_string(i) +
                                              " and " + std::to_string(j) + " nearly coincide");
            out.data[i * N + j] = d;
        }
    int pp = positions.id;
    return make(std::move(out), {positions}, [pp, N](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& d = t.nodes_[self].value.data;
        const auto& pv = t.nodes_[pp].value.data;
        auto& gp = t.grad_buf(pp);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                const double gij = g[i * N + j];
                if (gij == 0.0) continue;
                const double inv = 1.0 / d[i * N + j];
                for (std::size_t a = 0; a < 3; ++a) {
                    const double u = (pv[j * 3 + a] - pv[i * 3 + a]) * inv;
                    gp[j * 3 + a] += gij * u;
                    gp[i * 3 + a] -= gij * u;
                }
            }
    });
}

Var Tape::unit_dirs(Var positions) {
    const Tensor& pv = value(positions);
    require(pv.rank() == 2 && pv.shape[1] == 3, "unit_dirs: positions must be (N,3)");
    const std::size_t N = pv.shape[0];
    Tensor out = Tensor::raw({N, N, 3});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            double v[3], d2 = 0.0;
            for (std::size_t a = 0; a < 3; ++a) {
                v[a] = pv.data[j * 3 + a] - pv.data[i * 3 + a];
                d2 += v[a] * v[a];
            }
            const double d = std::sqrt(d2);
            if (d < 1e-9)
                throw DegenerateGeometryError("unit_dirs: atoms " + std::to_string(i) + " and " +
                                              std::to_string(j) + " nearly coincide");
            for (std::size_t a = 0; a < 3; ++a) out.data[(i * N + j) * 3 + a] = v[a] / d;
        }
    int pp = positions.id;
    return make(std::move(out), {positions}, [pp, N](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& u = t.nodes_[self].value.data;
        const auto& pv = t.nodes_[pp].value.data;
        auto& gp = t.grad_buf(pp);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                const double* gij = &g[(i * N + j) * 3];
                const double* uij = &u[(i * N + j) * 3];
                double d2 = 0.0;
                for (std::size_t a = 0; a < 3; ++a) {
                    const double dx = pv[j * 3 + a] - pv[i * 3 + a];
                    d2 += dx * dx;
                }
                const double inv = 1.0 / std::sqrt(d2);
                const double gu = gij[0] * uij[0] + gij[1] * uij[1] + gij[2] * uij[2];
                for (std::size_t a = 0; a < 3; ++a) {
                    const double w = (gij[a] - gu * uij[a]) * inv;
                    gp[j * 3 + a] += w;
                    gp[i * 3 + a] -= w;
                }
            }
    });
}

Var Tape::aggregate_vectors(Var dirs, Var scales) {
    const Tensor& dv = value(dirs);
    const Tensor& sv = value(scales);
    require(dv.rank() == 3 && dv.shape[2] == 3 && dv.shape[0] == dv.shape[1],
            "aggregate_vectors: dirs must be (N,N,3)");
    require(sv.rank() == 3 && sv.shape[0] == dv.shape[0] && sv.shape[1] == dv.shape[0],
            "aggregate_vectors: scales must be (N,N,F), got " + shape_str(sv.shape));
    const std::size_t N = dv.shape[0], F = sv.shape[2];
    Tensor out = Tensor::raw({N, 3, F});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            const double* u = &dv.data[(i * N + j) * 3];
            const double* s = &sv.data[(i * N + j) * F];
            for (std::size_t a = 0; a < 3; ++a) {
                double* orow = &out.data[(i * 3 + a) * F];
                for (std::size_t f = 0; f < F; ++f) orow[f] += s[f] * u[a];
            }
        }
    int pd = dirs.id, ps = scales.id;
    return make(std::move(out), {dirs, scales}, [pd, ps, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& dv = t.nodes_[pd].value.data;
        const auto& sv = t.nodes_[ps].value.data;
        const bool need_d = t.nodes_[pd].requires_grad;
        const bool need_s = t.nodes_[ps].requires_grad;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                const double* u = &dv[(i * N + j) * 3];
                const double* s = &sv[(i * N + j) * F];
                if (need_s) {
                    auto& gs = t.grad_buf(ps);
                    double* gsr = &gs[(i * N + j) * F];
                    for (std::size_t a = 0; a < 3; ++a) {
                        const double* grow = &g[(i * 3 + a) * F];
                        for (std::size_t f = 0; f < F; ++f) gsr[f] += grow[f] * u[a];
                    }
                }
                if (need_d) {
                    auto& gd = t.grad_buf(pd);
                    double* gdr = &gd[(i * N + j) * 3];
                    for (std::size_t a = 0; a < 3; ++a) {
                        const double* grow = &g[(i * 3 + a) * F];
                        double acc = 0.0;
                        for (std::size_t f = 0; f < F; ++f) acc += grow[f] * s[f];
                        gdr[a] += acc;
                    }
                }
            }
    });
}

Var Tape::vec_inner(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rank() == 3 && av.shape[1] == 3 && av.same_shape(bv),
            "vec_inner: need matching (N,3,F), got " + shape_str(av.shape) + " and " +
                shape_str(bv.shape));
    const std::size_t N = av.shape[0], F = av.shape[2];
    Tensor out = Tensor::raw({N, F});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t aa = 0; aa < 3; ++aa) {
            const double* ar = &av.data[(i * 3 + aa) * F];
            const double* br = &bv.data[(i * 3 + aa) * F];
            double* orow = &out.data[i * F];
            for (std::size_t f = 0; f < F; ++f) orow[f] += ar[f] * br[f];
        }
    int pa = a.id, pb = b.id;
    return make(std::move(out), {a, b}, [pa, pb, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        const auto& bv = t.nodes_[pb].value.data;
        if (t.nodes_[pa].requires_grad) {
            auto& ga = t.grad_buf(pa);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t aa = 0; aa < 3; ++aa)
                    for (std::size_t f = 0; f < F; ++f)
                        ga[(i * 3 + aa) * F + f] += g[i * F + f] * bv[(i * 3 + aa) * F + f];
        }
        if (t.nodes_[pb].requires_grad) {
            auto& gb = t.grad_buf(pb);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t aa = 0; aa < 3; ++aa)
                    for (std::size_t f = 0; f < F; ++f)
                        gb[(i * 3 + aa) * F + f] += g[i * F + f] * av[(i * 3 + aa) * F + f];
        }
    });
}

Var Tape::dihedral_pair_inner(Var a, Var b, Var dirs) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    const Tensor& dv = value(dirs);
    require(av.rank() == 3 && av.shape[1] == 3 && av.same_shape(bv),
            "dihedral_pair_inner: need matching (N,3,F)");
    require(dv.rank() == 3 && dv.shape[0] == av.shape[0] && dv.shape[1] == av.shape[0] &&
                dv.shape[2] == 3,
            "dihedral_pair_inner: dirs must be (N,N,3)");
    const std::size_t N = av.shape[0], F = av.shape[2];
    Tensor out = Tensor::raw({N, N, F});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            const double* u = &dv.data[(i * N + j) * 3];
            double* orow = &out.data[(i * N + j) * F];
            for (std::size_t f = 0; f < F; ++f) {
                double dot = 0.0, p = 0.0, q = 0.0;
                for (std::size_t aa = 0; aa < 3; ++aa) {
                    const double ai = av.data[(i * 3 + aa) * F + f];
                    const double bj = bv.data[(j * 3 + aa) * F + f];
                    dot += ai * bj;
                    p += ai * u[aa];
                    q += bj * u[aa];
                }
                orow[f] = dot - p * q;
            }
        }
    int pa = a.id, pb = b.id, pd = dirs.id;
    return make(std::move(out), {a, b, dirs}, [pa, pb, pd, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& av = t.nodes_[pa].value.data;
        const auto& bv = t.nodes_[pb].value.data;
        const auto& dv = t.nodes_[pd].value.data;
        const bool need_a = t.nodes_[pa].requires_grad;
        const bool need_b = t.nodes_[pb].requires_grad;
        const bool need_d = t.nodes_[pd].requires_grad;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                const double* u = &dv[(i * N + j) * 3];
                const double* grow = &g[(i * N + j) * F];
                for (std::size_t f = 0; f < F; ++f) {
                    const double gf = grow[f];
                    if (gf == 0.0) continue;
                    double p = 0.0, q = 0.0;
                    for (std::size_t aa = 0; aa < 3; ++aa) {
                        p += av[(i * 3 + aa) * F + f] * u[aa];
                        q += bv[(j * 3 + aa) * F + f] * u[aa];
                    }
                    if (need_a) {
                        auto& ga = t.grad_buf(pa);
                        for (std::size_t aa = 0; aa < 3; ++aa)
                            ga[(i * 3 + aa) * F + f] +=
                                gf * (bv[(j * 3 + aa) * F + f] - q * u[aa]);
                    }
                    if (need_b) {
                        auto& gb = t.grad_buf(pb);
                        for (std::size_t aa = 0; aa < 3; ++aa)
                            gb[(j * 3 + aa) * F + f] +=
                                gf * (av[(i * 3 + aa) * F + f] - p * u[aa]);
                    }
                    if (need_d) {
                        auto& gd = t.grad_buf(pd);
                        for (std::size_t aa = 0; aa < 3; ++aa)
                            gd[(i * N + j) * 3 + aa] -=
                                gf * (q * av[(i * 3 + aa) * F + f] +
                                      p * bv[(j * 3 + aa) * F + f]);
                    }
                }
            }
    });
}

Var Tape::rbf_expand(Var dists, const std::vector<double>& centers, double width) {
    const Tensor& dv = value(dists);
    require(dv.rank() == 2 && !centers.empty() && width > 0.0,
            "rbf_expand: dists must be rank 2 with centers and positive width");
    const std::size_t R = dv.numel(), K = centers.size();
    Shape oshape = dv.shape;
    oshape.push_back(K);
    Tensor out = Tensor::raw(oshape);
    const double inv2s2 = 1.0 / (2.0 * width * width);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
            const double dd = dv.data[r] - centers[k];
            out.data[r * K + k] = std::exp(-dd * dd * inv2s2);
        }
    int pd = dists.id;
    return make(std::move(out), {dists}, [pd, centers, width, R, K](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const auto& y = t.nodes_[self].value.data;
        const auto& dv = t.nodes_[pd].value.data;
        auto& gd = t.grad_buf(pd);
        const double invs2 = 1.0 / (width * width);
        for (std::size_t r = 0; r < R; ++r) {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                acc += g[r * K + k] * y[r * K + k] * (-(dv[r] - centers[k]) * invs2);
            gd[r] += acc;
        }
    });
}

Var Tape::edge_source_broadcast(Var x) {
    const Tensor& xv = value(x);
    require(xv.rank() == 2, "edge_source_broadcast: need (N,F)");
    const std::size_t N = xv.shape[0], F = xv.shape[1];
    Tensor out = Tensor::raw({N, N, F});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t f = 0; f < F; ++f) out.data[(i * N + j) * F + f] = xv.data[i * F + f];
    int px = x.id;
    return make(std::move(out), {x}, [px, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gx = t.grad_buf(px);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t f = 0; f < F; ++f) gx[i * F + f] += g[(i * N + j) * F + f];
    });
}

Var Tape::edge_concat(Var x) {
    const Tensor& xv = value(x);
    require(xv.rank() == 2, "edge_concat: need (N,F)");
    const std::size_t N = xv.shape[0], F = xv.shape[1];
    Tensor out = Tensor::raw({N, N, 2 * F});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t f = 0; f < F; ++f) {
                out.data[(i * N + j) * 2 * F + f] = xv.data[i * F + f];
                out.data[(i * N + j) * 2 * F + F + f] = xv.data[j * F + f];
            }
    int px = x.id;
    return make(std::move(out), {x}, [px, N, F](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        auto& gx = t.grad_buf(px);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t f = 0; f < F; ++f) {
                    gx[i * F + f] += g[(i * N + j) * 2 * F + f];
                    gx[j * F + f] += g[(i * N + j) * 2 * F + F + f];
                }
    });
}

Var Tape::pad_edges(Var x, Var fill, std::size_t m, std::size_t offset) {
    const Tensor& xv = value(x);
    require(xv.rank() == 3 && xv.shape[0] == xv.shape[1], "pad_edges: need (n,n,H)");
    const std::size_t n = xv.shape[0], H = xv.shape[2];
    require(offset + n <= m, "pad_edges: block exceeds target size");
    const bool has_fill = fill.valid();
    if (has_fill) {
        require(value(fill).rank() == 1 && value(fill).shape[0] == H,
                "pad_edges: fill must be (H)");
    }
    Tensor out = Tensor::raw({m, m, H});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const bool in_block = i >= offset && i < offset + n && j >= offset && j < offset + n;
            double* orow = &out.data[(i * m + j) * H];
            if (in_block) {
                const double* xr = &xv.data[((i - offset) * n + (j - offset)) * H];
                for (std::size_t h = 0; h < H; ++h) orow[h] = xr[h];
            } else if (has_fill) {
                const auto& fv = value(fill).data;
                for (std::size_t h = 0; h < H; ++h) orow[h] = fv[h];
            }
        }
    int px = x.id;
    int pf = has_fill ? fill.id : -1;
    std::vector<Var> parents = {x};
    if (has_fill) parents.push_back(fill);
    return make(std::move(out), parents, [px, pf, m, n, H, offset](Tape& t, int self) {
        const auto& g = t.nodes_[self].grad;
        const bool need_x = t.nodes_[px].requires_grad;
        const bool need_f = pf >= 0 && t.nodes_[pf].requires_grad;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const bool in_block =
                    i >= offset && i < offset + n && j >= offset && j < offset + n;
                const double* grow = &g[(i * m + j) * H];
                if (in_block && need_x) {
                    auto& gx = t.grad_buf(px);
                    double* gr = &gx[((i - offset) * n + (j - offset)) * H];
                    for (std::size_t h = 0; h < H; ++h) gr[h] += grow[h];
                } else if (!in_block && need_f) {
                    auto& gf = t.grad_buf(pf);
                    for (std::size_t h = 0; h < H; ++h) gf[h] += grow[h];
                }
            }
    });
}

}  // namespace visnet::num
