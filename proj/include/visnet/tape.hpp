#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "visnet/tensor.hpp"

namespace visnet::num {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

using GradMap = std::map<std::string, Tensor>;

// Reverse-mode differentiation record. Nodes are appended in execution
// order, so parents always precede children and a single reverse sweep
// visits each node exactly once. A tape constructed with grad_enabled =
// false records values only (used for cheap forward-only evaluation).
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    // Constant node; never receives a gradient.
    Var leaf(Tensor value);
    // Differentiable non-parameter input (e.g. atomic positions).
    Var input(Tensor value);
    // Differentiable input registered under a name for backward().
    Var param(const std::string& name, Tensor value);

    const Tensor& value(Var v) const;
    // Gradient of the last backward() w.r.t. any differentiable node.
    Tensor grad(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
    // loss must be a scalar. Parameters never touched by the loss get
    // zero gradients of the right shape.
    GradMap backward(Var loss);

    // --- elementwise / linear algebra -------------------------------------
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var abs_elem(Var a);
    Var log_elem(Var a);
    Var silu(Var a);
    Var matmul(Var a, Var b);     // (M,K)·(K,P)
    Var matmul_nt(Var a, Var b);  // (M,K)·(P,K)^T -> (M,P)
    Var transpose2d(Var a);
    // Contract the last axis of x (any rank) with W: out[...,d] = sum_c x[...,c] W[c][d].
    Var last_linear(Var x, Var w);
    Var add_bias_last(Var x, Var b);
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

    // --- reductions / restructuring ---------------------------------------
    Var sum_all(Var a);
    Var mean_all(Var a);
    // Mean over rows [begin, end) of a 2-D tensor -> (F).
    Var mean_rows_range(Var x, std::size_t begin, std::size_t end);
    Var take_diag(Var a);  // (B,B) -> (B)
    Var concat_last(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);
    Var stack_rows(const std::vector<Var>& rows);  // k rank-1 (F) -> (k,F)
    Var embedding_rows(Var table, const std::vector<std::size_t>& indices);
    // out[i][j][:] = table[codes[i*m+j]][:], codes constant. -> (m,m,H)
    Var bias_lookup(Var table, const std::vector<std::size_t>& codes, std::size_t m);
    Var select_last(Var x, std::size_t channel);  // (...,H) -> (...)
    Var l2_normalize_rows(Var x);
    // out rows [offset, offset+n) += y; other rows copied from x.
    Var add_rows_offset(Var x, Var y, std::size_t offset);

    // --- geometry ----------------------------------------------------------
    Var pairwise_dists(Var positions);  // (N,3) -> (N,N), zero diagonal
    Var unit_dirs(Var positions);       // (N,3) -> (N,N,3), u_ij from i to j
    // v[i][a][f] = sum_{j != i} scales[i][j][f] * dirs[i][j][a]  -> (N,3,F)
    Var aggregate_vectors(Var dirs, Var scales);
    // out[i][f] = sum_a a[i][a][f] * b[i][a][f]  -> (N,F)
    Var vec_inner(Var a, Var b);
    // out[i][j][f] = <rej(A_i, u_ij), rej(B_j, u_ji)> per channel, zero diagonal.
    // Uses rej(x,u).rej(y,u) = x.y - (x.u)(y.u) and rej(y,-u) = rej(y,u).
    Var dihedral_pair_inner(Var a, Var b, Var dirs);
    // Gaussian basis of pair distances. -> (N,N,K)
    Var rbf_expand(Var dists, const std::vector<double>& centers, double width);
    Var edge_source_broadcast(Var x);  // (N,F) -> (N,N,F), out[i][j]=x[i]
    Var edge_concat(Var x);            // (N,F) -> (N,N,2F), out[i][j]=[x_i||x_j]
    // Embed an (n,n,H) edge block into (m,m,H) at [offset,offset+n).
    // Entries outside the block read fill (H) if valid, else zero.
    Var pad_edges(Var x, Var fill, std::size_t m, std::size_t offset);

private:
    using Backward = std::function<void(Tape&, int)>;

    struct Node {
        Tensor value;
        std::vector<double> grad;  // allocated lazily during backward
        bool requires_grad = false;
        Backward backward;
    };

    Var make(Tensor value, const std::vector<Var>& parents, Backward fn);
    std::vector<double>& grad_buf(int id);
    const Tensor& val(int id) const { return nodes_[id].value; }
    void check_same_tape(Var v) const;

    std::vector<Node> nodes_;
    std::map<std::string, int> params_;
    bool grad_enabled_;
};

}  // namespace visnet::num
