#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visnet/geom.hpp"
#include "visnet/graph2d.hpp"
#include "visnet/model.hpp"
#include "visnet/tensor.hpp"

namespace visnet::distill {

enum class LossKind { infonce, l1 };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

struct DistillConfig {
    LossKind loss_kind = LossKind::infonce;
    double temperature = 0.1;  // never stated upstream; recorded default
    std::size_t batch_size = 8;
    double lr = 1e-4;
    double lr_factor = 0.8;
    double lr_min = 1e-7;
    std::size_t lr_patience = 15;
    std::size_t warmup_steps = 10;
    std::size_t total_epochs = 25;
    double gap_weight = 0.0;  // optional supervised L1 on gap targets
    bool init_from_teacher = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// One training item: the same molecule in both structural modalities.
struct Pair {
    graph2d::MolGraph graph;
    geom::Conformer generated;  // student input
    geom::Conformer optimized;  // teacher input
};

// The teacher sees atomic types and coordinates only; its molecular graph
// is the bond-free skeleton of the conformer.
graph2d::MolGraph skeleton_graph(const geom::Conformer& c);
num::Tensor teacher_embed(const geom::Conformer& optimized, const model::ModelConfig& teacher_cfg,
                          const model::ParamStore& teacher_params);

// Symmetric cross-entropy over the B x B cosine/tau matrix; rows are
// L2-normalized internally, positives on the diagonal.
double infonce_loss(const num::Tensor& student_emb, const num::Tensor& teacher_emb, double tau);

// Mean absolute difference over all entries.
double l1_embed_loss(const num::Tensor& student_emb, const num::Tensor& teacher_emb);

// Student init for distillation: parameters shared with the teacher are
// copied; student-only tensors (the extra feature embeddings) start at
// zero so a clean-input student reproduces the teacher bitwise.
model::ParamStore student_from_teacher(const model::ModelConfig& student_cfg,
                                       const model::ModelConfig& teacher_cfg,
                                       const model::ParamStore& teacher_params);

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double mean_cosine = 0.0;
    double lr = 0.0;
};

struct DistillResult {
    model::ParamStore student;
    std::vector<EpochStats> trace;
    std::string teacher_hash;
};

// Embedding-space distillation with warmup then reduce-on-plateau LR.
// The teacher is hash-checked before and after; any drift is an
// integrity error.
DistillResult distill_run(const std::vector<Pair>& pairs, const DistillConfig& cfg,
                          const model::ModelConfig& student_cfg,
                          const model::ModelConfig& teacher_cfg,
                          const model::ParamStore& teacher_params);

// CSV trace: epoch,loss,mean_cosine,lr
std::string trace_csv(const std::vector<EpochStats>& trace);

}  // namespace visnet::distill
