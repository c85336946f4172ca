#include "visnet/distill.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "visnet/errors.hpp"

namespace visnet::distill {

namespace {

using num::Tape;
using num::Tensor;
using num::Var;

std::string fmt_f64(double v) { return nlohmann::json(v).dump(); }

void check_emb_pair(const Tensor& s, const Tensor& t) {
    if (s.rank() != 2 || t.rank() != 2 || !s.same_shape(t)) {
        throw DimensionError("embedding losses need two (B,F) tensors of equal shape");
    }
}

Var infonce_on_tape(Tape& tape, Var student, Var teacher, double tau) {
    if (tau <= 0.0) throw ContractError("infonce: temperature must be > 0");
    Var s = tape.l2_normalize_rows(student);
    Var t = tape.l2_normalize_rows(teacher);
    Var sim = tape.scale(tape.matmul_nt(s, t), 1.0 / tau);
    auto direction = [&tape](Var logits) {
        return tape.mean_all(tape.scale(tape.log_elem(tape.take_diag(tape.softmax_rows(logits))),
                                        -1.0));
    };
    return tape.scale(tape.add(direction(sim), direction(tape.transpose2d(sim))), 0.5);
}

double mean_cosine(const Tensor& s, const Tensor& t) {
    check_emb_pair(s, t);
    const std::size_t b = s.dim(0);
    const std::size_t f = s.dim(1);
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        double dot = 0.0, ns = 0.0, nt = 0.0;
        for (std::size_t c = 0; c < f; ++c) {
            const double sv = s.at2(r, c);
            const double tv = t.at2(r, c);
            dot += sv * tv;
            ns += sv * sv;
            nt += tv * tv;
        }
        const double denom = std::sqrt(ns) * std::sqrt(nt);
        total += denom > 0.0 ? dot / denom : 0.0;
    }
    return total / static_cast<double>(b);
}

Tensor stack_tensor_rows(const std::vector<Tensor>& rows) {
    Tensor out = Tensor::raw({rows.size(), rows.front().numel()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].data.begin(), rows[r].data.end(), out.data.begin() + r * rows[r].numel());
    }
    return out;
}

}  // namespace

std::string loss_kind_name(LossKind k) {
    return k == LossKind::infonce ? "infonce" : "l1";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "infonce") return LossKind::infonce;
    if (name == "l1") return LossKind::l1;
    throw SchemaError("unknown loss kind '" + name + "' (expected infonce|l1)");
}

void DistillConfig::validate() const {
    if (temperature <= 0.0) throw SchemaError("distill: temperature must be > 0");
    const std::size_t min_batch = loss_kind == LossKind::infonce ? 2 : 1;
    if (batch_size < min_batch) {
        throw SchemaError("distill: batch_size must be >= " + std::to_string(min_batch));
    }
    if (lr <= 0.0 || lr_min <= 0.0 || lr_factor <= 0.0 || lr_factor >= 1.0) {
        throw SchemaError("distill: need lr > 0, lr_min > 0, lr_factor in (0,1)");
    }
    if (total_epochs < 1) throw SchemaError("distill: total_epochs must be >= 1");
    if (gap_weight < 0.0) throw SchemaError("distill: gap_weight must be >= 0");
}

graph2d::MolGraph skeleton_graph(const geom::Conformer& c) {
    graph2d::MolGraph g;
    g.id = c.id;
    g.atoms.reserve(c.n_atoms());
    for (int z : c.atomic_numbers) {
        graph2d::AtomFeatures f;
        f.z = z;
        g.atoms.push_back(f);
    }
    return g;
}

num::Tensor teacher_embed(const geom::Conformer& optimized, const model::ModelConfig& teacher_cfg,
                          const model::ParamStore& teacher_params) {
    return model::graph_embedding(skeleton_graph(optimized), &optimized, model::Mode::three_d,
                                  teacher_cfg, teacher_params);
}

double infonce_loss(const num::Tensor& student_emb, const num::Tensor& teacher_emb, double tau) {
    check_emb_pair(student_emb, teacher_emb);
    if (student_emb.dim(0) < 2) throw ContractError("infonce: batch must have at least 2 rows");
    Tape tape(false);
    return tape.value(infonce_on_tape(tape, tape.leaf(student_emb), tape.leaf(teacher_emb), tau))
        .data[0];
}

double l1_embed_loss(const num::Tensor& student_emb, const num::Tensor& teacher_emb) {
    check_emb_pair(student_emb, teacher_emb);
    double total = 0.0;
    for (std::size_t i = 0; i < student_emb.numel(); ++i) {
        total += std::abs(student_emb.data[i] - teacher_emb.data[i]);
    }
    return total / static_cast<double>(student_emb.numel());
}

model::ParamStore student_from_teacher(const model::ModelConfig& student_cfg,
                                       const model::ModelConfig& teacher_cfg,
                                       const model::ParamStore& teacher_params) {
    student_cfg.validate();
    teacher_cfg.validate();
    Rng rng(student_cfg.seed);
    model::ParamStore student = model::init_params(student_cfg, rng);
    for (auto& [name, tensor] : student) {
        const auto it = teacher_params.find(name);
        if (it != teacher_params.end()) {
            if (!tensor.same_shape(it->second)) {
                throw ContractError("student/teacher shape mismatch for parameter '" + name + "'");
            }
            tensor = it->second;
        } else {
            tensor = Tensor::zeros(tensor.shape);
        }
    }
    return student;
}

DistillResult distill_run(const std::vector<Pair>& pairs, const DistillConfig& cfg,
                          const model::ModelConfig& student_cfg,
                          const model::ModelConfig& teacher_cfg,
                          const model::ParamStore& teacher_params) {
    cfg.validate();
    if (pairs.size() < cfg.batch_size) {
        throw ContractError("distill_run: corpus smaller than one batch");
    }
    for (const Pair& p : pairs) {
        if (p.graph.id != p.generated.id || p.graph.id != p.optimized.id) {
            throw SchemaError("distill_run: pairing mismatch, ids '" + p.graph.id + "' / '" +
                              p.generated.id + "' / '" + p.optimized.id + "'");
        }
    }

    DistillResult result;
    result.teacher_hash = model::param_hash(teacher_params);
    result.student = cfg.init_from_teacher
                         ? student_from_teacher(student_cfg, teacher_cfg, teacher_params)
                         : [&] {
                               Rng rng(student_cfg.seed);
                               return model::init_params(student_cfg, rng);
                           }();

    std::vector<Tensor> teacher_embs;
    teacher_embs.reserve(pairs.size());
    for (const Pair& p : pairs) {
        teacher_embs.push_back(teacher_embed(p.optimized, teacher_cfg, teacher_params));
    }

    model::Optimizer opt;
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double lr_current = cfg.lr;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    std::size_t global_step = 0;
    const std::size_t n_batches = pairs.size() / cfg.batch_size;

    for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        // Fisher-Yates with the pinned generator keeps runs reproducible.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[order_rng.below(i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t batch = 0; batch < n_batches; ++batch) {
            double lr = lr_current;
            if (cfg.warmup_steps > 0 && global_step < cfg.warmup_steps) {
                lr = lr_current * static_cast<double>(global_step + 1) /
                     static_cast<double>(cfg.warmup_steps);
            }
            Tape tape(true);
            std::vector<Var> student_rows;
            std::vector<Tensor> teacher_rows;
            std::vector<Var> gap_terms;
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                const std::size_t idx = order[batch * cfg.batch_size + k];
                const Pair& p = pairs[idx];
                const model::ForwardResult fr = model::build_forward(
                    tape, p.graph, &p.generated, model::Mode::three_d, student_cfg, result.student);
                student_rows.push_back(fr.graph_embedding);
                teacher_rows.push_back(teacher_embs[idx]);
                if (cfg.gap_weight > 0.0 && p.graph.gap_ev) {
                    gap_terms.push_back(tape.abs_elem(tape.sub(
                        fr.prediction, tape.leaf(Tensor::from({1}, {*p.graph.gap_ev})))));
                }
            }
            Var student_mat = tape.stack_rows(student_rows);
            Var teacher_mat = tape.leaf(stack_tensor_rows(teacher_rows));
            Var loss = cfg.loss_kind == LossKind::infonce
                           ? infonce_on_tape(tape, student_mat, teacher_mat, cfg.temperature)
                           : tape.mean_all(tape.abs_elem(tape.sub(student_mat, teacher_mat)));
            if (!gap_terms.empty()) {
                loss = tape.add(loss, tape.scale(tape.mean_all(tape.concat_rows(gap_terms)),
                                                 cfg.gap_weight));
            }
            const double loss_value = tape.value(loss).data[0];
            if (!std::isfinite(loss_value)) {
                throw Error("distill_run: non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += loss_value;
            const num::GradMap grads = tape.backward(loss);
            opt.step(result.student, grads, lr);
            ++global_step;
        }
        epoch_loss /= static_cast<double>(n_batches);

        std::vector<Tensor> student_embs;
        student_embs.reserve(pairs.size());
        for (const Pair& p : pairs) {
            student_embs.push_back(model::graph_embedding(p.graph, &p.generated,
                                                          model::Mode::three_d, student_cfg,
                                                          result.student));
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = epoch_loss;
        stats.mean_cosine = mean_cosine(stack_tensor_rows(student_embs),
                                        stack_tensor_rows(teacher_embs));
        stats.lr = lr_current;
        result.trace.push_back(stats);

        if (epoch_loss < best_loss - 1e-12) {
            best_loss = epoch_loss;
            stall = 0;
        } else if (++stall >= cfg.lr_patience) {
            lr_current = std::max(cfg.lr_min, lr_current * cfg.lr_factor);
            stall = 0;
        }
    }

    if (model::param_hash(teacher_params) != result.teacher_hash) {
        throw IntegrityError("distill_run: teacher parameters changed during the run");
    }
    return result;
}

std::string trace_csv(const std::vector<EpochStats>& trace) {
    std::ostringstream out;
    out << "epoch,loss,mean_cosine,lr\n";
    for (const EpochStats& s : trace) {
        out << s.epoch << "," << fmt_f64(s.loss) << "," << fmt_f64(s.mean_cosine) << ","
            << fmt_f64(s.lr) << "\n";
    }
    return out.str();
}

}  // namespace visnet::distill
