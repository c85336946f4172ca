// Verification and benchmark CLI for the geometric attention library.
// Exit codes: 0 pass, 1 property/tolerance failure, 2 usage, 3 I/O.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "visnet/distill.hpp"
#include "visnet/ensemble.hpp"
#include "visnet/errors.hpp"
#include "visnet/gradcheck.hpp"
#include "visnet/io.hpp"
#include "visnet/model.hpp"
#include "visnet/rgc.hpp"
#include "visnet/synth.hpp"

namespace {

using namespace visnet;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "key=value model config file");
    cmd->add_option("--seed", c.seed, "random seed (RGC_ATTN_SEED overrides)");
    cmd->add_option("--out-dir", c.out_dir, "directory for reports and artifacts");
    cmd->add_option("--threads", c.threads, "worker threads (timing commands default 1)");
}

model::ModelConfig load_config(const CommonOpts& c) {
    if (c.config_path.empty()) return model::ModelConfig{};
    return model::config_from_string(io::read_file(c.config_path));
}

std::uint64_t resolve_seed(const CommonOpts& c) {
    if (const char* env = std::getenv("RGC_ATTN_SEED")) {
        try {
            std::size_t used = 0;
            const std::uint64_t s = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
            return s;
        } catch (const std::exception&) {
            throw ContractError(std::string("RGC_ATTN_SEED is not an integer: '") + env + "'");
        }
    }
    return c.seed;
}

void ensure_out_dir(const CommonOpts& c) {
    std::error_code ec;
    std::filesystem::create_directories(c.out_dir, ec);
    if (ec) throw IoError("cannot create out dir '" + c.out_dir + "': " + ec.message());
}

void emit_manifest(const CommonOpts& c, const std::string& command,
                   const std::vector<std::string>& inputs, std::uint64_t seed,
                   const std::string& started) {
    io::RunManifest m;
    m.command = command;
    m.config_path = c.config_path;
    m.seed = seed;
    m.inputs = inputs;
    m.started_at = started;
    m.finished_at = io::timestamp_utc();
    io::write_file(c.out_dir + "/manifest.json", io::manifest_json(m));
}

struct PropertyResult {
    std::string name;
    double max_dev = 0.0;
    double tol = 0.0;
    bool pass() const { return max_dev <= tol; }
};

std::string property_report(const std::vector<PropertyResult>& props) {
    std::ostringstream out;
    for (const PropertyResult& p : props) {
        out << (p.pass() ? "[PASS] " : "[FAIL] ") << p.name
            << " max_dev=" << io::fmt_f64(p.max_dev) << " tol=" << io::fmt_f64(p.tol) << "\n";
    }
    return out.str();
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
}

// --- check-equiv -------------------------------------------------------------

int run_check_equiv(const CommonOpts& common, const std::string& molecules_path,
                    const std::string& conformers_path, std::size_t n_trials,
                    bool break_rejection) {
    if (n_trials == 0) {
        std::cerr << "usage error: --n-trials must be >= 1\n";
        return kExitUsage;
    }
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    ensure_out_dir(common);

    const auto molecules = io::read_molecules_jsonl(io::read_file(molecules_path));
    const auto conformers = io::read_xyz(io::read_file(conformers_path));
    std::map<std::string, const geom::Conformer*> by_id;
    for (const geom::Conformer& c : conformers) by_id[c.id] = &c;

    model::ModelConfig cfg = load_config(common);
    cfg.seed = seed;
    Rng prng(seed);
    const model::ParamStore params = model::init_params(cfg, prng);

    geom::testhook::break_rejection = break_rejection;

    PropertyResult rot_angle{"rgc_angle_rotation_invariance", 0.0, 1e-10};
    PropertyResult rot_dih{"rgc_dihedral_rotation_invariance", 0.0, 1e-10};
    PropertyResult equiv{"agg_vec_rotation_equivariance", 0.0, 1e-12};
    PropertyResult perm_rgc{"rgc_permutation_exactness", 0.0, 0.0};
    PropertyResult rej_orth{"rejection_orthogonality", 0.0, 1e-12};
    PropertyResult model_rot{"prediction_rigid_motion_invariance", 0.0, 1e-9};
    PropertyResult model_perm{"prediction_permutation_exactness", 0.0, 0.0};

    const std::size_t f_dim = 8;
    Rng rng(seed + 1);
    const num::Tensor was = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wat = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wds = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);
    const num::Tensor wdt = num::Tensor::random_gaussian({f_dim, f_dim}, rng, 0.0, 0.5);

    for (const graph2d::MolGraph& g : molecules) {
        const auto it = by_id.find(g.id);
        if (it == by_id.end()) {
            throw SchemaError("molecule '" + g.id + "' has no conformer in " + conformers_path);
        }
        const geom::Conformer& c = *it->second;
        const std::size_t n = c.n_atoms();
        const num::Tensor scales = num::Tensor::random_uniform({n, n, f_dim}, rng, 0.5, 1.5);
        const geom::DirectionField df = geom::direction_field(c);
        const rgc::RgcFeatures base =
            rgc::compute_features(df, scales, was, wat, wds, wdt);
        const double base_pred = model::predict(g, &c, model::Mode::joint, cfg, params);

        for (std::size_t t = 0; t < n_trials; ++t) {
            const geom::Mat3 q = geom::random_rotation(rng);
            const geom::Vec3 shift{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                                   rng.uniform(-5.0, 5.0)};
            const geom::Conformer moved = c.rotated(q).translated(shift);
            const geom::DirectionField df_m = geom::direction_field(moved);
            const rgc::RgcFeatures feat_m =
                rgc::compute_features(df_m, scales, was, wat, wds, wdt);

            rot_angle.max_dev = std::max(rot_angle.max_dev,
                                         num::max_abs_diff(base.angle_scalar, feat_m.angle_scalar));
            rot_dih.max_dev = std::max(
                rot_dih.max_dev, num::max_abs_diff(base.dihedral_scalar, feat_m.dihedral_scalar));

            const geom::VecFeat rotated_base = base.agg_vec.rotated(q);
            double dev = 0.0;
            for (std::size_t i = 0; i < rotated_base.values.size(); ++i) {
                dev = std::max(dev,
                               std::abs(rotated_base.values[i] - feat_m.agg_vec.values[i]));
            }
            equiv.max_dev = std::max(equiv.max_dev, dev);

            const std::vector<std::size_t> perm = random_permutation(n, rng);
            const geom::Conformer permuted = c.permuted(perm);
            num::Tensor perm_scales = num::Tensor::raw({n, n, f_dim});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t f = 0; f < f_dim; ++f)
                        perm_scales.at3(i, j, f) = scales.at3(perm[i], perm[j], f);
            const rgc::RgcFeatures feat_p = rgc::compute_features(
                geom::direction_field(permuted), perm_scales, was, wat, wds, wdt);
            double perm_dev = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t f = 0; f < f_dim; ++f)
                    perm_dev = std::max(perm_dev, std::abs(feat_p.angle_scalar.at2(i, f) -
                                                           base.angle_scalar.at2(perm[i], f)));
            perm_rgc.max_dev = std::max(perm_rgc.max_dev, perm_dev);

            // Rejection leaves nothing along the axis; the planted-fault
            // hook shows up here with a ~1e-3 residual.
            const num::Tensor v = num::Tensor::random_gaussian({3, f_dim}, rng, 0.0, 1.0);
            geom::Vec3 axis{rng.gaussian(), rng.gaussian(), rng.gaussian()};
            const double axis_norm = geom::norm(axis);
            for (double& x : axis) x /= axis_norm;
            const num::Tensor rej = geom::reject(v, axis);
            for (std::size_t f = 0; f < f_dim; ++f) {
                const geom::Vec3 col{rej.at2(0, f), rej.at2(1, f), rej.at2(2, f)};
                rej_orth.max_dev = std::max(rej_orth.max_dev, std::abs(geom::dot(col, axis)));
            }

            const double moved_pred = model::predict(g, &moved, model::Mode::joint, cfg, params);
            model_rot.max_dev = std::max(model_rot.max_dev, std::abs(moved_pred - base_pred));

            graph2d::MolGraph perm_g = g.permuted(perm);
            const double perm_pred =
                model::predict(perm_g, &permuted, model::Mode::joint, cfg, params);
            model_perm.max_dev = std::max(model_perm.max_dev, std::abs(perm_pred - base_pred));
        }
    }

    geom::testhook::break_rejection = false;

    const std::vector<PropertyResult> props{rot_angle, rot_dih,   equiv,     perm_rgc,
                                            rej_orth,  model_rot, model_perm};
    const std::string report = property_report(props);
    std::cout << report;
    io::write_file(common.out_dir + "/report.txt", report);
    emit_manifest(common, "check-equiv", {molecules_path, conformers_path}, seed, started);
    for (const PropertyResult& p : props) {
        if (!p.pass()) return kExitFail;
    }
    return kExitPass;
}

// --- oracle-diff -------------------------------------------------------------

int run_oracle_diff(const CommonOpts& common, const std::vector<std::size_t>& sizes) {
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    for (std::size_t n : sizes) {
        if (n < 3) {
            std::cerr << "usage error: sizes must be >= 3\n";
            return kExitUsage;
        }
        if (n > 16) {
            std::cerr << "refused: size " << n
                      << " exceeds the N<=16 guard for the O(N^4) reference enumeration\n";
            return kExitUsage;
        }
    }
    ensure_out_dir(common);

    constexpr double kAngleTol = 1e-12;
    constexpr double kDihedralTol = 1e-11;
    std::ostringstream report;
    report << "N,angle_max_diff,dihedral_max_diff\n";
    bool ok = true;
    Rng rng(seed);
    for (std::size_t n : sizes) {
        const geom::Conformer c = synth::random_conformer(n, rng);
        const geom::DirectionField df = geom::direction_field(c);
        const std::size_t f_dim = 4;
        const num::Tensor scales = rgc::unit_scales(n, f_dim);
        num::Tensor eye = num::Tensor::zeros({f_dim, f_dim});
        for (std::size_t i = 0; i < f_dim; ++i) eye.at2(i, i) = 1.0;
        const rgc::RgcFeatures feat = rgc::compute_features(df, scales, eye, eye, eye, eye);
        const num::Tensor angle_ref = rgc::angle_oracle(df);
        const num::Tensor dihedral_ref = rgc::dihedral_oracle(df);
        double angle_diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            angle_diff = std::max(angle_diff,
                                  std::abs(feat.angle_scalar.at2(i, 0) - angle_ref.data[i]));
        double dihedral_diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dihedral_diff = std::max(dihedral_diff,
                                         std::abs(feat.dihedral_scalar.at3(i, j, 0) -
                                                  dihedral_ref.at2(i, j)));
        ok = ok && angle_diff < kAngleTol && dihedral_diff < kDihedralTol;
        report << n << "," << io::fmt_f64(angle_diff) << "," << io::fmt_f64(dihedral_diff) << "\n";
    }
    report << (ok ? "# PASS" : "# FAIL") << " tolerances angle=" << io::fmt_f64(kAngleTol)
           << " dihedral=" << io::fmt_f64(kDihedralTol) << "\n";
    std::cout << report.str();
    io::write_file(common.out_dir + "/oracle_diff.csv", report.str());
    emit_manifest(common, "oracle-diff", {}, seed, started);
    return ok ? kExitPass : kExitFail;
}

// --- bench -------------------------------------------------------------------

int run_bench(const CommonOpts& common, const std::vector<std::size_t>& sizes, int repeats) {
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    ensure_out_dir(common);
    const rgc::BenchResult result = rgc::scaling_benchmark(sizes, repeats, seed);
    const std::string csv = rgc::benchmark_csv(result);
    std::cout << csv;
    io::write_file(common.out_dir + "/bench.csv", csv);
    emit_manifest(common, "bench", {}, seed, started);
    const double gap = result.slope_dihedral_oracle - result.slope_fast;
    std::cout << "slope_gap=" << io::fmt_f64(gap)
              << " cross_check_angle=" << io::fmt_f64(result.max_angle_diff)
              << " cross_check_dihedral=" << io::fmt_f64(result.max_dihedral_diff) << "\n";
    if (gap < 1.0 || result.max_angle_diff > 1e-12 || result.max_dihedral_diff > 1e-11) {
        return kExitFail;
    }
    return kExitPass;
}

// --- train-toy ---------------------------------------------------------------

int run_train_toy(const CommonOpts& common, std::size_t n_molecules, std::size_t steps,
                  std::size_t warmup, std::size_t batch, double lr) {
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    ensure_out_dir(common);
    model::ModelConfig cfg = load_config(common);
    if (common.config_path.empty()) {
        // Defaults sized for the toy regression: a narrower model trains to
        // well under the baseline within the default step budget.
        cfg.hidden_dim = 32;
        cfg.z_vocab = 12;
        cfg.noise_scale = 0.0;
    }
    cfg.seed = seed;
    Rng data_rng(seed + 1000);
    const std::vector<synth::Sample> dataset = synth::toy_dataset(n_molecules, 4, 8, data_rng);
    model::TrainConfig tc;
    tc.total_steps = steps;
    tc.warmup_steps = warmup;
    tc.batch_size = batch;
    tc.lr = lr;
    tc.seed = seed;
    const model::TrainResult result = model::train_toy(dataset, cfg, tc);

    std::ostringstream loss_csv;
    loss_csv << "step,loss\n";
    for (std::size_t s = 0; s < result.loss_curve.size(); ++s) {
        loss_csv << s << "," << io::fmt_f64(result.loss_curve[s]) << "\n";
    }
    io::write_file(common.out_dir + "/loss.csv", loss_csv.str());
    model::save_checkpoint(common.out_dir + "/checkpoint.json", cfg, result.params);
    emit_manifest(common, "train-toy", {}, seed, started);

    std::cout << "baseline_l1=" << io::fmt_f64(result.baseline_l1)
              << " final_train_l1=" << io::fmt_f64(result.final_train_l1) << "\n";
    return result.final_train_l1 < 0.1 * result.baseline_l1 ? kExitPass : kExitFail;
}

// --- distill-toy -------------------------------------------------------------

int run_distill_toy(const CommonOpts& common, std::size_t n_pairs, std::size_t epochs,
                    const std::string& loss_kind, double lr, bool from_scratch) {
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    ensure_out_dir(common);

    model::ModelConfig teacher_cfg = load_config(common);
    teacher_cfg.seed = seed;
    teacher_cfg.feature_set = model::FeatureSet::atomic_only;
    teacher_cfg.use_graph_token = false;
    model::ModelConfig student_cfg = teacher_cfg;
    student_cfg.feature_set = model::FeatureSet::full;

    Rng teacher_rng(seed + 77);
    const model::ParamStore teacher = model::init_params(teacher_cfg, teacher_rng);

    Rng data_rng(seed + 1000);
    Rng noise_rng(seed + 2000);
    std::vector<distill::Pair> pairs;
    pairs.reserve(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        synth::Sample s = synth::random_molecule(4 + data_rng.below(5),
                                                 data_rng, "pair-" + std::to_string(k));
        distill::Pair p;
        p.optimized = s.conformer;
        p.generated = model::add_coordinate_noise(s.conformer, 0.2, noise_rng);
        p.generated.modality = geom::Modality::generated;
        p.graph = std::move(s.graph);
        pairs.push_back(std::move(p));
    }

    distill::DistillConfig dc;
    dc.loss_kind = distill::loss_kind_from_name(loss_kind);
    dc.total_epochs = epochs;
    dc.lr = lr;
    dc.seed = seed;
    dc.init_from_teacher = !from_scratch;
    const distill::DistillResult result =
        distill::distill_run(pairs, dc, student_cfg, teacher_cfg, teacher);

    io::write_file(common.out_dir + "/trace.csv", distill::trace_csv(result.trace));
    model::save_checkpoint(common.out_dir + "/student.json", student_cfg, result.student);
    emit_manifest(common, "distill-toy", {}, seed, started);
    std::cout << "teacher_hash=" << result.teacher_hash << " final_cosine="
              << io::fmt_f64(result.trace.back().mean_cosine) << "\n";
    return kExitPass;
}

// --- predict-ensemble --------------------------------------------------------

int run_predict_ensemble(const CommonOpts& common, const std::string& molecules_path,
                         const std::string& preds_path, const std::string& fallback_path,
                         std::size_t k, std::size_t threshold) {
    const std::string started = io::timestamp_utc();
    const std::uint64_t seed = resolve_seed(common);
    ensure_out_dir(common);
    const auto molecules = io::read_molecules_jsonl(io::read_file(molecules_path));
    const auto pred_sets = ensemble::parse_predictions_csv(io::read_file(preds_path));
    ensemble::RoutingRule rule;
    rule.min_atoms_threshold = threshold;
    if (!fallback_path.empty()) {
        rule.fallback = ensemble::parse_fallback_csv(io::read_file(fallback_path));
    }
    std::map<std::string, const ensemble::PredictionSet*> by_id;
    for (const auto& s : pred_sets) by_id[s.sample_id] = &s;

    std::vector<ensemble::OutputRow> rows;
    for (const graph2d::MolGraph& g : molecules) {
        const auto it = by_id.find(g.id);
        ensemble::PredictionSet empty;
        empty.sample_id = g.id;
        if (it == by_id.end() && g.n_atoms() >= rule.min_atoms_threshold) {
            throw RoutingError("no ensemble predictions for sample '" + g.id + "'");
        }
        const ensemble::RoutedPrediction rp = ensemble::route_and_predict(
            g, it == by_id.end() ? empty : *it->second, rule, k);
        rows.push_back({g.id, rp.gap_ev, rp.used_fallback ? "fallback" : "ensemble"});
    }
    const std::string csv = ensemble::output_csv(rows);
    std::cout << csv;
    io::write_file(common.out_dir + "/predictions.csv", csv);
    emit_manifest(common, "predict-ensemble", {molecules_path, preds_path, fallback_path}, seed,
                  started);
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric attention library verification CLI"};
    app.require_subcommand(1);

    CommonOpts eq_c;
    std::string eq_molecules, eq_conformers;
    std::size_t eq_trials = 20;
    bool eq_break = false;
    CLI::App* eq = app.add_subcommand("check-equiv", "symmetry and equivalence property suite");
    add_common(eq, eq_c);
    eq->add_option("--molecules", eq_molecules, "molecule JSONL file")->required();
    eq->add_option("--conformers", eq_conformers, "conformer XYZ file")->required();
    eq->add_option("--n-trials", eq_trials, "random rotations/permutations per molecule");
    eq->add_flag("--break-rejection", eq_break, "plant a fault in the rejection kernel")
        ->group("");  // hidden; exists to prove the checks can fail

    CommonOpts od_c;
    std::vector<std::size_t> od_sizes{4, 8, 12};
    CLI::App* od = app.add_subcommand("oracle-diff", "fast path vs brute-force oracles");
    add_common(od, od_c);
    od->add_option("--sizes", od_sizes, "conformer sizes (each <= 16)");

    CommonOpts bn_c;
    std::vector<std::size_t> bn_sizes{16, 32, 64, 128};
    int bn_repeats = 5;
    CLI::App* bn = app.add_subcommand("bench", "scaling benchmark with fitted slopes");
    add_common(bn, bn_c);
    bn->add_option("--sizes", bn_sizes, "conformer sizes, ascending");
    bn->add_option("--repeats", bn_repeats, "timing repeats per size (median taken)");

    CommonOpts tt_c;
    std::size_t tt_molecules = 2000, tt_steps = 5000, tt_warmup = 100, tt_batch = 16;
    double tt_lr = 1e-3;
    CLI::App* tt = app.add_subcommand("train-toy", "toy regression on synthetic molecules");
    add_common(tt, tt_c);
    tt->add_option("--n-molecules", tt_molecules, "corpus size");
    tt->add_option("--steps", tt_steps, "optimizer steps");
    tt->add_option("--warmup", tt_warmup, "linear warmup steps");
    tt->add_option("--batch", tt_batch, "batch size");
    tt->add_option("--lr", tt_lr, "peak learning rate");

    CommonOpts dt_c;
    std::size_t dt_pairs = 32, dt_epochs = 25;
    std::string dt_loss = "infonce";
    double dt_lr = 1e-4;
    bool dt_scratch = false;
    CLI::App* dt = app.add_subcommand("distill-toy", "two-modality embedding distillation");
    add_common(dt, dt_c);
    dt->add_option("--pairs", dt_pairs, "number of conformer pairs");
    dt->add_option("--epochs", dt_epochs, "training epochs");
    dt->add_option("--loss", dt_loss, "infonce or l1");
    dt->add_option("--lr", dt_lr, "base learning rate");
    dt->add_flag("--from-scratch", dt_scratch, "random student init instead of teacher copy");

    CommonOpts pe_c;
    std::string pe_molecules, pe_preds, pe_fallback;
    std::size_t pe_k = 10, pe_threshold = 4;
    CLI::App* pe = app.add_subcommand("predict-ensemble", "trimmed-middle-mean aggregation");
    add_common(pe, pe_c);
    pe->add_option("--molecules", pe_molecules, "molecule JSONL file")->required();
    pe->add_option("--preds", pe_preds, "member predictions CSV")->required();
    pe->add_option("--fallback", pe_fallback, "small-molecule fallback CSV");
    pe->add_option("--k", pe_k, "middle count to average");
    pe->add_option("--threshold", pe_threshold, "strict atom-count routing threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (eq->parsed()) {
            return run_check_equiv(eq_c, eq_molecules, eq_conformers, eq_trials, eq_break);
        }
        if (od->parsed()) return run_oracle_diff(od_c, od_sizes);
        if (bn->parsed()) return run_bench(bn_c, bn_sizes, bn_repeats);
        if (tt->parsed()) {
            return run_train_toy(tt_c, tt_molecules, tt_steps, tt_warmup, tt_batch, tt_lr);
        }
        if (dt->parsed()) return run_distill_toy(dt_c, dt_pairs, dt_epochs, dt_loss, dt_lr,
                                                 dt_scratch);
        if (pe->parsed()) {
            return run_predict_ensemble(pe_c, pe_molecules, pe_preds, pe_fallback, pe_k,
                                        pe_threshold);
        }
        std::cerr << "usage error: no command\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const RoutingError& e) {
        std::cerr << "routing error: " << e.what() << "\n";
        return kExitFail;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
