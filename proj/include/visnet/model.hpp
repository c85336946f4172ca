#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "visnet/geom.hpp"
#include "visnet/graph2d.hpp"
#include "visnet/rng.hpp"
#include "visnet/synth.hpp"
#include "visnet/tape.hpp"

namespace visnet::model {

enum class Mode { two_d, three_d, joint };
enum class EncoderVersion { v1, v2 };
enum class FeatureSet { atomic_only, full };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct ModelConfig {
    std::size_t n_blocks = 2;
    std::size_t hidden_dim = 64;  // F
    std::size_t n_heads = 4;
    std::array<double, 3> mode_probs = {0.2, 0.2, 0.6};  // (2D, 3D, joint)
    double noise_scale = 0.2;
    EncoderVersion encoder_version = EncoderVersion::v1;
    int spd_cap = 20;
    std::size_t n_rbf = 16;
    double dropout_embedding = 0.0;
    double dropout_activation = 0.0;
    double dropout_attention = 0.0;
    double drop_path = 0.0;
    std::uint64_t seed = 0;
    FeatureSet feature_set = FeatureSet::full;
    bool use_graph_token = true;
    std::size_t z_vocab = graph2d::kMaxAtomicNumber + 1;
    std::size_t degree_cap = 16;
    std::size_t num_h_cap = 8;
    double rbf_max = 12.0;  // angstrom span of the Gaussian distance basis

    void validate() const;
    std::size_t head_dim() const { return hidden_dim / n_heads; }
};

// key=value config text, one entry per line, '#' comments.
ModelConfig config_from_string(const std::string& text);
std::string config_to_string(const ModelConfig& cfg);

using ParamStore = std::map<std::string, num::Tensor>;

// All learnable tensors for a config, deterministically initialized.
ParamStore init_params(const ModelConfig& cfg, Rng& rng);

// FNV-1a over names, shapes and raw value bytes, in name order.
std::string param_hash(const ParamStore& params);

// Categorical draw over (2D, 3D, joint); a set override wins regardless
// of the configured probabilities.
Mode sample_mode(const ModelConfig& cfg, Rng& rng,
                 std::optional<Mode> override_mode = std::nullopt);

// Training-time position jitter: i.i.d. Gaussian(0, scale^2) per coordinate.
geom::Conformer add_coordinate_noise(const geom::Conformer& c, double scale, Rng& rng);

// Stable atom ordering by (z, x, y, z-coordinate); makes permutation
// invariance of every downstream reduction bitwise exact.
std::vector<std::size_t> canonical_order(const graph2d::MolGraph& g, const geom::Conformer& c);

struct RuntimeOptions {
    bool training = false;
    Rng* rng = nullptr;         // required when training with nonzero dropout
    bool canonicalize = true;   // only applies when a conformer is present
};

struct ForwardResult {
    num::Var prediction;       // scalar, eV
    num::Var graph_embedding;  // (F), pre-decoder mean pool
    num::Var positions;        // differentiable positions input; invalid in 2D mode
};

// Node embedding per Encoder V1/V2: scalar features X0 (N or N+1 rows with
// the graph token) and the equivariant block V built by tensor-product
// aggregation. Exposed separately for the encoder-identity tests.
struct NodeEmbedding {
    num::Var x0;         // (M,F)
    num::Var vec_feat;   // (N,3,F); invalid in 2D mode
    num::Var dirs;       // (N,N,3); invalid in 2D mode
    num::Var positions;  // invalid in 2D mode
};
NodeEmbedding embed_nodes(num::Tape& tape, const graph2d::MolGraph& g,
                          const geom::Conformer* c, Mode mode, const ModelConfig& cfg,
                          const ParamStore& params);

// Sum of the categorical feature embeddings (aromatic, charge, chirality,
// degree, H count, hybridization); degree above the cap clips.
num::Var psi2d_node(num::Tape& tape, const graph2d::MolGraph& g, const ParamStore& params,
                    const ModelConfig& cfg);

// SPD attention bias block (N,N,H) from a lookup table Var of shape
// (cap+3, H): rows 0..cap hop counts, cap+1 unreachable, cap+2 graph token.
num::Var psi2d_bias(num::Tape& tape, const graph2d::SpdMatrix& spd, num::Var table);

// Gaussian basis parameters of the pair-distance bias.
std::vector<double> rbf_centers(const ModelConfig& cfg);
double rbf_width(const ModelConfig& cfg);

// Pair-distance attention bias (N,N,H): RBF expansion of the distance
// matrix mixed per head. Rigid-motion invariant.
num::Var distance_bias(num::Tape& tape, num::Var positions, const ParamStore& params,
                       const ModelConfig& cfg);

// One biased multi-head attention block: softmax(QK^T/sqrt(d) + bias) per
// head, output projection, LayerNorm, feed-forward, residual add. bias is
// (M,M,H) or an invalid Var for none.
num::Var attention_block(num::Tape& tape, num::Var x, num::Var bias, std::size_t block,
                         const ModelConfig& cfg, const ParamStore& params,
                         const RuntimeOptions& opts = {});

// Mean-pool rows [begin_row, end) then the 2-layer decoder MLP -> (1).
num::Var readout_predict(num::Tape& tape, num::Var x_final, std::size_t begin_row,
                         const ParamStore& params);

// Full forward pass. c may be null only in 2D mode.
ForwardResult build_forward(num::Tape& tape, const graph2d::MolGraph& g,
                            const geom::Conformer* c, Mode mode, const ModelConfig& cfg,
                            const ParamStore& params, const RuntimeOptions& opts = {});

// Forward-only convenience evaluations.
double predict(const graph2d::MolGraph& g, const geom::Conformer* c, Mode mode,
               const ModelConfig& cfg, const ParamStore& params);
num::Tensor graph_embedding(const graph2d::MolGraph& g, const geom::Conformer* c, Mode mode,
                            const ModelConfig& cfg, const ParamStore& params);

// Checkpoints: JSON map name -> shape + f64 values with the config
// embedded; round-trips bitwise.
std::string checkpoint_to_string(const ModelConfig& cfg, const ParamStore& params);
struct Checkpoint {
    ModelConfig config;
    ParamStore params;
};
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);

// Momentum-free adaptive optimizer with decoupled weight decay:
// v <- beta v + (1-beta) g^2;  p <- p - lr (g / (sqrt(v)+eps) + wd p).
struct Optimizer {
    double beta = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::map<std::string, num::Tensor> second_moment;

    void step(ParamStore& params, const num::GradMap& grads, double lr);
};

struct TrainConfig {
    std::size_t warmup_steps = 100;
    std::size_t total_steps = 5000;
    std::size_t batch_size = 4;
    double lr = 3e-3;
    double weight_decay = 0.0;
    std::optional<Mode> mode_override = Mode::joint;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;   // per-step batch L1
    double baseline_l1 = 0.0;         // constant-predictor mean |y - mean(y)|
    double final_train_l1 = 0.0;      // full-dataset L1 after training
    ParamStore params;
};

// L1 regression on gap_ev with linear warmup then constant LR. Aborts
// with a diagnostic if the loss goes non-finite. Deterministic per seed.
TrainResult train_toy(const std::vector<synth::Sample>& dataset, const ModelConfig& cfg,
                      const TrainConfig& tc);

}  // namespace visnet::model
