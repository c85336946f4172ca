#include "visnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "visnet/errors.hpp"

namespace visnet::model {

namespace {

using num::Tape;
using num::Tensor;
using num::Var;

std::string blk(std::size_t b) { return "blk" + std::to_string(b); }

Var P(Tape& tape, const ParamStore& store, const std::string& name) {
    const auto it = store.find(name);
    if (it == store.end()) throw ContractError("missing parameter '" + name + "'");
    return tape.param(name, it->second);
}

// Inverted dropout; identity outside training or at rate 0.
Var dropout(Tape& tape, Var x, double rate, const RuntimeOptions& opts) {
    if (!opts.training || rate <= 0.0) return x;
    if (opts.rng == nullptr) throw ContractError("dropout requires an rng in training mode");
    const Tensor& v = tape.value(x);
    Tensor mask = Tensor::raw(v.shape);
    const double keep = 1.0 - rate;
    for (double& m : mask.data) m = opts.rng->uniform() < keep ? 1.0 / keep : 0.0;
    return tape.mul(x, tape.leaf(std::move(mask)));
}

void check_pair(const graph2d::MolGraph& g, const geom::Conformer& c) {
    if (c.n_atoms() != g.n_atoms()) {
        throw ContractError("graph '" + g.id + "' has " + std::to_string(g.n_atoms()) +
                            " atoms but the conformer has " + std::to_string(c.n_atoms()));
    }
    for (std::size_t a = 0; a < g.n_atoms(); ++a) {
        if (g.atoms[a].z != c.atomic_numbers[a]) {
            throw ContractError("graph '" + g.id + "': atomic number mismatch at atom " +
                                std::to_string(a));
        }
    }
}

Tensor positions_tensor(const geom::Conformer& c) {
    Tensor t = Tensor::raw({c.n_atoms(), 3});
    for (std::size_t i = 0; i < c.n_atoms(); ++i)
        for (std::size_t a = 0; a < 3; ++a) t.data[i * 3 + a] = c.positions[i][a];
    return t;
}

std::string fmt_f64(double v) { return nlohmann::json(v).dump(); }

double parse_f64(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("config key '" + key + "': bad float '" + s + "'");
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("config key '" + key + "': bad integer '" + s + "'");
    }
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw SchemaError("config key '" + key + "': bad bool '" + s + "'");
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::two_d: return "2d";
        case Mode::three_d: return "3d";
        case Mode::joint: return "joint";
    }
    throw ContractError("mode_name: bad mode");
}

Mode mode_from_name(const std::string& name) {
    if (name == "2d") return Mode::two_d;
    if (name == "3d") return Mode::three_d;
    if (name == "joint") return Mode::joint;
    throw SchemaError("unknown mode '" + name + "' (expected 2d|3d|joint)");
}

void ModelConfig::validate() const {
    if (n_blocks < 1) throw SchemaError("config: n_blocks must be >= 1");
    if (hidden_dim < 1 || n_heads < 1 || hidden_dim % n_heads != 0) {
        throw SchemaError("config: hidden_dim must be a positive multiple of n_heads");
    }
    double sum = 0.0;
    for (double p : mode_probs) {
        if (p < 0.0) throw SchemaError("config: mode_probs must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw SchemaError("config: mode_probs must sum to 1");
    if (noise_scale < 0.0) throw SchemaError("config: noise_scale must be >= 0");
    if (spd_cap < 1) throw SchemaError("config: spd_cap must be >= 1");
    if (n_rbf < 2) throw SchemaError("config: n_rbf must be >= 2");
    for (double r : {dropout_embedding, dropout_activation, dropout_attention, drop_path}) {
        if (r < 0.0 || r >= 1.0) throw SchemaError("config: dropout rates must be in [0, 1)");
    }
    if (z_vocab < 2) throw SchemaError("config: z_vocab must be >= 2");
    if (degree_cap < 1 || num_h_cap < 1) throw SchemaError("config: feature caps must be >= 1");
    if (!(rbf_max > 0.0)) throw SchemaError("config: rbf_max must be > 0");
}

std::string config_to_string(const ModelConfig& cfg) {
    std::ostringstream out;
    out << "n_blocks = " << cfg.n_blocks << "\n";
    out << "hidden_dim = " << cfg.hidden_dim << "\n";
    out << "n_heads = " << cfg.n_heads << "\n";
    out << "mode_probs = " << fmt_f64(cfg.mode_probs[0]) << "," << fmt_f64(cfg.mode_probs[1])
        << "," << fmt_f64(cfg.mode_probs[2]) << "\n";
    out << "noise_scale = " << fmt_f64(cfg.noise_scale) << "\n";
    out << "encoder_version = " << (cfg.encoder_version == EncoderVersion::v1 ? "v1" : "v2")
        << "\n";
    out << "spd_cap = " << cfg.spd_cap << "\n";
    out << "n_rbf = " << cfg.n_rbf << "\n";
    out << "dropout_embedding = " << fmt_f64(cfg.dropout_embedding) << "\n";
    out << "dropout_activation = " << fmt_f64(cfg.dropout_activation) << "\n";
    out << "dropout_attention = " << fmt_f64(cfg.dropout_attention) << "\n";
    out << "drop_path = " << fmt_f64(cfg.drop_path) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "feature_set = " << (cfg.feature_set == FeatureSet::full ? "full" : "atomic_only")
        << "\n";
    out << "use_graph_token = " << (cfg.use_graph_token ? "true" : "false") << "\n";
    out << "z_vocab = " << cfg.z_vocab << "\n";
    out << "degree_cap = " << cfg.degree_cap << "\n";
    out << "num_h_cap = " << cfg.num_h_cap << "\n";
    out << "rbf_max = " << fmt_f64(cfg.rbf_max) << "\n";
    return out.str();
}

ModelConfig config_from_string(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw SchemaError("config line without '=': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "n_blocks") {
            cfg.n_blocks = parse_u64(val, key);
        } else if (key == "hidden_dim") {
            cfg.hidden_dim = parse_u64(val, key);
        } else if (key == "n_heads") {
            cfg.n_heads = parse_u64(val, key);
        } else if (key == "mode_probs") {
            std::istringstream parts(val);
            std::string tok;
            std::size_t k = 0;
            while (std::getline(parts, tok, ',')) {
                if (k >= 3) throw SchemaError("config: mode_probs needs exactly 3 values");
                cfg.mode_probs[k++] = parse_f64(trim(tok), key);
            }
            if (k != 3) throw SchemaError("config: mode_probs needs exactly 3 values");
        } else if (key == "noise_scale") {
            cfg.noise_scale = parse_f64(val, key);
        } else if (key == "encoder_version") {
            if (val == "v1") {
                cfg.encoder_version = EncoderVersion::v1;
            } else if (val == "v2") {
                cfg.encoder_version = EncoderVersion::v2;
            } else {
                throw SchemaError("config: encoder_version must be v1 or v2");
            }
        } else if (key == "spd_cap") {
            cfg.spd_cap = static_cast<int>(parse_u64(val, key));
        } else if (key == "n_rbf") {
            cfg.n_rbf = parse_u64(val, key);
        } else if (key == "dropout_embedding") {
            cfg.dropout_embedding = parse_f64(val, key);
        } else if (key == "dropout_activation") {
            cfg.dropout_activation = parse_f64(val, key);
        } else if (key == "dropout_attention") {
            cfg.dropout_attention = parse_f64(val, key);
        } else if (key == "drop_path") {
            cfg.drop_path = parse_f64(val, key);
        } else if (key == "seed") {
            cfg.seed = parse_u64(val, key);
        } else if (key == "feature_set") {
            if (val == "full") {
                cfg.feature_set = FeatureSet::full;
            } else if (val == "atomic_only") {
                cfg.feature_set = FeatureSet::atomic_only;
            } else {
                throw SchemaError("config: feature_set must be full or atomic_only");
            }
        } else if (key == "use_graph_token") {
            cfg.use_graph_token = parse_bool(val, key);
        } else if (key == "z_vocab") {
            cfg.z_vocab = parse_u64(val, key);
        } else if (key == "degree_cap") {
            cfg.degree_cap = parse_u64(val, key);
        } else if (key == "num_h_cap") {
            cfg.num_h_cap = parse_u64(val, key);
        } else if (key == "rbf_max") {
            cfg.rbf_max = parse_f64(val, key);
        } else {
            throw SchemaError("config: unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ParamStore init_params(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t F = cfg.hidden_dim;
    const std::size_t H = cfg.n_heads;
    const std::size_t d = cfg.head_dim();
    ParamStore p;
    auto table = [&](const std::string& name, std::size_t rows) {
        p[name] = Tensor::random_gaussian({rows, F}, rng, 0.0, 0.1);
    };
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
        p[name] = Tensor::random_gaussian({in, out}, rng, 0.0,
                                          1.0 / std::sqrt(static_cast<double>(in)));
    };
    auto bias_table = [&](const std::string& name, num::Shape shape) {
        p[name] = Tensor::random_gaussian(std::move(shape), rng, 0.0, 0.02);
    };

    table("embed.z", cfg.z_vocab);
    if (cfg.feature_set == FeatureSet::full) {
        table("embed.aromatic", 2);
        table("embed.charge", graph2d::kNumChargeCodes);
        table("embed.chirality", graph2d::kNumChirality);
        table("embed.degree", cfg.degree_cap + 1);
        table("embed.num_h", cfg.num_h_cap + 1);
        table("embed.hybridization", graph2d::kNumHybridization);
    }
    if (cfg.use_graph_token) table("token.embed", 1);
    bias_table("spd.bias", {static_cast<std::size_t>(cfg.spd_cap) + 3, H});
    bias_table("dist.mix", {cfg.n_rbf, H});
    if (cfg.use_graph_token) bias_table("dist.token", {H});
    weight("angle.ws", F, F);
    weight("angle.wt", F, F);
    if (cfg.encoder_version == EncoderVersion::v2) weight("edge.concat", 2 * F, F);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            weight(blk(b) + ".head" + std::to_string(h) + ".wq", F, d);
            weight(blk(b) + ".head" + std::to_string(h) + ".wk", F, d);
            weight(blk(b) + ".head" + std::to_string(h) + ".wv", F, d);
        }
        weight(blk(b) + ".wo", F, F);
        p[blk(b) + ".ln.gamma"] = Tensor::full({F}, 1.0);
        p[blk(b) + ".ln.beta"] = Tensor::zeros({F});
        weight(blk(b) + ".ffn.w1", F, F);
        p[blk(b) + ".ffn.b1"] = Tensor::zeros({F});
        weight(blk(b) + ".ffn.w2", F, F);
        p[blk(b) + ".ffn.b2"] = Tensor::zeros({F});
        weight(blk(b) + ".dih.ws", F, F);
        weight(blk(b) + ".dih.wt", F, F);
        bias_table(blk(b) + ".dih.mix", {F, H});
    }
    weight("dec.w1", F, F);
    p["dec.b1"] = Tensor::zeros({F});
    // Zero-init final layer: at step 0 the model is the constant predictor
    // dec.b2, which the trainer centers on the target mean.
    p["dec.w2"] = Tensor::zeros({F, 1});
    p["dec.b2"] = Tensor::zeros({1});
    return p;
}

std::string param_hash(const ParamStore& params) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64 offset basis
    auto mix = [&h](const void* bytes, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, t] : params) {
        mix(name.data(), name.size());
        const std::uint64_t rank = t.rank();
        mix(&rank, sizeof(rank));
        for (std::size_t dsz : t.shape) {
            const std::uint64_t d64 = dsz;
            mix(&d64, sizeof(d64));
        }
        mix(t.data.data(), t.data.size() * sizeof(double));
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

Mode sample_mode(const ModelConfig& cfg, Rng& rng, std::optional<Mode> override_mode) {
    cfg.validate();
    if (override_mode) return *override_mode;
    const double u = rng.uniform();
    if (u < cfg.mode_probs[0]) return Mode::two_d;
    if (u < cfg.mode_probs[0] + cfg.mode_probs[1]) return Mode::three_d;
    return Mode::joint;
}

geom::Conformer add_coordinate_noise(const geom::Conformer& c, double scale, Rng& rng) {
    if (scale < 0.0) throw ContractError("add_coordinate_noise: scale must be >= 0");
    geom::Conformer out = c;
    if (scale == 0.0) return out;
    for (geom::Vec3& p : out.positions)
        for (double& x : p) x += rng.gaussian(0.0, scale);
    return out;
}

std::vector<std::size_t> canonical_order(const graph2d::MolGraph& g, const geom::Conformer& c) {
    check_pair(g, c);
    std::vector<std::size_t> order(g.n_atoms());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (g.atoms[a].z != g.atoms[b].z) return g.atoms[a].z < g.atoms[b].z;
        return c.positions[a] < c.positions[b];
    });
    return order;
}

std::vector<double> rbf_centers(const ModelConfig& cfg) {
    std::vector<double> centers(cfg.n_rbf);
    const double spacing = cfg.rbf_max / static_cast<double>(cfg.n_rbf - 1);
    for (std::size_t k = 0; k < cfg.n_rbf; ++k) centers[k] = spacing * static_cast<double>(k);
    return centers;
}

double rbf_width(const ModelConfig& cfg) {
    return cfg.rbf_max / static_cast<double>(cfg.n_rbf - 1);
}

Var psi2d_node(Tape& tape, const graph2d::MolGraph& g, const ParamStore& params,
               const ModelConfig& cfg) {
    const std::size_t n = g.n_atoms();
    std::vector<std::size_t> aromatic(n), charge(n), chirality(n), degree(n), num_h(n), hyb(n);
    bool clipped = false;
    for (std::size_t a = 0; a < n; ++a) {
        const graph2d::AtomFeatures& f = g.atoms[a];
        aromatic[a] = f.aromatic ? 1 : 0;
        charge[a] = static_cast<std::size_t>(f.charge + graph2d::kMaxFormalCharge);
        chirality[a] = static_cast<std::size_t>(f.chirality);
        degree[a] = std::min<std::size_t>(static_cast<std::size_t>(f.degree), cfg.degree_cap);
        clipped |= static_cast<std::size_t>(f.degree) > cfg.degree_cap;
        num_h[a] = std::min<std::size_t>(static_cast<std::size_t>(f.num_h), cfg.num_h_cap);
        hyb[a] = static_cast<std::size_t>(f.hybridization);
    }
    if (clipped) {
        std::cerr << "note: molecule '" << g.id << "' has degree above "
                  << cfg.degree_cap << "; clipped\n";
    }
    Var x = tape.embedding_rows(P(tape, params, "embed.aromatic"), aromatic);
    x = tape.add(x, tape.embedding_rows(P(tape, params, "embed.charge"), charge));
    x = tape.add(x, tape.embedding_rows(P(tape, params, "embed.chirality"), chirality));
    x = tape.add(x, tape.embedding_rows(P(tape, params, "embed.degree"), degree));
    x = tape.add(x, tape.embedding_rows(P(tape, params, "embed.num_h"), num_h));
    x = tape.add(x, tape.embedding_rows(P(tape, params, "embed.hybridization"), hyb));
    return x;
}

Var psi2d_bias(Tape& tape, const graph2d::SpdMatrix& spd, Var table) {
    const std::size_t cap = static_cast<std::size_t>(spd.cap);
    std::vector<std::size_t> codes(spd.n * spd.n);
    for (std::size_t k = 0; k < codes.size(); ++k) {
        const int v = spd.spd[k];
        codes[k] = v == graph2d::SpdMatrix::kUnreachable ? cap + 1 : static_cast<std::size_t>(v);
    }
    return tape.bias_lookup(table, codes, spd.n);
}

Var distance_bias(Tape& tape, Var positions, const ParamStore& params, const ModelConfig& cfg) {
    Var dists = tape.pairwise_dists(positions);
    Var rbf = tape.rbf_expand(dists, rbf_centers(cfg), rbf_width(cfg));
    return tape.last_linear(rbf, P(tape, params, "dist.mix"));
}

NodeEmbedding embed_nodes(Tape& tape, const graph2d::MolGraph& g, const geom::Conformer* c,
                          Mode mode, const ModelConfig& cfg, const ParamStore& params) {
    cfg.validate();
    const bool wants_3d = mode != Mode::two_d;
    if (wants_3d && c == nullptr) {
        throw ContractError("mode '" + mode_name(mode) + "' requires a conformer");
    }
    if (!wants_3d && c != nullptr) {
        throw ContractError("2d mode must not receive a conformer");
    }
    if (c != nullptr) check_pair(g, *c);

    std::vector<std::size_t> z_idx(g.n_atoms());
    for (std::size_t a = 0; a < g.n_atoms(); ++a) {
        const std::size_t z = static_cast<std::size_t>(g.atoms[a].z);
        if (z >= cfg.z_vocab) {
            throw ContractError("atomic number " + std::to_string(z) +
                                " outside the configured vocabulary");
        }
        z_idx[a] = z;
    }
    Var x = tape.embedding_rows(P(tape, params, "embed.z"), z_idx);
    if (cfg.feature_set == FeatureSet::full) {
        x = tape.add(x, psi2d_node(tape, g, params, cfg));
    }

    NodeEmbedding ne;
    if (wants_3d) {
        ne.positions = tape.input(positions_tensor(*c));
        ne.dirs = tape.unit_dirs(ne.positions);
        Var scales = cfg.encoder_version == EncoderVersion::v1
                         ? tape.edge_source_broadcast(x)
                         : tape.last_linear(tape.edge_concat(x), P(tape, params, "edge.concat"));
        ne.vec_feat = tape.aggregate_vectors(ne.dirs, scales);
        Var angle = tape.vec_inner(tape.last_linear(ne.vec_feat, P(tape, params, "angle.ws")),
                                   tape.last_linear(ne.vec_feat, P(tape, params, "angle.wt")));
        x = tape.add(x, angle);
    }
    if (cfg.use_graph_token) {
        ne.x0 = tape.concat_rows({P(tape, params, "token.embed"), x});
    } else {
        ne.x0 = x;
    }
    return ne;
}

Var attention_block(Tape& tape, Var x, Var bias, std::size_t block, const ModelConfig& cfg,
                    const ParamStore& params, const RuntimeOptions& opts) {
    const std::size_t d = cfg.head_dim();
    const std::string base = blk(block);
    std::vector<Var> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const std::string hb = base + ".head" + std::to_string(h);
        Var q = tape.matmul(x, P(tape, params, hb + ".wq"));
        Var k = tape.matmul(x, P(tape, params, hb + ".wk"));
        Var v = tape.matmul(x, P(tape, params, hb + ".wv"));
        Var scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
        if (bias.valid()) scores = tape.add(scores, tape.select_last(bias, h));
        Var attn = tape.softmax_rows(scores);
        attn = dropout(tape, attn, cfg.dropout_attention, opts);
        heads.push_back(tape.matmul(attn, v));
    }
    Var merged = tape.last_linear(tape.concat_last(heads), P(tape, params, base + ".wo"));
    Var normed = tape.layer_norm_rows(merged, P(tape, params, base + ".ln.gamma"),
                                      P(tape, params, base + ".ln.beta"));
    Var h1 = tape.silu(tape.add_bias_last(tape.last_linear(normed, P(tape, params, base + ".ffn.w1")),
                                          P(tape, params, base + ".ffn.b1")));
    h1 = dropout(tape, h1, cfg.dropout_activation, opts);
    Var h2 = tape.add_bias_last(tape.last_linear(h1, P(tape, params, base + ".ffn.w2")),
                                P(tape, params, base + ".ffn.b2"));
    if (opts.training && cfg.drop_path > 0.0) {
        if (opts.rng == nullptr) throw ContractError("drop-path requires an rng in training mode");
        const double keep = 1.0 - cfg.drop_path;
        h2 = tape.scale(h2, opts.rng->uniform() < keep ? 1.0 / keep : 0.0);
    }
    return tape.add(x, h2);
}

Var readout_predict(Tape& tape, Var x_final, std::size_t begin_row, const ParamStore& params) {
    const std::size_t rows = tape.value(x_final).dim(0);
    Var pooled = tape.mean_rows_range(x_final, begin_row, rows);
    Var d1 = tape.silu(tape.add_bias_last(tape.last_linear(pooled, P(tape, params, "dec.w1")),
                                          P(tape, params, "dec.b1")));
    return tape.add_bias_last(tape.last_linear(d1, P(tape, params, "dec.w2")),
                              P(tape, params, "dec.b2"));
}

ForwardResult build_forward(Tape& tape, const graph2d::MolGraph& g, const geom::Conformer* c,
                            Mode mode, const ModelConfig& cfg, const ParamStore& params,
                            const RuntimeOptions& opts) {
    cfg.validate();
    graph2d::MolGraph local_g;
    geom::Conformer local_c;
    const graph2d::MolGraph* gp = &g;
    // In 2D mode the conformer is dropped outright (not zeroed), so the
    // prediction cannot depend on coordinates even in the last bit.
    const geom::Conformer* cp = mode == Mode::two_d ? nullptr : c;
    if (cp != nullptr && opts.canonicalize) {
        const std::vector<std::size_t> order = canonical_order(g, *cp);
        local_g = g.permuted(order);
        local_c = cp->permuted(order);
        gp = &local_g;
        cp = &local_c;
    }

    const std::size_t n = gp->n_atoms();
    const std::size_t offset = cfg.use_graph_token ? 1 : 0;
    const std::size_t m = n + offset;
    const std::size_t cap = static_cast<std::size_t>(cfg.spd_cap);

    NodeEmbedding ne = embed_nodes(tape, *gp, cp, mode, cfg, params);
    Var x = dropout(tape, ne.x0, cfg.dropout_embedding, opts);

    // Attention bias stack (M,M,H); terms excluded by the active mode are
    // never constructed, so they cannot perturb the result numerically.
    Var static_bias;  // SPD + distance; the dihedral part is per block
    if (mode != Mode::three_d) {
        const graph2d::SpdMatrix spd = graph2d::shortest_paths(*gp, cfg.spd_cap);
        std::vector<std::size_t> codes(m * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i < offset || j < offset) {
                    codes[i * m + j] = cap + 2;
                } else {
                    const int v = spd.at(i - offset, j - offset);
                    codes[i * m + j] = v == graph2d::SpdMatrix::kUnreachable
                                           ? cap + 1
                                           : static_cast<std::size_t>(v);
                }
            }
        static_bias = tape.bias_lookup(P(tape, params, "spd.bias"), codes, m);
    }
    if (mode != Mode::two_d) {
        Var dist = distance_bias(tape, ne.positions, params, cfg);
        if (offset > 0) {
            dist = tape.pad_edges(dist, P(tape, params, "dist.token"), m, offset);
        }
        static_bias = static_bias.valid() ? tape.add(static_bias, dist) : dist;
    }

    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        Var bias = static_bias;
        if (mode != Mode::two_d) {
            const std::string base = blk(b);
            Var pair = tape.dihedral_pair_inner(
                tape.last_linear(ne.vec_feat, P(tape, params, base + ".dih.ws")),
                tape.last_linear(ne.vec_feat, P(tape, params, base + ".dih.wt")), ne.dirs);
            Var dih = tape.last_linear(pair, P(tape, params, base + ".dih.mix"));
            if (offset > 0) dih = tape.pad_edges(dih, Var{}, m, offset);
            bias = bias.valid() ? tape.add(bias, dih) : dih;
        }
        x = attention_block(tape, x, bias, b, cfg, params, opts);
    }

    ForwardResult out;
    out.graph_embedding = tape.mean_rows_range(x, offset, m);
    out.prediction = readout_predict(tape, x, offset, params);
    out.positions = ne.positions;
    return out;
}

double predict(const graph2d::MolGraph& g, const geom::Conformer* c, Mode mode,
               const ModelConfig& cfg, const ParamStore& params) {
    Tape tape(false);
    const ForwardResult fr = build_forward(tape, g, c, mode, cfg, params);
    return tape.value(fr.prediction).data[0];
}

num::Tensor graph_embedding(const graph2d::MolGraph& g, const geom::Conformer* c, Mode mode,
                            const ModelConfig& cfg, const ParamStore& params) {
    Tape tape(false);
    const ForwardResult fr = build_forward(tape, g, c, mode, cfg, params);
    return tape.value(fr.graph_embedding);
}

std::string checkpoint_to_string(const ModelConfig& cfg, const ParamStore& params) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = config_to_string(cfg);
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [name, t] : params) {
        p[name] = {{"shape", t.shape}, {"data", t.data}};
    }
    j["params"] = std::move(p);
    return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    Checkpoint ck;
    try {
        if (j.at("format_version").get<int>() != 1) {
            throw SchemaError("checkpoint: unsupported format_version");
        }
        ck.config = config_from_string(j.at("config").get<std::string>());
        for (const auto& [name, entry] : j.at("params").items()) {
            const num::Shape shape = entry.at("shape").get<num::Shape>();
            std::vector<double> data = entry.at("data").get<std::vector<double>>();
            ck.params[name] = Tensor::from(shape, std::move(data));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("checkpoint missing or mistyped field: " + std::string(e.what()));
    }
    return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << checkpoint_to_string(cfg, params);
    if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

void Optimizer::step(ParamStore& params, const num::GradMap& grads, double lr) {
    for (const auto& [name, g] : grads) {
        const auto it = params.find(name);
        if (it == params.end()) throw ContractError("optimizer: unknown parameter '" + name + "'");
        Tensor& p = it->second;
        if (!p.same_shape(g)) throw DimensionError("optimizer: grad shape mismatch for " + name);
        Tensor& v = second_moment.try_emplace(name, Tensor::zeros(g.shape)).first->second;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = g.data[i];
            v.data[i] = beta * v.data[i] + (1.0 - beta) * gi * gi;
            p.data[i] -= lr * (gi / (std::sqrt(v.data[i]) + eps) + weight_decay * p.data[i]);
        }
    }
}

TrainResult train_toy(const std::vector<synth::Sample>& dataset, const ModelConfig& cfg,
                      const TrainConfig& tc) {
    cfg.validate();
    if (dataset.empty()) throw ContractError("train_toy: empty dataset");
    if (tc.batch_size < 1 || tc.total_steps < 1) {
        throw ContractError("train_toy: batch_size and total_steps must be >= 1");
    }
    std::vector<double> targets;
    targets.reserve(dataset.size());
    for (const synth::Sample& s : dataset) {
        if (!s.graph.gap_ev) {
            throw ContractError("train_toy: sample '" + s.graph.id + "' has no target");
        }
        targets.push_back(*s.graph.gap_ev);
    }
    const double y_mean =
        std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double baseline = 0.0;
    for (double y : targets) baseline += std::abs(y - y_mean);
    baseline /= static_cast<double>(targets.size());

    Rng init_rng(cfg.seed);
    TrainResult result;
    result.baseline_l1 = baseline;
    result.params = init_params(cfg, init_rng);
    result.params["dec.b2"].data[0] = y_mean;

    Optimizer opt;
    opt.weight_decay = tc.weight_decay;
    Rng batch_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng mode_rng(tc.seed + 1);
    Rng noise_rng(tc.seed + 2);
    RuntimeOptions opts;
    opts.training = true;
    opts.rng = &noise_rng;

    result.loss_curve.reserve(tc.total_steps);
    for (std::size_t step = 0; step < tc.total_steps; ++step) {
        double lr = tc.lr;
        if (tc.warmup_steps > 0 && step < tc.warmup_steps) {
            lr = tc.lr * static_cast<double>(step + 1) / static_cast<double>(tc.warmup_steps);
        }
        Tape tape(true);
        std::vector<Var> losses;
        losses.reserve(tc.batch_size);
        for (std::size_t b = 0; b < tc.batch_size; ++b) {
            const synth::Sample& s = dataset[batch_rng.below(dataset.size())];
            const Mode mode = sample_mode(cfg, mode_rng, tc.mode_override);
            geom::Conformer noised;
            const geom::Conformer* cp = nullptr;
            if (mode != Mode::two_d) {
                noised = cfg.noise_scale > 0.0
                             ? add_coordinate_noise(s.conformer, cfg.noise_scale, noise_rng)
                             : s.conformer;
                cp = &noised;
            }
            const ForwardResult fr = build_forward(tape, s.graph, cp, mode, cfg, result.params, opts);
            losses.push_back(tape.abs_elem(
                tape.sub(fr.prediction, tape.leaf(Tensor::from({1}, {*s.graph.gap_ev})))));
        }
        const Var loss = tape.mean_all(tape.concat_rows(losses));
        const double loss_value = tape.value(loss).data[0];
        if (!std::isfinite(loss_value)) {
            throw Error("train_toy: non-finite loss at step " + std::to_string(step) +
                        " (lr=" + std::to_string(lr) + ")");
        }
        result.loss_curve.push_back(loss_value);
        const num::GradMap grads = tape.backward(loss);
        opt.step(result.params, grads, lr);
    }

    double final_l1 = 0.0;
    for (const synth::Sample& s : dataset) {
        final_l1 += std::abs(predict(s.graph, &s.conformer, Mode::joint, cfg, result.params) -
                             *s.graph.gap_ev);
    }
    result.final_train_l1 = final_l1 / static_cast<double>(dataset.size());
    return result;
}

}  // namespace visnet::model
