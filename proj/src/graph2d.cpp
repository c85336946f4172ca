#include "visnet/graph2d.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include <json.hpp>

#include "visnet/errors.hpp"

namespace visnet::graph2d {

namespace {

void check_range(long v, long lo, long hi, const std::string& field) {
    if (v < lo || v > hi) {
        throw SchemaError("field '" + field + "' out of range: " + std::to_string(v) +
                          " not in [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
    }
}

}  // namespace

std::vector<std::vector<std::size_t>> MolGraph::adjacency() const {
    std::vector<std::vector<std::size_t>> adj(atoms.size());
    for (const BondFeatures& b : bonds) {
        adj[b.i].push_back(b.j);
        adj[b.j].push_back(b.i);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    return adj;
}

void MolGraph::validate() const {
    if (atoms.empty()) throw SchemaError("molecule '" + id + "': no atoms");
    for (std::size_t a = 0; a < atoms.size(); ++a) {
        const AtomFeatures& f = atoms[a];
        check_range(f.z, 1, kMaxAtomicNumber, "z");
        check_range(f.charge, -kMaxFormalCharge, kMaxFormalCharge, "charge");
        check_range(f.chirality, 0, kNumChirality - 1, "chirality");
        check_range(f.num_h, 0, 8, "num_h");
        check_range(f.hybridization, 0, kNumHybridization - 1, "hybridization");
        check_range(f.degree, 0, static_cast<long>(atoms.size()) - 1, "degree");
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<int> degree(atoms.size(), 0);
    for (const BondFeatures& b : bonds) {
        if (b.i >= atoms.size() || b.j >= atoms.size()) {
            throw SchemaError("molecule '" + id + "': bond endpoint out of range");
        }
        if (b.i == b.j) throw SchemaError("molecule '" + id + "': self-loop on atom " +
                                          std::to_string(b.i));
        const auto key = std::minmax(b.i, b.j);
        if (!seen.insert(key).second) {
            throw SchemaError("molecule '" + id + "': duplicate bond " + std::to_string(b.i) +
                              "-" + std::to_string(b.j));
        }
        check_range(b.dir, 0, kNumBondDir - 1, "dir");
        check_range(b.type, 0, kNumBondType - 1, "type");
        ++degree[b.i];
        ++degree[b.j];
    }
    for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (degree[a] != atoms[a].degree) {
            throw SchemaError("molecule '" + id + "': stored degree " +
                              std::to_string(atoms[a].degree) + " of atom " + std::to_string(a) +
                              " does not match " + std::to_string(degree[a]) + " incident bonds");
        }
    }
}

MolGraph MolGraph::permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != atoms.size()) throw ContractError("MolGraph::permuted: bad permutation");
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
    MolGraph out = *this;
    for (std::size_t k = 0; k < perm.size(); ++k) out.atoms[k] = atoms[perm[k]];
    for (BondFeatures& b : out.bonds) {
        b.i = inv[b.i];
        b.j = inv[b.j];
        if (b.i > b.j) std::swap(b.i, b.j);
    }
    std::sort(out.bonds.begin(), out.bonds.end(), [](const BondFeatures& a, const BondFeatures& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    return out;
}

MolGraph load_molgraph(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("molecule record is not valid JSON: ") + e.what());
    }
    MolGraph g;
    try {
        g.id = j.at("id").get<std::string>();
        for (const auto& atom : j.at("atoms")) {
            AtomFeatures f;
            f.z = atom.at("z").get<int>();
            f.aromatic = atom.at("aromatic").get<bool>();
            f.charge = atom.at("charge").get<int>();
            f.chirality = atom.at("chirality").get<int>();
            f.degree = atom.at("degree").get<int>();
            f.num_h = atom.at("num_h").get<int>();
            f.hybridization = atom.at("hybridization").get<int>();
            g.atoms.push_back(f);
        }
        for (const auto& bond : j.at("bonds")) {
            BondFeatures b;
            b.i = bond.at("i").get<std::size_t>();
            b.j = bond.at("j").get<std::size_t>();
            b.dir = bond.at("dir").get<int>();
            b.type = bond.at("type").get<int>();
            b.in_ring = bond.at("in_ring").get<bool>();
            if (b.i > b.j) std::swap(b.i, b.j);
            g.bonds.push_back(b);
        }
        if (j.contains("gap_ev") && !j.at("gap_ev").is_null()) {
            g.gap_ev = j.at("gap_ev").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("molecule record missing or mistyped field: " + std::string(e.what()));
    }
    std::sort(g.bonds.begin(), g.bonds.end(), [](const BondFeatures& a, const BondFeatures& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    g.validate();
    return g;
}

std::string serialize(const MolGraph& g) {
    nlohmann::ordered_json j;
    j["id"] = g.id;
    j["atoms"] = nlohmann::ordered_json::array();
    for (const AtomFeatures& f : g.atoms) {
        nlohmann::ordered_json a;
        a["z"] = f.z;
        a["aromatic"] = f.aromatic;
        a["charge"] = f.charge;
        a["chirality"] = f.chirality;
        a["degree"] = f.degree;
        a["num_h"] = f.num_h;
        a["hybridization"] = f.hybridization;
        j["atoms"].push_back(a);
    }
    j["bonds"] = nlohmann::ordered_json::array();
    for (const BondFeatures& b : g.bonds) {
        nlohmann::ordered_json e;
        e["i"] = b.i;
        e["j"] = b.j;
        e["dir"] = b.dir;
        e["type"] = b.type;
        e["in_ring"] = b.in_ring;
        j["bonds"].push_back(e);
    }
    if (g.gap_ev) {
        j["gap_ev"] = *g.gap_ev;
    } else {
        j["gap_ev"] = nullptr;
    }
    return j.dump();
}

SpdMatrix shortest_paths(const MolGraph& g, int cap) {
    if (cap < 1) throw ContractError("shortest_paths: cap must be >= 1");
    const std::size_t n = g.n_atoms();
    const auto adj = g.adjacency();
    SpdMatrix m;
    m.n = n;
    m.cap = cap;
    m.spd.assign(n * n, SpdMatrix::kUnreachable);
    std::vector<int> dist(n);
    std::deque<std::size_t> queue;
    for (std::size_t src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : adj[u]) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (std::size_t dst = 0; dst < n; ++dst) {
            if (dist[dst] >= 0) m.spd[src * n + dst] = std::min(dist[dst], cap);
        }
    }
    return m;
}

}  // namespace visnet::graph2d
