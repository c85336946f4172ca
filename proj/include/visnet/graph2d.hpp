#pragma once

#include <optional>
#include <string>
#include <vector>

namespace visnet::graph2d {

// Categorical vocabularies for the per-atom / per-bond feature codes.
// Hybridization includes SP in addition to the usual five; linear carbons
// occur in PCQM4Mv2-like data and an extra code avoids load failures.
inline constexpr int kMaxFormalCharge = 5;    // charge in [-5, 5]
inline constexpr int kNumChargeCodes = 11;    // code = charge + 5
inline constexpr int kNumChirality = 4;       // unspecified, CW, CCW, other
inline constexpr int kNumHybridization = 6;   // S, SP, SP2, SP3, SP3D, SP3D2
inline constexpr int kNumBondDir = 4;         // none, begin-wedge, begin-dash, other
inline constexpr int kNumBondType = 4;        // single, double, triple, aromatic
inline constexpr int kMaxAtomicNumber = 118;

struct AtomFeatures {
    int z = 1;
    bool aromatic = false;
    int charge = 0;  // formal charge, [-5, 5]
    int chirality = 0;
    int degree = 0;  // must equal the count of incident bonds
    int num_h = 0;
    int hybridization = 0;
};

struct BondFeatures {
    std::size_t i = 0;
    std::size_t j = 0;
    int dir = 0;
    int type = 0;
    bool in_ring = false;
};

// 2D molecular topology with the RDKit-style feature schema.
struct MolGraph {
    std::string id;
    std::vector<AtomFeatures> atoms;
    std::vector<BondFeatures> bonds;
    std::optional<double> gap_ev;  // HOMO-LUMO gap target, eV

    std::size_t n_atoms() const { return atoms.size(); }
    std::vector<std::vector<std::size_t>> adjacency() const;
    // Schema errors name the offending field; degree mismatches are
    // consistency errors.
    void validate() const;
    // perm[k] = original index of the atom that moves to slot k.
    MolGraph permuted(const std::vector<std::size_t>& perm) const;
};

// Hop-count matrix, BFS per source, clipped to cap. Disconnected pairs
// hold kUnreachable.
struct SpdMatrix {
    static constexpr int kUnreachable = -1;
    std::size_t n = 0;
    int cap = 0;
    std::vector<int> spd;  // (N,N) row-major

    int at(std::size_t i, std::size_t j) const { return spd[i * n + j]; }
};

// Parse and validate one molecule record (the JSON-lines object format).
MolGraph load_molgraph(const std::string& json_text);
// Canonical single-line JSON for a graph; load(serialize(g)) == g.
std::string serialize(const MolGraph& g);

SpdMatrix shortest_paths(const MolGraph& g, int cap);

}  // namespace visnet::graph2d
