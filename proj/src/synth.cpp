#include "visnet/synth.hpp"

#include <algorithm>
#include <cmath>

#include "visnet/errors.hpp"

namespace visnet::synth {

namespace {

constexpr int kElements[] = {1, 6, 7, 8, 9};

}  // namespace

geom::Conformer random_conformer(std::size_t n, Rng& rng, const std::string& id,
                                 geom::Modality modality) {
    if (n < 1) throw ContractError("random_conformer: n must be >= 1");
    geom::Conformer c;
    c.id = id;
    c.modality = modality;
    const double box = 2.5 * std::cbrt(static_cast<double>(n)) + 1.0;
    while (c.positions.size() < n) {
        const geom::Vec3 p{rng.uniform(0.0, box), rng.uniform(0.0, box), rng.uniform(0.0, box)};
        bool ok = true;
        for (const geom::Vec3& q : c.positions) {
            const geom::Vec3 d{p[0] - q[0], p[1] - q[1], p[2] - q[2]};
            if (geom::norm(d) < 0.5) {
                ok = false;
                break;
            }
        }
        if (ok) {
            c.positions.push_back(p);
            c.atomic_numbers.push_back(kElements[rng.below(5)]);
        }
    }
    c.validate();
    return c;
}

Sample random_molecule(std::size_t n, Rng& rng, const std::string& id) {
    Sample s;
    s.conformer = random_conformer(n, rng, id);
    graph2d::MolGraph& g = s.graph;
    g.id = id;
    for (std::size_t a = 0; a < n; ++a) {
        graph2d::AtomFeatures f;
        f.z = s.conformer.atomic_numbers[a];
        f.aromatic = rng.below(4) == 0;
        f.charge = static_cast<int>(rng.below(3)) - 1;
        f.chirality = static_cast<int>(rng.below(graph2d::kNumChirality));
        f.num_h = static_cast<int>(rng.below(4));
        f.hybridization = static_cast<int>(rng.below(graph2d::kNumHybridization));
        g.atoms.push_back(f);
    }
    // Spanning tree keeps the graph connected; a few chords add rings.
    for (std::size_t j = 1; j < n; ++j) {
        graph2d::BondFeatures b;
        b.i = rng.below(j);
        b.j = j;
        b.dir = static_cast<int>(rng.below(graph2d::kNumBondDir));
        b.type = static_cast<int>(rng.below(graph2d::kNumBondType));
        b.in_ring = false;
        g.bonds.push_back(b);
    }
    if (n >= 4 && rng.below(2) == 0) {
        // One extra edge between non-adjacent tree nodes, if the draw is new.
        const std::size_t i = rng.below(n);
        const std::size_t j = rng.below(n);
        if (i != j) {
            const auto lo = std::min(i, j);
            const auto hi = std::max(i, j);
            bool exists = false;
            for (const auto& b : g.bonds) exists |= (b.i == lo && b.j == hi);
            if (!exists) {
                graph2d::BondFeatures b;
                b.i = lo;
                b.j = hi;
                b.dir = 0;
                b.type = 0;
                b.in_ring = true;
                g.bonds.push_back(b);
            }
        }
    }
    std::vector<int> degree(n, 0);
    for (const auto& b : g.bonds) {
        ++degree[b.i];
        ++degree[b.j];
    }
    for (std::size_t a = 0; a < n; ++a) g.atoms[a].degree = degree[a];
    std::sort(g.bonds.begin(), g.bonds.end(),
              [](const graph2d::BondFeatures& a, const graph2d::BondFeatures& b) {
                  return a.i != b.i ? a.i < b.i : a.j < b.j;
              });
    g.validate();
    return s;
}

double mean_pairwise_distance(const geom::Conformer& c) {
    const std::size_t n = c.n_atoms();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const geom::Vec3 d{c.positions[j][0] - c.positions[i][0],
                               c.positions[j][1] - c.positions[i][1],
                               c.positions[j][2] - c.positions[i][2]};
            sum += geom::norm(d);
        }
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::vector<Sample> toy_dataset(std::size_t count, std::size_t min_atoms,
                                std::size_t max_atoms, Rng& rng) {
    if (min_atoms < 2 || max_atoms < min_atoms) {
        throw ContractError("toy_dataset: need 2 <= min_atoms <= max_atoms");
    }
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t n = min_atoms + rng.below(max_atoms - min_atoms + 1);
        Sample s = random_molecule(n, rng, "toy-" + std::to_string(k));
        s.graph.gap_ev = mean_pairwise_distance(s.conformer);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace visnet::synth
