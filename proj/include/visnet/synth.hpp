#pragma once

#include <string>
#include <vector>

#include "visnet/geom.hpp"
#include "visnet/graph2d.hpp"
#include "visnet/rng.hpp"

namespace visnet::synth {

// Random well-separated conformer: coordinates in a box scaled with N,
// resampled until every pair is at least 0.5 A apart.
geom::Conformer random_conformer(std::size_t n, Rng& rng, const std::string& id = "synth",
                                 geom::Modality modality = geom::Modality::optimized);

struct Sample {
    graph2d::MolGraph graph;
    geom::Conformer conformer;
};

// Random molecule: conformer plus a consistent 2D graph (spanning tree with
// occasional extra edges, valid categorical codes, recomputed degrees).
Sample random_molecule(std::size_t n, Rng& rng, const std::string& id);

double mean_pairwise_distance(const geom::Conformer& c);

// Toy regression corpus; each graph's gap_ev is set to the conformer's
// mean pairwise distance.
std::vector<Sample> toy_dataset(std::size_t count, std::size_t min_atoms,
                                std::size_t max_atoms, Rng& rng);

}  // namespace visnet::synth
