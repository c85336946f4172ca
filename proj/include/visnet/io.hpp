#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visnet/geom.hpp"
#include "visnet/graph2d.hpp"

namespace visnet::io {

inline constexpr const char* kVersion = "visnet-rgc 0.1.0";

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Shortest decimal representation that parses back to the same bits.
std::string fmt_f64(double v);

std::string element_symbol(int z);
int atomic_number(const std::string& symbol);

// Extended XYZ, possibly multi-frame: count line, comment line of the form
// `id=<id> modality=<optimized|generated>`, then `symbol x y z` rows (A).
std::vector<geom::Conformer> read_xyz(const std::string& text);
std::string write_xyz(const std::vector<geom::Conformer>& frames);

// One molecule JSON object per line.
std::vector<graph2d::MolGraph> read_molecules_jsonl(const std::string& text);
std::string write_molecules_jsonl(const std::vector<graph2d::MolGraph>& mols);

struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::string version = kVersion;
    std::string started_at;
    std::string finished_at;
};

std::string manifest_json(const RunManifest& m);
std::string timestamp_utc();

}  // namespace visnet::io
