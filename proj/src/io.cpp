#include "visnet/io.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "visnet/errors.hpp"

namespace visnet::io {

namespace {

constexpr const char* kSymbols[] = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
constexpr int kNumSymbols = static_cast<int>(sizeof(kSymbols) / sizeof(kSymbols[0]));

double parse_coord(const std::string& s, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("xyz line " + std::to_string(lineno) + ": bad coordinate '" + s + "'");
    }
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed for '" + path + "'");
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string fmt_f64(double v) { return nlohmann::json(v).dump(); }

std::string element_symbol(int z) {
    if (z < 1 || z > kNumSymbols) {
        throw ContractError("element_symbol: atomic number " + std::to_string(z) +
                            " out of range");
    }
    return kSymbols[z - 1];
}

int atomic_number(const std::string& symbol) {
    static const std::map<std::string, int> lookup = [] {
        std::map<std::string, int> m;
        for (int z = 1; z <= kNumSymbols; ++z) m[kSymbols[z - 1]] = z;
        return m;
    }();
    const auto it = lookup.find(symbol);
    if (it == lookup.end()) throw SchemaError("unknown element symbol '" + symbol + "'");
    return it->second;
}

std::vector<geom::Conformer> read_xyz(const std::string& text) {
    std::istringstream in(text);
    std::vector<geom::Conformer> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t n = 0;
        try {
            n = std::stoul(line);
        } catch (const std::exception&) {
            throw SchemaError("xyz line " + std::to_string(lineno) + ": expected atom count, got '" +
                              line + "'");
        }
        if (n < 1) throw SchemaError("xyz line " + std::to_string(lineno) + ": atom count 0");

        if (!std::getline(in, line)) {
            throw SchemaError("xyz: truncated frame (missing comment line)");
        }
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        geom::Conformer c;
        std::istringstream comment(line);
        std::string tok;
        while (comment >> tok) {
            const std::size_t eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "id") {
                c.id = val;
            } else if (key == "modality") {
                c.modality = geom::modality_from_name(val);
            }
        }
        if (c.id.empty()) {
            throw SchemaError("xyz line " + std::to_string(lineno) + ": comment lacks id=<id>");
        }

        for (std::size_t a = 0; a < n; ++a) {
            if (!std::getline(in, line)) {
                throw SchemaError("xyz: truncated frame '" + c.id + "'");
            }
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream row(line);
            std::string sym, xs, ys, zs;
            if (!(row >> sym >> xs >> ys >> zs)) {
                throw SchemaError("xyz line " + std::to_string(lineno) + ": expected 'symbol x y z'");
            }
            c.atomic_numbers.push_back(atomic_number(sym));
            c.positions.push_back({parse_coord(xs, lineno), parse_coord(ys, lineno),
                                   parse_coord(zs, lineno)});
        }
        c.validate();
        frames.push_back(std::move(c));
    }
    return frames;
}

std::string write_xyz(const std::vector<geom::Conformer>& frames) {
    std::ostringstream out;
    for (const geom::Conformer& c : frames) {
        out << c.n_atoms() << "\n";
        out << "id=" << c.id << " modality=" << geom::modality_name(c.modality) << "\n";
        for (std::size_t a = 0; a < c.n_atoms(); ++a) {
            out << element_symbol(c.atomic_numbers[a]) << " " << fmt_f64(c.positions[a][0]) << " "
                << fmt_f64(c.positions[a][1]) << " " << fmt_f64(c.positions[a][2]) << "\n";
        }
    }
    return out.str();
}

std::vector<graph2d::MolGraph> read_molecules_jsonl(const std::string& text) {
    std::vector<graph2d::MolGraph> mols;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            mols.push_back(graph2d::load_molgraph(line));
        } catch (const SchemaError& e) {
            throw SchemaError("molecules line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return mols;
}

std::string write_molecules_jsonl(const std::vector<graph2d::MolGraph>& mols) {
    std::ostringstream out;
    for (const graph2d::MolGraph& g : mols) out << graph2d::serialize(g) << "\n";
    return out.str();
}

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["config_path"] = m.config_path;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["version"] = m.version;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    return j.dump(2) + "\n";
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

}  // namespace visnet::io
