#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "visnet/errors.hpp"
#include "visnet/io.hpp"
#include "visnet/rng.hpp"
#include "visnet/synth.hpp"

#ifndef VISNET_FIXTURE_DIR
#define VISNET_FIXTURE_DIR "data/fixtures"
#endif
#ifndef VISNET_CLI_PATH
#define VISNET_CLI_PATH "./visnet_cli"
#endif

using namespace visnet;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = VISNET_FIXTURE_DIR;

struct CliRun {
    int exit_code = -1;
    std::string out;
};

CliRun run_cli(const std::string& args, const std::string& tag) {
    const std::string log = "/tmp/visnet_cli_" + tag + ".log";
    const std::string cmd = std::string(VISNET_CLI_PATH) + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(log)) r.out = io::read_file(log);
    return r;
}

std::string fresh_dir(const std::string& name) {
    const std::string dir = "/tmp/visnet_io_" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("element symbols round-trip for the full table") {
    for (int z = 1; z <= 118; ++z) {
        CHECK(io::atomic_number(io::element_symbol(z)) == z);
    }
    CHECK(io::element_symbol(6) == "C");
    CHECK(io::atomic_number("Fe") == 26);
    CHECK_THROWS_AS(io::element_symbol(0), ContractError);
    CHECK_THROWS_AS(io::element_symbol(119), ContractError);
    CHECK_THROWS_AS(io::atomic_number("Xx"), SchemaError);
}

TEST_CASE("fmt_f64 round-trips doubles bitwise") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const double v = rng.gaussian() * std::pow(10.0, rng.uniform(-12.0, 12.0));
        const double back = std::strtod(io::fmt_f64(v).c_str(), nullptr);
        CHECK(back == v);
    }
    CHECK(std::strtod(io::fmt_f64(1.0 / 3.0).c_str(), nullptr) == 1.0 / 3.0);
}

TEST_CASE("xyz round-trips multi-frame content bitwise") {
    Rng rng(5);
    std::vector<geom::Conformer> frames;
    for (int k = 0; k < 3; ++k) {
        geom::Conformer c = synth::random_conformer(3 + rng.below(4), rng,
                                                    "frame-" + std::to_string(k));
        c.modality = k % 2 == 0 ? geom::Modality::optimized : geom::Modality::generated;
        frames.push_back(c);
    }
    const std::string text = io::write_xyz(frames);
    const std::vector<geom::Conformer> back = io::read_xyz(text);
    REQUIRE(back.size() == frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        CHECK(back[k].id == frames[k].id);
        CHECK(back[k].modality == frames[k].modality);
        CHECK(back[k].atomic_numbers == frames[k].atomic_numbers);
        for (std::size_t i = 0; i < frames[k].n_atoms(); ++i)
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK(back[k].positions[i][a] == frames[k].positions[i][a]);
            }
    }
    CHECK(io::write_xyz(back) == text);
}

TEST_CASE("xyz rejects truncation and malformed comments") {
    CHECK_THROWS_AS(io::read_xyz("3\nid=a modality=optimized\nC 0 0 0\nC 1 0 0\n"), SchemaError);
    CHECK_THROWS_AS(io::read_xyz("1\nmodality=optimized\nC 0 0 0\n"), SchemaError);
    CHECK_THROWS_AS(io::read_xyz("1\nid=a modality=liquid\nC 0 0 0\n"), SchemaError);
    CHECK_THROWS_AS(io::read_xyz("1\nid=a modality=optimized\nQq 0 0 0\n"), SchemaError);
    CHECK_THROWS_AS(io::read_xyz("one\nid=a modality=optimized\nC 0 0 0\n"), SchemaError);
}

TEST_CASE("fixture corpus loads and cross-references") {
    const auto mols = io::read_molecules_jsonl(io::read_file(kFixtures + "/molecules.jsonl"));
    REQUIRE(mols.size() == 5);
    CHECK(mols[0].id == "mol-water");
    CHECK(!mols[4].gap_ev.has_value());  // mol-hf

    const auto frames = io::read_xyz(io::read_file(kFixtures + "/conformers.xyz"));
    REQUIRE(frames.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(frames[k].id == mols[k].id);
        CHECK(frames[k].n_atoms() == mols[k].n_atoms());
        for (std::size_t i = 0; i < frames[k].n_atoms(); ++i) {
            CHECK(frames[k].atomic_numbers[i] == mols[k].atoms[i].z);
        }
    }
}

TEST_CASE("molecules jsonl round-trips") {
    Rng rng(7);
    std::vector<graph2d::MolGraph> mols;
    for (int k = 0; k < 4; ++k) {
        mols.push_back(synth::random_molecule(3 + rng.below(5), rng,
                                              "jl-" + std::to_string(k)).graph);
    }
    const std::string text = io::write_molecules_jsonl(mols);
    const auto back = io::read_molecules_jsonl(text);
    REQUIRE(back.size() == 4);
    CHECK(io::write_molecules_jsonl(back) == text);
    CHECK_THROWS_AS(io::read_molecules_jsonl("{not json\n"), SchemaError);
}

TEST_CASE("read_file on a missing path is an IO error") {
    CHECK_THROWS_AS(io::read_file("/tmp/visnet_definitely_missing_9182"), IoError);
}

TEST_CASE("manifest JSON carries the run metadata") {
    io::RunManifest m;
    m.command = "check-equiv";
    m.seed = 42;
    m.inputs = {"a.jsonl", "b.xyz"};
    m.started_at = io::timestamp_utc();
    m.finished_at = io::timestamp_utc();
    const std::string text = io::manifest_json(m);
    CHECK(text.find("\"command\": \"check-equiv\"") != std::string::npos);
    CHECK(text.find("\"seed\": 42") != std::string::npos);
    CHECK(text.find(io::kVersion) != std::string::npos);
    CHECK(m.started_at.size() == std::string("2026-01-01T00:00:00Z").size());
    CHECK(m.started_at.back() == 'Z');
}

TEST_CASE("cli: check-equiv passes on the fixture corpus") {
    const std::string dir = fresh_dir("equiv");
    const CliRun r = run_cli("check-equiv --molecules " + kFixtures +
                                 "/molecules.jsonl --conformers " + kFixtures +
                                 "/conformers.xyz --n-trials 3 --seed 11 --out-dir " + dir,
                             "equiv");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    const std::string report = io::read_file(dir + "/report.txt");
    CHECK(report.find("rgc_angle_rotation_invariance") != std::string::npos);
    CHECK(report.find("prediction_permutation_exactness") != std::string::npos);
    CHECK(fs::exists(dir + "/manifest.json"));
}

TEST_CASE("cli: planted rejection fault is caught and named") {
    const std::string dir = fresh_dir("equiv_broken");
    const CliRun r = run_cli("check-equiv --molecules " + kFixtures +
                                 "/molecules.jsonl --conformers " + kFixtures +
                                 "/conformers.xyz --n-trials 3 --seed 11 --break-rejection "
                                 "--out-dir " + dir,
                             "equiv_broken");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("rejection_orthogonality") != std::string::npos);
    CHECK(r.out.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: usage and io error exit codes") {
    const CliRun usage = run_cli("check-equiv --molecules " + kFixtures +
                                     "/molecules.jsonl --conformers " + kFixtures +
                                     "/conformers.xyz --n-trials 0 --out-dir /tmp",
                                 "usage");
    CHECK(usage.exit_code == 2);

    const CliRun missing = run_cli(
        "check-equiv --molecules /tmp/visnet_no_such.jsonl --conformers " + kFixtures +
            "/conformers.xyz --out-dir /tmp",
        "missing");
    CHECK(missing.exit_code == 3);

    const CliRun unknown = run_cli("frobnicate", "unknown");
    CHECK(unknown.exit_code == 2);
}

TEST_CASE("cli: predict-ensemble reproduces the trimmed mean and routes small molecules") {
    const std::string dir = fresh_dir("ens");
    const std::string args = "predict-ensemble --molecules " + kFixtures +
                             "/molecules.jsonl --preds " + kFixtures +
                             "/ensemble_preds.csv --fallback " + kFixtures +
                             "/fallback.csv --k 10 --threshold 4 --out-dir " + dir;
    const CliRun r = run_cli(args, "ens");
    CHECK(r.exit_code == 0);
    const std::string csv = io::read_file(dir + "/predictions.csv");
    CHECK(csv.find("mol-benzene,11.5,ensemble") != std::string::npos);
    CHECK(csv.find("mol-water,7.4,fallback") != std::string::npos);
    CHECK(csv.find("mol-hf,10.5,fallback") != std::string::npos);

    const std::string dir2 = fresh_dir("ens2");
    const std::string args2 = "predict-ensemble --molecules " + kFixtures +
                              "/molecules.jsonl --preds " + kFixtures +
                              "/ensemble_preds.csv --fallback " + kFixtures +
                              "/fallback.csv --k 10 --threshold 4 --out-dir " + dir2;
    const CliRun r2 = run_cli(args2, "ens2");
    CHECK(r2.exit_code == 0);
    CHECK(io::read_file(dir2 + "/predictions.csv") == csv);
}

TEST_CASE("cli: oracle-diff is deterministic and guards its sizes") {
    const std::string dir = fresh_dir("od1");
    const CliRun a = run_cli("oracle-diff --sizes 4 6 8 --seed 3 --out-dir " + dir, "od1");
    CHECK(a.exit_code == 0);
    const std::string dir2 = fresh_dir("od2");
    const CliRun b = run_cli("oracle-diff --sizes 4 6 8 --seed 3 --out-dir " + dir2, "od2");
    CHECK(b.exit_code == 0);
    CHECK(io::read_file(dir + "/oracle_diff.csv") == io::read_file(dir2 + "/oracle_diff.csv"));

    const CliRun huge = run_cli("oracle-diff --sizes 4 6 32 --out-dir /tmp", "od_huge");
    CHECK(huge.exit_code == 2);
    CHECK(huge.out.find("16") != std::string::npos);  // explains the size limit
}

TEST_CASE("cli: RGC_ATTN_SEED overrides --seed") {
    const std::string d1 = fresh_dir("seed1");
    const std::string d2 = fresh_dir("seed2");
    const std::string d3 = fresh_dir("seed3");
    const std::string base = "oracle-diff --sizes 4 6 8 --out-dir ";
    // Drive through the shell directly so the env var applies to the CLI.
    auto shell = [](const std::string& cmd) { return std::system(cmd.c_str()); };
    CHECK(shell("RGC_ATTN_SEED=99 " + std::string(VISNET_CLI_PATH) + " " + base + d1 +
                " --seed 1 >/dev/null 2>&1") == 0);
    CHECK(shell("RGC_ATTN_SEED=99 " + std::string(VISNET_CLI_PATH) + " " + base + d2 +
                " --seed 2 >/dev/null 2>&1") == 0);
    CHECK(shell(std::string(VISNET_CLI_PATH) + " " + base + d3 + " --seed 2 >/dev/null 2>&1") ==
          0);
    const std::string c1 = io::read_file(d1 + "/oracle_diff.csv");
    const std::string c2 = io::read_file(d2 + "/oracle_diff.csv");
    const std::string c3 = io::read_file(d3 + "/oracle_diff.csv");
    CHECK(c1 == c2);      // env wins over differing --seed
    CHECK(c2 != c3);      // and actually changes the draw
}
