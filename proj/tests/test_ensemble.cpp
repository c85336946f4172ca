#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "visnet/ensemble.hpp"
#include "visnet/errors.hpp"
#include "visnet/rng.hpp"

using namespace visnet;

namespace {

// Direct restatement: sort, slice out the middle k, average.
double sort_slice_mean(std::vector<double> v, std::size_t k) {
    std::sort(v.begin(), v.end());
    const std::size_t low = (v.size() - k) / 2;
    double acc = 0.0;
    for (std::size_t i = low; i < low + k; ++i) acc += v[i];
    return acc / static_cast<double>(k);
}

graph2d::MolGraph carbons(std::size_t n, const std::string& id) {
    graph2d::MolGraph g;
    g.id = id;
    g.atoms.resize(n);
    for (auto& a : g.atoms) a.z = 6;
    return g;
}

}  // namespace

TEST_CASE("values 1..22 with k=10 average to exactly 11.5") {
    std::vector<double> v(22);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(ensemble::trimmed_middle_mean(v, 10) == 11.5);
}

TEST_CASE("k equal to m is the plain mean") {
    const std::vector<double> v{3.0, -1.0, 7.0, 5.0};
    CHECK(ensemble::trimmed_middle_mean(v, 4) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("k=1 with odd m is the median") {
    CHECK(ensemble::trimmed_middle_mean({9.0, 2.0, 5.0}, 1) == 5.0);
}

TEST_CASE("matches the sort-slice oracle on random inputs") {
    Rng rng(67);
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 2 + rng.below(24);
        const std::size_t k = 1 + rng.below(m);
        std::vector<double> v(m);
        for (double& x : v) x = rng.uniform(-50.0, 50.0);
        CHECK(ensemble::trimmed_middle_mean(v, k) ==
              doctest::Approx(sort_slice_mean(v, k)).epsilon(1e-13));
    }
}

TEST_CASE("trimmed mean is permutation-exact and bounded by min/max") {
    Rng rng(71);
    std::vector<double> v(15);
    for (double& x : v) x = rng.uniform(-5.0, 5.0);
    std::vector<double> shuffled = v;
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    }
    const double a = ensemble::trimmed_middle_mean(v, 7);
    CHECK(a == ensemble::trimmed_middle_mean(shuffled, 7));
    CHECK(a >= *std::min_element(v.begin(), v.end()));
    CHECK(a <= *std::max_element(v.begin(), v.end()));
}

TEST_CASE("monotone in the inputs") {
    Rng rng(73);
    std::vector<double> v(12);
    for (double& x : v) x = rng.uniform(0.0, 10.0);
    std::vector<double> raised = v;
    for (double& x : raised) x += 0.5;
    CHECK(ensemble::trimmed_middle_mean(raised, 6) > ensemble::trimmed_middle_mean(v, 6));
}

TEST_CASE("k larger than the member count is rejected") {
    CHECK_THROWS_AS(ensemble::trimmed_middle_mean({1.0, 2.0}, 3), ContractError);
    CHECK_THROWS_AS(ensemble::trimmed_middle_mean({}, 0), ContractError);
}

TEST_CASE("routing: below threshold uses fallback, at threshold uses ensemble") {
    ensemble::PredictionSet preds;
    preds.sample_id = "s";
    for (int i = 1; i <= 12; ++i) {
        preds.member_ids.push_back("m" + std::to_string(i));
        preds.values.push_back(static_cast<double>(i));
    }
    ensemble::RoutingRule rule;
    rule.min_atoms_threshold = 4;
    rule.fallback["s"] = 42.0;

    const auto small = ensemble::route_and_predict(carbons(3, "s"), preds, rule, 10);
    CHECK(small.used_fallback);
    CHECK(small.gap_ev == 42.0);

    const auto at = ensemble::route_and_predict(carbons(4, "s"), preds, rule, 10);
    CHECK(!at.used_fallback);
    CHECK(at.gap_ev == 6.5);

    ensemble::RoutingRule empty;
    empty.min_atoms_threshold = 4;
    CHECK_THROWS_AS(ensemble::route_and_predict(carbons(2, "s"), preds, empty, 10),
                    RoutingError);
}

TEST_CASE("prediction CSV parsing groups by sample and keeps file order") {
    const std::string text =
        "sample_id,member_id,value_ev\n"
        "a,m1,1.5\n"
        "b,m1,3.0\n"
        "a,m2,2.5\n";
    const auto sets = ensemble::parse_predictions_csv(text);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].sample_id == "a");
    CHECK(sets[0].member_ids == std::vector<std::string>{"m1", "m2"});
    CHECK(sets[0].values == std::vector<double>{1.5, 2.5});
    CHECK(sets[1].values == std::vector<double>{3.0});

    CHECK_THROWS_AS(ensemble::parse_predictions_csv("wrong,header,here\n"), SchemaError);
    CHECK_THROWS_AS(ensemble::parse_predictions_csv("sample_id,member_id,value_ev\na,m1\n"),
                    SchemaError);
    CHECK_THROWS_AS(
        ensemble::parse_predictions_csv("sample_id,member_id,value_ev\na,m1,notanumber\n"),
        SchemaError);
}

TEST_CASE("fallback CSV parsing rejects duplicates") {
    const auto table = ensemble::parse_fallback_csv("sample_id,value_ev\nx,1.0\ny,2.0\n");
    CHECK(table.at("x") == 1.0);
    CHECK(table.at("y") == 2.0);
    CHECK_THROWS_AS(ensemble::parse_fallback_csv("sample_id,value_ev\nx,1.0\nx,2.0\n"),
                    SchemaError);
}

TEST_CASE("output CSV format") {
    std::vector<ensemble::OutputRow> rows;
    rows.push_back({"a", 11.5, "ensemble"});
    rows.push_back({"b", 42.0, "fallback"});
    const std::string csv = ensemble::output_csv(rows);
    CHECK(csv.find("sample_id,gap_ev,source\n") == 0);
    CHECK(csv.find("a,11.5,ensemble\n") != std::string::npos);
    CHECK(csv.find("b,42.0,fallback\n") != std::string::npos);
}
