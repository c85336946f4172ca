#pragma once

#include <map>
#include <string>
#include <vector>

#include "visnet/graph2d.hpp"

namespace visnet::ensemble {

struct PredictionSet {
    std::string sample_id;
    std::vector<std::string> member_ids;
    std::vector<double> values;  // eV, one per member
};

// Small molecules are routed past the ensemble to an external predictor;
// here that predictor is an id -> value table.
struct RoutingRule {
    std::size_t min_atoms_threshold = 4;
    std::map<std::string, double> fallback;
};

// Sort ascending, drop floor((m-k)/2) low and ceil((m-k)/2) high values,
// average the middle k.
double trimmed_middle_mean(std::vector<double> values, std::size_t k);

struct RoutedPrediction {
    double gap_ev = 0.0;
    bool used_fallback = false;
};

// Strictly-less-than threshold: a molecule with exactly threshold atoms
// takes the ensemble path.
RoutedPrediction route_and_predict(const graph2d::MolGraph& g, const PredictionSet& preds,
                                   const RoutingRule& rule, std::size_t k);

// CSV `sample_id,member_id,value_ev` (header required) -> per-sample sets,
// members in file order.
std::vector<PredictionSet> parse_predictions_csv(const std::string& text);
// CSV `sample_id,value_ev` (header required).
std::map<std::string, double> parse_fallback_csv(const std::string& text);

struct OutputRow {
    std::string sample_id;
    double gap_ev = 0.0;
    std::string source;  // ensemble | fallback
};

// CSV `sample_id,gap_ev,source`.
std::string output_csv(const std::vector<OutputRow>& rows);

}  // namespace visnet::ensemble
