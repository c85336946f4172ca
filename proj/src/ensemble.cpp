#include "visnet/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "visnet/errors.hpp"

namespace visnet::ensemble {

namespace {

std::string fmt_f64(double v) { return nlohmann::json(v).dump(); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_value(const std::string& s, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("line " + std::to_string(lineno) + ": bad value_ev '" + s + "'");
    }
}

std::vector<std::string> read_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

double trimmed_middle_mean(std::vector<double> values, std::size_t k) {
    const std::size_t m = values.size();
    if (k < 1 || k > m) {
        throw ContractError("trimmed_middle_mean: need 1 <= k <= m, got k=" + std::to_string(k) +
                            " m=" + std::to_string(m));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw ContractError("trimmed_middle_mean: non-finite value");
    }
    std::sort(values.begin(), values.end());
    const std::size_t low = (m - k) / 2;  // upper trim takes the ceil half
    double sum = 0.0;
    for (std::size_t i = low; i < low + k; ++i) sum += values[i];
    return sum / static_cast<double>(k);
}

RoutedPrediction route_and_predict(const graph2d::MolGraph& g, const PredictionSet& preds,
                                   const RoutingRule& rule, std::size_t k) {
    if (rule.min_atoms_threshold < 1) {
        throw ContractError("route_and_predict: threshold must be >= 1");
    }
    RoutedPrediction out;
    if (g.n_atoms() < rule.min_atoms_threshold) {
        const auto it = rule.fallback.find(g.id);
        if (it == rule.fallback.end()) {
            throw RoutingError("no fallback entry for small molecule '" + g.id + "'");
        }
        out.gap_ev = it->second;
        out.used_fallback = true;
        return out;
    }
    out.gap_ev = trimmed_middle_mean(preds.values, k);
    return out;
}

std::vector<PredictionSet> parse_predictions_csv(const std::string& text) {
    const std::vector<std::string> lines = read_lines(text);
    if (lines.empty() || lines[0] != "sample_id,member_id,value_ev") {
        throw SchemaError("predictions CSV must start with 'sample_id,member_id,value_ev'");
    }
    std::vector<PredictionSet> sets;
    std::map<std::string, std::size_t> index;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 3) {
            throw SchemaError("line " + std::to_string(ln + 1) + ": expected 3 fields");
        }
        const auto [it, inserted] = index.try_emplace(fields[0], sets.size());
        if (inserted) {
            PredictionSet s;
            s.sample_id = fields[0];
            sets.push_back(std::move(s));
        }
        PredictionSet& s = sets[it->second];
        s.member_ids.push_back(fields[1]);
        s.values.push_back(parse_value(fields[2], ln + 1));
    }
    return sets;
}

std::map<std::string, double> parse_fallback_csv(const std::string& text) {
    const std::vector<std::string> lines = read_lines(text);
    if (lines.empty() || lines[0] != "sample_id,value_ev") {
        throw SchemaError("fallback CSV must start with 'sample_id,value_ev'");
    }
    std::map<std::string, double> table;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 2) {
            throw SchemaError("line " + std::to_string(ln + 1) + ": expected 2 fields");
        }
        if (!table.emplace(fields[0], parse_value(fields[1], ln + 1)).second) {
            throw SchemaError("line " + std::to_string(ln + 1) + ": duplicate sample_id '" +
                              fields[0] + "'");
        }
    }
    return table;
}

std::string output_csv(const std::vector<OutputRow>& rows) {
    std::ostringstream out;
    out << "sample_id,gap_ev,source\n";
    for (const OutputRow& r : rows) {
        out << r.sample_id << "," << fmt_f64(r.gap_ev) << "," << r.source << "\n";
    }
    return out.str();
}

}  // namespace visnet::ensemble
