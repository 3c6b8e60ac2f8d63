#pragma once

#include <string>
#include <vector>

#include "fbsdekit/dpp.hpp"
#include "fbsdekit/fbsde.hpp"
#include "fbsdekit/paths.hpp"

#include "json.hpp"

namespace fbsdekit::io {

// All writers emit fixed-format numbers (17 significant digits), so the
// same inputs produce byte-identical files.
std::string format_number(double v);

void write_paths_csv(const std::string& path, const paths::TimeGrid& grid,
                     const std::vector<double>& X, int n, int path_count,
                     const paths::NoiseBatch& noise);

// Per-knot summary of a backward solution evaluated along x(t) = x0:
// knot, time, y, z_0..z_{d-1}, k_slot.
struct KnotRow {
    int knot = 0;
    double time = 0;
    double y = 0;
    std::vector<double> z;
    double k_slot = 0;
};

std::vector<KnotRow> summarize_solution(const fbsde::BackwardSolution& solution,
                                        const fbsde::Basis& basis,
                                        const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy, const double* x0,
                                        model::Control u);
void write_knot_csv(const std::string& path, const std::vector<KnotRow>& rows, int d);

void write_value_field_csv(const std::string& path, const dpp::ValueField& field);
dpp::ValueField read_value_field_csv(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& doc);

}  // namespace fbsdekit::io
