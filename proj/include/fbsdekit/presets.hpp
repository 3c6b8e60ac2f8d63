#pragma once

#include <string>
#include <vector>

#include "fbsdekit/model.hpp"

namespace fbsdekit::presets {

// A fully specified problem instance: model, jump law, admissible controls
// and the certificate the model is expected to satisfy.
struct Preset {
    std::string id;
    model::CoefficientSet coeffs;
    model::LevyMeasure levy;
    model::ControlGrid controls;
    double default_T = 1.0;
    double default_x0 = 1.0;
    std::string description;
};

// Registered instances: zero, drifted-linear, pure-jump, coupled-linear,
// controlled-drift, controlled-drift-jump, heat.
const Preset& get(const std::string& id);
std::vector<std::string> list_ids();
bool has(const std::string& id);

// Compile-in registration hook for user models.
void register_preset(Preset preset);

}  // namespace fbsdekit::presets
