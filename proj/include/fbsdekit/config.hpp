#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbsdekit::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key/value configuration with [section] headers; keys are addressed
// as "section.key". Values are plain text, numbers or comma-separated
// number lists.
class ConfigMap {
  public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

  private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

// Resolved run parameters: preset id, grids, solver knobs, tolerances.
struct RunConfig {
    std::string model_id;
    std::uint64_t seed = 0;
    bool seed_set = false;  // reproducibility is mandatory; no entropy default
    int path_count = 20000;
    std::string out_dir = "out";
    double x0 = 1.0;
    bool x0_set = false;

    double t0 = 0.0, T = 1.0;
    bool T_set = false;
    int fine_steps = 64;

    int dpp_steps = 8;
    int fine_steps_per_dpp = 4;
    double state_lo = -2.0, state_hi = 2.0;
    int state_nodes = 21;

    int pide_nodes = 121;
    double pide_pad = 1.8;  // box widening beyond the reporting region
    int pide_steps = 0;     // 0: choose from the CFL bound

    std::string basis_kind = "polynomial";
    int basis_degree = 2;
    int basis_cells = 8;
    double picard_tol = 1e-4;
    int picard_iters = 25;
    double delta_max = 0.25;
    int halving_limit = 6;
    bool alt_k_estimator = false;

    double intensity_override = -1.0;  // <0: keep the preset's jump intensity

    double tol_dpp = 0.05;
    double tol_visc = 0.05;
    double cross_tol = 0.07;
};

// Reads [run]/[grid]/[solver]/[levy]/[tolerances] sections; throws
// ConfigError with the offending key on malformed input.
RunConfig load_run_config(const ConfigMap& map);
RunConfig load_run_config_file(const std::string& path);

}  // namespace fbsdekit::config
