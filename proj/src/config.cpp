#include "fbsdekit/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fbsdekit::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
    ConfigMap out;
    out.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        out.values_[full] = value;
    }
    return out;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
    return v;
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
    return v;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + s + "'");
}

std::vector<double> ConfigMap::get_list(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw ConfigError("key '" + key + "': list entry '" + tok + "' is not a number");
        out.push_back(v);
    }
    return out;
}

RunConfig load_run_config(const ConfigMap& m) {
    RunConfig c;
    c.model_id = m.get_string("run.model", "");
    if (m.has("run.seed")) {
        long long s = m.get_int("run.seed", 0);
        if (s < 0) throw ConfigError("key 'run.seed': must be non-negative");
        c.seed = static_cast<std::uint64_t>(s);
        c.seed_set = true;
    }
    c.path_count = static_cast<int>(m.get_int("run.paths", c.path_count));
    c.out_dir = m.get_string("run.out", c.out_dir);
    if (m.has("run.x0")) {
        c.x0 = m.get_double("run.x0", c.x0);
        c.x0_set = true;
    }

    if (m.has("grid.T")) {
        c.T = m.get_double("grid.T", c.T);
        c.T_set = true;
    }
    c.t0 = m.get_double("grid.t0", c.t0);
    c.fine_steps = static_cast<int>(m.get_int("grid.fine_steps", c.fine_steps));
    c.dpp_steps = static_cast<int>(m.get_int("grid.dpp_steps", c.dpp_steps));
    c.fine_steps_per_dpp = static_cast<int>(m.get_int("grid.fine_steps_per_dpp", c.fine_steps_per_dpp));
    c.state_lo = m.get_double("grid.state_lo", c.state_lo);
    c.state_hi = m.get_double("grid.state_hi", c.state_hi);
    c.state_nodes = static_cast<int>(m.get_int("grid.state_nodes", c.state_nodes));
    c.pide_nodes = static_cast<int>(m.get_int("grid.pide_nodes", c.pide_nodes));
    c.pide_pad = m.get_double("grid.pide_pad", c.pide_pad);
    c.pide_steps = static_cast<int>(m.get_int("grid.pide_steps", c.pide_steps));

    c.basis_kind = m.get_string("solver.basis", c.basis_kind);
    c.basis_degree = static_cast<int>(m.get_int("solver.basis_degree", c.basis_degree));
    c.basis_cells = static_cast<int>(m.get_int("solver.basis_cells", c.basis_cells));
    c.picard_tol = m.get_double("solver.picard_tol", c.picard_tol);
    c.picard_iters = static_cast<int>(m.get_int("solver.picard_iters", c.picard_iters));
    c.delta_max = m.get_double("solver.delta_max", c.delta_max);
    c.halving_limit = static_cast<int>(m.get_int("solver.halving_limit", c.halving_limit));
    c.alt_k_estimator = m.get_bool("solver.alt_k_estimator", c.alt_k_estimator);

    c.intensity_override = m.get_double("levy.intensity", c.intensity_override);

    c.tol_dpp = m.get_double("tolerances.dpp", c.tol_dpp);
    c.tol_visc = m.get_double("tolerances.viscosity", c.tol_visc);
    c.cross_tol = m.get_double("tolerances.cross", c.cross_tol);

    if (c.path_count <= 0) throw ConfigError("key 'run.paths': must be positive");
    if (c.fine_steps <= 0) throw ConfigError("key 'grid.fine_steps': must be positive");
    if (c.dpp_steps <= 0) throw ConfigError("key 'grid.dpp_steps': must be positive");
    if (c.state_nodes < 2) throw ConfigError("key 'grid.state_nodes': need at least 2 nodes");
    if (c.pide_nodes < 5) throw ConfigError("key 'grid.pide_nodes': need at least 5 nodes");
    if (c.T_set && c.T <= c.t0) throw ConfigError("key 'grid.T': horizon must exceed t0");
    if (c.basis_kind != "polynomial" && c.basis_kind != "local_affine")
        throw ConfigError("key 'solver.basis': expected polynomial or local_affine, got '" + c.basis_kind + "'");
    if (c.picard_tol <= 0) throw ConfigError("key 'solver.picard_tol': must be positive");
    if (c.delta_max <= 0) throw ConfigError("key 'solver.delta_max': must be positive");
    return c;
}

RunConfig load_run_config_file(const std::string& path) {
    return load_run_config(ConfigMap::parse_file(path));
}

}  // namespace fbsdekit::config
