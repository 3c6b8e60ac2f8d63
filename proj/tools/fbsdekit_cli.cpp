// fbsdekit command-line front end.
//
// Subcommands: simulate, solve-fbsde, value-dpp, solve-pide, verify, compare.
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 verification/cross-check failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbsdekit/config.hpp"
#include "fbsdekit/dpp.hpp"
#include "fbsdekit/fbsde.hpp"
#include "fbsdekit/io.hpp"
#include "fbsdekit/kernels.hpp"
#include "fbsdekit/model.hpp"
#include "fbsdekit/paths.hpp"
#include "fbsdekit/pide.hpp"
#include "fbsdekit/presets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fbsdekit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::string model_id;
    long long seed = -1;
    int paths = -1;
};

config::RunConfig resolve_config(const CliOverrides& cli) {
    config::RunConfig cfg;
    if (!cli.config_path.empty()) cfg = config::load_run_config_file(cli.config_path);
    if (!cli.model_id.empty()) cfg.model_id = cli.model_id;
    if (!cli.out_dir.empty()) cfg.out_dir = cli.out_dir;
    if (cli.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(cli.seed);
        cfg.seed_set = true;
    }
    if (cli.paths > 0) cfg.path_count = cli.paths;

    if (cfg.model_id.empty())
        throw config::ConfigError("no model selected: pass --model or set run.model in the config");
    if (!presets::has(cfg.model_id)) {
        std::string known;
        for (const auto& id : presets::list_ids()) known += " " + id;
        throw config::ConfigError("unknown model '" + cfg.model_id + "'; available:" + known);
    }
    if (!cfg.seed_set)
        throw config::ConfigError("no seed given: pass --seed or set run.seed (runs must be reproducible)");

    const auto& preset = presets::get(cfg.model_id);
    if (!cfg.T_set) cfg.T = preset.default_T;
    if (!cfg.x0_set) cfg.x0 = preset.default_x0;
    if (cfg.T <= cfg.t0) throw config::ConfigError("horizon T must exceed t0");
    return cfg;
}

// Preset with the configured jump-intensity override applied.
presets::Preset materialize(const config::RunConfig& cfg) {
    presets::Preset p = presets::get(cfg.model_id);
    if (cfg.intensity_override >= 0) {
        if (p.levy.total_intensity <= 0)
            throw config::ConfigError("levy.intensity override needs a model with jumps");
        const double factor = cfg.intensity_override / p.levy.total_intensity;
        for (auto& node : p.levy.quad_nodes) node.weight *= factor;
        p.levy.total_intensity = cfg.intensity_override;
    }
    return p;
}

fbsde::Basis make_basis(const config::RunConfig& cfg, int n) {
    fbsde::Box box;
    box.lo.assign(n, cfg.state_lo - cfg.pide_pad);
    box.hi.assign(n, cfg.state_hi + cfg.pide_pad);
    if (cfg.basis_kind == "local_affine")
        return fbsde::Basis::local_affine(n, cfg.basis_cells, box);
    return fbsde::Basis::polynomial(n, cfg.basis_degree, box);
}

fbsde::PicardConfig make_picard(const config::RunConfig& cfg) {
    fbsde::PicardConfig pc;
    pc.max_iters = cfg.picard_iters;
    pc.tol = cfg.picard_tol;
    pc.delta_max = cfg.delta_max;
    pc.halving_limit = cfg.halving_limit;
    pc.alt_k_estimator = cfg.alt_k_estimator;
    return pc;
}

json base_meta(const char* command, const config::RunConfig& cfg) {
    json j;
    j["command"] = command;
    j["model"] = cfg.model_id;
    j["seed"] = cfg.seed;
    j["paths"] = cfg.path_count;
    j["t0"] = cfg.t0;
    j["T"] = cfg.T;
    j["x0"] = cfg.x0;
    j["kernel_backend"] = kernels::active_backend().name;
    return j;
}

void prepare_out(const config::RunConfig& cfg) { fs::create_directories(cfg.out_dir); }

std::vector<double> x0_vector(const config::RunConfig& cfg, int n) {
    return std::vector<double>(n, cfg.x0);
}

int cmd_simulate(const config::RunConfig& cfg) {
    const auto preset = materialize(cfg);
    const auto& C = preset.coeffs;
    auto grid = paths::TimeGrid::uniform(cfg.t0, cfg.T, cfg.fine_steps);
    auto noise = paths::sample_noise(grid, preset.levy, C.d, cfg.path_count, cfg.seed);
    auto x0 = x0_vector(cfg, C.n);
    auto X = paths::euler_forward(C, preset.levy, grid, noise,
                                  x0.data(), paths::constant_policy(preset.controls.points.front()),
                                  paths::zero_feedback(C.d));
    prepare_out(cfg);
    io::write_paths_csv(cfg.out_dir + "/paths.csv", grid, X, C.n, cfg.path_count, noise);
    json meta = base_meta("simulate", cfg);
    meta["fine_steps"] = cfg.fine_steps;
    meta["control"] = preset.controls.points.front();
    io::write_json(cfg.out_dir + "/meta.json", meta);
    std::cout << "simulate: " << cfg.path_count << " paths x " << cfg.fine_steps
              << " steps -> " << cfg.out_dir << "/paths.csv\n";
    return 0;
}

int cmd_solve_fbsde(const config::RunConfig& cfg) {
    const auto preset = materialize(cfg);
    const auto& C = preset.coeffs;
    auto grid = paths::TimeGrid::uniform(cfg.t0, cfg.T, cfg.fine_steps);
    auto basis = make_basis(cfg, C.n);
    auto x0 = x0_vector(cfg, C.n);
    const model::Control u = preset.controls.points.front();
    auto res = fbsde::solve_fbsde_coupled(C, preset.levy, grid, x0.data(),
                                          paths::constant_policy(u), basis, make_picard(cfg),
                                          cfg.path_count, cfg.seed);
    prepare_out(cfg);
    auto rows = io::summarize_solution(res.solution, basis, C, preset.levy, x0.data(), u);
    io::write_knot_csv(cfg.out_dir + "/knots.csv", rows, C.d);
    json meta = base_meta("solve-fbsde", cfg);
    meta["y0"] = res.y0;
    meta["halvings"] = res.halvings;
    meta["ridge_fallbacks"] = res.ridge_fallbacks;
    json segs = json::array();
    for (const auto& dgn : res.diagnostics)
        segs.push_back({{"k_start", dgn.k_start},
                        {"k_end", dgn.k_end},
                        {"iterations", dgn.iterations},
                        {"gaps", dgn.gaps}});
    meta["subintervals"] = segs;
    io::write_json(cfg.out_dir + "/meta.json", meta);
    std::cout << "solve-fbsde: y0 = " << io::format_number(res.y0) << " (halvings "
              << res.halvings << ") -> " << cfg.out_dir << "/knots.csv\n";
    return 0;
}

std::vector<double> dpp_times(const config::RunConfig& cfg) {
    std::vector<double> t(cfg.dpp_steps + 1);
    for (int k = 0; k <= cfg.dpp_steps; ++k)
        t[k] = cfg.t0 + (cfg.T - cfg.t0) * k / cfg.dpp_steps;
    return t;
}

int cmd_value_dpp(const config::RunConfig& cfg) {
    const auto preset = materialize(cfg);
    const auto& C = preset.coeffs;
    if (C.n != 1)
        throw config::ConfigError("value-dpp state grids are one-dimensional; model has n=" +
                                  std::to_string(C.n));
    dpp::DppConfig dc;
    dc.fine_steps_per_dpp = cfg.fine_steps_per_dpp;
    dc.basis_degree = cfg.basis_degree;
    dc.picard = make_picard(cfg);
    dc.path_count = cfg.path_count;
    dc.seed = cfg.seed;
    auto grid = dpp::RectGrid::uniform_1d(cfg.state_lo, cfg.state_hi, cfg.state_nodes);
    auto result = dpp::compute_value_function(C, preset.levy, preset.controls, dpp_times(cfg),
                                              grid, dc);
    prepare_out(cfg);
    io::write_value_field_csv(cfg.out_dir + "/value_dpp.csv", result.field);
    json meta = base_meta("value-dpp", cfg);
    meta["dpp_steps"] = cfg.dpp_steps;
    meta["fine_steps_per_dpp"] = cfg.fine_steps_per_dpp;
    meta["state_nodes"] = cfg.state_nodes;
    meta["extrapolation_queries"] = result.extrapolation_queries;
    io::write_json(cfg.out_dir + "/meta.json", meta);
    std::cout << "value-dpp: " << cfg.dpp_steps << " DPP steps on " << cfg.state_nodes
              << " nodes -> " << cfg.out_dir << "/value_dpp.csv\n";
    return 0;
}

pide::PideGrid make_pide_grid(const config::RunConfig& cfg, const presets::Preset& preset) {
    auto space = dpp::RectGrid::uniform_1d(cfg.state_lo - cfg.pide_pad, cfg.state_hi + cfg.pide_pad,
                                           cfg.pide_nodes);
    if (cfg.pide_steps > 0)
        return pide::PideGrid::make(cfg.t0, cfg.T, cfg.pide_steps, space, preset.coeffs,
                                    preset.levy, preset.controls);
    // auto-select: double until the CFL validation accepts the step count
    for (int steps = 8; steps <= (1 << 24); steps *= 2) {
        try {
            return pide::PideGrid::make(cfg.t0, cfg.T, steps, space, preset.coeffs, preset.levy,
                                        preset.controls);
        } catch (const std::invalid_argument&) {
        }
    }
    throw config::ConfigError("could not satisfy the CFL bound; refine grid.pide_nodes instead");
}

int cmd_solve_pide(const config::RunConfig& cfg) {
    const auto preset = materialize(cfg);
    if (preset.coeffs.n != 1)
        throw config::ConfigError("solve-pide grids are one-dimensional; model has n=" +
                                  std::to_string(preset.coeffs.n));
    auto grid = make_pide_grid(cfg, preset);
    auto field = pide::solve_pide(preset.coeffs, preset.levy, preset.controls, grid);
    prepare_out(cfg);
    io::write_value_field_csv(cfg.out_dir + "/value_pide.csv", field);
    json meta = base_meta("solve-pide", cfg);
    meta["pide_steps"] = grid.n_steps;
    meta["pide_nodes"] = cfg.pide_nodes;
    meta["dt"] = grid.dt();
    io::write_json(cfg.out_dir + "/meta.json", meta);
    std::cout << "solve-pide: " << grid.n_steps << " steps x " << cfg.pide_nodes << " nodes -> "
              << cfg.out_dir << "/value_pide.csv\n";
    return 0;
}

struct VerifyLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

int cmd_verify(const config::RunConfig& cfg) {
    const auto preset = materialize(cfg);
    const auto& C = preset.coeffs;
    std::vector<VerifyLine> lines;
    auto add = [&lines](const std::string& name, bool pass, const std::string& detail) {
        lines.push_back({name, pass, detail});
    };

    auto box = model::SampleBox::cube(C.n, 2.0);
    auto lip = model::check_lipschitz(C, preset.controls, preset.levy, box, 2000, cfg.seed);
    add("lipschitz", lip.pass, "worst ratio " + io::format_number(lip.worst));
    auto comp = model::check_comparison_condition(C, preset.controls, box, 2000, cfg.seed + 1);
    add("comparison-condition", comp.pass, "worst margin " + io::format_number(comp.worst));

    // checker self-test on a reference monotone instance: f = x, phi = x,
    // everything else zero, certificate (G=1, beta1=1, beta2=0, mu1=1)
    {
        model::CoefficientSet ref;
        ref.n = ref.d = 1;
        ref.b = [](double, const double*, double, const double*, double, model::Control,
                   double* out) { out[0] = 0; };
        ref.sigma = [](double, const double*, double, model::Control, double* out) { out[0] = 0; };
        ref.g = [](double, const double*, double, const double*, model::Control, double* out) {
            out[0] = 0;
        };
        ref.f = [](double, const double* x, double, const double*, double, model::Control) {
            return x[0];
        };
        ref.phi = [](const double* x) { return x[0]; };
        ref.lip = {0, 0, 0, 1, 1};
        model::MonotonicityCertificate cert;
        cert.G = Eigen::RowVectorXd::Ones(1);
        cert.beta1 = 1;
        cert.beta2 = 0;
        cert.mu1 = 1;
        auto mono = model::check_monotonicity(ref, cert, model::LevyMeasure::none(),
                                              model::ControlGrid::singleton(), box, 2000,
                                              cfg.seed + 2);
        auto bad = ref;
        bad.f = [](double, const double* x, double, const double*, double, model::Control) {
            return -x[0];
        };
        auto mono_bad = model::check_monotonicity(bad, cert, model::LevyMeasure::none(),
                                                  model::ControlGrid::singleton(), box, 2000,
                                                  cfg.seed + 2);
        add("monotonicity-checker", mono.pass && !mono_bad.pass,
            "reference slack " + io::format_number(mono.worst) + ", flipped-sign slack " +
                io::format_number(mono_bad.worst));
    }

    // driving-noise moments and determinism
    {
        auto grid = paths::TimeGrid::uniform(cfg.t0, cfg.T, 32);
        const int P = std::min(cfg.path_count, 20000);
        auto noise = paths::sample_noise(grid, preset.levy, C.d, P, cfg.seed + 3);
        double mean = 0, var = 0;
        const std::size_t count = noise.dB.size();
        for (double v : noise.dB) mean += v;
        mean /= double(count);
        for (double v : noise.dB) var += (v - mean) * (v - mean);
        var /= double(count - 1);
        const double se = std::sqrt(grid.dt / double(count));
        bool ok = std::abs(mean) <= 5 * se && std::abs(var - grid.dt) <= 5 * grid.dt * std::sqrt(2.0 / double(count - 1));
        add("brownian-moments", ok,
            "mean " + io::format_number(mean) + ", var " + io::format_number(var) + " (dt " +
                io::format_number(grid.dt) + ")");

        double jumps = 0;
        for (const auto& evs : noise.jumps) jumps += double(evs.size());
        jumps /= double(P);
        const double lam_T = preset.levy.total_intensity * (cfg.T - cfg.t0);
        bool jok = preset.levy.total_intensity == 0
                       ? jumps == 0
                       : std::abs(jumps - lam_T) <= 5 * std::sqrt(lam_T / double(P));
        add("jump-count-mean", jok, "mean " + io::format_number(jumps) + ", expected " +
                                        io::format_number(lam_T));

        auto noise2 = paths::sample_noise(grid, preset.levy, C.d, P, cfg.seed + 3);
        bool same = noise.dB == noise2.dB && noise.jumps.size() == noise2.jumps.size();
        for (std::size_t p = 0; same && p < noise.jumps.size(); ++p) {
            same = noise.jumps[p].size() == noise2.jumps[p].size();
            for (std::size_t i = 0; same && i < noise.jumps[p].size(); ++i)
                same = noise.jumps[p][i].time == noise2.jumps[p][i].time &&
                       noise.jumps[p][i].mark == noise2.jumps[p][i].mark;
        }
        add("noise-determinism", same, same ? "bitwise identical resample" : "resample differs");
    }

    // SIMD/scalar kernel agreement on a random vector
    {
        const auto& scalar = kernels::scalar_backend();
        const auto& active = kernels::active_backend();
        rng::CounterRng r(cfg.seed + 4, 0, std::uint64_t(rng::Stream::kChecker), 0);
        std::vector<double> a(1537), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = r.next_normal();
            b[i] = r.next_normal();
        }
        double ds = scalar.dot(a.data(), b.data(), a.size());
        double da = active.dot(a.data(), b.data(), a.size());
        bool ok = std::abs(ds - da) <= 1e-10 * (1.0 + std::abs(ds));
        add(std::string("kernel-dispatch[") + active.name + "]", ok,
            "dot gap " + io::format_number(std::abs(ds - da)));
    }

    bool all = true;
    json report = base_meta("verify", cfg);
    json checks = json::array();
    for (const auto& line : lines) {
        all = all && line.pass;
        std::cout << (line.pass ? "PASS" : "FAIL") << "  " << line.name << "  (" << line.detail
                  << ")\n";
        checks.push_back({{"name", line.name}, {"pass", line.pass}, {"detail", line.detail}});
    }
    report["checks"] = checks;
    report["pass"] = all;
    prepare_out(cfg);
    io::write_json(cfg.out_dir + "/verify.json", report);
    return all ? 0 : kExitVerify;
}

// Field value at an off-knot time by linear blending of the bracketing slices.
double eval_field(const dpp::ValueField& field, double t, const double* x) {
    const auto& times = field.times;
    if (t <= times.front()) return field.interp(0, x);
    if (t >= times.back()) return field.interp(int(times.size()) - 1, x);
    int hi = 1;
    while (times[hi] < t) ++hi;
    const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
    return (1 - w) * field.interp(hi - 1, x) + w * field.interp(hi, x);
}

int cmd_compare(const config::RunConfig& cfg, const std::string& a_path,
                const std::string& b_path) {
    dpp::ValueField a, b;
    if (!a_path.empty() && !b_path.empty()) {
        a = io::read_value_field_csv(a_path);
        b = io::read_value_field_csv(b_path);
    } else if (a_path.empty() && b_path.empty()) {
        // end-to-end: DPP field vs PIDE field for the configured model
        const auto preset = materialize(cfg);
        if (preset.coeffs.n != 1)
            throw config::ConfigError("compare needs a one-dimensional model or two --a/--b files");
        dpp::DppConfig dc;
        dc.fine_steps_per_dpp = cfg.fine_steps_per_dpp;
        dc.basis_degree = cfg.basis_degree;
        dc.picard = make_picard(cfg);
        dc.path_count = cfg.path_count;
        dc.seed = cfg.seed;
        auto sgrid = dpp::RectGrid::uniform_1d(cfg.state_lo, cfg.state_hi, cfg.state_nodes);
        a = dpp::compute_value_function(preset.coeffs, preset.levy, preset.controls,
                                        dpp_times(cfg), sgrid, dc)
                .field;
        b = pide::solve_pide(preset.coeffs, preset.levy, preset.controls,
                             make_pide_grid(cfg, preset));
    } else {
        throw config::ConfigError("compare needs both --a and --b, or neither");
    }
    if (a.grid.dim() != b.grid.dim())
        throw config::ConfigError("compare: fields have different state dimensions");

    prepare_out(cfg);
    std::ofstream out(cfg.out_dir + "/compare.csv", std::ios::binary);
    out << "time";
    for (int j = 0; j < a.grid.dim(); ++j) out << ",x" << j;
    out << ",w_a,w_b,diff\n";
    double sup = 0, sup_t = 0;
    std::vector<double> sup_x(a.grid.dim(), 0.0), x(a.grid.dim());
    long compared = 0;
    for (int k = 0; k < int(a.times.size()); ++k) {
        for (std::size_t idx = 0; idx < a.grid.node_count(); ++idx) {
            a.grid.node_coords(idx, x.data());
            bool inside = true;
            for (int j = 0; j < a.grid.dim(); ++j)
                inside = inside && x[j] >= b.grid.axes[j].front() && x[j] <= b.grid.axes[j].back();
            if (!inside) continue;
            const double va = a.at(k, idx);
            const double vb = eval_field(b, a.times[k], x.data());
            const double diff = std::abs(va - vb);
            out << io::format_number(a.times[k]);
            for (int j = 0; j < a.grid.dim(); ++j) out << ',' << io::format_number(x[j]);
            out << ',' << io::format_number(va) << ',' << io::format_number(vb) << ','
                << io::format_number(diff) << '\n';
            ++compared;
            if (diff > sup) {
                sup = diff;
                sup_t = a.times[k];
                sup_x = x;
            }
        }
    }
    if (compared == 0) throw config::ConfigError("compare: the fields' state boxes do not overlap");

    const bool pass = sup <= cfg.cross_tol;
    json meta = base_meta("compare", cfg);
    meta["sup_diff"] = sup;
    meta["sup_time"] = sup_t;
    meta["sup_state"] = sup_x;
    meta["tolerance"] = cfg.cross_tol;
    meta["points_compared"] = compared;
    meta["pass"] = pass;
    io::write_json(cfg.out_dir + "/compare.json", meta);
    std::cout << (pass ? "PASS" : "FAIL") << "  compare  (sup diff " << io::format_number(sup)
              << " at t=" << io::format_number(sup_t) << ", tol " << io::format_number(cfg.cross_tol)
              << ", " << compared << " points)\n";
    return pass ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fbsdekit: coupled FBSDEs with jumps, DPP value functions and a PIDE cross-check"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::string field_a, field_b;
    auto add_common = [&cli](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "configuration file ([section] key=value)");
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_option("--seed", cli.seed, "RNG seed (required here or in the config)");
        sub->add_option("--paths", cli.paths, "Monte-Carlo path count");
        sub->add_option("--model", cli.model_id, "model preset id");
    };

    auto* sc_sim = app.add_subcommand("simulate", "sample controlled forward trajectories");
    auto* sc_fbsde = app.add_subcommand("solve-fbsde", "solve the coupled FBSDE by Picard + LSMC");
    auto* sc_dpp = app.add_subcommand("value-dpp", "value function by the DPP recursion");
    auto* sc_pide = app.add_subcommand("solve-pide", "value function by the monotone PIDE scheme");
    auto* sc_verify = app.add_subcommand("verify", "model certificates and sanity properties");
    auto* sc_cmp = app.add_subcommand("compare", "cross-validate two value fields");
    for (auto* sub : {sc_sim, sc_fbsde, sc_dpp, sc_pide, sc_verify, sc_cmp}) add_common(sub);
    sc_cmp->add_option("--a", field_a, "first value-field CSV (default: compute via DPP)");
    sc_cmp->add_option("--b", field_b, "second value-field CSV (default: compute via PIDE)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        const auto cfg = resolve_config(cli);
        if (sc_sim->parsed()) return cmd_simulate(cfg);
        if (sc_fbsde->parsed()) return cmd_solve_fbsde(cfg);
        if (sc_dpp->parsed()) return cmd_value_dpp(cfg);
        if (sc_pide->parsed()) return cmd_solve_pide(cfg);
        if (sc_verify->parsed()) return cmd_verify(cfg);
        if (sc_cmp->parsed()) return cmd_compare(cfg, field_a, field_b);
        return kExitConfig;
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fbsde::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
}
