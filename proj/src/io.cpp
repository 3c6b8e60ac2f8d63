#include "fbsdekit/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fbsdekit::io {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(tok);
    return out;
}

}  // namespace

void write_paths_csv(const std::string& path, const paths::TimeGrid& grid,
                     const std::vector<double>& X, int n, int path_count,
                     const paths::NoiseBatch& noise) {
    auto out = open_out(path);
    out << "path,step,time";
    for (int j = 0; j < n; ++j) out << ",x" << j;
    out << ",jumps\n";
    const int M = grid.n_steps;
    for (int p = 0; p < path_count; ++p) {
        std::vector<int> jump_count(M + 1, 0);
        if (!noise.jumps.empty())
            for (const auto& ev : noise.jumps[p])
                if (ev.step < M) ++jump_count[ev.step + 1];
        int running = 0;
        for (int k = 0; k <= M; ++k) {
            running += jump_count[k];
            out << p << ',' << k << ',' << format_number(grid.knots[k]);
            const double* x = X.data() + (std::size_t(p) * (M + 1) + k) * n;
            for (int j = 0; j < n; ++j) out << ',' << format_number(x[j]);
            out << ',' << running << '\n';
        }
    }
}

std::vector<KnotRow> summarize_solution(const fbsde::BackwardSolution& solution,
                                        const fbsde::Basis& basis,
                                        const model::CoefficientSet& coeffs,
                                        const model::LevyMeasure& levy, const double* x0,
                                        model::Control u) {
    const auto& grid = solution.bundle.grid;
    const int n = coeffs.n, d = coeffs.d;
    std::vector<KnotRow> rows;
    rows.reserve(grid.n_steps);
    std::vector<double> shift(n), gv(n);
    for (int k = 0; k < grid.n_steps; ++k) {
        const auto& fit = solution.fits[k];
        if (!fit.valid) continue;
        KnotRow row;
        row.knot = k;
        row.time = grid.knots[k];
        row.y = basis.eval_fit(fit.y, x0);
        row.z.resize(d);
        for (int j = 0; j < d; ++j) row.z[j] = basis.eval_fit(fit.z.col(j), x0);
        double ks = 0;
        for (const auto& node : levy.quad_nodes) {
            coeffs.g(row.time, x0, row.y, node.mark.data(), u, gv.data());
            for (int j = 0; j < n; ++j) shift[j] = x0[j] + gv[j];
            ks += node.weight * (basis.eval_fit(fit.y, shift.data()) - row.y);
        }
        row.k_slot = ks;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_knot_csv(const std::string& path, const std::vector<KnotRow>& rows, int d) {
    auto out = open_out(path);
    out << "knot,time,y";
    for (int j = 0; j < d; ++j) out << ",z" << j;
    out << ",k_slot\n";
    for (const auto& row : rows) {
        out << row.knot << ',' << format_number(row.time) << ',' << format_number(row.y);
        for (int j = 0; j < d; ++j) out << ',' << format_number(row.z[j]);
        out << ',' << format_number(row.k_slot) << '\n';
    }
}

void write_value_field_csv(const std::string& path, const dpp::ValueField& field) {
    auto out = open_out(path);
    const int D = field.grid.dim();
    out << "# value-field,dim=" << D << "\n";
    for (int a = 0; a < D; ++a) {
        out << "# axis," << a;
        for (double c : field.grid.axes[a]) out << ',' << format_number(c);
        out << '\n';
    }
    out << "# times";
    for (double t : field.times) out << ',' << format_number(t);
    out << '\n';
    out << "t_idx,node";
    for (int a = 0; a < D; ++a) out << ",x" << a;
    out << ",w,argmax\n";
    const std::size_t N = field.grid.node_count();
    std::vector<double> x(D);
    for (int k = 0; k < int(field.times.size()); ++k) {
        for (std::size_t idx = 0; idx < N; ++idx) {
            field.grid.node_coords(idx, x.data());
            out << k << ',' << idx;
            for (int a = 0; a < D; ++a) out << ',' << format_number(x[a]);
            out << ',' << format_number(field.at(k, idx));
            int am = field.argmax.empty() ? -1 : field.argmax[std::size_t(k) * N + idx];
            out << ',' << am << '\n';
        }
    }
}

dpp::ValueField read_value_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open value-field file '" + path + "'");
    dpp::ValueField field;
    std::string line;
    int dim = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] != '#') break;  // first non-comment line is the column header
        auto fields = split_csv(line);
        if (fields[0].find("value-field") != std::string::npos) {
            auto eq = line.find("dim=");
            if (eq == std::string::npos) throw std::runtime_error(path + ": missing dim header");
            dim = std::stoi(line.substr(eq + 4));
            field.grid.axes.resize(dim);
        } else if (fields[0] == "# axis") {
            int a = std::stoi(fields.at(1));
            if (a < 0 || a >= dim) throw std::runtime_error(path + ": axis index out of range");
            for (std::size_t i = 2; i < fields.size(); ++i)
                field.grid.axes[a].push_back(std::stod(fields[i]));
        } else if (fields[0] == "# times") {
            for (std::size_t i = 1; i < fields.size(); ++i)
                field.times.push_back(std::stod(fields[i]));
        } else {
            throw std::runtime_error(path + ": unrecognized header line '" + line + "'");
        }
    }
    if (dim < 1 || field.times.empty())
        throw std::runtime_error(path + ": incomplete value-field header");
    const std::size_t N = field.grid.node_count();
    field.values.assign(field.times.size() * N, 0.0);
    field.argmax.assign(field.times.size() * N, -1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != std::size_t(4 + dim))
            throw std::runtime_error(path + ": malformed row '" + line + "'");
        int k = std::stoi(fields[0]);
        std::size_t idx = std::stoull(fields[1]);
        if (k < 0 || k >= int(field.times.size()) || idx >= N)
            throw std::runtime_error(path + ": row index out of range in '" + line + "'");
        field.values[std::size_t(k) * N + idx] = std::stod(fields[2 + dim]);
        field.argmax[std::size_t(k) * N + idx] = std::stoi(fields[3 + dim]);
    }
    return field;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

}  // namespace fbsdekit::io
