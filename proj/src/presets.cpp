#include "fbsdekit/presets.hpp"

#include <cstring>
#include <map>
#include <stdexcept>

namespace fbsdekit::presets {

namespace {

using model::Control;

model::CoefficientSet base_1d() {
    model::CoefficientSet c;
    c.n = 1;
    c.d = 1;
    c.b = [](double, const double*, double, const double*, double, Control, double* out) {
        out[0] = 0;
    };
    c.sigma = [](double, const double*, double, Control, double* out) { out[0] = 0; };
    c.g = [](double, const double*, double, const double*, Control, double* out) { out[0] = 0; };
    c.f = [](double, const double*, double, const double*, double, Control) { return 0.0; };
    c.phi = [](const double* x) { return x[0]; };
    c.lip = {0, 0, 0, 0, 1};
    c.comparison_K = 0;
    return c;
}

model::LevyMeasure unit_marks(double intensity) {
    model::LevyMeasure lm;
    lm.total_intensity = intensity;
    lm.dim_marks = 1;
    lm.quad_nodes = {{{1.0}, intensity}};
    lm.mark_sampler = [](rng::CounterRng&, double* e) { e[0] = 1.0; };
    return lm;
}

model::LevyMeasure sign_marks(double intensity) {
    model::LevyMeasure lm;
    lm.total_intensity = intensity;
    lm.dim_marks = 1;
    lm.quad_nodes = {{{1.0}, intensity / 2}, {{-1.0}, intensity / 2}};
    lm.mark_sampler = [](rng::CounterRng& r, double* e) {
        e[0] = r.next_uniform() < 0.5 ? -1.0 : 1.0;
    };
    return lm;
}

std::map<std::string, Preset>& registry() {
    static std::map<std::string, Preset> presets = [] {
        std::map<std::string, Preset> m;

        {
            Preset p;
            p.id = "zero";
            p.coeffs = base_1d();
            p.levy = model::LevyMeasure::none();
            p.controls = model::ControlGrid::singleton(0);
            p.description = "all coefficients zero, terminal x";
            m[p.id] = p;
        }
        {
            // dX = (0.5 X) dt + 0.2 dB, terminal x; Y_0 = x e^{0.5 T}
            Preset p;
            p.id = "drifted-linear";
            p.coeffs = base_1d();
            p.coeffs.b = [](double, const double* x, double, const double*, double, Control,
                            double* out) { out[0] = 0.5 * x[0]; };
            p.coeffs.sigma = [](double, const double*, double, Control, double* out) {
                out[0] = 0.2;
            };
            p.coeffs.lip = {0.5, 0, 0, 0, 1};
            p.levy = model::LevyMeasure::none();
            p.controls = model::ControlGrid::singleton(0);
            p.description = "linear drift 0.5x, sigma 0.2, terminal x";
            m[p.id] = p;
        }
        {
            // dX = g(e) dN~ with g(e) = e, unit marks, intensity 3; Y_0 = x
            Preset p;
            p.id = "pure-jump";
            p.coeffs = base_1d();
            p.coeffs.g = [](double, const double*, double, const double* e, Control,
                            double* out) { out[0] = e[0]; };
            p.coeffs.lip = {0, 0, 0, 0, 1};
            p.levy = unit_marks(3.0);
            p.controls = model::ControlGrid::singleton(0);
            p.description = "compensated unit jumps, intensity 3, terminal x";
            m[p.id] = p;
        }
        {
            // dX = 0.5 Y dt + dB, terminal x; Y_0 = x / (1 - 0.5 T)
            Preset p;
            p.id = "coupled-linear";
            p.coeffs = base_1d();
            p.coeffs.b = [](double, const double*, double y, const double*, double, Control,
                            double* out) { out[0] = 0.5 * y; };
            p.coeffs.sigma = [](double, const double*, double, Control, double* out) {
                out[0] = 1.0;
            };
            p.coeffs.lip = {0.5, 0, 0, 0, 1};
            p.levy = model::LevyMeasure::none();
            p.controls = model::ControlGrid::singleton(0);
            p.description = "drift coupled to Y, sigma 1, terminal x";
            m[p.id] = p;
        }
        {
            // dX = u dt + 0.2 dB, u in {-1,0,1}, terminal x; W(t,x) = x + (T-t)
            Preset p;
            p.id = "controlled-drift";
            p.coeffs = base_1d();
            p.coeffs.b = [](double, const double*, double, const double*, double, Control u,
                            double* out) { out[0] = u; };
            p.coeffs.sigma = [](double, const double*, double, Control, double* out) {
                out[0] = 0.2;
            };
            p.coeffs.lip = {0, 0, 0, 0, 1};
            p.levy = model::LevyMeasure::none();
            p.controls = model::ControlGrid{{-1.0, 0.0, 1.0}};
            p.description = "drift u in {-1,0,1}, sigma 0.2, terminal x";
            m[p.id] = p;
        }
        {
            // controlled drift plus compensated jumps g(e) = 0.1 e, intensity 2
            Preset p;
            p.id = "controlled-drift-jump";
            p.coeffs = base_1d();
            p.coeffs.b = [](double, const double*, double, const double*, double, Control u,
                            double* out) { out[0] = u; };
            p.coeffs.sigma = [](double, const double*, double, Control, double* out) {
                out[0] = 0.2;
            };
            p.coeffs.g = [](double, const double*, double, const double* e, Control,
                            double* out) { out[0] = 0.1 * e[0]; };
            p.coeffs.lip = {0, 0, 0, 0, 1};
            p.levy = sign_marks(2.0);
            p.controls = model::ControlGrid{{-1.0, 0.0, 1.0}};
            p.description = "controlled drift with compensated jumps 0.1e, intensity 2";
            m[p.id] = p;
        }
        {
            // dX = sqrt(2) dB, terminal x^2; W(t,x) = x^2 + 2 (T-t)
            Preset p;
            p.id = "heat";
            p.coeffs = base_1d();
            p.coeffs.sigma = [](double, const double*, double, Control, double* out) {
                out[0] = std::sqrt(2.0);
            };
            p.coeffs.phi = [](const double* x) { return x[0] * x[0]; };
            p.coeffs.lip = {0, 0, 0, 0, 20};  // valid on boxes within |x| <= 10
            p.levy = model::LevyMeasure::none();
            p.controls = model::ControlGrid::singleton(0);
            p.default_x0 = 0.0;
            p.description = "sigma sqrt(2), terminal x^2";
            m[p.id] = p;
        }
        return m;
    }();
    return presets;
}

}  // namespace

const Preset& get(const std::string& id) {
    auto it = registry().find(id);
    if (it == registry().end()) throw std::invalid_argument("unknown preset or model id: " + id);
    return it->second;
}

std::vector<std::string> list_ids() {
    std::vector<std::string> ids;
    for (const auto& [id, p] : registry()) ids.push_back(id);
    return ids;
}

bool has(const std::string& id) { return registry().count(id) > 0; }

void register_preset(Preset preset) { registry()[preset.id] = std::move(preset); }

}  // namespace fbsdekit::presets
