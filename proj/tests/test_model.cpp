#include <cmath>

#include "doctest.h"
#include "fbsdekit/model.hpp"
#include "fbsdekit/presets.hpp"

using namespace fbsdekit;
using model::Control;

namespace {

model::CoefficientSet zeros_1d() {
    model::CoefficientSet c;
    c.n = c.d = 1;
    c.b = [](double, const double*, double, const double*, double, Control, double* o) { o[0] = 0; };
    c.sigma = [](double, const double*, double, Control, double* o) { o[0] = 0; };
    c.g = [](double, const double*, double, const double*, Control, double* o) { o[0] = 0; };
    c.f = [](double, const double*, double, const double*, double, Control) { return 0.0; };
    c.phi = [](const double*) { return 0.0; };
    c.lip = {0, 0, 0, 0, 0};
    return c;
}

}  // namespace

TEST_CASE("lipschitz checker: zero coefficients pass with zero moduli") {
    auto c = zeros_1d();
    auto box = model::SampleBox::cube(1, 2.0);
    auto rep = model::check_lipschitz(c, model::ControlGrid::singleton(), model::LevyMeasure::none(),
                                      box, 500, 42);
    CHECK(rep.pass);
    CHECK(rep.worst == doctest::Approx(0.0));
}

TEST_CASE("lipschitz checker: linear drift passes at its slope, fails below") {
    auto c = zeros_1d();
    c.b = [](double, const double* x, double, const double*, double, Control, double* o) {
        o[0] = 2.0 * x[0];
    };
    auto box = model::SampleBox::cube(1, 2.0);
    c.lip.b = 2.0;
    auto ok = model::check_lipschitz(c, model::ControlGrid::singleton(),
                                     model::LevyMeasure::none(), box, 2000, 7);
    CHECK(ok.pass);
    CHECK(ok.per_coefficient.at("b") <= 2.0 + 1e-9);
    CHECK(ok.per_coefficient.at("b") > 1.5);  // the sampler actually explores the slope

    c.lip.b = 1.0;  // understated modulus must be caught
    auto bad = model::check_lipschitz(c, model::ControlGrid::singleton(),
                                      model::LevyMeasure::none(), box, 2000, 7);
    CHECK(!bad.pass);
}

TEST_CASE("lipschitz checker: quadratic driver violates a slope-1 declaration") {
    auto c = zeros_1d();
    c.f = [](double, const double* x, double, const double*, double, Control) {
        return x[0] * x[0];
    };
    c.lip.f = 1.0;
    auto box = model::SampleBox::cube(1, 2.0);
    auto rep = model::check_lipschitz(c, model::ControlGrid::singleton(),
                                      model::LevyMeasure::none(), box, 4000, 12);
    CHECK(!rep.pass);
    // the ratio uses the joint (x,y,z,k) distance, so the x^2 slope shows up damped,
    // but it still clearly exceeds the declared modulus 1
    CHECK(rep.per_coefficient.at("f") > 1.5);
}

TEST_CASE("lipschitz checker: non-finite coefficient output throws with context") {
    auto c = zeros_1d();
    c.sigma = [](double, const double* x, double, Control, double* o) {
        o[0] = std::sqrt(x[0]);  // NaN for x < 0
    };
    c.lip.sigma = 1.0;
    auto box = model::SampleBox::cube(1, 2.0);
    CHECK_THROWS_AS(model::check_lipschitz(c, model::ControlGrid::singleton(),
                                           model::LevyMeasure::none(), box, 2000, 3),
                    std::runtime_error);
}

TEST_CASE("monotonicity checker: driver aligned with the state passes") {
    auto c = zeros_1d();
    c.f = [](double, const double* x, double, const double*, double, Control) { return x[0]; };
    c.phi = [](const double* x) { return x[0]; };
    c.lip = {0, 0, 0, 1, 1};
    model::MonotonicityCertificate cert;
    cert.G = Eigen::RowVectorXd::Ones(1);
    cert.beta1 = 1;
    cert.beta2 = 0;
    cert.mu1 = 1;
    auto box = model::SampleBox::cube(1, 2.0);
    auto rep = model::check_monotonicity(c, cert, model::LevyMeasure::none(),
                                         model::ControlGrid::singleton(), box, 2000, 5);
    CHECK(rep.pass);
    CHECK(std::abs(rep.worst) <= 1e-9);  // the inequality is tight for this instance
}

TEST_CASE("monotonicity checker: flipped driver sign fails") {
    auto c = zeros_1d();
    c.f = [](double, const double* x, double, const double*, double, Control) { return -x[0]; };
    c.phi = [](const double* x) { return x[0]; };
    c.lip = {0, 0, 0, 1, 1};
    model::MonotonicityCertificate cert;
    cert.G = Eigen::RowVectorXd::Ones(1);
    cert.beta1 = 1;
    cert.beta2 = 0;
    cert.mu1 = 1;
    auto box = model::SampleBox::cube(1, 2.0);
    auto rep = model::check_monotonicity(c, cert, model::LevyMeasure::none(),
                                         model::ControlGrid::singleton(), box, 2000, 5);
    CHECK(!rep.pass);
    CHECK(rep.worst < -0.1);
}

TEST_CASE("monotonicity checker: terminal condition must respect mu1") {
    auto c = zeros_1d();
    c.f = [](double, const double* x, double, const double*, double, Control) { return x[0]; };
    c.phi = [](const double*) { return 0.0; };  // flat terminal breaks the mu1 bound
    c.lip = {0, 0, 0, 1, 0};
    model::MonotonicityCertificate cert;
    cert.G = Eigen::RowVectorXd::Ones(1);
    cert.beta1 = 1;
    cert.beta2 = 0;
    cert.mu1 = 1;
    auto box = model::SampleBox::cube(1, 2.0);
    auto rep = model::check_monotonicity(c, cert, model::LevyMeasure::none(),
                                         model::ControlGrid::singleton(), box, 2000, 5);
    CHECK(!rep.pass);
}

TEST_CASE("comparison condition: slope above K passes, below fails") {
    auto c = zeros_1d();
    c.f = [](double, const double*, double, const double*, double k, Control) { return 2.0 * k; };
    c.comparison_K = 1.0;
    auto box = model::SampleBox::cube(1, 2.0);
    auto ok = model::check_comparison_condition(c, model::ControlGrid::singleton(), box, 2000, 9);
    CHECK(ok.pass);

    c.f = [](double, const double*, double, const double*, double k, Control) { return -2.0 * k; };
    c.comparison_K = -0.5;
    auto bad = model::check_comparison_condition(c, model::ControlGrid::singleton(), box, 2000, 9);
    CHECK(!bad.pass);
    CHECK(bad.worst < 0);
}

TEST_CASE("certificate and measure validation") {
    model::MonotonicityCertificate cert;
    cert.G = Eigen::RowVectorXd::Ones(1);
    cert.beta1 = 0;
    cert.beta2 = 0;
    cert.mu1 = 1;
    CHECK_THROWS(cert.validate());  // beta1 + beta2 must be positive
    cert.beta1 = 1;
    CHECK_NOTHROW(cert.validate());

    model::LevyMeasure lm;
    lm.total_intensity = 2.0;
    lm.dim_marks = 1;
    lm.quad_nodes = {{{1.0}, 1.0}};  // weights do not sum to the intensity
    lm.mark_sampler = [](rng::CounterRng&, double* e) { e[0] = 1.0; };
    CHECK_THROWS(lm.validate());
    lm.quad_nodes = {{{1.0}, 1.0}, {{-1.0}, 1.0}};
    CHECK_NOTHROW(lm.validate());
}

TEST_CASE("all registered presets carry self-consistent declarations") {
    for (const auto& id : presets::list_ids()) {
        const auto& p = presets::get(id);
        CAPTURE(id);
        CHECK_NOTHROW(p.coeffs.validate());
        CHECK_NOTHROW(p.controls.validate());
        if (p.levy.total_intensity > 0) CHECK_NOTHROW(p.levy.validate());
        auto box = model::SampleBox::cube(p.coeffs.n, 2.0);
        auto lip = model::check_lipschitz(p.coeffs, p.controls, p.levy, box, 1000, 33);
        CHECK(lip.pass);
        auto comp = model::check_comparison_condition(p.coeffs, p.controls, box, 1000, 34);
        CHECK(comp.pass);
    }
}
