#include "doctest.h"
#include "pluri/green_heat.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <random>

using namespace pluri;

namespace {

FormPtr flat(int n, int res, double side = 1.0, double g = 1.0) {
    return constant_form(square_torus(n, res, side), Herm::identity(n, g), "flat");
}

FormPtr skew_flat(int res) {
    Eigen::MatrixXd P(2, 2);
    P << 1.0, 0.3, 0.0, 0.9;
    Herm g(1);
    g(0, 0) = 1.7;
    return constant_form(build_torus(1, P, res), g, "skew");
}

FormPtr twisted_flat_n2(int res) {
    Herm g(2);
    g(0, 0) = 1.0;
    g(1, 1) = 1.3;
    g(0, 1) = cplx(0.2, 0.15);
    g(1, 0) = std::conj(g(0, 1));
    return constant_form(square_torus(2, res), g, "twisted");
}

// Jacobi theta_1(pi z | i) by its product expansion.
cplx theta1(cplx z) {
    const double q = std::exp(-kPi);
    cplx prod = 2.0 * std::pow(q, 0.25) * std::sin(kPi * z);
    for (int k = 1; k <= 12; ++k) {
        const double q2 = std::pow(q, 2 * k);
        prod *= (1.0 - q2) * (1.0 - 2.0 * q2 * std::cos(2.0 * kPi * z) + q2 * q2);
    }
    return prod;
}

// Mean-zero Green function of -(1/4) Euclidean Laplacian on C/(Z + iZ) with
// Delta G = 1 - delta: four times the classical theta expression. The cell
// mean of log|theta_1| is pi/4 + sum log(1 - e^{-2 pi k}) by Jensen's formula.
double theta_green(double x, double y) {
    double jensen = kPi / 4.0;
    for (int k = 1; k <= 12; ++k) jensen += std::log(1.0 - std::exp(-2.0 * kPi * k));
    const double ge = -std::log(std::abs(theta1(cplx(x, y)))) / (2.0 * kPi) + 0.5 * y * y + jensen / (2.0 * kPi) -
                      1.0 / 6.0;
    return 4.0 * ge;
}

}  // namespace

TEST_CASE("theta oracle is doubly periodic") {
    CHECK(std::abs(theta_green(0.3, 0.2) - theta_green(1.3, 0.2)) < 1e-12);
    CHECK(std::abs(theta_green(0.3, 0.2) - theta_green(0.3, 1.2)) < 1e-12);
    CHECK(std::abs(theta_green(0.3, 0.2) - theta_green(0.2, 0.3)) < 1e-12);
}

TEST_CASE("lattice Green function has mean zero and is symmetric") {
    for (const FormPtr& om : {flat(1, 32), skew_flat(24), twisted_flat_n2(8)}) {
        const ModelManifold& m = om->manifold();
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
        for (int k = 0; k < 50; ++k) {
            const std::size_t x = pick(rng), y = pick(rng);
            const GreenFunction Gx = torus_green(x, om);
            const GreenFunction Gy = torus_green(y, om);
            CHECK(std::abs(Gx.mean) < 1e-8);
            CHECK(std::abs(Gx.values[y] - Gy.values[x]) < 1e-8);
        }
    }
}

TEST_CASE("discrete Laplacian of G is 1/V off the base and 1/V - 1/cell at it") {
    for (const FormPtr& om : {flat(1, 32), skew_flat(24), twisted_flat_n2(8)}) {
        const ModelManifold& m = om->manifold();
        const std::size_t base = m.size() / 3;
        const GreenFunction G = torus_green(base, om);
        const std::vector<double> L = discrete_laplacian(*om, G.values);
        const double cell = det(om->at(0)) * m.cell_measure();
        double err = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double want = 1.0 / G.V - (i == base ? 1.0 / cell : 0.0);
            err = std::max(err, std::abs(L[i] - want) / (i == base ? 1.0 / cell : 1.0));
        }
        CHECK(err < 1e-6);
    }
}

TEST_CASE("continuous Green function matches the theta product on the square torus") {
    const FormPtr om = flat(1, 8);
    FlatTorusKernel ker(*om);
    Eigen::VectorXd r(2);
    r << 0.5, 0.5;
    CHECK(std::abs(ker.green(r) - theta_green(0.5, 0.5)) < 1e-6);
    r << 0.31, 0.07;
    CHECK(std::abs(ker.green(r) - theta_green(0.31, 0.07)) < 1e-6);
    r << 0.0, 0.0;
    CHECK(std::isinf(ker.green(r)));
}

TEST_CASE("lattice Green function converges to the continuous one") {
    const FormPtr om = flat(1, 64);
    const ModelManifold& m = om->manifold();
    const GreenFunction G = torus_green(0, om);
    int mi[2] = {32, 32};
    const double disc = G.values[m.flat_index(0, mi)];
    CHECK(std::abs(disc - theta_green(0.5, 0.5)) < 1e-3);
}

TEST_CASE("Ewald split equals the time integral of the heat kernel (n = 2)") {
    const FormPtr om = twisted_flat_n2(8);
    FlatTorusKernel ker(*om);
    Eigen::VectorXd r(4);
    r << 0.41, 0.13, 0.27, 0.5;
    const double inv_v = 1.0 / ker.volume();
    auto f = [&](double t) { return ker.heat(r, t) - inv_v; };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double integral = ts.integrate(f, 0.0, 1.0, 1e-13) + es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), 1e-13);
    CHECK(std::abs(ker.green(r) - integral) < 1e-8);
}

TEST_CASE("image and Fourier theta sums agree") {
    for (const FormPtr& om : {skew_flat(8), twisted_flat_n2(8)}) {
        FlatTorusKernel ker(*om);
        const int d = ker.real_dim();
        Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(d, 0.1, 0.7);
        for (double t : {0.02, 0.1, 0.5}) {
            const double a = ker.heat_images(r, t), b = ker.heat_fourier(r, t);
            CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, std::abs(a)));
        }
    }
    for (const FormPtr& om : {skew_flat(16), twisted_flat_n2(8)}) {
        FlatTorusKernel ker(*om);
        const ModelManifold& m = om->manifold();
        for (double t : {0.01, 0.3}) {
            const std::vector<double> H = heat_on_grid(*om, t);
            for (std::size_t j : {std::size_t{0}, std::size_t{5}, m.size() / 2 + 3}) {
                const double p = ker.heat(m.coords(j) - m.coords(0), t);
                CHECK(std::abs(H[j] - p) < 1e-11 * std::max(1.0, p));
            }
        }
    }
    FlatTorusKernel ker(*flat(1, 8));
    CHECK_THROWS_AS(ker.heat(Eigen::VectorXd::Zero(2), 0.0), Error);
}

TEST_CASE("heat ladder: unit mass, spectral decay, bounded t^n scaling") {
    for (int n : {1, 2}) {
        const FormPtr om = flat(n, n == 1 ? 48 : 20);
        const HeatTraceReport rep = heat_trace_check(*om, {1.0, 0.1, 0.01});
        REQUIRE(rep.levels.size() == 3);
        CHECK(rep.max_mass_error < 1e-10);
        // t = 1: |H - 1/V| decays like 2n e^{-lambda_1}.
        FlatTorusKernel ker(*om);
        CHECK(rep.levels[0].sup_dev < 1.01 * 2.0 * (2 * n) * std::exp(-ker.spectral_gap()));
        // Small t: t^n sup|H - 1/V| approaches the Euclidean constant (4 pi t)^{-n} det(S)^{-1/2} t^n = pi^{-n}.
        const double euclid = std::pow(kPi, -n);
        CHECK(rep.levels[1].scaled <= euclid * (1.0 + 1e-3));
        CHECK(std::abs(rep.levels[2].scaled - (euclid - std::pow(0.01, n))) < 1e-6 * euclid);
        CHECK(rep.levels[0].scaled <= rep.levels[1].scaled);
        CHECK(rep.C0_empirical == doctest::Approx(rep.levels[2].scaled));
        for (const auto& lv : rep.levels) {
            CHECK(lv.cauchy_schwarz_checked);
            CHECK(lv.cauchy_schwarz_excess <= 1e-12);
        }
    }
    CHECK_THROWS_AS(heat_trace_check(*flat(1, 8), {0.1, -1.0}), Error);
}

TEST_CASE("heat semigroup") {
    CHECK(semigroup_defect(*flat(1, 32), 0.05, 0.07, 20, 3) < 1e-8);
    CHECK(semigroup_defect(*skew_flat(32), 0.1, 0.1, 20, 4) < 1e-8);
}

TEST_CASE("mean-value inequality for psh potentials") {
    const FormPtr om = flat(1, 32);
    const GreenFunction G = torus_green(0, om);
    CHECK(G.inf < 0.0);

    const QuasiPshFunction zero(om, std::vector<double>(om->manifold().size(), 0.0), Normalization::SupZero);
    const MeanValueReport c = mean_value_inequality(zero, G);
    CHECK(c.holds);
    CHECK(c.min_slack == doctest::Approx(-G.V * G.inf));

    for (const auto& v : trig_psh_dictionary(*om, 25, 5)) {
        const QuasiPshFunction phi(om, v, Normalization::SupZero);
        CHECK(mean_value_inequality(phi, G).holds);
    }

    for (double s : {0.0, 1e-3, 1e-2}) {
        const QuasiPshFunction phi(om, smoothed_green_potential(G, s), Normalization::SupZero);
        const MeanValueReport r = mean_value_inequality(phi, G);
        CHECK(r.holds);
        // The unsmoothed potential is extremal: equality at the base point.
        if (s == 0.0) CHECK(std::abs(r.min_slack) < 1e-9);
        // At the maximum of phi the left side is <= 0.
        const auto& vals = phi.values();
        const std::size_t top = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
        double mean = 0.0;
        for (double x : vals) mean += x / static_cast<double>(vals.size());
        CHECK(mean - vals[top] <= 0.0);
        CHECK(mean - vals[top] >= r.bound - 1e-9);
    }
}

TEST_CASE("Sobolev-route lower bound for the Green function") {
    CHECK(green_lower_bound_constant(1.0, 1.0, 1.0, 2) == doctest::Approx(-9.0).epsilon(1e-14));
    CHECK(green_lower_bound_constant(1.0, 1.0, 1e12, 2) == doctest::Approx(-8.0).epsilon(1e-10));
    CHECK_THROWS_AS(green_lower_bound_constant(1.0, 1.0, 1.0, 1), Error);

    const FormPtr om = twisted_flat_n2(8);
    const GreenFunction G = torus_green(0, om);
    const GreenBoundReport r = green_bound_report(G, 200, 7);
    FlatTorusKernel ker(*om);
    CHECK(r.constants.C_P <= 1.0 / ker.spectral_gap() * (1.0 + 1e-12));
    CHECK(r.constants.C_P > 0.0);
    CHECK(r.constants.C_S > 0.0);
    CHECK(!r.direct);
    CHECK(r.holds);
    CHECK(r.inf_G >= r.bound);

    const GreenBoundReport r1 = green_bound_report(torus_green(0, flat(1, 16)));
    CHECK(r1.direct);
    CHECK(r1.holds);
}

TEST_CASE("Green functions are torus-only") {
    const Atlas a = fubini_study_atlas(1, 16);
    CHECK_THROWS_AS(torus_green(0, a.form), Error);
    CHECK_THROWS_AS(FlatTorusKernel(*a.form), Error);
}
