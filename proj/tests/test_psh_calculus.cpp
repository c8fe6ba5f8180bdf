#include "doctest.h"
#include "pluri/psh_calculus.hpp"

#include <cmath>
#include <limits>

using namespace pluri;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double torus_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
    double s = 0.0;
    for (int k = 0; k < x.size(); ++k) {
        double d = x(k) - a(k);
        d -= std::round(d);
        s += d * d;
    }
    return std::sqrt(s);
}

Mask disk(const ModelManifold& m, double R) {
    Mask K(m.size());
    Eigen::Vector2d c(0.5, 0.5);
    for (std::size_t i = 0; i < m.size(); ++i) K[i] = torus_dist(m.coords(i), c) <= R;
    return K;
}

// Plain projected Jacobi iteration for the obstacle problem on a small grid:
// u_i <- min(obstacle_i, (g + L_offdiag u)/diag) until nothing moves.
std::vector<double> brute_force_envelope(int N, const Mask& K) {
    const double h = 1.0 / N, c = 0.25 / (h * h);
    std::vector<double> u(N * N, 0.0), next(N * N);
    for (int it = 0; it < 2000000; ++it) {
        double change = 0.0;
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                int k = i + N * j;
                double nb = u[(i + 1) % N + N * j] + u[(i + N - 1) % N + N * j] + u[i + N * ((j + 1) % N)] +
                            u[i + N * ((j + N - 1) % N)];
                double v = (1.0 + c * nb) / (4.0 * c);
                if (K[k]) v = std::min(v, 0.0);
                next[k] = v;
                change = std::max(change, std::abs(v - u[k]));
            }
        u.swap(next);
        if (change < 1e-14) break;
    }
    return u;
}

}  // namespace

TEST_CASE("zero potential: zero dd^c and the normalized reference measure") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1, 2.0), "omega");
    QuasiPshFunction phi(omega, std::vector<double>(m->size(), 0.0), Normalization::SupZero);
    DdcField f = ddc(phi);
    for (std::size_t i = 0; i < m->size(); ++i) {
        CHECK(f.valid[i] == 1);
        CHECK(std::abs(f.h[i](0, 0)) == 0.0);
    }
    PositiveMeasure mu = ma_measure(phi);
    CHECK(mu.mass == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(mu.mass_defect < 1e-12);
    CHECK(mu.absolutely_continuous);
}

TEST_CASE("dd^c of |z|^{2 beta} has eigenvalues beta |z|^{2(beta-1)} {1, beta}") {
    // beta = 1/2 at |z - c| = 1 in dimension two: {1/2, 1/4}.
    double err[2];
    int k = 0;
    for (int res : {16, 32}) {
        auto m = square_torus(2, res, 4.0);
        Eigen::VectorXd c = Eigen::VectorXd::Constant(4, 2.0);
        std::vector<double> v(m->size());
        for (std::size_t i = 0; i < m->size(); ++i) v[i] = (m->coords(i) - c).norm();
        int mi[4] = {3 * res / 4, res / 2, res / 2, res / 2};
        Herm h;
        REQUIRE(complex_hessian(*m, v, m->flat_index(0, mi), h));
        auto ev = eigenvalues(h);
        err[k++] = std::max(std::abs(ev[0] - 0.25), std::abs(ev[1] - 0.5));
    }
    CHECK(err[1] < 5e-3);
    CHECK(err[0] / err[1] > 3.5);
    CHECK(err[0] / err[1] < 4.5);
}

TEST_CASE("MA density of a small cosine perturbation matches a direct determinant oracle") {
    const int N = 64;
    auto m = square_torus(1, N);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    const double eps = 0.02;
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < m->size(); ++i) v[i] = eps * std::cos(2 * kPi * m->coords(i)(0));
    QuasiPshFunction phi(omega, v, Normalization::None);
    PositiveMeasure mu = ma_measure(phi);
    const double h = 1.0 / N;
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            double x = i * h;
            // 1 + (1/4)(phi_xx + phi_yy), phi independent of y.
            double lap = eps * (std::cos(2 * kPi * (x + h)) - 2 * std::cos(2 * kPi * x) + std::cos(2 * kPi * (x - h))) / (h * h);
            double oracle = 1.0 + 0.25 * lap;
            std::size_t idx = static_cast<std::size_t>(i + N * j);
            CHECK(mu.density[idx] == doctest::Approx(oracle).epsilon(1e-12));
            CHECK(mu.weights[idx] == doctest::Approx(oracle * h * h).epsilon(1e-12));
            // Continuum first-order density 1 - eps pi^2 cos(2 pi x), up to O(h^2).
            CHECK(std::abs(mu.density[idx] - (1.0 - eps * kPi * kPi * std::cos(2 * kPi * x))) < 1e-3);
        }
    CHECK(mu.mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("functions violating positivity are rejected") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < m->size(); ++i) v[i] = 0.5 * std::cos(2 * kPi * m->coords(i)(0));
    try {
        QuasiPshFunction phi(omega, v, Normalization::None);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPsh);
    }
}

TEST_CASE("normalization tags and singular values are validated") {
    auto m = square_torus(1, 16);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    std::vector<double> v(m->size(), -0.5);
    CHECK_THROWS_AS(QuasiPshFunction(omega, v, Normalization::SupZero), Error);
    CHECK_THROWS_AS(QuasiPshFunction(omega, v, Normalization::MeanZero), Error);
    CHECK_NOTHROW(QuasiPshFunction(omega, v, Normalization::None));
    v[5] = -kInf;
    CHECK_THROWS_AS(QuasiPshFunction(omega, v, Normalization::None), Error);
    CHECK_NOTHROW(QuasiPshFunction(omega, v, Normalization::None, {SingularTag{5, 0.0}}));
}

TEST_CASE("Lelong numbers of model singularities") {
    const int N = 64;
    auto m = square_torus(1, N);
    Eigen::Vector2d a(0.5, 0.5);
    int mi[2] = {N / 2, N / 2};
    const std::size_t ia = m->flat_index(0, mi);
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < m->size(); ++i) v[i] = i == ia ? -kInf : std::log(torus_dist(m->coords(i), a));
    // log of the distance to the nearest image is a max of harmonic functions;
    // the reference form absorbs the discretization error near a.
    DdcField f = ddc(*m, v);
    double worst = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i)
        if (f.valid[i]) worst = std::min(worst, f.h[i](0, 0).real());
    auto omega = constant_form(m, Herm::identity(1, 1.0 - 2.0 * worst), "omega");

    SUBCASE("grid values with a singular tag") {
        QuasiPshFunction phi(omega, v, Normalization::None, {SingularTag{ia, 1.0}});
        CHECK(lelong_number(phi, ia) == doctest::Approx(1.0).epsilon(5e-2));
    }
    SUBCASE("point evaluator") {
        auto ev = [&](const Eigen::VectorXd& x, int) { return std::log(torus_dist(x, a)); };
        QuasiPshFunction phi(omega, v, Normalization::None, {SingularTag{ia, 1.0}}, ev);
        CHECK(lelong_number(phi, ia) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("truncation max(log|z - a|, -5) is bounded near a") {
        std::vector<double> w(v);
        w[ia] = -5.0;
        auto ev = [&](const Eigen::VectorXd& x, int) { return std::max(std::log(torus_dist(x, a)), -5.0); };
        DdcField g = ddc(*m, w);
        double lo = 0.0;
        for (std::size_t i = 0; i < m->size(); ++i) lo = std::min(lo, g.h[i](0, 0).real());
        auto big = constant_form(m, Herm::identity(1, 1.0 - 2.0 * lo), "omega");
        QuasiPshFunction phi(big, w, Normalization::None, {}, ev);
        CHECK(std::abs(lelong_number(phi, ia)) < 5e-2);
    }
    SUBCASE("smooth function") {
        std::vector<double> s(m->size());
        for (std::size_t i = 0; i < m->size(); ++i) s[i] = 0.01 * std::cos(2 * kPi * m->coords(i)(0));
        QuasiPshFunction phi(omega, s, Normalization::None);
        CHECK(std::abs(lelong_number(phi, ia)) < 5e-2);
        CHECK(std::abs(lelong_number(phi, 17)) < 5e-2);
    }
}

TEST_CASE("Lelong number in dimension two and on a projective chart") {
    auto m = square_torus(2, 16);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.5);
    int mi[4] = {8, 8, 8, 8};
    const std::size_t ia = m->flat_index(0, mi);
    auto omega = constant_form(m, Herm::identity(2, 1.0), "omega");
    std::vector<double> zero(m->size(), 0.0);
    // log|z_1 - a_1| has Lelong number 1 at a as well.
    auto ev = [&](const Eigen::VectorXd& x, int) {
        Eigen::VectorXd d = x - a;
        return 0.5 * std::log(d(0) * d(0) + d(1) * d(1));
    };
    QuasiPshFunction phi(omega, zero, Normalization::SupZero, {SingularTag{ia, 1.0}}, ev);
    CHECK(lelong_number(phi, ia) == doctest::Approx(1.0).epsilon(1e-3));

    // On P^1 the point z = 3.1 in chart 0 sits at the edge of the box; the
    // estimator retries in the owner chart, where the FS potential is smooth.
    auto atlas = fubini_study_atlas(1, 64);
    const auto& am = *atlas.manifold;
    std::size_t edge = 0;
    for (std::size_t i = 0; i < am.chart_size(); ++i)
        if (am.coords(i)(0) > 3.0 && std::abs(am.coords(i)(1)) < 0.1) edge = i;
    // eps |Z_0|^2 / |Z|^2 is smooth on P^1 and omega_FS-psh for small eps.
    std::vector<double> w(am.size());
    for (std::size_t i = 0; i < am.size(); ++i) {
        auto Z = am.homogeneous(i);
        w[i] = 0.05 * std::norm(Z[0]) / (std::norm(Z[0]) + std::norm(Z[1]));
    }
    QuasiPshFunction smooth(atlas.form, w, Normalization::None);
    LelongReport rep = lelong_details(smooth, edge);
    CHECK(rep.chart == 1);
    CHECK(std::abs(rep.estimate) < 5e-2);
}

TEST_CASE("extremal function: whole manifold, empty set, and brute-force oracle") {
    auto m = square_torus(1, 16);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    QuasiPshFunction all = extremal_function(Mask(m->size(), 1), omega);
    CHECK(sup_norm(all.values()) == 0.0);

    QuasiPshFunction none = extremal_function(Mask(m->size(), 0), omega);
    CHECK(none.is_infinite_sentinel());
    CapacityReport empty = capacities(Mask(m->size(), 0), omega);
    CHECK(empty.cap == 0.0);
    CHECK(empty.t_cap == 0.0);

    Mask K = disk(*m, 0.25);
    QuasiPshFunction V = extremal_function(K, omega);
    std::vector<double> oracle = brute_force_envelope(16, K);
    double diff = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) diff = std::max(diff, std::abs(V[i] - oracle[i]));
    CHECK(diff < 1e-6);
    for (std::size_t i = 0; i < m->size(); ++i)
        if (K[i]) CHECK(V[i] <= 0.0);
}

TEST_CASE("capacities of the whole torus are one") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1, 3.0), "omega");
    CapacityReport r = capacities(Mask(m->size(), 1), omega);
    CHECK(r.cap == 1.0);
    CHECK(r.t_cap == 1.0);
}

TEST_CASE("disk capacities: dictionary lower bound, T against Cap, support of MA(h_K)") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    auto dict = trig_psh_dictionary(*omega, 40, 11);
    auto maxima = pairwise_maxima(dict, 40, 12);
    dict.insert(dict.end(), maxima.begin(), maxima.end());
    for (double R : {0.03, 0.05, 0.25}) {
        Mask K = disk(*m, R);
        CapacityReport r = capacities(K, omega);
        CHECK(r.cap > 0.0);
        CHECK(r.cap <= 1.0);
        CHECK(r.t_cap <= std::exp(1.0 - 1.0 / r.cap) + 1e-3);
        CHECK(dictionary_capacity_lower_bound(K, omega, dict) <= r.cap + 1e-3);
        CHECK(r.mass_off_support < 1e-4);
        CHECK(r.complementarity < 1e-4);
    }
}

TEST_CASE("capacities are monotone under inclusion") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    double last_cap = 0.0, last_t = 0.0;
    for (double R : {0.02, 0.04, 0.06, 0.1, 0.2}) {
        CapacityReport r = capacities(disk(*m, R), omega);
        CHECK(r.cap >= last_cap - 1e-9);
        CHECK(r.t_cap >= last_t - 1e-9);
        last_cap = r.cap;
        last_t = r.t_cap;
    }
}

TEST_CASE("extremal function is idempotent on its zero set") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    QuasiPshFunction V = extremal_function(disk(*m, 0.1), omega);
    QuasiPshFunction W = extremal_function(sublevel_mask(V.values(), 1e-9), omega);
    double diff = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) diff = std::max(diff, std::abs(V[i] - W[i]));
    CHECK(diff < 1e-6);
}

TEST_CASE("capacity against Monge-Ampere mass of sublevel sets") {
    auto m = square_torus(1, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    QuasiPshFunction zero(omega, std::vector<double>(m->size(), 0.0), Normalization::SupZero);
    CapmaReport z = capma_check(zero, 1.0, 0.5);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK(z.holds);

    auto dict = trig_psh_dictionary(*omega, 6, 21);
    for (const auto& u : dict) {
        QuasiPshFunction phi(omega, u, Normalization::SupZero);
        for (double s : {0.05, 0.1, 0.3}) {
            for (double delta : {0.1, 0.5, 0.9}) {
                CapmaReport r = capma_check(phi, s, delta);
                CHECK(r.holds);
            }
        }
        double depth = -min_value(u);
        CapmaReport e = capma_check(phi, depth, 0.5);
        CHECK(e.lhs == 0.0);
        CHECK(e.holds);
    }
}

TEST_CASE("sublevel masks are strict") {
    std::vector<double> v = {-1.0, -0.5, 0.0};
    Mask K = sublevel_mask(v, -0.5);
    CHECK(K[0] == 1);
    CHECK(K[1] == 0);
    CHECK(K[2] == 0);
    CHECK(mask_count(K) == 1u);
}

TEST_CASE("unsupported capacity settings are rejected") {
    auto m2 = square_torus(2, 8);
    auto omega2 = constant_form(m2, Herm::identity(2), "omega");
    CHECK_THROWS_AS(capacities(Mask(m2->size(), 1), omega2), Error);
    Eigen::MatrixXd P(2, 2);
    P << 1.0, 0.3, 0.0, 1.0;
    auto skew = build_torus(1, P, 16);
    auto omega_s = constant_form(skew, Herm::identity(1), "omega");
    CHECK_THROWS_AS(capacities(Mask(skew->size(), 1), omega_s), Error);
}
