#include "doctest.h"
#include "pluri/grid_geometry.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace pluri;

TEST_CASE("square torus has the expected grid and no fibration") {
    auto m = square_torus(1, 64);
    CHECK(m->size() == 64u * 64u);
    CHECK(m->kind() == ManifoldKind::Torus);
    CHECK_FALSE(m->fibration().has_value());
    // Periodic index arithmetic: stepping N times along an axis returns home.
    std::size_t idx = 123;
    for (int k = 0; k < 64; ++k) idx = m->neighbor(idx, 1, 1);
    CHECK(idx == 123u);
}

TEST_CASE("product of two square lattices is a product fibration onto the second factor") {
    auto m = square_torus(2, 24);
    CHECK(m->kind() == ManifoldKind::ProductFibration);
    REQUIRE(m->fibration().has_value());
    CHECK(m->fibration()->base == std::vector<int>{1});
    CHECK(m->fibration()->fiber == std::vector<int>{0});
    CHECK(m->fibration()->base.size() + m->fibration()->fiber.size() == 2u);

    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(4, 4);
    P(0, 2) = 0.3;  // couples the factors
    CHECK(build_torus(2, P, 8)->kind() == ManifoldKind::Torus);
}

TEST_CASE("degenerate period matrix and coarse grids are rejected") {
    Eigen::MatrixXd P(2, 2);
    P << 1, 2, 2, 4;
    CHECK_THROWS_AS(build_torus(1, P, 64), Error);
    try {
        build_torus(1, P, 64);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
    CHECK_THROWS_AS(square_torus(1, 7), Error);
}

TEST_CASE("flat torus volume equals the fundamental-domain area") {
    Eigen::MatrixXd P(2, 2);
    P << 2.0, 0.5, 0.0, 1.5;
    auto m = build_torus(1, P, 32);
    auto omega = constant_form(m, Herm::identity(1), "omega");
    auto vr = volume(*omega);
    CHECK(vr.V == doctest::Approx(3.0).epsilon(1e-13));
    double s = 0;
    for (double w : vr.weights) s += w;
    CHECK(std::abs(s - vr.V) <= 1e-12 * vr.V);
}

TEST_CASE("Fubini-Study atlas: origin value, degree normalization, transitions") {
    auto atlas = fubini_study_atlas(1, 128);
    const auto& m = *atlas.manifold;
    CHECK(m.chart_count() == 2);
    // Grid is cell-centered; the FS matrix at z = 0 is evaluated directly.
    Herm h0 = fubini_study_matrix({cplx(0, 0)});
    CHECK(h0(0, 0).real() == doctest::Approx(0.5));
    Herm h2 = fubini_study_matrix({cplx(0, 0), cplx(0, 0)});
    CHECK(h2(0, 0).real() == doctest::Approx(0.5));
    CHECK(h2(1, 1).real() == doctest::Approx(0.5));
    CHECK(std::abs(h2(0, 1)) == 0.0);

    CHECK(volume(*atlas.form).V == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(chart_transition_defect(*atlas.form) < 1e-10);

    CHECK_THROWS_AS(fubini_study_atlas(1, 8), Error);
    CHECK_THROWS_AS(fubini_study_atlas(3, 16), Error);
}

TEST_CASE("P2 atlas: volume one and consistent charts") {
    auto atlas = fubini_study_atlas(2, 24);
    CHECK(volume(*atlas.form).V == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(chart_transition_defect(*atlas.form) < 1e-10);
}

TEST_CASE("every atlas grid point has one owner chart and is representable there") {
    auto m = build_atlas(1, 32);
    for (std::size_t i = 0; i < m->size(); ++i) {
        int owner = m->owner_chart(i);
        CHECK(owner >= 0);
        CHECK(owner < m->chart_count());
        CHECK(m->representable(i, owner));
        CHECK(m->representable(i, m->chart_of(i)));
    }
}

TEST_CASE("mixed discriminant polarizes the determinant") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        for (int n : {1, 2, 3}) {
            Herm a(n), b(n);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    cplx x(N(rng), i == j ? 0 : N(rng)), y(N(rng), i == j ? 0 : N(rng));
                    a(i, j) = x;
                    a(j, i) = std::conj(x);
                    b(i, j) = y;
                    b(j, i) = std::conj(y);
                }
            std::vector<Herm> same(n, a);
            CHECK(mixed_discriminant(same) == doctest::Approx(det(a)).epsilon(1e-10));
            // det(a + t b) = sum_k binom(n,k) t^k D(a^{n-k}, b^k).
            double t = 0.37;
            double expansion = 0;
            for (int k = 0; k <= n; ++k) {
                std::vector<Herm> hs;
                for (int i = 0; i < n - k; ++i) hs.push_back(a);
                for (int i = 0; i < k; ++i) hs.push_back(b);
                double binom = 1;
                for (int i = 1; i <= k; ++i) binom = binom * (n - k + i) / i;
                expansion += binom * std::pow(t, k) * mixed_discriminant(hs);
            }
            CHECK(expansion == doctest::Approx(det(a + b * t)).epsilon(1e-10));
        }
    }
}

TEST_CASE("collapsing path volume matches the exact binomial expansion") {
    auto m = square_torus(2, 8);
    auto omega_z = constant_form(m, Herm::diagonal({0.0, 1.0}), "f*omega_Z");
    auto omega_x = constant_form(m, Herm::identity(2), "omega_X");
    CHECK_FALSE(omega_z->kahler());
    auto c = binomial_volume_coefficients(*omega_z, *omega_x);
    CHECK(std::abs(c[0]) < 1e-14);
    CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(c[2] == doctest::Approx(1.0).epsilon(1e-13));
    for (double t : {0.2, 0.1, 0.05, 0.025, 1e-3}) {
        auto wt = form_combination(*omega_z, *omega_x, t, "omega_t");
        CHECK(std::abs(volume(*wt).V - (t + t * t)) <= 1e-12 * (t + t * t));
        // Leading-order behaviour: V_t / (2t) -> int omega_Z ^ omega_X.
        CHECK(std::abs(volume(*wt).V / (2 * t) - 0.5) <= t);
    }
}

TEST_CASE("volume along a path with fixed class is constant") {
    // omega + dd^c(s cos 2 pi x) on a 1-torus stays in the class of omega.
    auto m = square_torus(1, 32);
    for (double s : {0.0, 0.01, 0.02}) {
        auto f = make_form(m, [&](std::size_t i) {
            double x = m->coords(i)(0);
            return Herm::identity(1, 1.0 - s * kPi * kPi * std::cos(2 * kPi * x));
        }, "path");
        CHECK(volume(*f).V == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("closedness check rejects non-closed variable forms in dimension two") {
    auto m = square_torus(2, 16);
    auto bad = [&](std::size_t i) {
        double x1 = m->coords(i)(0);
        Herm h = Herm::identity(2);
        h(1, 1) = 1.0 + 0.1 * std::sin(2 * kPi * x1);
        return h;
    };
    CHECK_THROWS_AS(make_form(m, bad, "bad"), Error);
    auto good = [&](std::size_t i) {
        double x1 = m->coords(i)(0);
        Herm h = Herm::identity(2);
        h(0, 0) = 1.0 + 0.1 * std::sin(2 * kPi * x1);
        return h;
    };
    auto f = make_form(m, good, "good");
    CHECK(f->closedness_residual() <= 1e-8);
}

TEST_CASE("negative forms are rejected") {
    auto m = square_torus(1, 8);
    CHECK_THROWS_AS(constant_form(m, Herm::identity(1, -1.0), "neg"), Error);
}

TEST_CASE("complex Hessian of |z|^2 is the identity") {
    auto m = square_torus(2, 16, 4.0);
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < m->size(); ++i) v[i] = m->coords(i).squaredNorm();
    // Away from the periodic seam the quadratic is reproduced exactly.
    int mi[4] = {8, 8, 8, 8};
    std::size_t idx = m->flat_index(0, mi);
    Herm h;
    REQUIRE(complex_hessian(*m, v, idx, h));
    CHECK(h(0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h(1, 1).real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(h(0, 1)) < 1e-12);
}

TEST_CASE("grid CSV dump has one row per grid point") {
    auto m = square_torus(1, 8);
    std::vector<double> v(m->size(), 1.5);
    std::ostringstream os;
    dump_grid_csv(os, *m, v);
    std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 65);
}
