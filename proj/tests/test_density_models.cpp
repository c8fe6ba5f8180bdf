#include "doctest.h"
#include "pluri/density_models.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace pluri;

namespace {

SncLocalModel model(int p, int s, std::vector<double> a, int m = 1, int n = 0) {
    SncLocalModel M;
    M.p = p;
    M.s = s;
    M.a = std::move(a);
    M.m = m;
    M.n = n > 0 ? n : p;
    return M;
}

double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

}  // namespace

TEST_CASE("model validation and parsing") {
    CHECK_NOTHROW(model(2, 1, {-1.0, 0.5}, 2).validate());
    CHECK_THROWS_AS(model(1, 0, {-1.5}).validate(), Error);
    CHECK_THROWS_AS(model(1, 0, {-0.3}, 2).validate(), Error);  // m a not integral
    CHECK_THROWS_AS(model(2, 0, {-1.0, 0.0}).validate(), Error);  // a = -1 outside the first s
    CHECK_THROWS_AS(model(4, 0, {0, 0, 0, 0}).validate(), Error);

    const SncLocalModel M = parse_snc_model("# lc branch plus a klt branch\np = 2\ns = 1\nm = 2\na_list = -1, -0.5\neps = 1\ndelta = 0.2\n");
    CHECK(M.p == 2);
    CHECK(M.n == 2);
    CHECK(M.s == 1);
    CHECK(M.a[1] == doctest::Approx(-0.5));
    CHECK(M.delta == doctest::Approx(0.2));
    CHECK_THROWS_AS(parse_snc_model("p = 1\nfoo = 2\na_list = 0\n"), Error);
    CHECK_THROWS_AS(parse_snc_model("p = 2\na_list = 0\n"), Error);
    CHECK_THROWS_AS(parse_snc_model("p = one\n"), Error);
}

TEST_CASE("canonical integrability: closed forms and t-uniformity") {
    // p = 1: 2 pi int_t^1 r^{1 - 2 dA} dr.
    const auto c1 = canonical_integrability(model(1, 0, {0.0}), 0.5);
    for (std::size_t k = 0; k < c1.ladder.size(); ++k) {
        const double t = c1.ladder[k];
        CHECK(c1.values[k] == doctest::Approx(kPi * (1.0 - t) / 0.5).epsilon(1e-10));
        CHECK(c1.box_bound[k] == doctest::Approx(c1.values[k]).epsilon(1e-10));
    }
    CHECK(c1.limit == doctest::Approx(2.0 * kPi));
    CHECK(c1.bounded);
    CHECK(c1.verdict == "uniformly bounded");

    // dA = 0: fiber area of {|z_1 z_2| > t} in the bidisk is pi^2 (1 - t^2 - 2 t^2 log(1/t)).
    const auto area = canonical_integrability(model(2, 0, {0.0, 1.0}), 0.0, {0.5, 0.1, 1e-3});
    for (std::size_t k = 0; k < area.ladder.size(); ++k) {
        const double t = area.ladder[k];
        CHECK(area.values[k] == doctest::Approx(kPi * kPi * (1.0 - t * t + 2.0 * t * t * std::log(t))).epsilon(1e-10));
        CHECK(area.values[k] <= kPi * kPi);
    }

    // p = 2, dA = 0.4 on the default ladder: iterated integral with the inner one done by hand.
    const auto c2 = canonical_integrability(model(2, 0, {0.0, 0.0}), 0.4);
    CHECK(c2.monotone);
    CHECK(c2.bounded);
    CHECK(c2.max_closed_form_error < 1e-6);
    const double e = 1.0 - 2.0 * 0.4;
    for (std::size_t k = 0; k < c2.ladder.size(); k += 3) {
        const double t = c2.ladder[k];
        const double oracle = 4.0 * kPi * kPi * gk([&](double r) {
            return std::pow(r, e) * (1.0 - std::pow(t / r, e + 1.0)) / (e + 1.0);
        }, t, 1.0);
        CHECK(c2.values[k] == doctest::Approx(oracle).epsilon(1e-8));
        CHECK(c2.values[k] <= c2.box_bound[k]);
    }

    // Distinct exponents from a klt pole: |z_1|^{-1} from a_1 = -1/2 (m = 2).
    const auto c3 = canonical_integrability(model(2, 0, {-0.5, 0.0}, 2), 0.1);
    CHECK(c3.max_closed_form_error < 1e-8);
    CHECK(c3.limit == doctest::Approx(kPi / 0.4 * kPi / 0.9));

    // Three branches and a free coordinate.
    const auto c4 = canonical_integrability(model(3, 0, {0.0, 0.0, 0.0}, 1, 4), 0.3);
    CHECK(c4.bounded);
    CHECK(c4.max_closed_form_error < 1e-6);

    CHECK_THROWS_AS(canonical_integrability(model(1, 0, {0.0}), 1.0), Error);
    CHECK_THROWS_AS(canonical_integrability(model(1, 0, {-0.5}, 2), 0.5), Error);
    CHECK_THROWS_AS(canonical_integrability(model(1, 1, {-1.0}), 0.1), Error);
    CHECK_THROWS_AS(canonical_integrability(model(1, 0, {0.0}), 0.1, {0.1, 0.2}), Error);
}

TEST_CASE("canonical integrability: threshold sharpness") {
    // The integral blows up like (1 - dA)^{-1}: consecutive ratios track the closed-form ratio.
    const std::vector<double> dAs = {0.5, 0.6, 0.7, 0.8};
    std::vector<double> sups;
    for (double dA : dAs) sups.push_back(canonical_integrability(model(1, 0, {0.0}), dA).sup);
    for (std::size_t k = 1; k < dAs.size(); ++k) {
        const double predicted = (1.0 - dAs[k - 1]) / (1.0 - dAs[k]);
        CHECK(std::abs(sups[k] / sups[k - 1] / predicted - 1.0) < 0.1);
    }
}

TEST_CASE("weighted integral over W_t") {
    const SncLocalModel lc = model(1, 1, {-1.0});
    const WtIntegral w = wt_integral(lc, 1.0, 0.3, 1e-6);
    const double exact = 1.0 / std::log(2.0) - 1.0 / std::log(1e6);
    CHECK(std::abs(w.value - exact) < 1e-9);
    CHECK(std::abs(w.closed_form - exact) < 1e-14);
    CHECK(w.value == doctest::Approx(1.370313).epsilon(1e-6));
    CHECK(w.bound == doctest::Approx(1.0 / std::log(2.0)));
    CHECK(wt_integral(lc, 1.0, 0.3, 0.5).value == 0.0);
    CHECK(wt_integral(lc, 1.0, 0.3, 0.7).value == 0.0);

    // s = 1, p = 2: inner klt integral in closed form, outer by quadrature.
    const SncLocalModel mixed = model(2, 1, {-1.0, 0.0});
    const double d = 0.3, t = 1e-5;
    const WtIntegral w2 = wt_integral(mixed, 1.0, d, t);
    const double oracle = gk([&](double r) {
        return (std::pow(0.5, d) - std::pow(t / r, d)) / d / (r * std::pow(std::log(r), 2));
    }, 2.0 * t, 0.5);
    CHECK(w2.value == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(w2.bound == doctest::Approx(std::pow(0.5, d) / d / std::log(2.0)));
    CHECK(w2.value < w2.bound);

    // Monotone in t and below the product bound for p = 3.
    const SncLocalModel three = model(3, 1, {-1.0, 0.0, 0.5}, 2);
    double prev = 0.0;
    for (double tt : {1e-2, 1e-4, 1e-6}) {
        const WtIntegral x = wt_integral(three, 0.5, 0.2, tt);
        CHECK(x.value > prev);
        CHECK(x.value < x.bound);
        prev = x.value;
    }

    CHECK_THROWS_AS(wt_integral(lc, 0.0, 0.3, 1e-3), Error);
    CHECK_THROWS_AS(wt_integral(model(1, 0, {-0.5}, 2), 1.0, 0.3, 1e-3), Error);  // delta >= (1 + a)/2
}

TEST_CASE("(H2') certificates") {
    // One lc branch, n = 1, eps = 1: the majorant is the t -> 0 limit.
    const auto c = h2prime_certificate(model(1, 1, {-1.0}), 1.0);
    CHECK(c.bounded);
    CHECK(c.monotone);
    CHECK(c.max_closed_form_error < 1e-6);
    CHECK(c.sup <= c.majorant);
    CHECK(c.sup >= 0.5 * c.majorant);
    // Direct oracle at t = 1e-4 with v = log 2 + u: 2 pi 2^{-4} int (v^{-2} + log2^2 v^{-4}) dv.
    const double L = std::log(1e4), l2 = std::log(2.0);
    const double direct = 2.0 * kPi / 16.0 * gk([&](double v) { return 1.0 / (v * v) + l2 * l2 / std::pow(v, 4); }, 2 * l2, l2 + L);
    const auto single = h2prime_certificate(model(1, 1, {-1.0}), 1.0, {1e-4});
    CHECK(single.values[0] == doctest::Approx(direct).epsilon(1e-10));

    // klt-only model: bounded, matches the incomplete-gamma form.
    const auto k = h2prime_certificate(model(1, 0, {-0.5}, 2), 1.0);
    CHECK(k.bounded);
    CHECK(k.max_closed_form_error < 1e-6);

    // Mixed model in two variables, free coordinate.
    const auto mix = h2prime_certificate(model(2, 1, {-1.0, -0.5}, 2, 3), 1.0, {1e-1, 1e-2, 1e-3, 1e-4});
    CHECK(mix.bounded);
    CHECK(std::isnan(mix.closed_form[0]));

    // Two lc branches: the majorant needs eps > 1.
    const auto two_ok = h2prime_certificate(model(2, 2, {-1.0, -1.0}), 1.5, {1e-1, 1e-2, 1e-3, 1e-4});
    CHECK(two_ok.bounded);
    const auto two_bad = h2prime_certificate(model(2, 2, {-1.0, -1.0}), 0.5, {1e-1, 1e-2, 1e-3, 1e-4});
    CHECK(!two_bad.bounded);
    CHECK(two_bad.verdict == "diverging");
    CHECK(two_bad.monotone);

    // Smaller eps costs more.
    CHECK(h2prime_certificate(model(1, 1, {-1.0}), 0.25).majorant > c.majorant);
    CHECK_THROWS_AS(h2prime_certificate(model(1, 1, {-1.0}), 0.0), Error);
}

TEST_CASE("fiber density tables") {
    const auto can = fiber_density_table(model(2, 0, {0.0, 1.0}), {{0, 0}, 0.0}, 1e-3, 8);
    for (double d : can.density) CHECK(d == doctest::Approx(1.0));
    CHECK(std::isinf(can.lp_threshold));
    CHECK(can.h2);
    for (const auto& r : can.radii) CHECK(r[0] * r[1] >= 1e-3);

    const auto half = fiber_density_table(model(1, 0, {-0.5}, 2), {{-1}, 0.0}, 1e-4, 10);
    CHECK(half.exponents[0] == doctest::Approx(-0.5));
    CHECK(half.lp_threshold == doctest::Approx(2.0));
    CHECK(half.h2);
    for (std::size_t i = 0; i < half.radii.size(); ++i) CHECK(half.density[i] == doctest::Approx(1.0 / half.radii[i][0]));

    const auto lc = fiber_density_table(model(1, 1, {-1.0}), {{-1}, 0.0}, 1e-4);
    CHECK(lc.lp_threshold == doctest::Approx(1.0));
    CHECK(!lc.h2);
    CHECK(lc.needs_h2prime);

    // Strict-transform branch: h holomorphic there, the 1/z^m factor gives |z|^{-2}.
    SncLocalModel st = model(1, 1, {-1.0});
    st.r = 1;
    const auto strict = fiber_density_table(st, {{0}, 0.0}, 1e-4);
    CHECK(strict.exponents[0] == doctest::Approx(-1.0));
    CHECK(strict.needs_h2prime);
    CHECK_THROWS_AS(fiber_density_table(st, {{-1}, 0.0}, 1e-4), Error);

    CHECK_THROWS_AS(fiber_density_table(model(1, 0, {-0.5}, 2), {{-2}, 0.0}, 1e-4), Error);
    CHECK_THROWS_AS(fiber_density_table(model(1, 0, {0.0}), {{-1}, 0.0}, 1e-4), Error);

    // Perturbation enters through |1 + eta z_1|^{2/m}.
    const auto pert = fiber_density_table(model(1, 0, {0.0}), {{0}, 0.5}, 1e-2, 4);
    for (std::size_t i = 0; i < pert.radii.size(); ++i)
        CHECK(pert.density[i] == doctest::Approx(std::pow(1.0 + 0.5 * pert.radii[i][0], 2.0)));
}
