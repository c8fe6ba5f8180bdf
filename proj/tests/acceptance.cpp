// One PASS/FAIL line per acceptance criterion; exits nonzero when any fails.
#include "pluri/apriori_bounds.hpp"
#include "pluri/cli_runner.hpp"
#include "pluri/density_models.hpp"
#include "pluri/family_lab.hpp"
#include "pluri/green_heat.hpp"
#include "pluri/ma_solver.hpp"
#include "pluri/skoda_lab.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace pluri;

namespace {

using mp = boost::multiprecision::cpp_dec_float_50;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    o.require(secs < budget_s, "runtime budget " + std::to_string(static_cast<int>(budget_s)) + " s");
    if (!o.ok) ++failures;
    std::printf("%s %2d %s (%.1f s):%s\n", o.ok ? "PASS" : "FAIL", id, name, secs, o.detail.str().c_str());
    std::fflush(stdout);
}

// phi* = a cos(k x1) cos(k y1) [+ a sin(k (x1 + x2)) + a cos(k y2)] with its exact real Hessian.
struct Manufactured {
    int n;
    double a = 0.02;
    static constexpr double k = 2 * kPi;

    double value(const Eigen::VectorXd& x) const {
        double s = a * std::cos(k * x(0)) * std::cos(k * x(1));
        if (n == 2) s += a * std::sin(k * (x(0) + x(2))) + a * std::cos(k * x(3));
        return s;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        const double k2 = k * k;
        const double cc = std::cos(k * x(0)) * std::cos(k * x(1));
        const double ss = std::sin(k * x(0)) * std::sin(k * x(1));
        H(0, 0) = H(1, 1) = -a * k2 * cc;
        H(0, 1) = H(1, 0) = a * k2 * ss;
        if (n == 2) {
            const double s = -a * k2 * std::sin(k * (x(0) + x(2)));
            H(0, 0) += s;
            H(2, 2) += s;
            H(0, 2) += s;
            H(2, 0) += s;
            H(3, 3) += -a * k2 * std::cos(k * x(3));
        }
        return H;
    }
};

double manufactured_error(int n, int res) {
    const Manufactured ms{n};
    const ManifoldPtr m = square_torus(n, res);
    MaProblem p;
    p.omega = constant_form(m, Herm::identity(n), "omega");
    p.lambda = 0;
    p.density.resize(m->size());
    for (std::size_t i = 0; i < m->size(); ++i)
        p.density[i] = det(Herm::identity(n) + complexify_hessian(ms.hessian(m->coords(i)), n));
    normalize_density(p);
    const MaSolution s = solve_ma(p);
    std::vector<double> exact(m->size());
    for (std::size_t i = 0; i < m->size(); ++i) exact[i] = ms.value(m->coords(i));
    const double top = max_value(exact);
    double e = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) e = std::max(e, std::abs(exact[i] - top - s.phi[i]));
    return e;
}

double trivial_error(int n, int res, int lambda) {
    MaProblem p;
    p.omega = constant_form(square_torus(n, res), Herm::identity(n), "omega");
    p.lambda = lambda;
    p.density.assign(p.omega->manifold().size(), 1.0);
    return sup_norm(solve_ma(p).phi.values());
}

Mask disk(const ModelManifold& m, double R) {
    Mask K(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Eigen::VectorXd u = m.coords(i);
        double r2 = 0.0;
        for (int a = 0; a < 2; ++a) {
            const double d = std::abs(u(a) - 0.5);
            r2 += std::min(d, 1.0 - d) * std::min(d, 1.0 - d);
        }
        K[i] = std::sqrt(r2) <= R;
    }
    return K;
}

std::vector<cplx> random_point(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<cplx> v(dim);
    for (auto& c : v) c = cplx(g(rng), g(rng));
    return v;
}

std::vector<double> fd_power_eigenvalues(double beta, const std::vector<cplx>& z) {
    const int n = static_cast<int>(z.size());
    Eigen::VectorXd x(2 * n);
    for (int j = 0; j < n; ++j) {
        x(2 * j) = z[j].real();
        x(2 * j + 1) = z[j].imag();
    }
    auto f = [&](const Eigen::VectorXd& p) { return std::pow(p.squaredNorm(), beta); };
    const double h = 1e-4;
    Eigen::MatrixXd H(2 * n, 2 * n);
    for (int a = 0; a < 2 * n; ++a)
        for (int b = 0; b < 2 * n; ++b) {
            Eigen::VectorXd pp = x, pm = x, mp_ = x, mm = x;
            pp(a) += h;
            pp(b) += h;
            pm(a) += h;
            pm(b) -= h;
            mp_(a) -= h;
            mp_(b) += h;
            mm(a) -= h;
            mm(b) -= h;
            H(a, b) = (f(pp) - f(pm) - f(mp_) + f(mm)) / (4 * h * h);
        }
    return eigenvalues(complexify_hessian(H, n));
}

SncLocalModel model(int p, int s, std::vector<double> a, int m = 1, int n = 0) {
    SncLocalModel M;
    M.p = p;
    M.s = s;
    M.a = std::move(a);
    M.m = m;
    M.n = n > 0 ? n : p;
    return M;
}

}  // namespace

int main() {
    criterion(1, "constant conformance", 1.0, [](Outcome& o) {
        const double e = kE;
        o.require(std::abs(bn_constant(1) - 4.0 / (e * e)) <= 1e-12, "b_1");
        o.require(std::abs(bn_constant(2) - 16.0 / (e * e)) <= 1e-12, "b_2");
        HypothesisData h;
        h.n = 1;
        h.p = 2;
        h.C = 1;
        h.alpha = 1;
        h.A = 1;
        const double M = kolodziej_bound(h).M;
        const mp E = boost::multiprecision::exp(mp(1));
        const mp oracle = 1 + 4 * boost::multiprecision::exp(mp(-1.5)) * (5 + E * boost::multiprecision::sqrt(mp(2)));
        const double err = std::abs(M - static_cast<double>(oracle));
        o.detail << " M = " << M << ", error " << err;
        o.require(err <= 1e-9, "kolodziej_bound");
    });

    criterion(2, "iteration certificate", 1.0, [](Outcome& o) {
        int bad = 0;
        double worst = -INFINITY;
        for (int i = 0; i < 100; ++i) {
            const GiorgioScenario g = random_giorgio_scenario(1000 + i);
            const GiorgioResult r = giorgio_iteration(g, g.D, g.n, g.s_start);
            const double sharp = g.s_start + kE * kE / (kE - 1.0) * std::pow(g.D, 1.0 / g.n);
            worst = std::max(worst, r.s_infinity - sharp);
            if (!r.halted || r.s_infinity > r.bound || r.s_infinity > sharp + 1e-9) ++bad;
        }
        o.detail << " 100 scenarios, " << bad << " violations, max s_inf - sharp bound " << worst;
        o.require(bad == 0, "scenarios");
    });

    criterion(3, "Orlicz suite", 1.0, [](Outcome& o) {
        double d_err = 0.0, l_err = 0.0, fd_err = 0.0;
        for (int n : {1, 2, 3}) {
            const OrliczMachinery c(n);
            o.require(c.chi(0.0) == 0.0, "chi(0) = 0");
            for (int k = 0; k < 20; ++k) {
                const double t = 0.05 + 0.5 * k;
                d_err = std::max(d_err, std::abs(c.chi_prime(t) - std::pow(std::log1p(t), n + 1)));
                // Five-point derivative of chi itself.
                const double h = 1e-3;
                const double fd = (-c.chi(t + 2 * h) + 8 * c.chi(t + h) - 8 * c.chi(t - h) + c.chi(t - 2 * h)) / (12 * h);
                fd_err = std::max(fd_err, std::abs(fd - std::pow(std::log1p(t), n + 1)) / (1 + std::abs(fd)));
                const double s = c.chi_prime(t);
                l_err = std::max(l_err, std::abs(c.chi(t) + c.chi_star(s) - t * s));
            }
        }
        const double star1 = OrliczMachinery(1).chi_star(1.0);
        o.detail << " chi' error " << d_err << " (finite differences " << fd_err << "), Legendre error " << l_err << ", chi*(1) = " << star1;
        o.require(d_err <= 1e-10, "chi'");
        o.require(fd_err <= 1e-8, "chi' against finite differences");
        o.require(l_err <= 1e-10, "Legendre identity");
        o.require(std::abs(star1 - 1.0) <= 1e-10, "chi*(1)");
    });

    criterion(4, "Monge-Ampere solver", 600.0, [](Outcome& o) {
        const double t1 = trivial_error(1, 64, 0), t2 = trivial_error(1, 64, 1);
        o.require(t1 <= 1e-8 && t2 <= 1e-8, "trivial cases");
        const double c1 = manufactured_error(1, 32), f1 = manufactured_error(1, 64);
        const auto t0 = Clock::now();
        const double c2 = manufactured_error(2, 12), f2 = manufactured_error(2, 24);
        const double n2_secs = std::chrono::duration<double>(Clock::now() - t0).count();
        o.detail << " n=1: " << c1 << " -> " << f1 << " (ratio " << c1 / f1 << "); n=2: " << c2 << " -> " << f2
                 << " (ratio " << c2 / f2 << ", " << n2_secs << " s); trivial " << std::max(t1, t2);
        o.require(c1 / f1 >= 3.5 && c1 / f1 <= 4.5, "n=1 ratio");
        o.require(c2 / f2 >= 3.5 && c2 / f2 <= 4.5, "n=2 ratio");
        o.require(n2_secs < 300.0, "n=2 under 5 min");
    });

    criterion(5, "capacity suite", 120.0, [](Outcome& o) {
        const FormPtr om = constant_form(square_torus(1, 32), Herm::identity(1), "omega");
        const ModelManifold& m = om->manifold();
        const CapacityReport whole = capacities(Mask(m.size(), 1), om);
        o.require(whole.cap == 1.0 && whole.t_cap == 1.0, "Cap(X) = T(X) = 1");
        const auto dict = trig_psh_dictionary(*om, 9, 11);

        // Sets: five disks and sublevel sets of nine dictionary members at five depths.
        std::vector<Mask> sets;
        for (double R : {0.05, 0.1, 0.15, 0.2, 0.3}) sets.push_back(disk(m, R));
        for (const auto& u : dict) {
            const double lo = min_value(u);
            for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) sets.push_back(sublevel_mask(u, lo * (1.0 - f)));
        }
        // 1e-3 absorbs the discretization error of the discrete extremal function.
        int v12 = 0;
        double excess = -INFINITY;
        for (const Mask& K : sets) {
            const CapacityReport r = capacities(K, om);
            const double e = r.t_cap - std::exp(1.0 - 1.0 / r.cap);
            excess = std::max(excess, e);
            if (e > 1e-3) ++v12;
        }
        // Functions: five members, five depths s, two margins delta.
        int v13 = 0, n13 = 0;
        for (int j = 0; j < 5; ++j) {
            const QuasiPshFunction phi(om, dict[j], Normalization::SupZero);
            for (double s : {0.05, 0.1, 0.2, 0.3, 0.4})
                for (double d : {0.2, 0.5}) {
                    ++n13;
                    if (!capma_check(phi, s, d).holds) ++v13;
                }
        }
        o.detail << " T <= exp(1 - 1/Cap): " << v12 << "/" << sets.size() << " violations (max excess " << excess
                 << "); capacity-MA comparison: " << v13
                 << "/" << n13 << " violations";
        o.require(sets.size() == 50 && n13 == 50, "50-case lattices");
        o.require(v12 == 0, "T vs Cap");
        o.require(v13 == 0, "capacity-MA comparison");
    });

    criterion(6, "Skoda suite", 60.0, [](Outcome& o) {
        const Atlas a = fubini_study_atlas(1, 48);
        int strict = 0;
        const auto dict = projective_dictionary(a.form, 30, 2024);
        for (const auto& psi : dict) {
            const ProjectiveSkodaReport r = projective_skoda_check(psi);
            strict += r.holds && r.lhs < r.rhs;
        }
        std::mt19937_64 rng(77);
        int kernel_ok = 0, kernel_n = 0;
        for (int s = 0; s < 100; ++s) {
            const int dim = 2 + s % 3;
            const auto x = random_point(rng, dim), y = random_point(rng, dim);
            for (double delta : {0.1, 0.5, 0.9}) {
                const KernelReport r = kernel_inequality_check(x, y, delta);
                ++kernel_n;
                kernel_ok += r.holds_i && r.holds_ii;
            }
        }
        std::mt19937_64 rng2(5);
        std::uniform_real_distribution<double> B(0.2, 3.0);
        double eig_err = 0.0;
        for (int k = 0; k < 20; ++k) {
            const double beta = B(rng2);
            auto z = random_point(rng2, 2 + k % 2);
            for (auto& c : z) c *= 0.5;
            const PowerHessianReport r = power_hessian_eigenvalues(beta, z);
            const std::vector<double> fd = fd_power_eigenvalues(beta, z);
            for (std::size_t j = 0; j < fd.size(); ++j) eig_err = std::max(eig_err, std::abs(fd[j] - r.eigenvalues[j]));
        }
        o.detail << " P^1 inequality strict for " << strict << "/" << dict.size() << "; kernel bounds " << kernel_ok << "/"
                 << kernel_n << "; eigenvalue error " << eig_err;
        o.require(dict.size() == 30 && strict == 30, "P^1 inequality");
        o.require(kernel_n == 300 && kernel_ok == kernel_n, "kernel bounds");
        o.require(eig_err <= 1e-6, "power Hessian eigenvalues");
    });

    criterion(7, "conic counterexample", 60.0, [](Outcome& o) {
        const ConicReport r = conic_counterexample({1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
        double sup = 0.0;
        for (const auto& l : r.levels) sup = std::max(sup, std::abs(l.sup));
        o.detail << " slope " << r.slope << ", max |sup phi_t| " << sup;
        o.require(std::abs(r.slope - 0.5) <= 0.1, "slope");
        o.require(sup <= 1e-8, "sup-normalized");
    });

    criterion(8, "density certificates", 60.0, [](Outcome& o) {
        const WtIntegral w = wt_integral(model(1, 1, {-1.0}), 1.0, 0.3, 1e-6);
        const double exact = 1.0 / std::log(2.0) - 1.0 / std::log(1e6);
        o.require(std::abs(w.value - exact) <= 1e-9, "W_t integral");
        std::vector<IntegralCertificate> certs = {
            canonical_integrability(model(1, 0, {0.0}), 0.5),
            canonical_integrability(model(2, 0, {0.0, 0.0}), 0.4),
            canonical_integrability(model(3, 0, {0.0, 0.0, 0.0}, 1, 4), 0.3),
            h2prime_certificate(model(1, 1, {-1.0}), 1.0),
            h2prime_certificate(model(1, 0, {-0.5}, 2), 1.0),
            h2prime_certificate(model(2, 1, {-1.0, -0.5}, 2, 3), 1.0, {1e-1, 1e-2, 1e-3, 1e-4}),
            h2prime_certificate(model(2, 2, {-1.0, -1.0}), 1.5, {1e-1, 1e-2, 1e-3, 1e-4}),
        };
        int bounded = 0;
        double cf = 0.0;
        for (const auto& c : certs) {
            bounded += c.verdict == "uniformly bounded";
            if (std::isfinite(c.max_closed_form_error)) cf = std::max(cf, c.max_closed_form_error);
        }
        o.detail << " W_t = " << w.value << " (error " << std::abs(w.value - exact) << "); " << bounded << "/"
                 << certs.size() << " ladders uniformly bounded; closed-form error " << cf;
        o.require(bounded == static_cast<int>(certs.size()), "verdicts");
        o.require(cf <= 1e-6, "closed-form agreement");
    });

    criterion(9, "Green and heat suite", 120.0, [](Outcome& o) {
        const FormPtr om = constant_form(square_torus(1, 32), Herm::identity(1), "omega");
        const ModelManifold& m = om->manifold();
        const GreenFunction G = torus_green(0, om);
        const std::vector<double> L = discrete_laplacian(*om, G.values);
        const double cell = det(om->at(0)) * m.cell_measure();
        double err = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double want = 1.0 / G.V - (i == 0 ? 1.0 / cell : 0.0);
            err = std::max(err, std::abs(L[i] - want) / (i == 0 ? 1.0 / cell : 1.0));
        }
        const double sg = semigroup_defect(*om, 0.05, 0.07, 20, 3);
        auto dict = trig_psh_dictionary(*om, 40, 5);
        const auto maxima = pairwise_maxima(dict, 20, 6);
        dict.insert(dict.end(), maxima.begin(), maxima.end());
        dict.push_back(smoothed_green_potential(G, 0.0));
        int held = 0;
        for (const auto& v : dict) held += mean_value_inequality(QuasiPshFunction(om, v, Normalization::SupZero), G).holds;
        o.detail << " Laplacian residual " << err << ", semigroup defect " << sg << ", mean-value inequality " << held << "/"
                 << dict.size();
        o.require(err <= 1e-6, "Laplacian");
        o.require(sg <= 1e-8, "semigroup");
        o.require(held == static_cast<int>(dict.size()), "mean-value inequality");
    });

    criterion(10, "family suite", 900.0, [](Outcome& o) {
        const FamilyExperiment gen = general_type_family({1e-1, 1e-2, 1e-3, 1e-4}, sine_h_family(), 5.0);
        o.require(gen.checks.at("bornesup"), "(a) sup bound");

        CuspProblem P;
        P.scaled_density = model_cusp_density();
        const CuspReport cusp = cusp_exponent(P);
        o.require(std::abs(cusp.kappa - 2.0) <= 0.05, "(b) cusp exponent");

        const FamilyExperiment cy = cy_oscillation({1e-1, 1e-2, 1e-3, 1e-4}, cosine_mu_family());
        o.require(cy.checks.at("osc_below_certificate"), "(c) oscillation");

        const FamilyExperiment col = collapsing_fibration({0.16, 0.08, 0.04, 0.01});
        const auto& l1 = col.convergence->l1;
        o.require(col.checks.at("l1_strictly_decreasing"), "(d) L1 decreasing");
        o.require(l1.size() == 4 && l1.back() < 0.1 * l1.front(), "(d) final below 10%");
        o.require(col.checks.at("fiber_osc_linear"), "(d) fiber oscillation");
        o.require(col.scalars.at("vt_error") <= 1e-12, "(d) volume expansion");
        o.detail << " sup phi_t slack " << gen.scalars.at("slack") << "; kappa " << cusp.kappa << "; CY osc "
                 << cy.scalars.at("osc_max") << " <= M " << cy.scalars.at("M") << "; collapsing L1 " << l1.front() << " -> "
                 << l1.back() << ", g_hat " << col.scalars.at("g_hat") << ", V_t error " << col.scalars.at("vt_error");
    });

    criterion(11, "determinism", 300.0, [](Outcome& o) {
        ExperimentConfig cfg;
        parse_config_text("seed = 13\n[family]\nkind = noncollapsing\n[solve]\npreset = manufactured\n", cfg);
        int same = 0, total = 0;
        for (const std::string& s : subcommands()) {
            if (s == "all") continue;
            cfg.subcommand = s;
            const RunResult a = run(cfg), b = run(cfg);
            ++total;
            same += a.report == b.report && a.table == b.table;
            o.require(a.exit_code == 0, s + " passes");
        }
        o.detail << " " << same << "/" << total << " reports byte-identical";
        o.require(same == total, "byte-identical reports");
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
