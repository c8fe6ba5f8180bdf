#include "pluri/cli_runner.hpp"

#include "pluri/apriori_bounds.hpp"
#include "pluri/density_models.hpp"
#include "pluri/family_lab.hpp"
#include "pluri/green_heat.hpp"
#include "pluri/ma_solver.hpp"
#include "pluri/skoda_lab.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pluri {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void usage(const std::string& what) { fail(ErrorKind::Usage, what); }

json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return round12(x);
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::string fmt12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    bool logx = false;
    bool logy = false;
};

struct Outcome {
    std::string statement;
    json results = json::object();
    std::map<std::string, bool> checks;
    Table table;
};

std::string csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << t.columns[j];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << fmt12(r[j]);
        os << "\n";
    }
    return os.str();
}

std::string gnuplot(const Table& t, const std::string& title) {
    if (t.rows.size() < 2 || t.columns.size() < 2) return "";
    std::ostringstream os;
    os << "set datafile separator ','\n";
    os << "set key autotitle columnhead\n";
    os << "set title '" << title << "'\n";
    os << "set xlabel '" << t.columns[0] << "'\n";
    if (t.logx) os << "set logscale x\n";
    if (t.logy) os << "set logscale y\n";
    os << "set terminal pngcairo size 900,600\nset output 'plot.png'\n";
    os << "plot ";
    for (std::size_t j = 1; j < t.columns.size(); ++j)
        os << (j > 1 ? ", \\\n     " : "") << "'table.csv' using 1:" << j + 1 << " with linespoints";
    os << "\n";
    return os.str();
}

// ---------------------------------------------------------------- subcommands

Outcome run_bounds(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "uniform L-infinity estimate: osc(phi) <= M";
    HypothesisData h;
    h.n = c.integer("n", 1);
    h.p = c.number("p", 2.0);
    h.C = c.number("C", 1.0);
    h.alpha = c.number("alpha", 1.0);
    h.A = c.number("A", 1.0);
    h.eps = c.number("eps", 1.0);
    const std::string mode = c.text("mode", "lp");
    if (mode == "lp")
        h.mode = BoundMode::Lp;
    else if (mode == "big")
        h.mode = BoundMode::Big;
    else if (mode == "orlicz")
        h.mode = BoundMode::Orlicz;
    else
        usage("mode must be lp, big or orlicz");
    auto bound = [&](const HypothesisData& d) { return d.mode == BoundMode::Orlicz ? orlicz_bound(d) : kolodziej_bound(d); };
    const BoundCertificate b = bound(h);
    o.results = {{"mode", to_string(b.mode)}, {"n", b.n},      {"alpha", num(b.alpha)}, {"A", num(b.A)},
                 {"p", num(b.p)},             {"q", num(b.q)}, {"C", num(b.C)},         {"eps", num(b.eps)},
                 {"bn", num(b.bn)},           {"D", num(b.D)}, {"s0", num(b.s0)},       {"M", num(b.M)}};
    if (b.mode == BoundMode::Orlicz) {
        o.results["kappa"] = num(b.kappa);
        o.results["kappa_used"] = num(b.kappa_used);
        o.results["E"] = num(b.E);
    }
    o.checks["M_finite"] = std::isfinite(b.M) && b.M > 0.0;
    if (c.has("expect_M")) o.checks["M_expected"] = std::abs(b.M - c.number("expect_M", 0.0)) <= c.number("tol", 1e-9);
    o.table.columns = {"C", "M"};
    o.table.logx = true;
    for (int k = -2; k <= 2; ++k) {
        HypothesisData s = h;
        s.C = h.C * std::ldexp(1.0, k);
        o.table.rows.push_back({s.C, bound(s).M});
    }
    return o;
}

Outcome run_solve(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "complex Monge-Ampere equation on a flat torus";
    const std::string preset = c.text("preset", "flat-trivial");
    const int n = c.integer("n", 1);
    if (n != 1 && n != 2) usage("solve supports n = 1 or 2");
    const int res = c.integer("resolution", n == 1 ? 32 : 8);
    const int lambda = c.integer("lambda", 0);
    const FormPtr om = constant_form(square_torus(n, res), Herm::identity(n), "omega");
    const ModelManifold& m = om->manifold();
    MaProblem P{om, std::vector<double>(m.size(), 1.0), lambda, DensityReference::Form, 1.0, {}, {}};
    P.controls.tolerance = c.number("tolerance", 1e-10);

    std::vector<double> exact(m.size(), 0.0);
    if (preset == "manufactured") {
        const double a = c.number("amplitude", 0.02);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const Eigen::VectorXd x = m.coords(i);
            exact[i] = a * std::cos(2 * kPi * x(0)) * std::cos(2 * kPi * x(1));
            if (n == 2) exact[i] += a * std::sin(2 * kPi * (x(0) + x(2)));
        }
        const DdcField H = ddc(m, exact);
        for (std::size_t i = 0; i < m.size(); ++i)
            P.density[i] = det(om->at(i) + H.h[i]) / det(om->at(i)) * (lambda ? std::exp(-exact[i]) : 1.0);
        if (lambda == 0) {
            const double mean = density_mean(P);
            for (double& f : P.density) f /= mean;
        }
    } else if (preset != "flat-trivial") {
        usage("unknown preset '" + preset + "'");
    }
    const MaSolution s = solve_ma(P);
    std::vector<double> phi = s.phi.values();
    if (lambda == 0) {
        double mp = 0.0, me = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            mp += phi[i];
            me += exact[i];
        }
        for (std::size_t i = 0; i < m.size(); ++i) phi[i] += (me - mp) / static_cast<double>(m.size());
    }
    double err = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) err = std::max(err, std::abs(phi[i] - exact[i]));
    o.results = {{"preset", preset},      {"n", n},
                 {"resolution", res},     {"lambda", lambda},
                 {"sup_error", num(err)}, {"residual", num(s.residual)},
                 {"steps", s.steps},      {"mass_defect", num(s.mass_defect)},
                 {"sup_phi", num(max_value(phi))}, {"inf_phi", num(min_value(phi))}};
    o.checks["converged"] = s.residual <= P.controls.tolerance;
    o.checks["recovers_exact"] = err <= c.number("tol", preset == "flat-trivial" ? 1e-8 : 1e-7);
    o.table.columns = {"step", "residual"};
    o.table.logy = true;
    for (std::size_t k = 0; k < s.history.size(); ++k) o.table.rows.push_back({static_cast<double>(k), s.history[k]});
    return o;
}

Mask disk_mask(const ModelManifold& m, double R) {
    Mask K(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Eigen::VectorXd u = m.unit_coords(i);
        double r2 = 0.0;
        for (int a = 0; a < m.real_dim(); ++a) {
            const double d = std::abs(u(a) - 0.5);
            r2 += std::min(d, 1.0 - d) * std::min(d, 1.0 - d);
        }
        K[i] = std::sqrt(r2) < R;
    }
    return K;
}

Outcome run_capacity(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "Monge-Ampere capacity: Cap, T and the sublevel comparison";
    const int res = c.integer("resolution", 32);
    const FormPtr om = constant_form(square_torus(1, res), Herm::identity(1), "omega");
    const ModelManifold& m = om->manifold();
    const CapacityReport whole = capacities(Mask(m.size(), 1), om);
    o.results["cap_X"] = num(whole.cap);
    o.results["t_cap_X"] = num(whole.t_cap);
    o.checks["whole_manifold"] = whole.cap == 1.0 && whole.t_cap == 1.0;

    o.table.columns = {"radius", "cap", "t_cap"};
    bool monotone = true, tbound = true;
    double last = 0.0;
    for (double R : c.list("radii", {0.05, 0.1, 0.2, 0.3})) {
        const CapacityReport r = capacities(disk_mask(m, R), om);
        o.table.rows.push_back({R, r.cap, r.t_cap});
        monotone = monotone && r.cap >= last - 1e-9;
        tbound = tbound && r.t_cap <= std::exp(1.0 - 1.0 / r.cap) + 1e-3;
        last = r.cap;
    }
    o.checks["monotone"] = monotone;
    o.checks["t_cap_bound"] = tbound;

    int cases = 0, violations = 0;
    const auto dict = trig_psh_dictionary(*om, c.integer("members", 4), c.seed());
    for (const auto& v : dict) {
        const QuasiPshFunction phi(om, v, Normalization::SupZero);
        for (double s : {0.1, 0.3})
            for (double d : {0.2, 0.5}) {
                ++cases;
                if (!capma_check(phi, s, d).holds) ++violations;
            }
    }
    o.results["capma_cases"] = cases;
    o.results["capma_violations"] = violations;
    o.checks["capma"] = violations == 0;
    return o;
}

Outcome run_skoda(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "uniform Skoda integrability on P^1 and the conic family";
    const Atlas a = fubini_study_atlas(1, c.integer("resolution", 48));
    const auto dict = projective_dictionary(a.form, c.integer("count", 30), c.seed());
    json lhs = json::array(), rhs = json::array();
    bool strict = true;
    for (const auto& psi : dict) {
        const ProjectiveSkodaReport r = projective_skoda_check(psi);
        lhs.push_back(num(r.lhs));
        rhs.push_back(num(r.rhs));
        strict = strict && r.holds && r.lhs < r.rhs;
    }
    o.results["dictionary_lhs"] = lhs;
    o.results["dictionary_rhs"] = rhs;
    o.checks["skoda_strict"] = strict;

    const ConicReport cr = conic_counterexample(c.list("ladder", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}));
    double sup_dev = 0.0;
    o.table.columns = {"t", "integral", "gap", "sup"};
    o.table.logx = true;
    for (const auto& l : cr.levels) {
        sup_dev = std::max(sup_dev, std::abs(l.sup));
        o.table.rows.push_back({l.t, l.integral, l.gap, l.sup});
    }
    o.results["conic_slope"] = num(cr.slope);
    o.results["conic_r2"] = num(cr.r2);
    o.results["conic_sup_deviation"] = num(sup_dev);
    o.checks["conic_slope"] = std::abs(cr.slope - 0.5) <= 0.1;
    o.checks["conic_sup_zero"] = sup_dev <= 1e-8;
    return o;
}

json certificate_json(const IntegralCertificate& cert) {
    return {{"ladder", nums(cert.ladder)},
            {"values", nums(cert.values)},
            {"closed_form", nums(cert.closed_form)},
            {"box_bound", nums(cert.box_bound)},
            {"sup", num(cert.sup)},
            {"limit", num(cert.limit)},
            {"majorant", num(cert.majorant)},
            {"max_closed_form_error", num(cert.max_closed_form_error)},
            {"monotone", cert.monotone},
            {"verdict", cert.verdict}};
}

Outcome run_density(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "density integrability on semi-stable fibers";
    std::string text;
    for (const char* k : {"n", "p", "r", "s", "m", "a_list", "eps", "delta", "A"})
        if (c.has(k)) text += std::string(k) + " = " + c.text(k, "") + "\n";
    if (!c.has("a_list")) text += "a_list = 0\n";
    const SncLocalModel M = parse_snc_model(text);
    const std::string integral = c.text("integral", M.canonical() ? "canonical" : "h2prime");
    const std::vector<double> ladder = c.list("ladder", default_t_ladder());
    if (integral == "wt") {
        const double t = c.number("t", 1e-6);
        const WtIntegral w = wt_integral(M, M.eps, M.delta, t);
        o.results = {{"integral", integral}, {"t", num(t)}, {"value", num(w.value)}, {"bound", num(w.bound)},
                     {"closed_form", num(w.closed_form)}};
        o.checks["below_bound"] = w.value <= w.bound;
        if (std::isfinite(w.closed_form)) o.checks["closed_form"] = std::abs(w.value - w.closed_form) <= 1e-9;
        return o;
    }
    IntegralCertificate cert;
    if (integral == "canonical")
        cert = canonical_integrability(M, c.number("dA", 0.0), ladder);
    else if (integral == "h2prime")
        cert = h2prime_certificate(M, M.eps, ladder);
    else
        usage("integral must be canonical, h2prime or wt");
    o.results = certificate_json(cert);
    o.results["integral"] = integral;
    o.checks["closed_form"] = !(cert.max_closed_form_error > 1e-6);
    if (c.has("expect")) {
        const std::string e = c.text("expect", "");
        if (e != "bounded" && e != "diverging") usage("expect must be bounded or diverging");
        o.checks["verdict"] = (e == "bounded") == cert.bounded;
    }
    o.table.columns = {"t", "value", "closed_form", "box_bound"};
    o.table.logx = true;
    for (std::size_t k = 0; k < cert.ladder.size(); ++k)
        o.table.rows.push_back({cert.ladder[k], cert.values[k], cert.closed_form[k], cert.box_bound[k]});
    return o;
}

Outcome run_green(const ExperimentConfig& c) {
    Outcome o;
    o.statement = "Green function and heat kernel bounds";
    const int res = c.integer("resolution", 32);
    const FormPtr om = constant_form(square_torus(1, res), Herm::identity(1), "omega");
    const ModelManifold& m = om->manifold();
    const GreenFunction G = torus_green(0, om);
    const std::vector<double> L = discrete_laplacian(*om, G.values);
    const double cell = det(om->at(0)) * m.cell_measure();
    double err = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double want = 1.0 / G.V - (i == 0 ? 1.0 / cell : 0.0);
        err = std::max(err, std::abs(L[i] - want) / (i == 0 ? 1.0 / cell : 1.0));
    }
    const double sg = semigroup_defect(*om, 0.05, 0.07, c.integer("pairs", 20), c.seed());
    bool mvi = true;
    double min_slack = INFINITY;
    for (const auto& v : trig_psh_dictionary(*om, c.integer("members", 25), c.seed())) {
        const MeanValueReport r = mean_value_inequality(QuasiPshFunction(om, v, Normalization::SupZero), G);
        mvi = mvi && r.holds;
        min_slack = std::min(min_slack, r.min_slack);
    }
    const GreenBoundReport gb = green_bound_report(G);
    o.results = {{"laplacian_residual", num(err)}, {"semigroup_defect", num(sg)}, {"inf_G", num(G.inf)},
                 {"green_bound", num(gb.bound)},   {"mean_value_min_slack", num(min_slack)}};
    o.checks["laplacian_residual"] = err <= 1e-6;
    o.checks["semigroup"] = sg <= 1e-8;
    o.checks["mean_value_inequality"] = mvi;
    o.checks["green_bound"] = gb.holds;

    const HeatTraceReport ht = heat_trace_check(*om, c.list("heat_ladder", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}));
    o.results["heat_C0"] = num(ht.C0_empirical);
    o.results["heat_mass_error"] = num(ht.max_mass_error);
    o.table.columns = {"t", "sup_dev", "scaled"};
    o.table.logx = true;
    o.table.logy = true;
    for (const auto& l : ht.levels) o.table.rows.push_back({l.t, l.sup_dev, l.scaled});
    return o;
}

Outcome family_outcome(const FamilyExperiment& E) {
    Outcome o;
    json series = json::object(), scalars = json::object();
    for (const auto& [k, v] : E.series) series[k] = nums(v);
    for (const auto& [k, v] : E.scalars) scalars[k] = num(v);
    o.results = {{"kind", to_string(E.kind)}, {"ladder", nums(E.ladder)}, {"series", series}, {"scalars", scalars}};
    if (E.convergence) {
        const ConvergenceReport& r = *E.convergence;
        o.results["convergence"] = {{"ladder", nums(r.ladder)},     {"l1", nums(r.l1)},
                                    {"pairing", nums(r.pairing)},   {"rate", num(r.rate)},
                                    {"converges", r.converges},     {"verdict", r.verdict}};
    }
    o.checks = E.checks;
    o.table.columns = {"t"};
    o.table.logx = true;
    for (const auto& [k, v] : E.series)
        if (v.size() == E.ladder.size()) o.table.columns.push_back(k);
    for (std::size_t j = 0; j < E.ladder.size(); ++j) {
        std::vector<double> row{E.ladder[j]};
        for (std::size_t col = 1; col < o.table.columns.size(); ++col) row.push_back(E.series.at(o.table.columns[col])[j]);
        o.table.rows.push_back(std::move(row));
    }
    return o;
}

Outcome run_family(const ExperimentConfig& c) {
    const std::string kind = c.text("kind", "calabi-yau");
    if (kind == "cusp") {
        Outcome o;
        o.statement = "optimal log-log exponent of a cusp potential";
        CuspProblem P;
        const double factor = c.number("perturbation", 0.0);
        P.scaled_density = [factor](double L) { return 2.0 * (1.0 + factor * std::cos(L)); };
        P.nodes = c.integer("nodes", 4000);
        P.L_in = c.number("L_in", 1e6);
        const CuspReport R = cusp_exponent(P);
        o.results = {{"kind", kind},       {"kappa", num(R.kappa)}, {"b", num(R.b)}, {"r2", num(R.r2)},
                     {"verdict", R.verdict}, {"model_deviation", num(R.model_deviation)}};
        o.checks["fitted"] = R.verdict == "fitted";
        if (c.has("expect_kappa"))
            o.checks["kappa"] = std::abs(R.kappa - c.number("expect_kappa", 2.0)) <= c.number("tol", 0.05);
        o.table.columns = {"radius", "phi"};
        o.table.logx = true;
        for (std::size_t k = 0; k < R.rings.size(); ++k) o.table.rows.push_back({R.rings[k], R.values[k]});
        return o;
    }
    if (kind == "general-type" || kind == "general") {
        TorusFamilyOptions opt;
        opt.resolution = c.integer("resolution", 64);
        opt.seed = c.seed();
        Outcome o = family_outcome(
            general_type_family(c.list("ladder", {1e-1, 1e-2, 1e-3, 1e-4}), sine_h_family(), c.number("h_bound", 5.0), opt));
        o.statement = "sup bound 0 <= sup phi_t <= -inf h for lambda = 1 families";
        return o;
    }
    if (kind == "calabi-yau" || kind == "cy") {
        TorusFamilyOptions opt;
        opt.resolution = c.integer("resolution", 64);
        opt.seed = c.seed();
        Outcome o = family_outcome(cy_oscillation(c.list("ladder", {1e-1, 1e-2, 1e-3, 1e-4}), cosine_mu_family(), opt));
        o.statement = "uniform oscillation bound for Ricci-flat families";
        return o;
    }
    if (kind == "stable" || kind == "stable-cusp") {
        SncLocalModel M;
        M.n = c.integer("n", 1);
        M.p = 1;
        M.s = c.integer("s", 1);
        M.m = c.integer("m", M.s == 1 ? 1 : 2);
        M.a = {M.s == 1 ? -1.0 : c.number("a", -0.5)};
        M.eps = c.number("eps", 1.0);
        const IntegralCertificate cert = h2prime_certificate(M, M.eps);
        Outcome o = family_outcome(stable_family_bound(c.list("ladder", {1e-1, 1e-2, 1e-3, 1e-4}), M, &cert));
        o.statement = "log-log lower bound for stable families";
        return o;
    }
    if (kind == "noncollapsing" || kind == "non-collapsing") {
        NonCollapsingOptions opt;
        opt.resolution = c.integer("resolution", 64);
        opt.seed = c.seed();
        Outcome o = family_outcome(noncollapsing_limit(c.list("ladder", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}), opt));
        o.statement = "non-collapsing limit: weak convergence and t-uniform bound";
        return o;
    }
    if (kind == "collapsing" || kind == "collapsing-fibration") {
        CollapsingOptions opt;
        opt.resolution = c.integer("resolution", 24);
        opt.seed = c.seed();
        opt.fiber_dependent = c.integer("fiber_dependent", 1) != 0;
        Outcome o = family_outcome(collapsing_fibration(c.list("ladder", {0.2, 0.1, 0.05, 0.025}), opt));
        o.statement = "collapsing fibration: convergence to the base potential";
        return o;
    }
    usage("unknown family kind '" + kind + "'");
}

Outcome dispatch(const ExperimentConfig& c) {
    const std::string& s = c.subcommand;
    if (s == "bounds") return run_bounds(c);
    if (s == "solve") return run_solve(c);
    if (s == "capacity") return run_capacity(c);
    if (s == "skoda") return run_skoda(c);
    if (s == "density") return run_density(c);
    if (s == "green") return run_green(c);
    if (s == "family") return run_family(c);
    usage("unknown subcommand '" + s + "'");
}

RunResult finish(const ExperimentConfig& c, const Outcome& o) {
    RunResult r;
    json checks = json::object();
    for (const auto& [k, v] : o.checks) {
        checks[k] = v;
        if (!v) r.failed.push_back(k);
    }
    json report = {{"subcommand", c.subcommand},
                   {"statement", o.statement},
                   {"config_hash", c.hash()},
                   {"config", c.resolved()},
                   {"seed", c.seed()},
                   {"results", o.results},
                   {"checks", checks},
                   {"failed", r.failed},
                   {"passed", r.failed.empty()}};
    r.exit_code = r.failed.empty() ? 0 : 1;
    r.report = report.dump(2) + "\n";
    r.table = csv(o.table);
    r.plot = gnuplot(o.table, c.subcommand + ": " + o.statement);
    return r;
}

RunResult error_result(const ExperimentConfig& c, const Error& e) {
    RunResult r;
    const bool usage_error = e.kind() == ErrorKind::Usage || e.kind() == ErrorKind::InvalidInput;
    r.exit_code = usage_error ? 2 : 1;
    r.failed.push_back(std::string("error: ") + e.what());
    json report = {{"subcommand", c.subcommand},
                   {"config_hash", c.hash()},
                   {"config", c.resolved()},
                   {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}},
                   {"failed", r.failed},
                   {"passed", false}};
    r.report = report.dump(2) + "\n";
    return r;
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorKind::Usage, "cannot write " + p.string());
    f << s;
}

void write_outputs(const std::filesystem::path& dir, const RunResult& r) {
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", r.report);
    write_file(dir / "table.csv", r.table);
    if (!r.plot.empty()) write_file(dir / "plot.gp", r.plot);
}

const std::vector<std::string> kModules = {"bounds", "solve", "capacity", "skoda", "density", "green", "family"};

}  // namespace

double round12(double x) {
    if (!std::isfinite(x) || x == 0.0) return x;
    return std::stod(fmt12(x));
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> all = [] {
        std::vector<std::string> v = kModules;
        v.push_back("all");
        return v;
    }();
    return all;
}

// ---------------------------------------------------------------- config

bool ExperimentConfig::has(const std::string& key) const {
    return flags.count(key) || file.count(subcommand + "." + key) || file.count(key);
}

std::string ExperimentConfig::text(const std::string& key, const std::string& fallback) const {
    if (auto it = flags.find(key); it != flags.end()) return it->second;
    if (auto it = file.find(subcommand + "." + key); it != file.end()) return it->second;
    if (auto it = file.find(key); it != file.end()) return it->second;
    return fallback;
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = text(key, "");
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        usage("key '" + key + "' needs a number, got '" + v + "'");
    }
}

int ExperimentConfig::integer(const std::string& key, int fallback) const {
    const double x = number(key, fallback);
    if (x != std::floor(x) || std::abs(x) > 1e9) usage("key '" + key + "' needs an integer");
    return static_cast<int>(x);
}

std::vector<double> ExperimentConfig::list(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(text(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            usage("key '" + key + "' needs a comma-separated list of numbers");
        }
    }
    if (out.empty()) usage("key '" + key + "' is empty");
    return out;
}

std::uint64_t ExperimentConfig::seed() const {
    const double s = number("seed", 7.0);
    if (s < 0 || s != std::floor(s)) usage("seed must be a nonnegative integer");
    return static_cast<std::uint64_t>(s);
}

std::string ExperimentConfig::output_dir() const { return text("out", "pluri_out"); }

std::map<std::string, std::string> ExperimentConfig::resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : file) {
        const auto dot = k.find('.');
        if (dot == std::string::npos) {
            if (!out.count(k)) out[k] = v;
        } else if (k.substr(0, dot) == subcommand) {
            out[k.substr(dot + 1)] = v;
        }
    }
    for (const auto& [k, v] : flags) out[k] = v;
    out.erase("out");
    out.erase("threads");
    return out;
}

std::string ExperimentConfig::hash() const {
    std::string canon = subcommand + "\n";
    for (const auto& [k, v] : resolved()) canon += k + "=" + v + "\n";
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    return buf;
}

void parse_config_text(const std::string& text, ExperimentConfig& cfg) {
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') usage("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) usage("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) usage("config line " + std::to_string(lineno) + ": empty key");
        cfg.file[section.empty() ? key : section + "." + key] = value;
    }
}

void parse_flag_pairs(const std::vector<std::string>& args, ExperimentConfig& cfg) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.size() < 3 || a.compare(0, 2, "--") != 0) usage("unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        if (const auto eq = body.find('='); eq != std::string::npos) {
            cfg.flags[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        if (i + 1 >= args.size()) usage("flag '" + a + "' needs a value");
        cfg.flags[body] = args[++i];
    }
}

// ---------------------------------------------------------------- runs

RunResult run(const ExperimentConfig& cfg) {
    if (cfg.subcommand == "all") {
        RunResult r;
        json parts = json::object();
        for (const std::string& s : kModules) {
            ExperimentConfig sub = cfg;
            sub.subcommand = s;
            const RunResult part = run(sub);
            parts[s] = {{"exit_code", part.exit_code}, {"config_hash", sub.hash()}, {"failed", part.failed}};
            for (const auto& f : part.failed) r.failed.push_back(s + ": " + f);
            r.exit_code = std::max(r.exit_code, part.exit_code);
        }
        json report = {{"subcommand", "all"},   {"config_hash", cfg.hash()}, {"parts", parts},
                       {"failed", r.failed}, {"passed", r.failed.empty()}};
        r.report = report.dump(2) + "\n";
        return r;
    }
    try {
        if (cfg.has("threads")) set_thread_count(cfg.integer("threads", 0));
        return finish(cfg, dispatch(cfg));
    } catch (const Error& e) {
        return error_result(cfg, e);
    }
}

RunResult run_and_write(const ExperimentConfig& cfg) {
    const std::filesystem::path dir = cfg.output_dir();
    if (cfg.subcommand != "all") {
        RunResult r = run(cfg);
        write_outputs(dir, r);
        return r;
    }
    RunResult r;
    json parts = json::object();
    for (const std::string& s : kModules) {
        ExperimentConfig sub = cfg;
        sub.subcommand = s;
        const RunResult part = run(sub);
        write_outputs(dir / s, part);
        parts[s] = {{"exit_code", part.exit_code}, {"config_hash", sub.hash()}, {"failed", part.failed}};
        for (const auto& f : part.failed) r.failed.push_back(s + ": " + f);
        r.exit_code = std::max(r.exit_code, part.exit_code);
    }
    json report = {{"subcommand", "all"}, {"config_hash", cfg.hash()}, {"parts", parts}, {"failed", r.failed},
                   {"passed", r.failed.empty()}};
    r.report = report.dump(2) + "\n";
    write_outputs(dir, r);
    return r;
}

}  // namespace pluri
