#include "pluri/family_lab.hpp"

#include "pluri/skoda_lab.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

namespace pluri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> mean_zero(std::vector<double> v) {
    const double m = mean(v);
    for (double& x : v) x -= m;
    return v;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

// Measured (H1) constant on a form from the skoda_lab dictionary.
double measured_A(const FormPtr& omega, double alpha, int members, std::uint64_t seed) {
    return measure_h1(*omega, alpha, h1_dictionary(omega, members, seed)).A;
}

FormPtr flat_torus_form(int res) {
    return constant_form(square_torus(1, res), Herm::identity(1), "omega");
}

void record(FamilyExperiment& E, const std::string& key, double v) { E.series[key].push_back(v); }

// In-place 1-D DFT along one axis of a res0 x res1 array (axis 0 fastest).
void dft_axis(std::vector<cplx>& a, int res0, int res1, int axis, int sign) {
    const int n = axis == 0 ? res0 : res1, other = axis == 0 ? res1 : res0;
    std::vector<cplx> tw(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) tw[k] = std::polar(1.0, sign * 2.0 * kPi * k / n);
    std::vector<cplx> line(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    for (int o = 0; o < other; ++o) {
        auto at = [&](int i) -> cplx& {
            return axis == 0 ? a[static_cast<std::size_t>(i + res0 * o)] : a[static_cast<std::size_t>(o + res0 * i)];
        };
        for (int i = 0; i < n; ++i) line[i] = at(i);
        for (int k = 0; k < n; ++k) {
            cplx s = 0.0;
            for (int i = 0; i < n; ++i) s += line[i] * tw[static_cast<std::size_t>((static_cast<long>(k) * i) % n)];
            out[k] = s;
        }
        for (int i = 0; i < n; ++i) at(i) = out[i];
    }
}

// max |g + dd^c u - rhs| with the solver's stencil (n = 1).
double ddc_residual(const ModelManifold& m, const std::vector<double>& u, const std::vector<double>& g,
                    const std::vector<double>& rhs) {
    double r = 0.0;
    Herm h;
    for (std::size_t i = 0; i < m.size(); ++i) {
        complex_hessian(m, u, i, h);
        r = std::max(r, std::abs(g[i] + h(0, 0).real() - rhs[i]));
    }
    return r;
}

// Tridiagonal solve; a sub, b diag, c super, d rhs (overwritten).
void thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c, std::vector<double>& d) {
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

}  // namespace

const char* to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::GeneralType: return "general-type";
        case FamilyKind::StableCusp: return "stable-cusp";
        case FamilyKind::CalabiYau: return "calabi-yau";
        case FamilyKind::NonCollapsing: return "non-collapsing";
        case FamilyKind::CollapsingFibration: return "collapsing-fibration";
    }
    return "?";
}

bool FamilyExperiment::passed() const {
    for (const auto& [k, v] : checks)
        if (!v) return false;
    return true;
}

std::vector<std::string> FamilyExperiment::failed_checks() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : checks)
        if (!v) out.push_back(k);
    return out;
}

void validate_ladder(const std::vector<double>& ladder) {
    if (ladder.empty()) fail(ErrorKind::InvalidInput, "empty ladder");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0) || !std::isfinite(ladder[i])) fail(ErrorKind::InvalidInput, "ladder values must be positive");
        if (i > 0 && !(ladder[i] < ladder[i - 1])) fail(ErrorKind::InvalidInput, "ladder must decrease strictly toward 0");
    }
}

std::vector<double> discrete_base_solve(const ModelManifold& m, const std::vector<double>& F) {
    if (!m.is_torus() || m.n() != 1) fail(ErrorKind::Unsupported, "base solve runs on n = 1 tori");
    if (F.size() != m.size()) fail(ErrorKind::InvalidInput, "base data size mismatch");
    const int r0 = m.resolution(0), r1 = m.resolution(1);
    const std::size_t N = m.size();

    // Impulse response of the stencil at node 0 gives the symbol.
    std::vector<double> delta(N, 0.0);
    std::vector<std::pair<std::size_t, double>> taps;
    Herm h;
    for (std::size_t j = 0; j < N; ++j) {
        delta[j] = 1.0;
        complex_hessian(m, delta, 0, h);
        delta[j] = 0.0;
        if (h(0, 0).real() != 0.0) taps.emplace_back(j, h(0, 0).real());
    }

    const double shift = mean(F);
    std::vector<cplx> a(N);
    for (std::size_t i = 0; i < N; ++i) a[i] = F[i] - shift;
    dft_axis(a, r0, r1, 0, -1);
    dft_axis(a, r0, r1, 1, -1);
    int mi[2];
    double smax = 0.0;
    std::vector<double> sigma(N);
    for (std::size_t k = 0; k < N; ++k) {
        m.multi_index(k, mi);
        cplx s = 0.0;
        for (const auto& [j, w] : taps) {
            int mj[2];
            m.multi_index(j, mj);
            s += w * std::polar(1.0, 2.0 * kPi * (static_cast<double>(mi[0]) * mj[0] / r0 +
                                                  static_cast<double>(mi[1]) * mj[1] / r1));
        }
        sigma[k] = s.real();
        smax = std::max(smax, std::abs(sigma[k]));
    }
    for (std::size_t k = 0; k < N; ++k)
        a[k] = (k == 0 || std::abs(sigma[k]) < 1e-12 * smax) ? cplx(0.0) : a[k] / sigma[k];
    dft_axis(a, r0, r1, 0, 1);
    dft_axis(a, r0, r1, 1, 1);
    std::vector<double> u(N);
    for (std::size_t i = 0; i < N; ++i) u[i] = a[i].real() / static_cast<double>(N);
    return mean_zero(u);
}

// ---------------------------------------------------------------- general type

HFamily sine_h_family() {
    return [](double t, const Eigen::VectorXd& x) {
        return std::sin(2.0 * kPi * x(0)) * (1.0 + t) - std::log(std::cyl_bessel_i(0.0, 1.0 + t));
    };
}

FamilyExperiment general_type_family(const std::vector<double>& ladder, const HFamily& h, double h_bound,
                                     const TorusFamilyOptions& opt) {
    validate_ladder(ladder);
    const FormPtr om = flat_torus_form(opt.resolution);
    const ModelManifold& m = om->manifold();
    FamilyExperiment E;
    E.kind = FamilyKind::GeneralType;
    E.ladder = ladder;

    std::vector<std::vector<double>> hs;
    double C = 0.0;
    for (double t : ladder) {
        std::vector<double> ht = sample_density(m, [&](const Eigen::VectorXd& x) { return h(t, x); });
        for (double v : ht)
            if (!std::isfinite(v) || std::abs(v) > h_bound)
                fail(ErrorKind::Precondition, "h family exceeds its declared uniform bound");
        // Normalize int e^h dnu = 1.
        double mass = 0.0;
        for (double v : ht) mass += std::exp(v);
        const double log_mass = std::log(mass / static_cast<double>(m.size()));
        for (double& v : ht) v -= log_mass;
        record(E, "log_mass", log_mass);
        double l2 = 0.0;
        for (double v : ht) l2 += std::exp(2.0 * v);
        C = std::max(C, std::exp(-min_value(ht)) * std::sqrt(l2 / static_cast<double>(m.size())));
        hs.push_back(std::move(ht));
    }

    const double A = measured_A(om, opt.alpha, opt.h1_members, opt.seed);
    const BoundCertificate cert = kolodziej_bound(HypothesisData{1, opt.alpha, A, 2.0, C});

    bool bornesup = true, within = true, certified = true;
    double sup_norm_max = 0.0;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        MaProblem P{om, {}, 1, DensityReference::Form, 1.0, opt.controls, {}};
        P.density.resize(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) P.density[i] = std::exp(hs[k][i]);
        MaSolution s = solve_ma(P);
        const auto& phi = s.phi.values();
        const double sup = max_value(phi), inf = min_value(phi), minus_inf_h = -min_value(hs[k]);
        record(E, "sup_phi", sup);
        record(E, "inf_phi", inf);
        record(E, "minus_inf_h", minus_inf_h);
        record(E, "residual", s.residual);
        record(E, "steps", s.steps);
        const double tol = 1e-7;
        bornesup = bornesup && sup >= -tol && sup <= minus_inf_h + tol;
        within = within && sup >= -tol && sup <= 1.0 + ladder[k] + tol;
        certified = certified && inf >= -cert.M && sup - inf <= cert.M;
        sup_norm_max = std::max(sup_norm_max, sup_norm(phi));
        if (opt.keep_solutions) E.solutions.push_back(std::move(s));
    }
    E.scalars["A"] = A;
    E.scalars["C"] = C;
    E.scalars["alpha"] = opt.alpha;
    E.scalars["M"] = cert.M;
    E.scalars["sup_norm"] = sup_norm_max;
    E.scalars["slack"] = cert.M - sup_norm_max;
    E.checks["bornesup"] = bornesup;
    E.checks["sup_within_one_plus_t"] = within;
    E.checks["certificate"] = certified && sup_norm_max <= cert.M;
    return E;
}

// ---------------------------------------------------------------- radial models

std::vector<double> solve_radial(const std::vector<double>& L, const std::vector<double>& w, double left,
                                 std::optional<double> right) {
    const std::size_t N = L.size();
    if (N < 3 || w.size() != N) fail(ErrorKind::InvalidInput, "radial grid needs at least three nodes");
    std::vector<double> phi(N);
    const double rv = right.value_or(left);
    for (std::size_t i = 0; i < N; ++i) phi[i] = left + (rv - left) * (L[i] - L[0]) / (L[N - 1] - L[0]);

    // Residual F = phi'' - w e^phi on interior nodes (and the Neumann end).
    auto residual = [&](const std::vector<double>& p, std::vector<double>& F) {
        double r = 0.0;
        F.assign(N, 0.0);
        for (std::size_t i = 1; i < N; ++i) {
            double lap;
            if (i + 1 < N) {
                const double hm = L[i] - L[i - 1], hp = L[i + 1] - L[i];
                lap = 2.0 * ((p[i + 1] - p[i]) / hp - (p[i] - p[i - 1]) / hm) / (hm + hp);
            } else {
                if (right) break;
                const double hm = L[i] - L[i - 1];
                lap = 2.0 * (p[i - 1] - p[i]) / (hm * hm);
            }
            F[i] = lap - w[i] * std::exp(p[i]);
            r = std::max(r, std::abs(F[i]) / (1.0 + std::abs(lap)));
        }
        return r;
    };

    std::vector<double> F, a(N), b(N), c(N), d(N);
    double r = residual(phi, F);
    for (int step = 0; step < 200; ++step) {
        for (std::size_t i = 0; i < N; ++i) {
            a[i] = c[i] = 0.0;
            b[i] = 1.0;
            d[i] = 0.0;
        }
        for (std::size_t i = 1; i < N; ++i) {
            if (i + 1 < N) {
                const double hm = L[i] - L[i - 1], hp = L[i + 1] - L[i];
                a[i] = 2.0 / (hm * (hm + hp));
                c[i] = 2.0 / (hp * (hm + hp));
                b[i] = -a[i] - c[i] - w[i] * std::exp(phi[i]);
            } else if (!right) {
                const double hm = L[i] - L[i - 1];
                a[i] = 2.0 / (hm * hm);
                b[i] = -a[i] - w[i] * std::exp(phi[i]);
            }
            d[i] = -F[i];
        }
        thomas(a, b, c, d);
        double dmax = 0.0;
        for (double v : d) dmax = std::max(dmax, std::abs(v));
        double lam = 1.0;
        std::vector<double> trial(N);
        double rt = kInf;
        for (int half = 0; half < 40; ++half, lam *= 0.5) {
            for (std::size_t i = 0; i < N; ++i) trial[i] = phi[i] + lam * d[i];
            rt = residual(trial, F);
            if (std::isfinite(rt) && (rt < r || rt < 1e-13)) break;
        }
        phi = trial;
        r = rt;
        if (lam * dmax < 1e-13 * (1.0 + sup_norm(phi))) break;
    }
    return phi;
}

std::function<double(double)> model_cusp_density() {
    return [](double) { return 2.0; };
}

CuspReport cusp_exponent(const CuspProblem& P) {
    if (!P.scaled_density || !(P.L_in > P.L_out) || P.L_out <= 0.0 || P.nodes < 16) fail(ErrorKind::InvalidInput, "bad cusp exhaustion");
    const int N = P.nodes;
    std::vector<double> L(static_cast<std::size_t>(N)), w(static_cast<std::size_t>(N));
    const double q = std::log(P.L_in / P.L_out) / (N - 1);
    for (int i = 0; i < N; ++i) {
        L[i] = P.L_out * std::exp(q * i);
        // dd^c = (1/4) Laplacian and the radial Laplacian is r^{-2} d^2/dL^2.
        w[i] = 4.0 * P.scaled_density(L[i]);
        if (!std::isfinite(w[i]) || w[i] < 0.0) fail(ErrorKind::Domain, "cusp density must be finite and nonnegative");
    }
    auto model = [](double l) { return -2.0 * std::log(2.0 * l); };
    const std::vector<double> phi = solve_radial(L, w, model(P.L_out), model(P.L_in));

    CuspReport R;
    R.rings = P.rings;
    if (R.rings.empty())
        for (int k = 2; k <= 40; ++k) R.rings.push_back(std::ldexp(1.0, -k));
    std::vector<double> x, y;
    for (double r : R.rings) {
        const double l = -std::log(r);
        if (l <= P.L_out || l >= P.L_in) fail(ErrorKind::InvalidInput, "fit ring outside the exhaustion");
        const auto it = std::upper_bound(L.begin(), L.end(), l);
        const std::size_t j = static_cast<std::size_t>(it - L.begin());
        const double s = (l - L[j - 1]) / (L[j] - L[j - 1]);
        const double v = (1.0 - s) * phi[j - 1] + s * phi[j];
        R.values.push_back(v);
        R.model_deviation = std::max(R.model_deviation, std::abs(v - model(l)));
        x.push_back(-std::log(l));
        y.push_back(v);
    }
    const LinearFit f = linear_fit(x, y);
    R.kappa = f.slope;
    R.b = f.intercept;
    R.r2 = f.r2;
    R.variation = max_value(y) - min_value(y);
    if (f.r2 >= 0.99)
        R.verdict = "fitted";
    else if (std::abs(f.slope) < 0.05)
        R.verdict = "bounded";
    else
        R.verdict = "inconclusive";
    return R;
}

FamilyExperiment stable_family_bound(const std::vector<double>& ladder, const SncLocalModel& M,
                                     const IntegralCertificate* certificate, const StableFamilyOptions& opt) {
    validate_ladder(ladder);
    if (!certificate) fail(ErrorKind::InvalidCertificate, "stable family bound needs an (H2') certificate");
    if (!certificate->bounded || !std::isfinite(certificate->majorant))
        fail(ErrorKind::InvalidCertificate, "(H2') certificate is not uniform in t");
    M.validate();
    if (M.p != 1) fail(ErrorKind::Unsupported, "radial local model has one branch");
    if (!(opt.c > 0.0) || !(opt.spacing > 0.0)) fail(ErrorKind::InvalidInput, "bad stable family options");
    const bool lc = M.s == 1;
    const double a = M.a[0];
    if (!lc && !(a > -1.0)) fail(ErrorKind::Precondition, "klt branch needs a > -1");

    double A = opt.A;
    if (!(A > 0.0)) A = measured_A(flat_torus_form(32), opt.alpha, 40, 7);
    HypothesisData hd{M.n, opt.alpha, A, 2.0, std::max(1.0, certificate->majorant), M.eps, BoundMode::Orlicz};
    // A modular bound K >= 1 bounds the Luxemburg norm by K.
    const BoundCertificate cert = orlicz_bound(hd);
    const double C_cert = cert.M;

    FamilyExperiment E;
    E.kind = FamilyKind::StableCusp;
    E.ladder = ladder;
    const double k = M.n + 1 + 2.0 * M.eps;
    const double L0 = std::log(2.0);
    auto psi = [](double l) { return -std::log(2.0 * l); };  // -log(-log r^2)

    double C_meas = 0.0, sup_norm_max = 0.0;
    std::vector<std::vector<double>> Ls, phis;
    bool comparison = true;
    for (double t : ladder) {
        const double Lin = std::log(1.0 / t) + opt.tail;
        const std::size_t N = static_cast<std::size_t>(std::ceil((Lin - L0) / opt.spacing)) + 1;
        std::vector<double> L(N), w(N), wu(N);
        for (std::size_t i = 0; i < N; ++i) {
            L[i] = L0 + (Lin - L0) * static_cast<double>(i) / static_cast<double>(N - 1);
            if (lc) {
                const double qq = t * std::exp(L[i]);
                w[i] = 4.0 * opt.c / (1.0 + qq * qq);
            } else {
                const double r2 = std::exp(-2.0 * L[i]);
                w[i] = 4.0 * opt.c * r2 * std::pow(r2 + t * t, a);
            }
            wu[i] = w[i] * std::exp(k * psi(L[i]));
        }
        std::vector<double> phi = solve_radial(L, w, 0.0, std::nullopt);
        record(E, "min_phi", min_value(phi));
        sup_norm_max = std::max(sup_norm_max, sup_norm(phi));
        if (lc) {
            std::vector<double> u = solve_radial(L, wu, -k * psi(L0), std::nullopt);
            const double Ct = std::max(0.0, -min_value(u));
            double excess = -kInf;
            for (std::size_t i = 0; i < N; ++i) excess = std::max(excess, u[i] + k * psi(L[i]) - phi[i]);
            comparison = comparison && excess <= 1e-9;
            record(E, "C_t", Ct);
            record(E, "subsolution_excess", excess);
            C_meas = std::max(C_meas, Ct);
        }
        Ls.push_back(std::move(L));
        phis.push_back(std::move(phi));
    }

    E.scalars["exponent"] = k;
    E.scalars["majorant"] = certificate->majorant;
    E.scalars["A"] = A;
    E.scalars["C_eps_certified"] = C_cert;
    E.scalars["sup_norm"] = sup_norm_max;
    if (lc) {
        E.scalars["C_eps_measured"] = C_meas;
        bool holds_meas = true, holds_cert = true;
        for (std::size_t j = 0; j < ladder.size(); ++j) {
            for (std::size_t i = 0; i < Ls[j].size(); ++i) {
                const double lower = k * psi(Ls[j][i]);
                holds_meas = holds_meas && phis[j][i] >= lower - C_meas - 1e-9;
                holds_cert = holds_cert && phis[j][i] >= lower - C_cert;
            }
        }
        E.checks["subsolution_below_solution"] = comparison;
        E.checks["loglog_lower_bound"] = holds_meas;
        E.checks["loglog_lower_bound_certified"] = holds_cert;
    } else {
        E.checks["uniform_linf"] = sup_norm_max <= C_cert;
    }
    return E;
}

// ---------------------------------------------------------------- Calabi-Yau

MuFamily cosine_mu_family() {
    return [](double t, const Eigen::VectorXd& x) { return std::exp(std::cos(2.0 * kPi * x(0)) * (1.0 + t)); };
}

FamilyExperiment cy_oscillation(const std::vector<double>& ladder, const MuFamily& mu, const TorusFamilyOptions& opt) {
    validate_ladder(ladder);
    const FormPtr om = flat_torus_form(opt.resolution);
    const ModelManifold& m = om->manifold();
    FamilyExperiment E;
    E.kind = FamilyKind::CalabiYau;
    E.ladder = ladder;

    std::vector<MaProblem> probs;
    double C = 0.0;
    for (double t : ladder) {
        MaProblem P{om, sample_density(m, [&](const Eigen::VectorXd& x) { return mu(t, x); }), 0,
                    DensityReference::Form, 1.0, opt.controls, {}};
        for (double f : P.density)
            if (!(f > 0.0) || !std::isfinite(f)) fail(ErrorKind::Inconsistent, "density has no finite positive mass");
        const double ct = std::log(density_mean(P));
        record(E, "c_t", ct);
        normalize_density(P);
        double l2 = 0.0;
        for (double f : P.density) l2 += f * f;
        C = std::max(C, std::sqrt(l2 / static_cast<double>(m.size())));
        probs.push_back(std::move(P));
    }
    const double A = measured_A(om, opt.alpha, opt.h1_members, opt.seed);
    const BoundCertificate cert = kolodziej_bound(HypothesisData{1, opt.alpha, A, 2.0, C});

    double osc_max = 0.0;
    bool certified = true;
    for (auto& P : probs) {
        MaSolution s = solve_ma(P);
        const double osc = max_value(s.phi.values()) - min_value(s.phi.values());
        record(E, "osc", osc);
        record(E, "residual", s.residual);
        osc_max = std::max(osc_max, osc);
        certified = certified && min_value(s.phi.values()) >= -cert.M;
        if (opt.keep_solutions) E.solutions.push_back(std::move(s));
    }
    const auto& ct = E.series["c_t"];
    E.scalars["A"] = A;
    E.scalars["C"] = C;
    E.scalars["M"] = cert.M;
    E.scalars["osc_max"] = osc_max;
    E.scalars["c_t_range"] = max_value(ct) - min_value(ct);
    E.checks["osc_below_certificate"] = osc_max <= cert.M;
    E.checks["certificate"] = certified;
    E.checks["c_t_bounded"] = std::all_of(ct.begin(), ct.end(), [](double v) { return std::isfinite(v); });
    return E;
}

// ---------------------------------------------------------------- non-collapsing

namespace {

ConvergenceReport convergence_from(const std::vector<double>& ladder, const std::vector<double>& l1,
                                   const std::vector<double>& pairing) {
    ConvergenceReport R;
    R.ladder = ladder;
    R.l1 = l1;
    R.pairing = pairing;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < l1.size(); ++i)
        if (l1[i] > 0.0) {
            x.push_back(std::log(ladder[i]));
            y.push_back(std::log(l1[i]));
        }
    if (x.size() >= 2) R.rate = linear_fit(x, y).slope;
    std::size_t tail = 1;
    for (std::size_t i = l1.size(); i-- > 1;) {
        if (!(l1[i] < l1[i - 1])) break;
        ++tail;
    }
    R.converges = tail >= 3;
    R.verdict = R.converges ? "converges" : "inconclusive";
    return R;
}

// Smooth test functions cos(2 pi k.u + phase), |k_a| <= 2.
std::vector<std::vector<double>> test_dictionary(const ModelManifold& m, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> mode(-2, 2);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const int d = m.real_dim();
    std::vector<std::vector<double>> out;
    while (static_cast<int>(out.size()) < count) {
        std::vector<int> k(static_cast<std::size_t>(d));
        bool zero = true;
        for (int& v : k) {
            v = mode(rng);
            zero = zero && v == 0;
        }
        const double ph = phase(rng);
        if (zero) continue;
        std::vector<double> f(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const Eigen::VectorXd u = m.unit_coords(i);
            double s = ph;
            for (int a = 0; a < d; ++a) s += 2.0 * kPi * k[a] * u(a);
            f[i] = std::cos(s);
        }
        out.push_back(std::move(f));
    }
    return out;
}

// mean_i psi(i) tr(omega + dd^c phi)(i)
std::vector<double> trace_pairings(const ReferenceForm& omega, const std::vector<double>& phi,
                                   const std::vector<std::vector<double>>& dict) {
    const ModelManifold& m = omega.manifold();
    const DdcField H = ddc(m, phi);
    std::vector<double> tr(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        double s = 0.0;
        for (int j = 0; j < m.n(); ++j) s += omega.at(i)(j, j).real() + H.h[i](j, j).real();
        tr[i] = s;
    }
    std::vector<double> out;
    for (const auto& psi : dict) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += psi[i] * tr[i];
        out.push_back(s / static_cast<double>(m.size()));
    }
    return out;
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
    return r;
}

}  // namespace

FamilyExperiment noncollapsing_limit(const std::vector<double>& ladder, const NonCollapsingOptions& opt) {
    validate_ladder(ladder);
    const ManifoldPtr mp = square_torus(1, opt.resolution);
    const ModelManifold& m = *mp;
    auto g0_at = [&](std::size_t i) {
        const Eigen::VectorXd x = m.coords(i);
        return opt.c * (2.0 - std::cos(2.0 * kPi * x(0)) - std::cos(2.0 * kPi * x(1)));
    };
    const FormPtr w0 = make_form(mp, [&](std::size_t i) { return Herm::identity(1, g0_at(i)); }, "omega0");
    const FormPtr wx = constant_form(mp, Herm::identity(1), "omegaX");
    const double V0 = volume(*w0).V;
    if (!(V0 > 0.0)) fail(ErrorKind::Precondition, "omega_0 has no volume; not big");

    std::vector<double> mu = sample_density(m, [](const Eigen::VectorXd& x) { return 1.0 + 0.5 * std::cos(2.0 * kPi * x(1)); });
    const double mm = mean(mu);
    for (double& v : mu) v /= mm;

    // t = 0 is linear in dimension one: g0 + dd^c phi0 = V0 mu.
    std::vector<double> g0(m.size()), rhs(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        g0[i] = g0_at(i);
        rhs[i] = V0 * mu[i] - g0[i];
    }
    const std::vector<double> phi0 = discrete_base_solve(m, rhs);
    std::vector<double> target(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) target[i] = V0 * mu[i];

    FamilyExperiment E;
    E.kind = FamilyKind::NonCollapsing;
    E.ladder = ladder;
    E.scalars["V0"] = V0;
    E.scalars["limit_residual"] = ddc_residual(m, phi0, g0, target);

    const auto dict = test_dictionary(m, 32, opt.seed);
    const auto P0 = trace_pairings(*w0, phi0, dict);

    const double K = max_value(g0) + ladder.front();
    const double alpha = opt.alpha / K;
    const double AI = measured_A(wx, opt.alpha, opt.h1_members, opt.seed);
    double A = 0.0, C = 0.0;
    std::vector<std::vector<double>> phis;
    std::vector<double> l1, pair;
    for (double t : ladder) {
        const FormPtr wt = form_combination(*w0, *wx, t, "omega_t");
        const double Vt = volume(*wt).V;
        A = std::max(A, K / Vt * AI);
        double lp = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double gt = g0[i] + t;
            lp += std::pow(Vt * mu[i] / gt, opt.p) * gt / Vt;
        }
        C = std::max(C, std::pow(lp / static_cast<double>(m.size()), 1.0 / opt.p));

        MaProblem P{wt, mu, 0, DensityReference::Lebesgue, 1.0, opt.controls, {}};
        const MaSolution s = solve_ma(P);
        record(E, "residual", s.residual);
        const std::vector<double> phi = mean_zero(s.phi.values());
        double d = 0.0, loc = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double e = std::abs(phi[i] - phi0[i]);
            d += e;
            const Eigen::VectorXd u = m.unit_coords(i);
            double r2 = 0.0;
            for (int a = 0; a < 2; ++a) {
                const double du = std::min(u(a), 1.0 - u(a));
                r2 += du * du;
            }
            if (std::sqrt(r2) > opt.core_radius) loc = std::max(loc, e);
        }
        l1.push_back(d / static_cast<double>(m.size()));
        record(E, "local_uniform", loc);
        record(E, "osc", max_value(phi) - min_value(phi));
        pair.push_back(max_gap(trace_pairings(*wt, s.phi.values(), dict), P0));
        phis.push_back(s.phi.values());
    }
    const BoundCertificate cert = kolodziej_bound(HypothesisData{1, alpha, A, opt.p, C});
    bool certified = true;
    double osc_max = 0.0;
    for (const auto& phi : phis) {
        certified = certified && min_value(phi) >= -cert.M;
        osc_max = std::max(osc_max, max_value(phi) - min_value(phi));
    }
    E.series["l1"] = l1;
    E.series["pairing"] = pair;
    E.scalars["alpha"] = alpha;
    E.scalars["A"] = A;
    E.scalars["C"] = C;
    E.scalars["M"] = cert.M;
    E.scalars["osc_max"] = osc_max;
    E.checks["certificate"] = certified && osc_max <= cert.M;
    E.checks["limit_solved"] = E.scalars["limit_residual"] <= 1e-8;
    E.checks["l1_monotone"] = strictly_decreasing(l1);
    if (l1.size() >= 3) {
        const std::size_t n = l1.size();
        const double slope = (l1[n - 2] - l1[n - 3]) / (ladder[n - 2] - ladder[n - 3]);
        const double pred = l1[n - 2] + slope * (ladder[n - 1] - ladder[n - 2]);
        E.scalars["l1_extrapolated"] = pred;
        E.checks["l1_rate"] = l1[n - 1] < 2.0 * std::abs(pred);
    }
    E.convergence = convergence_from(ladder, l1, pair);
    E.checks["converges"] = E.convergence->converges;
    return E;
}

// ---------------------------------------------------------------- collapsing

FamilyExperiment collapsing_fibration(const std::vector<double>& ladder, const CollapsingOptions& opt) {
    validate_ladder(ladder);
    const ManifoldPtr mp = square_torus(2, opt.resolution);
    const ModelManifold& m = *mp;
    if (!m.fibration()) fail(ErrorKind::Unsupported, "square torus did not report its product structure");
    const int fib = m.fibration()->fiber.at(0), base = m.fibration()->base.at(0);
    const ManifoldPtr bp = square_torus(1, opt.resolution);
    const ModelManifold& B = *bp;

    std::vector<double> gz(2, 0.0);
    gz[static_cast<std::size_t>(base)] = 1.0;
    const FormPtr wz = constant_form(mp, Herm::diagonal(gz), "omegaZ");
    const FormPtr wx = constant_form(mp, Herm::identity(2), "omegaX");

    // Base index of every node of X.
    std::vector<std::size_t> to_base(m.size());
    {
        int mi[4], bi[2];
        for (std::size_t i = 0; i < m.size(); ++i) {
            m.multi_index(i, mi);
            bi[0] = mi[2 * base];
            bi[1] = mi[2 * base + 1];
            to_base[i] = B.flat_index(0, bi);
        }
    }

    auto density = [&](const Eigen::VectorXd& x) {
        const double xf = x(2 * fib), yf = x(2 * fib + 1), xb = x(2 * base), yb = x(2 * base + 1);
        double f = 1.0 + 0.3 * std::cos(2.0 * kPi * xb);
        if (opt.fiber_dependent)
            f += 0.2 * std::cos(2.0 * kPi * xf) * std::sin(2.0 * kPi * yb) + 0.1 * std::sin(2.0 * kPi * yf);
        return f;
    };
    std::vector<double> mu = sample_density(m, density);
    for (double v : mu)
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidInput, "mu is not a positive density");
    {
        const double mm = mean(mu);
        if (std::abs(mm - 1.0) > 1e-6) fail(ErrorKind::InvalidInput, "mu is not a probability density");
        for (double& v : mu) v /= mm;
    }

    // Push-forward to the base and the limit potential.
    std::vector<double> F(B.size(), 0.0);
    const double fiber_count = static_cast<double>(m.size() / B.size());
    for (std::size_t i = 0; i < m.size(); ++i) F[to_base[i]] += mu[i] / fiber_count;
    const std::vector<double> u = discrete_base_solve(B, F);
    std::vector<double> ub(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) ub[i] = u[to_base[i]];

    FamilyExperiment E;
    E.kind = FamilyKind::CollapsingFibration;
    E.ladder = ladder;
    E.scalars["base_residual"] = ddc_residual(B, u, std::vector<double>(B.size(), 1.0), F);
    {
        const DdcField H = ddc(m, ub);
        double r = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            r = std::max(r, std::abs(1.0 + H.h[i](base, base).real() - F[to_base[i]]));
        E.scalars["pullback_residual"] = r;
    }
    E.checks["base_equation"] = E.scalars["base_residual"] <= 1e-8;

    // Volume expansion V(omega_Z + t omega_X) = 2 t int omega_Z ^ omega_X + t^2 int omega_X^2.
    const std::vector<double> coeff = binomial_volume_coefficients(*wz, *wx);
    const double mixed = mixed_volume({wz.get(), wx.get()});
    const double vx = volume(*wx).V;
    E.scalars["mixed_volume"] = mixed;
    double vt_err = std::abs(coeff.at(0)) + std::abs(coeff.at(1) - 2.0 * mixed) + std::abs(coeff.at(2) - vx);
    vt_err = std::max(vt_err, std::abs(mixed - 0.5) + std::abs(vx - 1.0));

    const auto dict = test_dictionary(m, opt.dictionary, opt.seed);
    const auto P0 = trace_pairings(*wz, ub, dict);

    std::vector<double> l1, pair;
    bool sandwich = true;
    double pf_max = 0.0;
    for (double t : ladder) {
        const FormPtr wt = form_combination(*wz, *wx, t, "omega_t");
        const double Vt = volume(*wt).V;
        vt_err = std::max(vt_err, std::abs(Vt - (coeff[0] + coeff[1] * t + coeff[2] * t * t)));
        vt_err = std::max(vt_err, std::abs(Vt - (2.0 * t * mixed + t * t * vx)));
        record(E, "V_t", Vt);

        // Volume sandwich for a fibration without singular fibers: g^{-1} t <= det(omega_t)/det(omega_X) <= g t, k = 1.
        const double g = 2.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double ratio = det(wt->at(i)) / det(wx->at(i));
            sandwich = sandwich && ratio >= t / g && ratio <= g * t;
        }

        MaProblem P{wt, mu, 0, DensityReference::Form, 1.0, opt.controls, {}};
        MaSolution s = solve_ma(P);
        record(E, "residual", s.residual);
        record(E, "steps", s.steps);
        const std::vector<double> phi = mean_zero(s.phi.values());

        double d = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) d += std::abs(phi[i] - ub[i]);
        l1.push_back(d / static_cast<double>(m.size()));

        std::vector<double> hi(B.size(), -kInf), lo(B.size(), kInf), pf(B.size(), 0.0);
        const DdcField H = ddc(m, phi);
        const double dt = det(wt->at(0));
        for (std::size_t i = 0; i < m.size(); ++i) {
            const std::size_t b = to_base[i];
            hi[b] = std::max(hi[b], phi[i]);
            lo[b] = std::min(lo[b], phi[i]);
            pf[b] += det(wt->at(i) + H.h[i]) / dt / fiber_count;
        }
        double osc = 0.0, pfd = 0.0;
        for (std::size_t b = 0; b < B.size(); ++b) {
            osc = std::max(osc, hi[b] - lo[b]);
            pfd = std::max(pfd, std::abs(pf[b] - F[b] * std::exp(s.compat_shift)));
        }
        record(E, "fiber_osc", osc);
        record(E, "fiber_osc_over_t", osc / t);
        record(E, "pushforward_defect", pfd);
        pf_max = std::max(pf_max, pfd);
        pair.push_back(max_gap(trace_pairings(*wt, phi, dict), P0));
        if (opt.keep_solutions) E.solutions.push_back(std::move(s));
    }
    const auto& ratio = E.series["fiber_osc_over_t"];
    const double ghat = max_value(ratio);
    E.series["l1"] = l1;
    E.series["pairing"] = pair;
    E.scalars["g_hat"] = ghat;
    E.scalars["vt_error"] = vt_err;
    E.scalars["pushforward_defect"] = pf_max;
    E.scalars["l1_final_over_initial"] = l1.back() / l1.front();
    E.checks["claim_sandwich"] = sandwich;
    E.checks["vt_binomial"] = vt_err <= 1e-12;
    E.checks["pushforward"] = pf_max <= 1e-6;
    E.checks["l1_strictly_decreasing"] = strictly_decreasing(l1);
    // A single g-hat: osc_t / t stays within a factor two across the ladder.
    E.checks["fiber_osc_linear"] = ghat < 1e-12 || max_value(ratio) <= 2.0 * min_value(ratio);
    E.convergence = convergence_from(ladder, l1, pair);
    E.checks["converges"] = E.convergence->converges;
    return E;
}

}  // namespace pluri
