#include "pluri/skoda_lab.hpp"

#include "pluri/green_heat.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pluri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_p1(const ModelManifold& m) { return m.kind() == ManifoldKind::ProjectiveAtlas && m.n() == 1; }

// Homogeneous point of P^1 from chart coordinates.
std::array<cplx, 2> homogeneous_p1(const Eigen::VectorXd& x, int chart) {
    const cplx z(x(0), x(1));
    return chart == 0 ? std::array<cplx, 2>{cplx(1.0), z} : std::array<cplx, 2>{z, cplx(1.0)};
}

}  // namespace

PshFamily make_family(std::vector<cplx> params, std::vector<QuasiPshFunction> members) {
    if (params.size() != members.size()) fail(ErrorKind::InvalidInput, "one parameter per family member");
    PshFamily F;
    F.params = std::move(params);
    F.members = std::move(members);
    for (const auto& phi : F.members) {
        double top = -kInf;
        for (double v : phi.values())
            if (std::isfinite(v)) top = std::max(top, v);
        F.sups.push_back(top);
        F.means.push_back(integrate(reference_measure(phi.form()), phi.values()));
    }
    return F;
}

double lelong_bound_constant(double C_theta, double A, int n, double V) {
    if (C_theta < 1.0) fail(ErrorKind::InvalidInput, "C_theta must be >= 1");
    if (!(A > 0.0) || !(V > 0.0) || n < 1) fail(ErrorKind::InvalidInput, "A, V and n must be positive");
    return C_theta * std::pow(A, n - 1) * V;
}

LelongBoundReport uniform_lelong_bound(const PshFamily& F, double C_theta, double A, double V) {
    LelongBoundReport r;
    if (F.members.empty()) fail(ErrorKind::InvalidInput, "empty family");
    r.bound = lelong_bound_constant(C_theta, A, F.members.front().manifold().n(), V);
    for (const auto& phi : F.members) {
        for (const auto& tag : phi.tags()) r.measured.push_back(lelong_number(phi, tag.index));
        const auto& v = phi.values();
        const std::size_t lo = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
        bool tagged = false;
        for (const auto& tag : phi.tags()) tagged = tagged || tag.index == lo;
        if (!tagged) r.measured.push_back(lelong_number(phi, lo));
    }
    r.max_measured = r.measured.empty() ? 0.0 : max_value(r.measured);
    r.holds = r.max_measured <= r.bound;
    return r;
}

ProjectiveSkodaReport projective_skoda_check(const QuasiPshFunction& psi, int n, int d) {
    if (n != 1 || d != 1) fail(ErrorKind::Unsupported, "the projective Skoda check is implemented for P^1 (n = d = 1)");
    if (!is_p1(psi.manifold())) fail(ErrorKind::InvalidInput, "psi must live on the P^1 atlas");
    if (psi.normalization() != Normalization::SupZero) fail(ErrorKind::InvalidInput, "psi must be sup-normalized");
    const double a = 1.0 / (n * d);
    ProjectiveSkodaReport r;
    if (psi.has_evaluator()) {
        // z = tan(theta/2) e^{i phi}; omega = (1/4pi) du dphi with u = cos(theta).
        r.from_evaluator = true;
        const auto& f = psi.evaluator();
        constexpr int kAngles = 128;
        boost::math::quadrature::tanh_sinh<double> ts;
        double lhs = 0.0, mean = 0.0;
        for (int k = 0; k < kAngles; ++k) {
            const double ph = 2.0 * kPi * k / kAngles;
            auto value = [&](double u) {
                const double c = std::sqrt(0.5 * (1.0 + u)), s = std::sqrt(0.5 * (1.0 - u));
                const cplx Z0(c), Z1 = s * std::polar(1.0, ph);
                Eigen::VectorXd x(2);
                if (std::abs(Z0) >= std::abs(Z1)) {
                    const cplx z = Z1 / Z0;
                    x << z.real(), z.imag();
                    return f(x, 0);
                }
                const cplx w = Z0 / Z1;
                x << w.real(), w.imag();
                return f(x, 1);
            };
            lhs += ts.integrate([&](double u) { return std::exp(-a * value(u)); }, -1.0, 1.0, 1e-12);
            mean += ts.integrate(value, -1.0, 1.0, 1e-12);
        }
        r.lhs = lhs / (2.0 * kAngles);
        r.integral = mean / (2.0 * kAngles);
    } else {
        const VolumeReport vol = volume(psi.form());
        const auto& v = psi.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) continue;
            r.lhs += std::exp(-a * v[i]) * vol.weights[i];
            r.integral += v[i] * vol.weights[i];
        }
    }
    r.rhs = std::pow(4.0 * n, n) * d * std::exp(-a * r.integral);
    r.holds = r.lhs <= r.rhs;
    return r;
}

std::vector<QuasiPshFunction> projective_dictionary(const FormPtr& fs, int count, std::uint64_t seed) {
    if (!is_p1(fs->manifold())) fail(ErrorKind::Unsupported, "projective dictionaries live on the P^1 atlas");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const ModelManifold& m = fs->manifold();
    std::vector<QuasiPshFunction> out;
    for (int k = 0; k < count; ++k) {
        Eigen::Matrix2cd A;
        double c;
        if (k == 0) {
            A << 0.0, 0.0, 0.0, 1.0;
            c = 0.5;
        } else {
            // Random unitary conjugate of diag(1, 10^{-2 U}); smaller gaps are below grid resolution.
            const double th = kPi * U(rng), ph = 2.0 * kPi * U(rng);
            Eigen::Matrix2cd Q;
            Q << std::cos(th), -std::sin(th) * std::polar(1.0, -ph), std::sin(th) * std::polar(1.0, ph), std::cos(th);
            Eigen::Matrix2cd D = Eigen::Matrix2cd::Zero();
            D(0, 0) = 1.0;
            D(1, 1) = std::pow(10.0, -2.0 * U(rng));
            A = Q * D * Q.adjoint();
            c = 0.2 + 0.75 * U(rng);
        }
        const double top = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(A).eigenvalues().maxCoeff();
        PointEvaluator ev = [A, c, top](const Eigen::VectorXd& x, int chart) {
            const auto Z = homogeneous_p1(x, chart);
            Eigen::Vector2cd v(Z[0], Z[1]);
            const double q = (v.adjoint() * A * v)(0).real();
            return c * 0.5 * (std::log(q / v.squaredNorm()) - std::log(top));
        };
        std::vector<double> vals(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) vals[i] = ev(m.coords(i), m.chart_of(i));
        // The grid misses the exact maximum; shift so the grid sup is zero.
        const double gtop = max_value(vals);
        for (double& x : vals) x -= gtop;
        PointEvaluator shifted = [ev, gtop](const Eigen::VectorXd& x, int chart) { return ev(x, chart) - gtop; };
        // The rank-one member has a log pole at Z_1 = 0, i.e. z = 0 in chart 0; the stencil
        // misreads the nodes next to it.
        std::vector<SingularTag> tags;
        if (k == 0)
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m.chart_of(i) == 0 && m.coords(i).norm() < 0.3) tags.push_back({i, c});
        out.emplace_back(fs, std::move(vals), Normalization::SupZero, std::move(tags), shifted);
    }
    return out;
}

KernelReport kernel_inequality_check(const std::vector<cplx>& x, const std::vector<cplx>& y, double delta) {
    const int N = static_cast<int>(x.size()) - 1;
    if (N < 1 || N > 3 || y.size() != x.size()) fail(ErrorKind::InvalidInput, "points must lie in C^{N+1}, N <= 3");
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::Domain, "delta must lie in (0, 1)");
    Eigen::VectorXcd X(N + 1), Y(N + 1);
    for (int j = 0; j <= N; ++j) {
        X(j) = x[j];
        Y(j) = y[j];
    }
    if (X.norm() == 0.0 || Y.norm() == 0.0) fail(ErrorKind::InvalidInput, "zero homogeneous vector");
    X.normalize();
    Y.normalize();
    const double wedge2 = std::max(0.0, 1.0 - std::norm(Y.dot(X)));
    if (wedge2 < 1e-14) fail(ErrorKind::Singular, "x = y is the pole of the kernel");

    KernelReport r;
    r.G = 0.5 * std::log(wedge2);
    // Unitary U = conj(a) H with Householder H sending Y to a e_0, |a| = 1.
    const cplx a = std::abs(Y(0)) > 0.0 ? -Y(0) / std::abs(Y(0)) : cplx(-1.0);
    Eigen::VectorXcd u = Y;
    u(0) -= a;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Identity(N + 1, N + 1) - 2.0 * u * u.adjoint() / u.squaredNorm();
    const Eigen::MatrixXcd Umat = std::conj(a) * H;
    const Eigen::VectorXcd Xp = Umat * X;

    const double chi1 = 0.5 * std::exp(2.0 * delta * r.G);
    const double chi2 = delta * std::exp(2.0 * delta * r.G);
    r.lambda_bound = 0.5 * std::exp(-2.0 * (1.0 - delta) * r.G);
    r.mu_bound = 0.5 * delta * std::exp(-2.0 * (1.0 - delta) * r.G);

    if (std::abs(Xp(0)) < 1e-14) {
        // x on the hyperplane orthogonal to y: G = 0 and (i) reads omega_G <= omega.
        r.at_infinity = true;
        r.r = kInf;
        r.eig_i.assign(N - 1, 0.0);
        r.eig_i.push_back(1.0);
        std::sort(r.eig_i.begin(), r.eig_i.end());
        r.lambda = r.lambda_closed = 1.0;
        r.mu = r.mu_closed = 1.0 - chi1;
        r.mu_uncorrected = kInf;
    } else {
        std::vector<cplx> z(N);
        for (int j = 0; j < N; ++j) z[j] = Xp(j + 1) / Xp(0);
        double r2 = 0.0;
        for (const auto& c : z) r2 += std::norm(c);
        r.r = std::sqrt(r2);
        r.reduction_defect = std::abs(r.G - 0.5 * (std::log(r2) - std::log1p(r2)));

        Eigen::MatrixXcd FS(N, N), OG(N, N), DG(N, N);
        const Herm fs = fubini_study_matrix(z);
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const cplx Ajk = std::conj(z[j]) * z[k];
                FS(j, k) = fs(j, k);
                OG(j, k) = 0.5 * ((j == k ? r2 : 0.0) - Ajk) / (r2 * r2);
                DG(j, k) = 0.25 * Ajk / (r2 * r2 * (1.0 + r2) * (1.0 + r2));
            }
        const double e2g = std::exp(-2.0 * r.G);
        const Eigen::MatrixXcd Mi = e2g * FS - OG;
        const Eigen::MatrixXcd Mii = FS + chi1 * (OG - FS) + chi2 * DG;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> gi(Mi, FS);
        for (int j = 0; j < N; ++j) r.eig_i.push_back(gi.eigenvalues()(j));
        // Radial direction conj(z) is an eigenvector of both forms.
        Eigen::VectorXcd v(N);
        for (int j = 0; j < N; ++j) v(j) = std::conj(z[j]);
        r.mu = (v.adjoint() * Mii * v)(0).real() / (v.adjoint() * FS * v)(0).real();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> gii(Mii, FS);
        for (int j = 0; j < N; ++j) r.eig_ii.push_back(gii.eigenvalues()(j));
        if (N > 1) {
            // Tangential eigenvalue: any direction orthogonal to z.
            Eigen::VectorXcd t = Eigen::VectorXcd::Zero(N);
            int j0 = 0;
            for (int j = 1; j < N; ++j)
                if (std::abs(z[j]) > std::abs(z[j0])) j0 = j;
            const int j1 = (j0 + 1) % N;
            t(j0) = -z[j1];
            t(j1) = z[j0];
            if (t.norm() == 0.0) t(j1) = 1.0;
            r.lambda = (t.adjoint() * Mii * t)(0).real() / (t.adjoint() * FS * t)(0).real();
        } else {
            r.lambda = 1.0 + chi1 / r2;
        }
        r.lambda_closed = 1.0 + chi1 / r2;
        r.mu_closed = 1.0 - chi1 + chi2 / (2.0 * r2);
        r.mu_uncorrected = (1.0 + r2 - chi1) + chi2 / (2.0 * r2);
    }
    constexpr double kTol = 1e-10;
    r.holds_i = *std::min_element(r.eig_i.begin(), r.eig_i.end()) >= -kTol;
    r.holds_ii = r.mu >= r.mu_bound * (1.0 - kTol) && (N == 1 || r.lambda >= r.lambda_bound * (1.0 - kTol));
    return r;
}

PowerHessianReport power_hessian_eigenvalues(double beta, const std::vector<cplx>& z) {
    if (!(beta > 0.0)) fail(ErrorKind::InvalidInput, "beta must be positive");
    double u = 0.0;
    for (const auto& c : z) u += std::norm(c);
    if (u == 0.0) fail(ErrorKind::Singular, "|z|^{2 beta} is not smooth at the origin");
    const int n = static_cast<int>(z.size());
    PowerHessianReport r;
    const double scale = beta * std::pow(u, beta - 1.0);
    r.eigenvalues.assign(n - 1, scale);
    r.eigenvalues.push_back(scale * beta);
    std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
    r.C_beta = std::max({beta, beta * beta, 1.0 / beta, 1.0 / (beta * beta)});
    const double ref = std::pow(u, beta - 1.0);
    r.within_envelope = true;
    for (double e : r.eigenvalues)
        r.within_envelope = r.within_envelope && e >= ref / r.C_beta * (1.0 - 1e-12) && e <= ref * r.C_beta * (1.0 + 1e-12);
    return r;
}

GapTable sup_mean_gap(const PshFamily& F, double slope_tol) {
    GapTable g;
    for (std::size_t k = 0; k < F.members.size(); ++k) {
        g.abs_t.push_back(std::abs(F.params[k]));
        g.gap.push_back(F.sups[k] - F.means[k]);
    }
    g.sup_gap = g.gap.empty() ? 0.0 : max_value(g.gap);
    std::vector<double> x, y;
    for (std::size_t k = 0; k < g.gap.size(); ++k)
        if (g.abs_t[k] > 0.0) {
            x.push_back(-std::log(g.abs_t[k]));
            y.push_back(g.gap[k]);
        }
    const bool spread = x.size() >= 2 && max_value(x) > min_value(x);
    g.slope = spread ? linear_fit(x, y).slope : 0.0;
    g.bounded = g.slope <= slope_tol;
    return g;
}

double conic_potential(double rho, double t) {
    const double r2 = rho * rho;
    return 0.25 * (2.0 * std::log(rho) + std::log1p(r2) + 2.0 * std::log(t)) - 0.5 * std::log(r2 * r2 + t * t + r2) +
           0.5 * std::log(2.0);
}

double conic_area_density(double rho, double t) {
    const double r2 = rho * rho;
    const double den = r2 * r2 + r2 + t * t;
    return (r2 * r2 + t * t * (4.0 * r2 + 1.0)) / (kPi * den * den);
}

ConicReport conic_counterexample(const std::vector<double>& ladder, int nodes_per_decade) {
    if (ladder.empty()) fail(ErrorKind::InvalidInput, "empty conic ladder");
    if (nodes_per_decade < 10) fail(ErrorKind::InvalidInput, "too few quadrature nodes");
    ConicReport rep;
    rep.levels.resize(ladder.size());
    for (double t : ladder)
        if (!(t > 0.0 && t <= 0.5)) fail(ErrorKind::Domain, "conic parameter must lie in (0, 1/2]");
    parallel_for(ladder.size(), [&](std::size_t k) {
        const double t = ladder[k];
        ConicLevel& L = rep.levels[k];
        L.t = t;
        // Radial trapezoid in s = log rho; both tails decay like e^{-2|s|}.
        const double s_lo = std::log(t) - 22.0, s_hi = 22.0;
        const long nodes = static_cast<long>(std::ceil(nodes_per_decade * (s_hi - s_lo) / std::log(10.0)));
        const double h = (s_hi - s_lo) / static_cast<double>(nodes);
        double I = 0.0, mass = 0.0;
        for (long i = 0; i <= nodes; ++i) {
            const double s = s_lo + h * static_cast<double>(i);
            const double rho = std::exp(s);
            const double w = (i == 0 || i == nodes ? 0.5 : 1.0) * h * 2.0 * kPi * rho * rho * conic_area_density(rho, t);
            mass += w;
            I += w * conic_potential(rho, t);
        }
        L.integral = I;
        L.mass = mass;
        L.sup_expected_radius = std::sqrt(0.5 * (std::sqrt(1.0 + 4.0 * t * t) - 1.0));
        const auto best = boost::math::tools::brent_find_minima(
            [t](double s) { return -conic_potential(std::exp(s), t); }, std::log(t) - 5.0, 5.0, 50);
        L.sup = std::max(-best.second, conic_potential(L.sup_expected_radius, t));
        L.gap = L.sup - I / mass;
    });
    std::vector<double> x, y;
    for (const auto& L : rep.levels) {
        x.push_back(std::log(L.t));
        y.push_back(L.integral);
    }
    rep.decades = std::log10(max_value(ladder) / min_value(ladder));
    if (ladder.size() >= 2 && rep.decades > 0.0) {
        const LinearFit fit = linear_fit(x, y);
        rep.slope = fit.slope;
        rep.intercept = fit.intercept;
        rep.r2 = fit.r2;
    }
    return rep;
}

H1Measurement measure_h1(const ReferenceForm& omega, double alpha, const std::vector<std::vector<double>>& members) {
    if (!(alpha > 0.0)) fail(ErrorKind::InvalidInput, "alpha must be positive");
    const PositiveMeasure nu = reference_measure(omega);
    H1Measurement h;
    h.alpha = alpha;
    h.members = members.size();
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto& v = members[k];
        if (v.size() != nu.weights.size()) fail(ErrorKind::InvalidInput, "member size mismatch");
        const double top = max_value(v);
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += std::exp(-alpha * (v[i] - top)) * nu.weights[i];
        s /= nu.mass;
        if (s > h.A) {
            h.A = s;
            h.argmax = k;
        }
    }
    return h;
}

std::vector<std::vector<double>> h1_dictionary(const FormPtr& omega, int count, std::uint64_t seed) {
    std::vector<std::vector<double>> out = trig_psh_dictionary(*omega, count, seed);
    if (omega->constant()) {
        const GreenFunction G = torus_green(0, omega);
        for (double s : {0.0, 1e-3, 1e-2}) out.push_back(smoothed_green_potential(G, s));
    }
    return out;
}

}  // namespace pluri
