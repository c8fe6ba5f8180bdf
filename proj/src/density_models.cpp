#include "pluri/density_models.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pluri {

namespace {

constexpr double kLog2 = 0.69314718055994530942;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using Integrand = std::function<double(const double* u)>;

// int over {u_i >= lo, sum u_i <= L} of g(u) du, nested adaptive Gauss-Kronrod.
double simplex_integral(int p, double lo, double L, const Integrand& g) {
    if (L <= p * lo) return 0.0;
    std::array<double, 3> u{};
    std::function<double(int, double)> level = [&](int k, double budget) -> double {
        const double hi = budget - (p - k - 1) * lo;
        if (hi <= lo) return 0.0;
        auto f = [&](double x) {
            u[k] = x;
            return k + 1 == p ? g(u.data()) : level(k + 1, budget - x);
        };
        // Inner levels carry their own quadrature noise; outer levels must not chase it.
        const bool innermost = k + 1 == p;
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, innermost ? 10 : 5,
                                                                             innermost ? 1e-12 : 1e-10);
    };
    return level(0, L);
}

void check_ladder(const std::vector<double>& ladder) {
    if (ladder.empty()) fail(ErrorKind::InvalidInput, "empty t ladder");
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        if (!(ladder[k] > 0.0 && ladder[k] < 1.0)) fail(ErrorKind::Domain, "ladder values must lie in (0, 1)");
        if (k > 0 && !(ladder[k] < ladder[k - 1])) fail(ErrorKind::InvalidInput, "ladder must decrease strictly");
    }
}

// P(sum of independent Exp(c_i) <= L).
double hypoexponential_cdf(const std::vector<double>& c, double L) {
    const bool equal = std::all_of(c.begin(), c.end(), [&](double x) { return std::abs(x - c[0]) < 1e-14 * c[0]; });
    if (equal) return boost::math::gamma_p(static_cast<double>(c.size()), c[0] * L);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j)
            if (std::abs(c[i] - c[j]) < 1e-3 * std::max(c[i], c[j])) return kNaN;  // nearly confluent: no stable form
    double tail = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < c.size(); ++j)
            if (j != i) w *= c[j] / (c[j] - c[i]);
        tail += w * std::exp(-c[i] * L);
    }
    return 1.0 - tail;
}

void finish(IntegralCertificate& c) {
    c.sup = *std::max_element(c.values.begin(), c.values.end());
    c.monotone = true;
    for (std::size_t k = 1; k < c.values.size(); ++k)
        if (c.values[k] < c.values[k - 1] * (1.0 - 1e-12)) c.monotone = false;
    c.max_closed_form_error = 0.0;
    for (std::size_t k = 0; k < c.values.size(); ++k)
        if (!std::isnan(c.closed_form[k]))
            c.max_closed_form_error =
                std::max(c.max_closed_form_error, std::abs(c.values[k] - c.closed_form[k]) / std::abs(c.closed_form[k]));
    c.bounded = std::isfinite(c.majorant) && c.monotone && c.sup <= c.majorant * (1.0 + 1e-9);
    c.verdict = c.bounded ? "uniformly bounded" : "diverging";
}

// int_{lo}^inf (u + c0)^N e^{-c u} du.
double power_exp_tail(double N, double c, double c0, double lo) {
    return std::exp(c * c0) * std::pow(c, -N - 1.0) * boost::math::tgamma(N + 1.0, c * (lo + c0));
}

}  // namespace

void SncLocalModel::validate() const {
    if (p < 1 || p > 3) fail(ErrorKind::Unsupported, "radial reduction implemented for 1 <= p <= 3");
    if (n < p) fail(ErrorKind::InvalidInput, "fiber dimension n must be >= p");
    if (r < 0 || s < r || s > p) fail(ErrorKind::InvalidInput, "need 0 <= r <= s <= p");
    if (m < 1) fail(ErrorKind::InvalidInput, "index m must be >= 1");
    if (static_cast<int>(a.size()) != p) fail(ErrorKind::InvalidInput, "one discrepancy per branch");
    for (int i = 0; i < p; ++i) {
        if (!(a[i] >= -1.0)) fail(ErrorKind::InvalidInput, "discrepancies must be >= -1");
        const double ma = m * a[i];
        if (std::abs(ma - std::round(ma)) > 1e-9) fail(ErrorKind::InvalidInput, "m a_i must be an integer");
        if ((i < s) != (a[i] == -1.0)) fail(ErrorKind::InvalidInput, "exactly the first s branches have a_i = -1");
    }
    if (!(delta >= 0.0) || !(eps >= 0.0) || !(A > 0.0)) fail(ErrorKind::InvalidInput, "delta, eps >= 0 and A > 0");
}

bool SncLocalModel::canonical() const {
    return r == 0 && std::all_of(a.begin(), a.end(), [](double x) { return x >= 0.0; });
}

SncLocalModel parse_snc_model(const std::string& text) {
    SncLocalModel M;
    bool have_n = false;
    std::istringstream in(text);
    std::string line;
    auto number = [](const std::string& key, const std::string& v) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || v.find_first_not_of(" \t", used) != std::string::npos)
            fail(ErrorKind::InvalidInput, "bad value for " + key + ": " + v);
        return x;
    };
    auto integer = [&](const std::string& key, const std::string& v) {
        const double x = number(key, v);
        if (x != std::floor(x)) fail(ErrorKind::InvalidInput, key + " must be an integer");
        return static_cast<int>(x);
    };
    while (std::getline(in, line)) {
        line = line.substr(0, line.find('#'));
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) fail(ErrorKind::InvalidInput, "expected key = value: " + line);
        auto trim = [](std::string x) {
            const auto b = x.find_first_not_of(" \t\r");
            const auto e = x.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : x.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key == "n") {
            M.n = integer(key, value);
            have_n = true;
        } else if (key == "p") {
            M.p = integer(key, value);
        } else if (key == "r") {
            M.r = integer(key, value);
        } else if (key == "s") {
            M.s = integer(key, value);
        } else if (key == "m") {
            M.m = integer(key, value);
        } else if (key == "eps") {
            M.eps = number(key, value);
        } else if (key == "delta") {
            M.delta = number(key, value);
        } else if (key == "A") {
            M.A = number(key, value);
        } else if (key == "a_list") {
            M.a.clear();
            std::istringstream parts(value);
            std::string item;
            while (std::getline(parts, item, ',')) M.a.push_back(number(key, trim(item)));
        } else {
            fail(ErrorKind::InvalidInput, "unknown model key: " + key);
        }
    }
    if (!have_n) M.n = M.p;
    M.validate();
    return M;
}

std::vector<double> default_t_ladder() {
    std::vector<double> t;
    for (int k = 1; k <= 8; ++k) t.push_back(std::pow(10.0, -k));
    return t;
}

IntegralCertificate canonical_integrability(const SncLocalModel& M, double dA, const std::vector<double>& ladder) {
    M.validate();
    check_ladder(ladder);
    if (M.s != 0) fail(ErrorKind::Precondition, "canonical integrability needs every a_i > -1");
    if (!(dA >= 0.0)) fail(ErrorKind::InvalidInput, "dA must be >= 0");
    // Density pole |z|^{2 min(a,0)} times |z|^{-2 dA}.
    std::vector<double> b(M.p), c(M.p);
    for (int i = 0; i < M.p; ++i) {
        b[i] = dA - std::min(M.a[i], 0.0);
        if (b[i] >= 1.0) fail(ErrorKind::Divergence, "exponent 2(dA - min(a_i, 0)) >= 2 is not integrable");
        c[i] = 2.0 - 2.0 * b[i];
    }
    const double free_area = std::pow(kPi, M.n - M.p);
    double limit = free_area;
    for (int i = 0; i < M.p; ++i) limit *= kPi / (1.0 - b[i]);

    IntegralCertificate cert;
    cert.ladder = ladder;
    cert.values.assign(ladder.size(), 0.0);
    cert.closed_form.assign(ladder.size(), kNaN);
    cert.box_bound.assign(ladder.size(), 0.0);
    parallel_for(ladder.size(), [&](std::size_t k) {
        const double L = -std::log(ladder[k]);
        // u = -log|z|: dλ = 2 pi e^{-2u} du, integrand e^{2 b u}.
        cert.values[k] = free_area * simplex_integral(M.p, 0.0, L, [&](const double* u) {
                             double v = 1.0;
                             for (int i = 0; i < M.p; ++i) v *= 2.0 * kPi * std::exp(-c[i] * u[i]);
                             return v;
                         });
        cert.closed_form[k] = limit * hypoexponential_cdf(c, L);
        double box = free_area;
        for (int i = 0; i < M.p; ++i) box *= kPi * (1.0 - std::pow(ladder[k], c[i])) / (1.0 - b[i]);
        cert.box_bound[k] = box;
    });
    cert.limit = limit;
    cert.majorant = limit;
    finish(cert);
    return cert;
}

WtIntegral wt_integral(const SncLocalModel& M, double eps, double delta, double t) {
    M.validate();
    if (!(eps > 0.0)) fail(ErrorKind::Domain, "eps must be > 0");
    if (!(delta > 0.0)) fail(ErrorKind::Domain, "delta must be > 0");
    if (!(t > 0.0)) fail(ErrorKind::Domain, "t must be > 0");
    for (int i = M.s; i < M.p; ++i)
        if (!(delta < 0.5 * (1.0 + M.a[i]))) fail(ErrorKind::Precondition, "delta must stay below (1 + a_i)/2");
    const int p = M.p, s = M.s;
    WtIntegral w;
    w.bound = 1.0;
    for (int i = 0; i < p; ++i) w.bound *= i < s ? std::pow(kLog2, -eps) / eps : std::pow(0.5, delta) / delta;
    w.closed_form = kNaN;
    if (t >= std::pow(0.5, p)) {
        w.value = 0.0;
        if (p == 1) w.closed_form = 0.0;
        return w;
    }
    const double L = -std::log(t);
    // In u = -log r: lc weight u^{-1-eps} du, klt weight e^{-delta u} du.
    w.value = simplex_integral(p, kLog2, L, [&](const double* u) {
        double v = 1.0;
        for (int i = 0; i < p; ++i) v *= i < s ? std::pow(u[i], -1.0 - eps) : std::exp(-delta * u[i]);
        return v;
    });
    if (p == 1)
        w.closed_form = s == 1 ? (std::pow(kLog2, -eps) - std::pow(L, -eps)) / eps
                               : (std::pow(0.5, delta) - std::pow(t, delta)) / delta;
    return w;
}

IntegralCertificate h2prime_certificate(const SncLocalModel& M, double eps, const std::vector<double>& ladder) {
    M.validate();
    check_ladder(ladder);
    if (!(eps > 0.0)) fail(ErrorKind::Domain, "eps must be > 0");
    const int p = M.p, s = M.s, K = p - s;
    const double N = M.n + eps, k = M.n + 1.0 + 2.0 * eps;
    const double free_area = std::pow(0.25 * kPi, M.n - p);
    std::vector<double> c(p, 0.0);
    for (int i = s; i < p; ++i) c[i] = 2.0 + 2.0 * M.a[i];

    // |s_F| = (1/2) prod_F |z_i|, so -log|s_F| = log 2 + U_F; same for the klt part.
    auto g = [&](const double* u) {
        double UF = 0.0, UK = 0.0, w = 1.0;
        for (int i = 0; i < s; ++i) {
            UF += u[i];
            w *= 2.0 * kPi;
        }
        for (int i = s; i < p; ++i) {
            UK += u[i];
            w *= 2.0 * kPi * std::exp(-c[i] * u[i]);
        }
        const double lF = kLog2 + UF, lK = kLog2 + UK;
        return w * (std::pow(lF, N) + std::pow(lK, N)) * std::pow(2.0 * lF, -k);
    };

    // phi_q = int_{u_i >= log 2} l_F^{-q} over the F block (AM-GM on l_F when s >= 2).
    auto phi = [&](double q) {
        if (s == 0) return std::pow(kLog2, -q);
        const double c0 = kLog2 / s, e = q / s;
        if (e <= 1.0) return kInf;
        return std::pow(s, -q) * std::pow(std::pow(kLog2 + c0, 1.0 - e) / (e - 1.0), s);
    };
    double klt_mass = 1.0;
    for (int i = s; i < p; ++i) klt_mass *= 2.0 * kPi * std::exp(-c[i] * kLog2) / c[i];
    double klt_log = std::pow(kLog2, N);
    if (K > 0) {
        // (sum x_j)^N <= K^{N-1} sum x_j^N with x_j = u_j + log 2 / K.
        const double c0 = kLog2 / K;
        klt_log = 0.0;
        for (int j = s; j < p; ++j) {
            double term = 2.0 * kPi * power_exp_tail(N, c[j], c0, kLog2);
            for (int i = s; i < p; ++i)
                if (i != j) term *= 2.0 * kPi * std::exp(-c[i] * kLog2) / c[i];
            klt_log += term;
        }
        klt_log *= std::pow(K, N - 1.0);
    }
    const double lc_weight = std::pow(2.0 * kPi, s) * std::pow(2.0, -k);
    const double majorant = free_area * lc_weight * (phi(1.0 + eps) * klt_mass + phi(k) * klt_log);

    IntegralCertificate cert;
    cert.ladder = ladder;
    cert.values.assign(ladder.size(), 0.0);
    cert.closed_form.assign(ladder.size(), kNaN);
    cert.box_bound.assign(ladder.size(), kNaN);
    parallel_for(ladder.size(), [&](std::size_t j) {
        const double L = -std::log(ladder[j]);
        cert.values[j] = free_area * simplex_integral(p, kLog2, L, g);
        if (p != 1 || L <= kLog2) return;
        // v = log 2 + u on [2 log 2, log 2 + L].
        const double v0 = 2.0 * kLog2, v1 = kLog2 + L;
        if (s == 1) {
            const double a1 = (std::pow(v0, -eps) - std::pow(v1, -eps)) / eps;
            const double a2 = (std::pow(v0, 1.0 - k) - std::pow(v1, 1.0 - k)) / (k - 1.0);
            cert.closed_form[j] = free_area * 2.0 * kPi * std::pow(2.0, -k) * (a1 + std::pow(kLog2, N) * a2);
        } else {
            const double cc = c[0];
            const double e1 = (std::exp(-cc * kLog2) - std::exp(-cc * L)) / cc;
            const double e2 = std::exp(cc * kLog2) * std::pow(cc, -N - 1.0) *
                              (boost::math::tgamma(N + 1.0, cc * v0) - boost::math::tgamma(N + 1.0, cc * v1));
            cert.closed_form[j] =
                free_area * 2.0 * kPi * std::pow(2.0 * kLog2, -k) * (std::pow(kLog2, N) * e1 + e2);
        }
    });
    cert.majorant = majorant;
    cert.limit = (p == 1) ? majorant : kNaN;  // the majorant is exact in one variable
    finish(cert);
    return cert;
}

FiberDensityTable fiber_density_table(const SncLocalModel& M, const MeromorphicFactor& h, double t,
                                      int samples_per_axis) {
    M.validate();
    if (static_cast<int>(h.b.size()) != M.p) fail(ErrorKind::InvalidInput, "one divisor coefficient per branch");
    if (!(t > 0.0 && t < 1.0)) fail(ErrorKind::Domain, "t must lie in (0, 1)");
    if (samples_per_axis < 2) fail(ErrorKind::InvalidInput, "need at least two samples per axis");
    for (int i = 0; i < M.p; ++i) {
        const int allowed = i < M.r ? 0 : std::max(0, static_cast<int>(std::lround(-M.m * M.a[i])));
        if (-h.b[i] > allowed) fail(ErrorKind::Inconsistent, "pole order exceeds (-m a_i)_+ on a branch");
    }
    FiberDensityTable T;
    T.lp_threshold = kInf;
    for (int i = 0; i < M.p; ++i) {
        const double e = static_cast<double>(h.b[i]) / M.m - (i < M.r ? 1.0 : 0.0);
        T.exponents.push_back(e);
        if (e < 0.0) T.lp_threshold = std::min(T.lp_threshold, -1.0 / e);
    }
    T.h2 = T.lp_threshold > 1.0;
    T.needs_h2prime = !T.h2;

    // Geometric radii in [t^{1/p}, 0.99] on each axis, kept when prod r >= t (the fiber chart).
    const double lo = std::log(std::pow(t, 1.0 / M.p)), hi = std::log(0.99);
    std::vector<int> idx(M.p, 0);
    while (true) {
        std::vector<double> rad(M.p);
        double prod = 1.0;
        for (int i = 0; i < M.p; ++i) {
            rad[i] = std::exp(lo + (hi - lo) * idx[i] / (samples_per_axis - 1));
            prod *= rad[i];
        }
        if (prod >= t) {
            double d = std::pow(std::abs(1.0 + h.eta * prod), 2.0 / M.m);
            for (int i = 0; i < M.p; ++i) d *= std::pow(rad[i], 2.0 * T.exponents[i]);
            T.radii.push_back(rad);
            T.density.push_back(d);
        }
        int j = 0;
        while (j < M.p && ++idx[j] == samples_per_axis) idx[j++] = 0;
        if (j == M.p) break;
    }
    return T;
}

}  // namespace pluri
