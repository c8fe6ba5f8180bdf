#include "pluri/apriori_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pluri {

const char* to_string(BoundMode mode) {
    switch (mode) {
        case BoundMode::Lp: return "Lp";
        case BoundMode::Orlicz: return "Orlicz";
        case BoundMode::Big: return "big";
    }
    return "unknown";
}

double bn_constant(int n) {
    if (n < 1) fail(ErrorKind::InvalidInput, "bn_constant requires n >= 1");
    const double two_n = 2.0 * n;
    return two_n * two_n / (kE * kE);
}

namespace {

void validate_common(const HypothesisData& h) {
    if (h.n < 1) fail(ErrorKind::InvalidInput, "n must be >= 1");
    if (!(h.alpha > 0)) fail(ErrorKind::InvalidInput, "alpha must be > 0");
    if (!(h.C > 0)) fail(ErrorKind::InvalidInput, "C must be > 0");
    // nu is a probability measure and psi - sup psi <= 0, so the (H1) integral is >= 1.
    if (h.A < 1.0) fail(ErrorKind::Inconsistent, "A_alpha < 1 contradicts nu being a probability measure");
}

}  // namespace

BoundCertificate kolodziej_bound(const HypothesisData& h) {
    validate_common(h);
    if (h.mode == BoundMode::Orlicz) fail(ErrorKind::InvalidInput, "use orlicz_bound for (H2') data");
    if (!(h.p > 1.0)) fail(ErrorKind::InvalidInput, "p must be > 1");
    BoundCertificate c;
    c.mode = h.mode;
    c.n = h.n;
    c.alpha = h.alpha;
    c.A = h.A;
    c.p = h.p;
    c.q = h.q();
    c.C = h.C;
    c.bn = bn_constant(h.n);
    const double n = h.n, q = c.q;
    c.D = std::pow(c.bn, n) * h.C * std::pow(h.A, 1.0 / q) * std::exp(h.alpha / q);
    const double qfact_root = std::exp(std::lgamma(q + 1.0) / q);
    const double Dn = std::pow(c.D, 1.0 / n);
    c.s0 = 1.0 + kE * Dn * h.C * qfact_root * std::pow(h.A, 1.0 / q) / h.alpha;
    c.M = c.s0 + 5.0 * Dn;
    return c;
}

GiorgioResult giorgio_iteration(const std::function<double(double)>& f, double D, int n, double s_start, int max_steps) {
    if (n < 1) fail(ErrorKind::InvalidInput, "n must be >= 1");
    if (D < 0) fail(ErrorKind::InvalidInput, "D must be >= 0");
    GiorgioResult r;
    const double Dn = std::pow(D, 1.0 / n);
    r.bound = s_start + 5.0 * Dn;
    r.sharp_bound = s_start + kE * kE / (kE - 1.0) * Dn;
    auto step = [&](double s) {
        double fs = f(s);
        if (fs == std::numeric_limits<double>::infinity()) return 0.0;
        return kE * Dn * std::exp(-fs);
    };
    r.delta0 = step(s_start);
    if (!(r.delta0 < 1.0)) fail(ErrorKind::Precondition, "delta_0 = e D^{1/n} exp(-f(s_start)) must be < 1");
    double s = s_start;
    r.s.push_back(s);
    for (int j = 0; j < max_steps; ++j) {
        double d = step(s);
        r.delta.push_back(d);
        if (d == 0.0 || s + d == s) {
            r.halted = true;
            break;
        }
        s += d;
        r.s.push_back(s);
    }
    r.s_infinity = s;
    return r;
}

GiorgioResult giorgio_iteration(const std::vector<double>& s_samples, const std::vector<double>& f_samples, double D,
                                int n, double s_start) {
    if (s_samples.size() != f_samples.size() || s_samples.empty())
        fail(ErrorKind::InvalidInput, "sample arrays must be non-empty and paired");
    for (std::size_t i = 1; i < s_samples.size(); ++i) {
        if (!(s_samples[i] > s_samples[i - 1])) fail(ErrorKind::InvalidInput, "s samples must increase");
        if (f_samples[i] < f_samples[i - 1]) fail(ErrorKind::InvalidInput, "f samples must be nondecreasing");
    }
    auto f = [&](double s) {
        if (s <= s_samples.front()) return f_samples.front();
        if (s > s_samples.back()) return std::numeric_limits<double>::infinity();
        auto it = std::lower_bound(s_samples.begin(), s_samples.end(), s);
        std::size_t i = static_cast<std::size_t>(it - s_samples.begin());
        if (i == 0) return f_samples[0];
        double a = s_samples[i - 1], b = s_samples[i];
        double fa = f_samples[i - 1], fb = f_samples[i];
        if (std::isinf(fb)) return fb;
        return fa + (fb - fa) * (s - a) / (b - a);
    };
    return giorgio_iteration(f, D, n, s_start);
}

double GiorgioScenario::operator()(double s) const {
    double x = std::max(0.0, s - s_start);
    if (x >= L) return std::numeric_limits<double>::infinity();
    return f0 + beta * x - gamma * std::log1p(-x / L);
}

bool giorgio_admissible(const std::function<double(double)>& f, double D, int n, double s_start, double span) {
    const double f_start = f(s_start);
    if (!(f_start >= 0.0)) return false;
    if (!(kE * std::pow(D, 1.0 / n) * std::exp(-f_start) < 1.0)) return false;
    const double logDn = std::log(D) / n;
    for (int i = 0; i < 400; ++i) {
        const double s = s_start + span * i / 400.0;
        const double fs = f(s);
        if (std::isinf(fs)) break;
        for (int k = 0; k <= 120; ++k) {
            const double d = std::pow(10.0, -8.0 + 8.0 * k / 120.0) * (1.0 - 1e-9);
            const double lhs = f(s + d);
            if (std::isinf(lhs)) continue;
            if (lhs < 2.0 * fs + std::log(d) - logDn) return false;
        }
    }
    return true;
}

GiorgioScenario random_giorgio_scenario(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        GiorgioScenario g;
        g.n = 1 + static_cast<int>(U(rng) * 3.0);
        g.D = std::pow(10.0, -2.0 + 3.0 * U(rng));
        g.s_start = 5.0 * U(rng);
        g.f0 = std::max(0.0, 1.0 + std::log(g.D) / g.n) + 0.05 + 3.0 * U(rng);
        g.beta = 5.0 * U(rng);
        g.gamma = 0.1 + 0.8 * U(rng);
        g.L = 0.01 + 0.49 * U(rng);
        if (giorgio_admissible(g, g.D, g.n, g.s_start, g.L)) return g;
    }
    fail(ErrorKind::Divergence, "no admissible scenario found");
}

OrliczMachinery::OrliczMachinery(int n, double eps) : n_(n), eps_(eps) {
    if (n < 1) fail(ErrorKind::InvalidInput, "n must be >= 1");
    if (!(eps > 0)) fail(ErrorKind::InvalidInput, "eps must be > 0");
    const double a = n + eps;
    integer_exponent_ = std::floor(a) == a;
    m_ = integer_exponent_ ? static_cast<int>(a) : 0;
}

double OrliczMachinery::chi_prime(double t) const {
    if (t < 0) fail(ErrorKind::Domain, "chi' needs t >= 0");
    return std::pow(std::log1p(t), exponent());
}

double OrliczMachinery::chi(double t) const {
    if (t < 0) fail(ErrorKind::Domain, "chi needs t >= 0");
    if (t == 0) return 0.0;
    // With v = log(1+u): chi(t) = int_0^V v^a e^v dv, V = log(1+t).
    const double V = std::log1p(t);
    const double a = exponent();
    if (integer_exponent_ && m_ <= 4 && V >= m_) {
        // (t+1) sum_j (-1)^{m-j} m!/j! V^j minus its value at t = 0.
        double mfact = std::tgamma(m_ + 1.0);
        double s = 0.0, term = mfact;  // m!/j! V^j, built from j = 0 upward
        for (int j = 0; j <= m_; ++j) {
            if (j > 0) term *= V / j;
            s += ((m_ - j) % 2 ? -1.0 : 1.0) * term;
        }
        return (t + 1.0) * s - (m_ % 2 ? -1.0 : 1.0) * mfact;
    }
    // Series sum_k V^{a+k+1} / (k! (a+k+1)); all terms positive.
    double sum = 0.0;
    double vk = std::pow(V, a + 1.0);  // V^{a+1} V^k / k!
    for (int k = 0; k < 2000; ++k) {
        if (k > 0) vk *= V / k;
        double term = vk / (a + k + 1.0);
        sum += term;
        if (k > V && term < 1e-17 * sum) break;
    }
    return sum;
}

double OrliczMachinery::t_of_s(double s) const {
    if (s < 0) fail(ErrorKind::Domain, "chi* needs s >= 0");
    return std::expm1(std::pow(s, 1.0 / exponent()));
}

double OrliczMachinery::chi_star(double s) const {
    const double t = t_of_s(s);
    return s * t - chi(t);
}

double OrliczMachinery::chi_inverse(double y) const {
    if (y < 0) fail(ErrorKind::Domain, "chi^{-1} needs y >= 0");
    if (y == 0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (chi(hi) < y) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        (chi(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double OrliczMachinery::chi_star_inverse(double y) const {
    if (y < 0) fail(ErrorKind::Domain, "chi*^{-1} needs y >= 0");
    if (y == 0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (chi_star(hi) < y) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        (chi_star(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double OrliczMachinery::luxemburg(const std::vector<double>& f, const std::vector<double>& w) const {
    if (f.size() != w.size()) fail(ErrorKind::InvalidInput, "luxemburg: size mismatch");
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    if (fmax == 0.0) return 0.0;
    auto mass = [&](double r) {
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * chi(std::abs(f[i]) / r);
        return s;
    };
    double lo = fmax, hi = fmax;
    while (mass(lo) <= 1.0) lo *= 0.5;
    while (mass(hi) > 1.0) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        (mass(mid) > 1.0 ? lo : hi) = mid;
    }
    return hi;
}

double OrliczMachinery::star_exponential_ratio() const {
    auto g = [&](double s) { return chi_star(s) * std::exp(-s); };
    double best_s = 0.0, best = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        double s = 0.05 * i;
        double v = g(s);
        if (v > best) {
            best = v;
            best_s = s;
        }
    }
    // Golden-section refinement around the grid maximizer.
    double a = std::max(0.0, best_s - 0.05), b = best_s + 0.05;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < 100; ++i) {
        double c = b - phi * (b - a), d = a + phi * (b - a);
        (g(c) > g(d) ? b : a) = (g(c) > g(d) ? d : c);
    }
    return std::max(best, g(0.5 * (a + b)));
}

BoundCertificate orlicz_bound(const HypothesisData& h) {
    validate_common(h);
    if (!(h.eps > 0)) fail(ErrorKind::InvalidInput, "eps must be > 0");
    OrliczMachinery orl(h.n, h.eps);
    BoundCertificate c;
    c.mode = BoundMode::Orlicz;
    c.n = h.n;
    c.alpha = h.alpha;
    c.A = h.A;
    c.C = h.C;
    c.eps = h.eps;
    c.bn = bn_constant(h.n);
    const double n = h.n;
    const double a = n + h.eps;
    c.kappa = 1.0 + h.eps / n;

    // mu(K) <= Phi(c) := min(1, 2 C' r_K) with chi*(1/r_K) = 1/nu(K) and
    // nu(K) <= A e^alpha exp(-alpha / Cap^{1/n}), c = Cap(K).
    auto log_inv_nu = [&](double cap) {
        return std::max(0.0, h.alpha / std::pow(cap, 1.0 / n) - std::log(h.A) - h.alpha);
    };
    std::vector<double> caps, phis;
    for (int k = 0; k <= 2000; ++k) {
        double cap = std::pow(10.0, -k / 100.0);
        double L = log_inv_nu(cap);
        if (L > 600.0) break;
        double s = orl.chi_star_inverse(std::exp(L));
        caps.push_back(cap);
        phis.push_back(std::min(1.0, 2.0 * h.C / s));
    }

    // Cap{phi < -s-1} <= (1/s) int (-phi) dmu <= 2 C' ||phi||_{chi*} / s.
    const double K1 = orl.star_exponential_ratio();
    c.E = 2.0 * h.C * std::max(1.0, K1 * h.A) / h.alpha;

    // Any exponent k in (1, kappa] gives a valid domination mu <= C''(k) Cap^k,
    // and the iteration closes for each; keep the smallest resulting M.
    c.M = std::numeric_limits<double>::infinity();
    const int J = 64;
    for (int j = 1; j <= J; ++j) {
        const double k = 1.0 + (c.kappa - 1.0) * j / J;
        // Phi(c)/c^kappa tends to 2C' alpha^{-(n+eps)} as c -> 0; smaller k tend to 0.
        double sup = (j == J) ? 2.0 * h.C * std::pow(h.alpha, -a) : 0.0;
        for (std::size_t i = 0; i < caps.size(); ++i) sup = std::max(sup, phis[i] / std::pow(caps[i], k));
        const double base = kE * std::pow(sup, 1.0 / n);
        const double s0 = 1.0 + c.E * std::pow(base, n / (k - 1.0));
        const double d0 = std::min(1.0, base);
        const double M = s0 + d0 / (1.0 - std::exp(-(k - 1.0)));
        if (M < c.M) {
            c.M = M;
            c.s0 = s0;
            c.delta0 = d0;
            c.C2 = sup;
            c.kappa_used = k;
        }
    }
    return c;
}

}  // namespace pluri
