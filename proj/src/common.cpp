#include "pluri/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <thread>

namespace pluri {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid_input";
        case ErrorKind::Unsupported: return "unsupported";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Inconsistent: return "inconsistent";
        case ErrorKind::NotPsh: return "not_psh";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Singular: return "singular";
        case ErrorKind::InvalidCertificate: return "invalid_certificate";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

Herm Herm::identity(int dim, double s) {
    Herm h(dim);
    for (int i = 0; i < dim; ++i) h(i, i) = s;
    return h;
}

Herm Herm::diagonal(const std::vector<double>& d) {
    Herm h(static_cast<int>(d.size()));
    for (int i = 0; i < h.n; ++i) h(i, i) = d[i];
    return h;
}

Herm& Herm::operator+=(const Herm& o) {
    for (int k = 0; k < 9; ++k) a[k] += o.a[k];
    return *this;
}

Herm Herm::operator+(const Herm& o) const {
    Herm r = *this;
    r += o;
    return r;
}

Herm Herm::operator-(const Herm& o) const {
    Herm r = *this;
    for (int k = 0; k < 9; ++k) r.a[k] -= o.a[k];
    return r;
}

Herm Herm::operator*(double s) const {
    Herm r = *this;
    for (auto& v : r.a) v *= s;
    return r;
}

double Herm::hermitian_defect() const {
    double d = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d = std::max(d, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
    return d;
}

double det(const Herm& h) {
    switch (h.n) {
        case 1: return h(0, 0).real();
        case 2: return (h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0)).real();
        case 3: {
            cplx d = h(0, 0) * (h(1, 1) * h(2, 2) - h(1, 2) * h(2, 1)) -
                     h(0, 1) * (h(1, 0) * h(2, 2) - h(1, 2) * h(2, 0)) +
                     h(0, 2) * (h(1, 0) * h(2, 1) - h(1, 1) * h(2, 0));
            return d.real();
        }
        default: fail(ErrorKind::Unsupported, "Herm dimension must be 1..3");
    }
}

Herm inverse(const Herm& h) {
    Herm r(h.n);
    if (h.n == 1) {
        r(0, 0) = 1.0 / h(0, 0).real();
        return r;
    }
    if (h.n == 2) {
        double d = det(h);
        r(0, 0) = h(1, 1) / d;
        r(1, 1) = h(0, 0) / d;
        r(0, 1) = -h(0, 1) / d;
        r(1, 0) = -h(1, 0) / d;
        return r;
    }
    Eigen::Matrix3cd m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = h(i, j);
    Eigen::Matrix3cd mi = m.inverse();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = mi(i, j);
    return r;
}

std::vector<double> eigenvalues(const Herm& h) {
    if (h.n == 1) return {h(0, 0).real()};
    if (h.n == 2) {
        double a = h(0, 0).real(), d = h(1, 1).real();
        double b2 = std::norm(h(0, 1));
        double m = 0.5 * (a + d);
        double r = std::sqrt(0.25 * (a - d) * (a - d) + b2);
        return {m - r, m + r};
    }
    Eigen::Matrix3cd m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = h(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(m, Eigen::EigenvaluesOnly);
    auto ev = es.eigenvalues();
    return {ev(0), ev(1), ev(2)};
}

double min_eigenvalue(const Herm& h) { return eigenvalues(h).front(); }

double mixed_discriminant(const std::vector<Herm>& hs) {
    // Polarization: D = (1/n!) sum over subsets S of (-1)^{n-|S|} det(sum_{i in S} h_i).
    const int n = static_cast<int>(hs.size());
    if (n == 0) return 1.0;
    double total = 0.0;
    for (int mask = 1; mask < (1 << n); ++mask) {
        Herm s(hs[0].n);
        int bits = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) {
                s += hs[i];
                ++bits;
            }
        total += ((n - bits) % 2 ? -1.0 : 1.0) * det(s);
    }
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    return total / fact;
}

namespace {
int g_threads = 0;
}

void set_thread_count(int threads) { g_threads = std::max(0, threads); }

int thread_count() {
    if (g_threads > 0) return g_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::InvalidInput, "linear_fit needs >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_value(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }
double min_value(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace pluri
