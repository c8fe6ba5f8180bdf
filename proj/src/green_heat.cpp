#include "pluri/green_heat.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>

namespace pluri {

namespace {

constexpr double kCut = 40.0;  // e^{-40} truncation of theta sums
constexpr double kInf = std::numeric_limits<double>::infinity();

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// Visits every integer vector with lo[a] <= k[a] <= hi[a].
template <class F>
void for_box(const std::vector<int>& lo, const std::vector<int>& hi, F&& fn) {
    const int d = static_cast<int>(lo.size());
    std::vector<int> k(lo);
    while (true) {
        fn(k);
        int a = 0;
        while (a < d && k[a] == hi[a]) {
            k[a] = lo[a];
            ++a;
        }
        if (a == d) return;
        ++k[a];
    }
}

double box_count(const std::vector<int>& lo, const std::vector<int>& hi) {
    double c = 1.0;
    for (std::size_t a = 0; a < lo.size(); ++a) c *= hi[a] - lo[a] + 1;
    return c;
}

void require_flat(const ReferenceForm& omega) {
    const ModelManifold& m = omega.manifold();
    if (!m.is_torus()) fail(ErrorKind::Unsupported, "Green functions are implemented on flat tori only");
    if (m.n() > 2) fail(ErrorKind::Unsupported, "Green functions need n <= 2");
    if (!omega.constant()) fail(ErrorKind::Unsupported, "Green functions need a constant form");
    if (!omega.kahler()) fail(ErrorKind::Precondition, "Green functions need a Kahler form");
}

// Real symmetric S with tr(g^{-1} H_c) = sum S_ab d_a d_b in coordinates (x1,y1,...).
Eigen::MatrixXd real_symbol(const Herm& g) {
    const int n = g.n;
    const Herm K = inverse(g);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const double A = K(j, k).real(), B = K(j, k).imag();
            S(2 * j, 2 * k) += 0.25 * A;
            S(2 * j + 1, 2 * k + 1) += 0.25 * A;
            S(2 * j, 2 * k + 1) += 0.25 * B;
            S(2 * k + 1, 2 * j) += 0.25 * B;
        }
    return 0.5 * (S + S.transpose());
}

// Lattice Green kernel at base 0, optionally damped by the discrete heat flow exp(s Delta_h).
std::vector<double> lattice_kernel(const ReferenceForm& omega, double s) {
    const ModelManifold& m = omega.manifold();
    const int d = m.real_dim();
    const Eigen::MatrixXd Cu = m.period_inverse() * real_symbol(omega.at(0)) * m.period_inverse().transpose();
    const double V = det(omega.at(0)) * m.area() * m.volume_scale();
    const std::size_t N = m.size();

    fftw_complex* buf = fftw_alloc_complex(N);
    std::vector<int> mi(d);
    for (std::size_t i = 0; i < N; ++i) {
        m.multi_index(i, mi.data());
        double sym = 0.0;
        std::vector<double> th(d);
        for (int a = 0; a < d; ++a) th[a] = 2.0 * kPi * mi[a] / m.resolution(a);
        for (int a = 0; a < d; ++a) {
            const double ha = m.spacing(a);
            const double sa = std::sin(0.5 * th[a]);
            sym += Cu(a, a) * 4.0 * sa * sa / (ha * ha);
            for (int b = 0; b < d; ++b)
                if (b != a) sym += Cu(a, b) * std::sin(th[a]) * std::sin(th[b]) / (ha * m.spacing(b));
        }
        buf[i][0] = i == 0 ? 0.0 : std::exp(-sym * s) / (sym * V);
        buf[i][1] = 0.0;
    }
    // Axis 0 is the fastest index, so FFTW sees the dimensions reversed.
    std::vector<int> dims(d);
    for (int a = 0; a < d; ++a) dims[a] = m.resolution(d - 1 - a);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    std::vector<double> out(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = buf[i][0];
    fftw_free(buf);
    return out;
}

std::vector<double> shifted(const ModelManifold& m, const std::vector<double>& kernel, std::size_t base) {
    const int d = m.real_dim();
    std::vector<int> mb(d), mi(d), md(d);
    m.multi_index(base, mb.data());
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.multi_index(i, mi.data());
        for (int a = 0; a < d; ++a) md[a] = ((mi[a] - mb[a]) % m.resolution(a) + m.resolution(a)) % m.resolution(a);
        out[i] = kernel[m.flat_index(0, md.data())];
    }
    return out;
}

Eigen::VectorXd grid_offset(const ModelManifold& m, std::size_t from, std::size_t to) {
    return m.coords(to) - m.coords(from);
}

}  // namespace

FlatTorusKernel::FlatTorusKernel(const ReferenceForm& omega) {
    require_flat(omega);
    const ModelManifold& m = omega.manifold();
    d_ = m.real_dim();
    P_ = m.period();
    Pinv_ = m.period_inverse();
    const Eigen::MatrixXd S = real_symbol(omega.at(0));
    Cu_ = Pinv_ * S * Pinv_.transpose();
    CuInv_ = Cu_.inverse();
    detg_ = det(omega.at(0));
    detS_ = S.determinant();
    V_ = detg_ * m.area() * m.volume_scale();
    gap_ = kInf;
    for_box(std::vector<int>(d_, -2), std::vector<int>(d_, 2), [&](const std::vector<int>& k) {
        Eigen::VectorXd kv(d_);
        bool zero = true;
        for (int a = 0; a < d_; ++a) {
            kv(a) = k[a];
            zero = zero && k[a] == 0;
        }
        if (!zero) gap_ = std::min(gap_, eigenvalue(kv));
    });
    // Balances the number of Fourier modes against the number of images.
    tau_ = std::sqrt(CuInv_.trace() / Cu_.trace()) / (4.0 * kPi);
}

double FlatTorusKernel::eigenvalue(const Eigen::VectorXd& k) const {
    return 4.0 * kPi * kPi * k.dot(Cu_ * k);
}

double FlatTorusKernel::quad(const double* w, const Eigen::MatrixXd& A) const {
    double q = 0.0;
    for (int a = 0; a < d_; ++a) {
        double row = 0.0;
        for (int b = 0; b < d_; ++b) row += A(a, b) * w[b];
        q += w[a] * row;
    }
    return q;
}

double FlatTorusKernel::heat_images(const Eigen::VectorXd& r, double t) const {
    if (!(t > 0.0)) fail(ErrorKind::Domain, "heat kernel needs t > 0");
    const Eigen::VectorXd w0 = Pinv_ * r;
    std::vector<int> lo(d_), hi(d_);
    for (int a = 0; a < d_; ++a) {
        const double ext = std::sqrt(4.0 * kCut * t * Cu_(a, a));
        lo[a] = static_cast<int>(std::floor(-w0(a) - ext));
        hi[a] = static_cast<int>(std::ceil(-w0(a) + ext));
    }
    double s = 0.0;
    double w[4];
    for_box(lo, hi, [&](const std::vector<int>& mvec) {
        for (int a = 0; a < d_; ++a) w[a] = w0(a) + mvec[a];
        const double e = quad(w, CuInv_) / (4.0 * t);
        if (e < 2.0 * kCut) s += std::exp(-e);
    });
    return s / (std::pow(4.0 * kPi * t, 0.5 * d_) * std::sqrt(detS_) * detg_);
}

double FlatTorusKernel::heat_fourier(const Eigen::VectorXd& r, double t) const {
    if (!(t > 0.0)) fail(ErrorKind::Domain, "heat kernel needs t > 0");
    const Eigen::VectorXd u = Pinv_ * r;
    std::vector<int> lo(d_), hi(d_);
    for (int a = 0; a < d_; ++a) {
        hi[a] = static_cast<int>(std::ceil(std::sqrt(kCut / (4.0 * kPi * kPi * t) * CuInv_(a, a))));
        lo[a] = -hi[a];
    }
    double s = 0.0;
    double k[4];
    for_box(lo, hi, [&](const std::vector<int>& kv) {
        double phase = 0.0;
        for (int a = 0; a < d_; ++a) {
            k[a] = kv[a];
            phase += k[a] * u(a);
        }
        s += std::exp(-4.0 * kPi * kPi * quad(k, Cu_) * t) * std::cos(2.0 * kPi * phase);
    });
    return s / V_;
}

double FlatTorusKernel::heat(const Eigen::VectorXd& r, double t) const {
    if (!(t > 0.0)) fail(ErrorKind::Domain, "heat kernel needs t > 0");
    std::vector<int> lo(d_), hi(d_), flo(d_), fhi(d_);
    for (int a = 0; a < d_; ++a) {
        const double ext = std::sqrt(4.0 * kCut * t * Cu_(a, a));
        lo[a] = 0;
        hi[a] = static_cast<int>(std::ceil(2.0 * ext)) + 1;
        fhi[a] = 2 * static_cast<int>(std::ceil(std::sqrt(kCut / (4.0 * kPi * kPi * t) * CuInv_(a, a))));
        flo[a] = 0;
    }
    return box_count(lo, hi) <= box_count(flo, fhi) ? heat_images(r, t) : heat_fourier(r, t);
}

double FlatTorusKernel::green(const Eigen::VectorXd& r) const {
    const Eigen::VectorXd u = Pinv_ * r;
    const double tau = tau_;
    // Long-time part on the Fourier side.
    std::vector<int> lo(d_), hi(d_);
    for (int a = 0; a < d_; ++a) {
        hi[a] = static_cast<int>(std::ceil(std::sqrt(kCut / (4.0 * kPi * kPi * tau) * CuInv_(a, a))));
        lo[a] = -hi[a];
    }
    double far = 0.0;
    Eigen::VectorXd k(d_);
    for_box(lo, hi, [&](const std::vector<int>& kv) {
        bool zero = true;
        for (int a = 0; a < d_; ++a) {
            k(a) = kv[a];
            zero = zero && kv[a] == 0;
        }
        if (zero) return;
        const double lam = eigenvalue(k);
        far += std::exp(-lam * tau) * std::cos(2.0 * kPi * k.dot(u)) / lam;
    });
    far /= V_;
    // Short-time part: time integral of the Gaussian images.
    for (int a = 0; a < d_; ++a) {
        const double ext = std::sqrt(4.0 * kCut * tau * Cu_(a, a));
        lo[a] = static_cast<int>(std::floor(-u(a) - ext));
        hi[a] = static_cast<int>(std::ceil(-u(a) + ext));
    }
    double near = 0.0;
    bool singular = false;
    Eigen::VectorXd w(d_);
    for_box(lo, hi, [&](const std::vector<int>& mvec) {
        for (int a = 0; a < d_; ++a) w(a) = u(a) + mvec[a];
        const double q = w.dot(CuInv_ * w);
        if (q <= 0.0) {
            singular = true;
            return;
        }
        if (d_ == 2)
            near += boost::math::expint(1, q / (4.0 * tau)) / (4.0 * kPi);
        else
            near += 4.0 / q * std::exp(-q / (4.0 * tau)) / (16.0 * kPi * kPi);
    });
    if (singular) return kInf;
    near /= std::sqrt(detS_) * detg_;
    return far + near - tau / V_;
}

std::vector<double> discrete_laplacian(const ReferenceForm& omega, const std::vector<double>& values) {
    const ModelManifold& m = omega.manifold();
    if (values.size() != m.size()) fail(ErrorKind::InvalidInput, "grid size mismatch");
    std::vector<double> out(m.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(m.size(), [&](std::size_t i) {
        Herm H;
        if (!complex_hessian(m, values, i, H)) return;
        const Herm K = inverse(omega.at(i));
        double tr = 0.0;
        for (int j = 0; j < m.n(); ++j)
            for (int k = 0; k < m.n(); ++k) tr += (K(j, k) * H(k, j)).real();
        out[i] = tr;
    });
    return out;
}

GreenFunction torus_green(std::size_t base, const FormPtr& omega) {
    if (!omega) fail(ErrorKind::InvalidInput, "null form");
    require_flat(*omega);
    const ModelManifold& m = omega->manifold();
    if (base >= m.size()) fail(ErrorKind::InvalidInput, "base point outside the grid");
    GreenFunction G;
    G.omega = omega;
    G.base = base;
    G.values = shifted(m, lattice_kernel(*omega, 0.0), base);
    const double w = det(omega->at(0)) * m.cell_measure() * m.volume_scale();
    G.V = w * static_cast<double>(m.size());
    double s = 0.0;
    for (double v : G.values) s += v * w;
    G.mean = s;
    G.inf = min_value(G.values);
    G.sup = max_value(G.values);
    return G;
}

std::vector<double> smoothed_green_potential(const GreenFunction& G, double s) {
    const ReferenceForm& omega = *G.omega;
    const ModelManifold& m = omega.manifold();
    if (m.n() != 1) fail(ErrorKind::Unsupported, "Green potentials are omega-psh only for n = 1");
    if (s < 0.0) fail(ErrorKind::Domain, "smoothing time must be nonnegative");
    std::vector<double> v = shifted(m, lattice_kernel(omega, s), G.base);
    for (double& x : v) x *= -G.V;
    const double top = max_value(v);
    for (double& x : v) x -= top;
    return v;
}

std::vector<double> heat_on_grid(const ReferenceForm& omega, double t) {
    if (!(t > 0.0)) fail(ErrorKind::Domain, "heat kernel needs t > 0");
    require_flat(omega);
    const ModelManifold& m = omega.manifold();
    const int d = m.real_dim();
    const Eigen::MatrixXd Cu = m.period_inverse() * real_symbol(omega.at(0)) * m.period_inverse().transpose();
    const Eigen::MatrixXd CuInv = Cu.inverse();
    const double V = det(omega.at(0)) * m.area() * m.volume_scale();
    const std::size_t N = m.size();
    fftw_complex* buf = fftw_alloc_complex(N);
    for (std::size_t i = 0; i < N; ++i) buf[i][0] = buf[i][1] = 0.0;
    // Fold the theta series onto the grid's dual lattice, then one inverse DFT.
    std::vector<int> lo(d), hi(d), mi(d);
    for (int a = 0; a < d; ++a) {
        hi[a] = static_cast<int>(std::ceil(std::sqrt(kCut / (4.0 * kPi * kPi * t) * CuInv(a, a))));
        lo[a] = -hi[a];
    }
    for_box(lo, hi, [&](const std::vector<int>& k) {
        double q = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) q += k[a] * Cu(a, b) * k[b];
        const double e = 4.0 * kPi * kPi * q * t;
        if (e > 2.0 * kCut) return;
        for (int a = 0; a < d; ++a) mi[a] = ((k[a] % m.resolution(a)) + m.resolution(a)) % m.resolution(a);
        buf[m.flat_index(0, mi.data())][0] += std::exp(-e);
    });
    std::vector<int> dims(d);
    for (int a = 0; a < d; ++a) dims[a] = m.resolution(d - 1 - a);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    std::vector<double> out(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = buf[i][0] / V;
    fftw_free(buf);
    return out;
}

HeatTraceReport heat_trace_check(const ReferenceForm& omega, const std::vector<double>& ladder) {
    FlatTorusKernel ker(omega);
    const ModelManifold& m = omega.manifold();
    const double w = det(omega.at(0)) * m.cell_measure() * m.volume_scale();
    const double inv_v = 1.0 / ker.volume();
    HeatTraceReport rep;
    for (double t : ladder) {
        if (!(t > 0.0)) fail(ErrorKind::Domain, "heat ladder needs t > 0");
        const std::vector<double> H = heat_on_grid(omega, t);
        HeatLevel lv;
        lv.t = t;
        double mass = 0.0;
        for (double h : H) {
            lv.sup_dev = std::max(lv.sup_dev, std::abs(h - inv_v));
            mass += h * w;
        }
        lv.mass = mass;
        lv.scaled = lv.sup_dev * std::pow(t, m.n());
        if (t >= 0.01) {
            // G(y,y,t) = G(x,x,t) by translation invariance.
            const double diag = H[0] - inv_v;
            double excess = -kInf;
            for (double h : H) excess = std::max(excess, (h - inv_v) * (h - inv_v) - diag * diag);
            lv.cauchy_schwarz_excess = excess;
            lv.cauchy_schwarz_checked = true;
        }
        rep.C0_empirical = std::max(rep.C0_empirical, lv.scaled);
        rep.max_mass_error = std::max(rep.max_mass_error, std::abs(mass - 1.0));
        rep.levels.push_back(lv);
    }
    return rep;
}

double semigroup_defect(const ReferenceForm& omega, double t, double s, int pairs, std::uint64_t seed) {
    FlatTorusKernel ker(omega);
    const ModelManifold& m = omega.manifold();
    const double w = det(omega.at(0)) * m.cell_measure() * m.volume_scale();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
    std::vector<std::pair<std::size_t, std::size_t>> ps(static_cast<std::size_t>(pairs));
    for (auto& p : ps) {
        p.first = pick(rng);
        p.second = pick(rng);
    }
    std::vector<double> defect(ps.size());
    parallel_for(ps.size(), [&](std::size_t q) {
        const auto [x, y] = ps[q];
        double integral = 0.0;
        for (std::size_t z = 0; z < m.size(); ++z)
            integral += ker.heat(grid_offset(m, x, z), t) * ker.heat(grid_offset(m, z, y), s) * w;
        defect[q] = std::abs(ker.heat(grid_offset(m, x, y), t + s) - integral);
    });
    return defect.empty() ? 0.0 : max_value(defect);
}

MeanValueReport mean_value_inequality(const QuasiPshFunction& phi, const GreenFunction& G, double tol) {
    const ModelManifold& m = phi.manifold();
    if (!G.omega || &G.omega->manifold() != &m) fail(ErrorKind::InvalidInput, "phi and G live on different grids");
    const auto& v = phi.values();
    double s = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) fail(ErrorKind::InvalidInput, "mean-value check needs finite values");
        s += x;
    }
    const double mean = s / static_cast<double>(v.size());
    MeanValueReport r;
    r.bound = m.n() * G.V * G.inf;
    r.min_slack = kInf;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double slack = mean - v[i] - r.bound;
        if (slack < r.min_slack) {
            r.min_slack = slack;
            r.argmin = i;
        }
    }
    r.checked = v.size();
    r.holds = r.min_slack >= -tol;
    return r;
}

double green_lower_bound_constant(double C_S, double C_P, double V, int n) {
    if (n < 2) fail(ErrorKind::Unsupported, "the Sobolev route needs n >= 2; use the direct bound for n = 1");
    if (!(C_S > 0.0) || !(C_P >= 0.0) || !(V > 0.0)) fail(ErrorKind::InvalidInput, "constants must be positive");
    const double C = n * std::pow(4.0, 1.0 / n) * C_S * (C_P + 1.0);
    return -1.0 / V - C / (n - 1);
}

FunctionalConstants measure_functional_constants(const ReferenceForm& omega, int count, std::uint64_t seed) {
    FlatTorusKernel ker(omega);
    const ModelManifold& m = omega.manifold();
    const int d = m.real_dim();
    const int n = m.n();
    const double V = ker.volume();
    constexpr int kModes = 3;
    // 4 kModes < kRes keeps the quartic quadrature exact.
    constexpr int kRes = 16;
    std::size_t pts = 1;
    for (int a = 0; a < d; ++a) pts *= kRes;

    FunctionalConstants out;
    out.seed = seed;
    out.count = count;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::uniform_int_distribution<int> K(-kModes, kModes);
    std::vector<double> f(pts);
    for (int member = 0; member < count; ++member) {
        struct Mode {
            Eigen::VectorXd k;
            double amp, phase;
        };
        std::vector<Mode> modes;
        const int want = 1 + static_cast<int>(U(rng) * 4.0);
        while (static_cast<int>(modes.size()) < want) {
            Eigen::VectorXd k(d);
            for (int a = 0; a < d; ++a) k(a) = K(rng);
            // Canonical sign so that distinct entries are L^2-orthogonal.
            int first = 0;
            while (first < d && k(first) == 0) ++first;
            if (first == d) continue;
            if (k(first) < 0) k = -k;
            bool dup = false;
            for (const auto& md : modes) dup = dup || (md.k - k).norm() == 0.0;
            if (dup) continue;
            modes.push_back({k, 2.0 * U(rng) - 1.0, 2.0 * kPi * U(rng)});
        }
        const double c0 = 2.0 * U(rng) - 1.0;
        double l2_osc = 0.0, energy = 0.0;
        for (const auto& md : modes) {
            l2_osc += 0.5 * V * md.amp * md.amp;
            energy += 0.5 * V * md.amp * md.amp * ker.eigenvalue(md.k);
        }
        out.C_P = std::max(out.C_P, l2_osc / energy);
        if (n < 2) continue;
        const double qexp = 2.0 * n / (n - 1.0);
        std::vector<int> mi(d);
        double lq = 0.0;
        for (std::size_t p = 0; p < pts; ++p) {
            std::size_t r = p;
            Eigen::VectorXd u(d);
            for (int a = 0; a < d; ++a) {
                u(a) = static_cast<double>(r % kRes) / kRes;
                r /= kRes;
            }
            double v = c0;
            for (const auto& md : modes) v += md.amp * std::cos(2.0 * kPi * md.k.dot(u) + md.phase);
            lq += std::pow(std::abs(v), qexp);
        }
        lq *= V / static_cast<double>(pts);
        const double l2 = V * c0 * c0 + l2_osc;
        out.C_S = std::max(out.C_S, std::pow(lq, 2.0 / qexp) / (energy + l2));
    }
    return out;
}

GreenBoundReport green_bound_report(const GreenFunction& G, int count, std::uint64_t seed) {
    GreenBoundReport r;
    r.inf_G = G.inf;
    const int n = G.omega->manifold().n();
    r.constants = measure_functional_constants(*G.omega, count, seed);
    if (n == 1) {
        r.direct = true;
        r.bound = G.inf;
    } else {
        r.bound = green_lower_bound_constant(r.constants.C_S, r.constants.C_P, G.V, n);
    }
    r.holds = r.inf_G >= r.bound;
    return r;
}

}  // namespace pluri
