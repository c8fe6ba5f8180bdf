#include "pluri/grid_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace pluri {

const char* to_string(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::Torus: return "torus";
        case ManifoldKind::ProjectiveAtlas: return "projective-chart-atlas";
        case ManifoldKind::ProductFibration: return "product-fibration";
    }
    return "unknown";
}

void ModelManifold::multi_index(std::size_t idx, int* out) const {
    std::size_t local = idx % chart_size_;
    for (int a = 0; a < real_dim(); ++a) {
        out[a] = static_cast<int>(local % res_[a]);
        local /= res_[a];
    }
}

std::size_t ModelManifold::flat_index(int chart, const int* mi) const {
    std::size_t local = 0;
    for (int a = 0; a < real_dim(); ++a) local += stride_[a] * static_cast<std::size_t>(mi[a]);
    return static_cast<std::size_t>(chart) * chart_size_ + local;
}

void ModelManifold::build_neighbors() {
    const std::size_t total = size();
    const int d = real_dim();
    plus_.assign(static_cast<std::size_t>(d) * total, kNoNeighbor);
    minus_.assign(static_cast<std::size_t>(d) * total, kNoNeighbor);
    std::vector<int> mi(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        multi_index(idx, mi.data());
        const int chart = chart_of(idx);
        for (int a = 0; a < d; ++a) {
            for (int step : {1, -1}) {
                int k = mi[a] + step;
                if (is_torus()) {
                    k = (k + res_[a]) % res_[a];
                } else if (k < 0 || k >= res_[a]) {
                    continue;
                }
                std::vector<int> nb = mi;
                nb[a] = k;
                auto& table = step > 0 ? plus_ : minus_;
                table[static_cast<std::size_t>(a) * total + idx] = static_cast<std::uint32_t>(flat_index(chart, nb.data()));
            }
        }
    }
}

Eigen::VectorXd ModelManifold::unit_coords(std::size_t idx) const {
    std::vector<int> mi(real_dim());
    multi_index(idx, mi.data());
    Eigen::VectorXd u(real_dim());
    for (int a = 0; a < real_dim(); ++a) {
        if (is_torus())
            u(a) = static_cast<double>(mi[a]) / res_[a];
        else
            u(a) = -box_ + (mi[a] + 0.5) * spacing_[a];
    }
    return u;
}

Eigen::VectorXd ModelManifold::coords(std::size_t idx) const {
    Eigen::VectorXd u = unit_coords(idx);
    return is_torus() ? Eigen::VectorXd(period_ * u) : u;
}

std::vector<cplx> ModelManifold::complex_coords(std::size_t idx) const {
    Eigen::VectorXd x = coords(idx);
    std::vector<cplx> z(n_);
    for (int j = 0; j < n_; ++j) z[j] = cplx(x(2 * j), x(2 * j + 1));
    return z;
}

std::vector<cplx> ModelManifold::homogeneous(std::size_t idx) const {
    if (is_torus()) fail(ErrorKind::Unsupported, "homogeneous coordinates exist only on atlases");
    const int chart = chart_of(idx);
    std::vector<cplx> z = complex_coords(idx);
    std::vector<cplx> Z(n_ + 1);
    int k = 0;
    for (int j = 0; j <= n_; ++j) Z[j] = (j == chart) ? cplx(1.0) : z[k++];
    return Z;
}

int ModelManifold::owner_chart(std::size_t idx) const {
    if (is_torus()) return 0;
    std::vector<cplx> Z = homogeneous(idx);
    int best = 0;
    for (int j = 1; j <= n_; ++j)
        if (std::abs(Z[j]) > std::abs(Z[best])) best = j;
    return best;
}

bool ModelManifold::representable(std::size_t idx, int chart) const {
    if (is_torus()) return chart == 0;
    std::vector<cplx> Z = homogeneous(idx);
    if (std::abs(Z[chart]) == 0.0) return false;
    for (int j = 0; j <= n_; ++j) {
        if (j == chart) continue;
        cplx w = Z[j] / Z[chart];
        if (std::abs(w.real()) > box_ || std::abs(w.imag()) > box_) return false;
    }
    return true;
}

bool ModelManifold::locate(int chart, const Eigen::VectorXd& x, std::vector<int>& base, std::vector<double>& frac) const {
    const int d = real_dim();
    base.assign(d, 0);
    frac.assign(d, 0.0);
    if (is_torus()) {
        Eigen::VectorXd u = period_inv_ * x;
        for (int a = 0; a < d; ++a) {
            double s = u(a) * res_[a];
            double f = std::floor(s);
            frac[a] = s - f;
            long k = static_cast<long>(f) % res_[a];
            if (k < 0) k += res_[a];
            base[a] = static_cast<int>(k);
        }
        return true;
    }
    (void)chart;
    for (int a = 0; a < d; ++a) {
        double s = (x(a) + box_) / spacing_[a] - 0.5;
        double f = std::floor(s);
        if (f < 0 || f > res_[a] - 2) return false;
        base[a] = static_cast<int>(f);
        frac[a] = s - f;
    }
    return true;
}

namespace {

std::optional<Fibration> detect_product(int n, const Eigen::MatrixXd& P) {
    if (n < 2) return std::nullopt;
    // Split off the last complex coordinate as the base factor.
    const int k = n - 1;
    for (int r = 0; r < 2 * n; ++r)
        for (int c = 0; c < 2 * n; ++c) {
            bool same = (r / 2 >= k) == (c / 2 >= k);
            if (!same && P(r, c) != 0.0) return std::nullopt;
        }
    Fibration f;
    for (int j = 0; j < k; ++j) f.fiber.push_back(j);
    f.base.push_back(k);
    return f;
}

}  // namespace

ManifoldPtr build_torus(int n, const Eigen::MatrixXd& period, const std::vector<int>& resolution) {
    if (n < 1 || n > 3) fail(ErrorKind::Unsupported, "torus dimension must be 1..3");
    if (period.rows() != 2 * n || period.cols() != 2 * n) fail(ErrorKind::InvalidInput, "period matrix must be 2n x 2n");
    if (static_cast<int>(resolution.size()) != 2 * n) fail(ErrorKind::InvalidInput, "need one resolution per real axis");
    for (int r : resolution)
        if (r < 8) fail(ErrorKind::InvalidInput, "grid resolution must be >= 8");
    const double d = period.determinant();
    if (!(std::abs(d) > 1e-12 * std::pow(period.norm(), 2 * n))) fail(ErrorKind::InvalidInput, "degenerate period matrix");

    auto m = std::shared_ptr<ModelManifold>(new ModelManifold());
    m->n_ = n;
    m->res_ = resolution;
    m->charts_ = 1;
    m->period_ = period;
    m->period_inv_ = period.inverse();
    m->area_ = std::abs(d);
    m->fibration_ = detect_product(n, period);
    m->kind_ = m->fibration_ ? ManifoldKind::ProductFibration : ManifoldKind::Torus;
    m->stride_.resize(2 * n);
    m->spacing_.resize(2 * n);
    std::size_t s = 1;
    for (int a = 0; a < 2 * n; ++a) {
        m->stride_[a] = s;
        s *= static_cast<std::size_t>(resolution[a]);
        m->spacing_[a] = 1.0 / resolution[a];
    }
    m->chart_size_ = s;
    m->cell_ = m->area_ / static_cast<double>(s);
    m->volume_scale_ = 1.0;
    m->build_neighbors();
    return m;
}

ManifoldPtr build_torus(int n, const Eigen::MatrixXd& period, int resolution) {
    return build_torus(n, period, std::vector<int>(2 * n, resolution));
}

ManifoldPtr square_torus(int n, int resolution, double side) {
    return build_torus(n, Eigen::MatrixXd::Identity(2 * n, 2 * n) * side, resolution);
}

ManifoldPtr build_atlas(int N, int resolution) {
    if (N < 1 || N > 2) fail(ErrorKind::Unsupported, "projective atlases are limited to N in {1,2}");
    if (resolution < 16) fail(ErrorKind::InvalidInput, "atlas resolution must be >= 16");
    auto m = std::shared_ptr<ModelManifold>(new ModelManifold());
    m->kind_ = ManifoldKind::ProjectiveAtlas;
    m->n_ = N;
    m->res_.assign(2 * N, resolution);
    m->charts_ = N + 1;
    m->box_ = 3.2;
    m->stride_.resize(2 * N);
    m->spacing_.assign(2 * N, 2.0 * m->box_ / resolution);
    std::size_t s = 1;
    for (int a = 0; a < 2 * N; ++a) {
        m->stride_[a] = s;
        s *= static_cast<std::size_t>(resolution);
    }
    m->chart_size_ = s;
    m->cell_ = std::pow(m->spacing_[0], 2 * N);
    double fact = 1.0;
    for (int k = 2; k <= N; ++k) fact *= k;
    m->volume_scale_ = std::pow(2.0, N) * fact / std::pow(kPi, N);
    m->build_neighbors();

    m->weights_.resize(m->size());
    for (std::size_t idx = 0; idx < m->size(); ++idx) {
        std::vector<cplx> Z = m->homogeneous(idx);
        double norm2 = 0.0;
        for (auto& v : Z) norm2 += std::norm(v);
        // rho_c = |Z_c|^12 / sum_j |Z_j|^12: smooth, and small enough outside
        // |z| < 3 that the chart box truncation is negligible.
        double den = 0.0;
        for (auto& v : Z) den += std::pow(std::norm(v) / norm2, 6);
        m->weights_[idx] = std::pow(1.0 / norm2, 6) / den;
    }
    return m;
}

ReferenceForm::ReferenceForm(ManifoldPtr owner, std::vector<Herm> coeff, std::string label, FormTolerances tol,
                             bool closed_by_construction)
    : owner_(std::move(owner)), coeff_(std::move(coeff)), label_(std::move(label)), tol_(tol) {
    const ModelManifold& m = *owner_;
    if (coeff_.size() != m.size()) fail(ErrorKind::InvalidInput, "form coefficient count does not match the grid");
    double min_eig = std::numeric_limits<double>::infinity();
    constant_ = true;
    for (std::size_t i = 0; i < coeff_.size(); ++i) {
        const Herm& h = coeff_[i];
        if (h.n != m.n()) fail(ErrorKind::InvalidInput, "form coefficient dimension mismatch");
        double scale = 1.0;
        for (auto& v : h.a) scale = std::max(scale, std::abs(v));
        if (h.hermitian_defect() > 1e-12 * scale) fail(ErrorKind::InvalidInput, "form coefficient not Hermitian");
        min_eig = std::min(min_eig, pluri::min_eigenvalue(h));
        if (constant_ && i > 0)
            for (int k = 0; k < 9; ++k)
                if (h.a[k] != coeff_[0].a[k]) {
                    constant_ = false;
                    break;
                }
    }
    min_eig_ = min_eig;
    if (min_eig < -tol_.psd) fail(ErrorKind::InvalidInput, "form is not semi-positive (min eigenvalue " + std::to_string(min_eig) + ")");
    kahler_ = min_eig > tol_.psd;

    if (!constant_ && m.n() >= 2 && !closed_by_construction) {
        // d omega = 0 <=> d_l g_{j kbar} = d_j g_{l kbar}.
        const int n = m.n(), d = m.real_dim();
        double worst = 0.0, scale = 0.0;
        for (std::size_t idx = 0; idx < m.size(); ++idx) {
            bool ok = true;
            std::vector<Herm> du(d);
            for (int a = 0; a < d; ++a) {
                auto p = m.neighbor(idx, a, 1), q = m.neighbor(idx, a, -1);
                if (p == kNoNeighbor || q == kNoNeighbor) {
                    ok = false;
                    break;
                }
                du[a] = (coeff_[p] - coeff_[q]) * (0.5 / m.spacing(a));
            }
            if (!ok) continue;
            // Derivatives along real coordinates x.
            std::vector<Herm> dx(d, Herm(n));
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) {
                    double jac = m.is_torus() ? m.period_inverse()(a, b) : (a == b ? 1.0 : 0.0);
                    if (jac != 0.0) dx[b] += du[a] * jac;
                }
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        cplx dl = 0.5 * (dx[2 * l](j, k) - cplx(0, 1) * dx[2 * l + 1](j, k));
                        cplx dj = 0.5 * (dx[2 * j](l, k) - cplx(0, 1) * dx[2 * j + 1](l, k));
                        worst = std::max(worst, std::abs(dl - dj));
                    }
            for (auto& v : coeff_[idx].a) scale = std::max(scale, std::abs(v));
        }
        closed_residual_ = worst / std::max(scale, 1e-300);
        if (closed_residual_ > tol_.closed) fail(ErrorKind::InvalidInput, "form fails the closedness check");
    }
}

FormPtr constant_form(ManifoldPtr m, const Herm& g, const std::string& label) {
    std::vector<Herm> c(m->size(), g);
    return std::make_shared<ReferenceForm>(m, std::move(c), label);
}

FormPtr make_form(ManifoldPtr m, const std::function<Herm(std::size_t)>& coeff, const std::string& label,
                  FormTolerances tol) {
    std::vector<Herm> c(m->size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = coeff(i);
    return std::make_shared<ReferenceForm>(m, std::move(c), label, tol);
}

FormPtr form_combination(const ReferenceForm& a, const ReferenceForm& b, double s, const std::string& label) {
    if (&a.manifold() != &b.manifold()) fail(ErrorKind::InvalidInput, "forms live on different manifolds");
    std::vector<Herm> c(a.coefficients().size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.at(i) + b.at(i) * s;
    return std::make_shared<ReferenceForm>(a.manifold_ptr(), std::move(c), label, a.tolerances(), true);
}

Herm fubini_study_matrix(const std::vector<cplx>& z) {
    const int n = static_cast<int>(z.size());
    double r2 = 0.0;
    for (auto& v : z) r2 += std::norm(v);
    const double s = 1.0 + r2;
    Herm h(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) h(j, k) = ((j == k ? s : 0.0) - std::conj(z[j]) * z[k]) / (2.0 * s * s);
    return h;
}

Atlas fubini_study_atlas(int N, int resolution) {
    ManifoldPtr m = build_atlas(N, resolution);
    std::vector<Herm> c(m->size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = fubini_study_matrix(m->complex_coords(i));
    // The FS form is dd^c of a potential, hence closed.
    auto form = std::make_shared<ReferenceForm>(m, std::move(c), "omega_FS", FormTolerances{}, true);
    return {m, form};
}

double chart_transition_defect(const ReferenceForm& fs) {
    const ModelManifold& m = fs.manifold();
    if (m.is_torus()) return 0.0;
    const int N = m.n();
    double worst = 0.0;
    for (std::size_t idx = 0; idx < m.size(); ++idx) {
        const int c = m.chart_of(idx);
        std::vector<cplx> Z = m.homogeneous(idx);
        for (int c2 = 0; c2 <= N; ++c2) {
            if (c2 == c || std::abs(Z[c2]) < 1e-3) continue;
            // w_a = Z_{i(a)} / Z_{c2}; z_j = Z_{i(j)} with Z_c = 1.
            std::vector<int> iw, iz;
            for (int k = 0; k <= N; ++k) {
                if (k != c2) iw.push_back(k);
                if (k != c) iz.push_back(k);
            }
            std::vector<cplx> w(N);
            for (int a = 0; a < N; ++a) w[a] = Z[iw[a]] / Z[c2];
            Eigen::MatrixXcd J(N, N);
            for (int a = 0; a < N; ++a)
                for (int j = 0; j < N; ++j) {
                    cplx v = (iw[a] == iz[j]) ? 1.0 / Z[c2] : 0.0;
                    if (iz[j] == c2) v -= Z[iw[a]] / (Z[c2] * Z[c2]);
                    J(a, j) = v;
                }
            Herm gw = fubini_study_matrix(w);
            Eigen::MatrixXcd G(N, N);
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b) G(a, b) = gw(a, b);
            Eigen::MatrixXcd pulled = J.transpose() * G * J.conjugate();
            const Herm& gz = fs.at(idx);
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) worst = std::max(worst, std::abs(pulled(j, k) - gz(j, k)));
        }
    }
    return worst;
}

namespace {

// Neumaier-compensated running sum; grid volumes add up ~10^5 cells.
struct CompensatedSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

}  // namespace

VolumeReport volume(const ReferenceForm& omega) {
    const ModelManifold& m = omega.manifold();
    VolumeReport r;
    r.weights.resize(m.size());
    const double tol = omega.tolerances().psd;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double d = det(omega.at(i));
        if (d < -tol) fail(ErrorKind::InvalidInput, "negative determinant in volume form");
        r.weights[i] = std::max(d, 0.0) * m.cell_measure() * m.volume_scale() * m.partition_weight(i);
    }
    CompensatedSum s;
    for (double w : r.weights) s.add(w);
    r.V = s.value();
    return r;
}

double mixed_volume(const std::vector<const ReferenceForm*>& forms) {
    if (forms.empty()) fail(ErrorKind::InvalidInput, "mixed_volume needs n forms");
    const ModelManifold& m = forms[0]->manifold();
    if (static_cast<int>(forms.size()) != m.n()) fail(ErrorKind::InvalidInput, "mixed_volume needs exactly n forms");
    CompensatedSum s;
    std::vector<Herm> hs(forms.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t k = 0; k < forms.size(); ++k) hs[k] = forms[k]->at(i);
        s.add(mixed_discriminant(hs) * m.cell_measure() * m.volume_scale() * m.partition_weight(i));
    }
    return s.value();
}

std::vector<double> binomial_volume_coefficients(const ReferenceForm& a, const ReferenceForm& b) {
    const int n = a.manifold().n();
    std::vector<double> c(n + 1);
    for (int k = 0; k <= n; ++k) {
        std::vector<const ReferenceForm*> fs;
        for (int i = 0; i < n - k; ++i) fs.push_back(&a);
        for (int i = 0; i < k; ++i) fs.push_back(&b);
        double binom = 1.0;
        for (int i = 1; i <= k; ++i) binom = binom * (n - k + i) / i;
        c[k] = binom * mixed_volume(fs);
    }
    return c;
}

Herm complexify_hessian(const Eigen::MatrixXd& hx, int n) {
    Herm h(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            double re = hx(2 * j, 2 * k) + hx(2 * j + 1, 2 * k + 1);
            double im = hx(2 * j, 2 * k + 1) - hx(2 * j + 1, 2 * k);
            h(j, k) = cplx(0.25 * re, 0.25 * im);
        }
    return h;
}

bool complex_hessian(const ModelManifold& m, const std::vector<double>& v, std::size_t idx, Herm& out) {
    const int d = m.real_dim();
    Eigen::MatrixXd hu(d, d);
    const double c = v[idx];
    if (!std::isfinite(c)) return false;
    for (int a = 0; a < d; ++a) {
        auto p = m.neighbor(idx, a, 1), q = m.neighbor(idx, a, -1);
        if (p == kNoNeighbor || q == kNoNeighbor) return false;
        if (!std::isfinite(v[p]) || !std::isfinite(v[q])) return false;
        const double h = m.spacing(a);
        hu(a, a) = (v[p] - 2.0 * c + v[q]) / (h * h);
        for (int b = a + 1; b < d; ++b) {
            auto pp = m.neighbor(p, b, 1), pm = m.neighbor(p, b, -1);
            auto mp = m.neighbor(q, b, 1), mm = m.neighbor(q, b, -1);
            if (pp == kNoNeighbor || pm == kNoNeighbor || mp == kNoNeighbor || mm == kNoNeighbor) return false;
            double s = v[pp] - v[pm] - v[mp] + v[mm];
            if (!std::isfinite(s)) return false;
            hu(a, b) = hu(b, a) = s / (4.0 * h * m.spacing(b));
        }
    }
    if (m.is_torus()) {
        const Eigen::MatrixXd& pi = m.period_inverse();
        Eigen::MatrixXd hx = pi.transpose() * hu * pi;
        out = complexify_hessian(hx, m.n());
    } else {
        out = complexify_hessian(hu, m.n());
    }
    return true;
}

void dump_grid_csv(std::ostream& os, const ModelManifold& m, const std::vector<double>& values) {
    os << "index,chart";
    for (int a = 0; a < m.real_dim(); ++a) os << ",x" << a;
    os << ",value\n";
    os.precision(12);
    for (std::size_t i = 0; i < m.size(); ++i) {
        Eigen::VectorXd x = m.coords(i);
        os << i << ',' << m.chart_of(i);
        for (int a = 0; a < x.size(); ++a) os << ',' << x(a);
        os << ',' << values[i] << '\n';
    }
}

}  // namespace pluri
