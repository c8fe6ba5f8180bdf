#include "pluri/ma_solver.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pluri {
namespace detail {

// Linearized log-det operator: (J x)_i = sum_ab C_i[ab] (D_ab x)_i - lambda x_i,
// with an extra gauge row and column when lambda = 0.
struct Linearization {
    const ModelManifold* m = nullptr;
    int d = 0;
    int lambda = 0;
    std::vector<double> C;  // d*d per point, unit-cube coordinates
    std::vector<double> w;  // gauge weights (lambda = 0)
    std::vector<double> diag;

    Eigen::Index size() const { return static_cast<Eigen::Index>(m->size()) + (lambda == 0 ? 1 : 0); }

    void apply(const double* x, double* y) const {
        const std::size_t N = m->size();
        for (std::size_t i = 0; i < N; ++i) {
            const double* c = &C[i * d * d];
            const double xi = x[i];
            double s = 0.0;
            for (int a = 0; a < d; ++a) {
                const auto p = m->neighbor(i, a, 1), q = m->neighbor(i, a, -1);
                const double ha = m->spacing(a);
                s += c[a * d + a] * (x[p] - 2.0 * xi + x[q]) / (ha * ha);
                for (int b = a + 1; b < d; ++b) {
                    const double cab = c[a * d + b];
                    if (cab == 0.0) continue;
                    const double v = x[m->neighbor(p, b, 1)] - x[m->neighbor(p, b, -1)] - x[m->neighbor(q, b, 1)] +
                                     x[m->neighbor(q, b, -1)];
                    s += 2.0 * cab * v / (4.0 * ha * m->spacing(b));
                }
            }
            y[i] = s - (lambda == 1 ? xi : 0.0);
        }
        if (lambda == 0) {
            const double dc = x[N];
            double g = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                y[i] -= dc;
                g += w[i] * x[i];
            }
            y[N] = g;
        }
    }
};

class LinearOperator;

}  // namespace detail
}  // namespace pluri

namespace Eigen::internal {
template <>
struct traits<pluri::detail::LinearOperator> : public Eigen::internal::traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace pluri::detail {

class LinearOperator : public Eigen::EigenBase<LinearOperator> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    explicit LinearOperator(const Linearization& lin) : lin_(&lin) {}
    Eigen::Index rows() const { return lin_->size(); }
    Eigen::Index cols() const { return lin_->size(); }

    template <typename Rhs>
    Eigen::Product<LinearOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<LinearOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

    const Linearization& lin() const { return *lin_; }

private:
    const Linearization* lin_;
};

// Jacobi preconditioner built from the stored diagonal.
class JacobiPreconditioner {
public:
    JacobiPreconditioner() = default;
    template <typename M>
    JacobiPreconditioner& analyzePattern(const M&) { return *this; }
    template <typename M>
    JacobiPreconditioner& factorize(const M& mat) { return compute(mat); }
    template <typename M>
    JacobiPreconditioner& compute(const M& mat) {
        const auto& d = mat.lin().diag;
        inv_.resize(static_cast<Eigen::Index>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) inv_(static_cast<Eigen::Index>(i)) = d[i] != 0.0 ? 1.0 / d[i] : 1.0;
        return *this;
    }
    template <typename Rhs>
    Eigen::VectorXd solve(const Rhs& b) const { return inv_.asDiagonal() * b; }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
    Eigen::VectorXd inv_;
};

}  // namespace pluri::detail

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<pluri::detail::LinearOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<pluri::detail::LinearOperator, Rhs,
                                generic_product_impl<pluri::detail::LinearOperator, Rhs>> {
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const pluri::detail::LinearOperator& lhs, const Rhs& rhs,
                              const double& alpha) {
        Eigen::VectorXd x = rhs;
        Eigen::VectorXd y(x.size());
        lhs.lin().apply(x.data(), y.data());
        dst += alpha * y;
    }
};
}  // namespace Eigen::internal

namespace pluri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct State {
    std::vector<double> F;
    std::vector<Herm> K;  // (omega + dd^c phi)^{-1}
    std::vector<double> logdet;
    bool positive = true;
};

// log of the reference volume at each point.
std::vector<double> log_reference(const MaProblem& p, const ReferenceForm& omega) {
    const ModelManifold& m = omega.manifold();
    std::vector<double> r(m.size());
    if (p.reference == DensityReference::Form) {
        for (std::size_t i = 0; i < m.size(); ++i) r[i] = std::log(det(omega.at(i)));
    } else {
        const double V = volume(omega).V;
        for (std::size_t i = 0; i < m.size(); ++i) r[i] = std::log(V / m.area());
    }
    return r;
}

State evaluate(const ReferenceForm& omega, const std::vector<double>& phi, const std::vector<double>& log_rhs,
               int lambda, double c, bool want_inverse) {
    const ModelManifold& m = omega.manifold();
    State s;
    s.F.assign(m.size(), 0.0);
    s.logdet.assign(m.size(), 0.0);
    if (want_inverse) s.K.assign(m.size(), Herm(m.n()));
    for (std::size_t i = 0; i < m.size(); ++i) {
        Herm h;
        complex_hessian(m, phi, i, h);
        Herm M = omega.at(i) + h;
        if (pluri::min_eigenvalue(M) <= 0.0) {
            s.positive = false;
            return s;
        }
        const double ld = std::log(det(M));
        s.logdet[i] = ld;
        s.F[i] = ld - log_rhs[i] - lambda * phi[i] - c;
        if (want_inverse) s.K[i] = inverse(M);
    }
    return s;
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

void check_problem(const MaProblem& p) {
    if (!p.omega) fail(ErrorKind::InvalidInput, "problem has no reference form");
    const ModelManifold& m = p.omega->manifold();
    if (!m.is_torus()) fail(ErrorKind::Unsupported, "the Monge-Ampere solver runs on tori");
    if (p.lambda != 0 && p.lambda != 1) fail(ErrorKind::InvalidInput, "lambda must be 0 or 1");
    if (p.density.size() != m.size()) fail(ErrorKind::InvalidInput, "density size does not match the grid");
    for (double f : p.density)
        if (!(f > 0.0) || !std::isfinite(f)) fail(ErrorKind::Domain, "density must be positive and finite");
    if (!p.initial.empty() && p.initial.size() != m.size()) fail(ErrorKind::InvalidInput, "initial guess size mismatch");
    if (!(p.regularization_t > 0.0)) fail(ErrorKind::InvalidInput, "regularization parameter must be positive");
}

}  // namespace

std::vector<double> sample_density(const ModelManifold& m, const std::function<double(const Eigen::VectorXd&)>& f,
                                   bool cell_average) {
    std::vector<double> out(m.size());
    const int d = m.real_dim();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!cell_average) {
            out[i] = f(m.coords(i));
            continue;
        }
        Eigen::VectorXd u0 = m.unit_coords(i);
        double s = 0.0;
        for (int corner = 0; corner < (1 << d); ++corner) {
            Eigen::VectorXd u = u0;
            for (int a = 0; a < d; ++a) u(a) += ((corner >> a) & 1 ? 0.25 : -0.25) * m.spacing(a);
            s += f(m.is_torus() ? Eigen::VectorXd(m.period() * u) : u);
        }
        out[i] = s / (1 << d);
    }
    return out;
}

double density_mean(const MaProblem& p) {
    const ModelManifold& m = p.omega->manifold();
    double s = 0.0, tot = 0.0;
    if (p.reference == DensityReference::Form) {
        VolumeReport vr = volume(*p.omega);
        for (std::size_t i = 0; i < m.size(); ++i) s += vr.weights[i] * p.density[i];
        tot = vr.V;
    } else {
        for (std::size_t i = 0; i < m.size(); ++i) s += p.density[i];
        tot = static_cast<double>(m.size());
    }
    return s / tot;
}

void normalize_density(MaProblem& p) {
    const double mean = density_mean(p);
    for (double& f : p.density) f /= mean;
}

std::vector<double> ma_residual(const MaProblem& p, const std::vector<double>& phi) {
    check_problem(p);
    std::vector<double> lr = log_reference(p, *p.omega);
    for (std::size_t i = 0; i < lr.size(); ++i) lr[i] += std::log(p.density[i]);
    State s = evaluate(*p.omega, phi, lr, p.lambda, 0.0, false);
    if (!s.positive) fail(ErrorKind::NotPsh, "omega + dd^c phi is not positive");
    return s.F;
}

MaSolution solve_ma(const MaProblem& p) {
    check_problem(p);
    const ModelManifold& m = p.omega->manifold();
    const int n = m.n(), d = m.real_dim();
    const SolverControls& ctl = p.controls;

    FormPtr omega = p.omega;
    double eta = 0.0;
    if (!omega->kahler()) {
        eta = 1e-3 * p.regularization_t;
        auto filler = constant_form(omega->manifold_ptr(), Herm::identity(n), "filler");
        omega = form_combination(*p.omega, *filler, eta, p.omega->label() + "+eta");
    }
    const VolumeReport vol = volume(*omega);

    if (p.lambda == 0) {
        MaProblem q = p;
        q.omega = omega;
        const double mean = density_mean(q);
        if (std::abs(mean - 1.0) > 1e-6)
            fail(ErrorKind::Inconsistent, "lambda = 0 needs a density of mean one, got " + std::to_string(mean));
    }

    std::vector<double> log_rhs = log_reference(p, *omega);
    for (std::size_t i = 0; i < m.size(); ++i) log_rhs[i] += std::log(p.density[i]);

    std::vector<double> gauge(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) gauge[i] = vol.weights[i] / vol.V;

    std::vector<double> phi = p.initial.empty() ? std::vector<double>(m.size(), 0.0) : p.initial;
    if (p.lambda == 0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) mean += gauge[i] * phi[i];
        for (double& v : phi) v -= mean;
    }
    double c = 0.0;

    State st = evaluate(*omega, phi, log_rhs, p.lambda, c, true);
    if (!st.positive) fail(ErrorKind::InvalidInput, "initial guess is not strictly omega-psh");

    detail::Linearization lin;
    lin.m = &m;
    lin.d = d;
    lin.lambda = p.lambda;
    lin.w = gauge;
    lin.C.assign(m.size() * d * d, 0.0);
    lin.diag.assign(static_cast<std::size_t>(lin.size()), 0.0);

    Eigen::MatrixXd Pinv = m.period_inverse();
    MaSolution out{QuasiPshFunction(omega, std::vector<double>(m.size(), 0.0), Normalization::None), omega, 0.0, 0, 0,
                   0.0, 0.0, 0.0, {}};
    out.eta = eta;
    int step = 0;
    double res = sup_norm(st.F);
    out.history.push_back(res);
    while (res > ctl.tolerance) {
        if (step >= ctl.max_steps)
            fail(ErrorKind::Divergence, "Newton did not converge in " + std::to_string(step) + " steps (residual " +
                                            std::to_string(res) + ")");
        // Coefficients of the linearization in unit-cube coordinates.
        for (std::size_t i = 0; i < m.size(); ++i) {
            Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
            const Herm& K = st.K[i];
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double A = K(j, k).real(), B = K(j, k).imag();
                    S(2 * j, 2 * k) += 0.25 * A;
                    S(2 * j + 1, 2 * k + 1) += 0.25 * A;
                    S(2 * j, 2 * k + 1) += 0.25 * B;
                    S(2 * k + 1, 2 * j) += 0.25 * B;
                }
            Eigen::MatrixXd Cu = Pinv * S * Pinv.transpose();
            double dg = 0.0;
            for (int a = 0; a < d; ++a) {
                for (int b = 0; b < d; ++b) lin.C[i * d * d + a * d + b] = Cu(a, b);
                dg -= 2.0 * Cu(a, a) / (m.spacing(a) * m.spacing(a));
            }
            lin.diag[i] = dg - (p.lambda == 1 ? 1.0 : 0.0);
        }
        if (p.lambda == 0) lin.diag[m.size()] = 0.0;

        Eigen::VectorXd rhs(lin.size());
        for (std::size_t i = 0; i < m.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = -st.F[i];
        if (p.lambda == 0) rhs(static_cast<Eigen::Index>(m.size())) = 0.0;

        detail::LinearOperator A(lin);
        Eigen::BiCGSTAB<detail::LinearOperator, detail::JacobiPreconditioner> solver;
        solver.setTolerance(ctl.linear_tolerance);
        solver.setMaxIterations(ctl.max_linear_iterations);
        solver.compute(A);
        Eigen::VectorXd dx = solver.solve(rhs);
        out.linear_iterations += static_cast<int>(solver.iterations());
        if (!dx.allFinite()) fail(ErrorKind::Divergence, "linear solve produced non-finite values");

        // Damped update: halve until positive with decreasing residual.
        const double merit = rms(st.F);
        double alpha = 1.0;
        bool accepted = false;
        for (int trial = 0; trial < ctl.max_halvings; ++trial, alpha *= 0.5) {
            std::vector<double> next(phi);
            for (std::size_t i = 0; i < m.size(); ++i) next[i] += alpha * dx(static_cast<Eigen::Index>(i));
            const double cn = p.lambda == 0 ? c + alpha * dx(static_cast<Eigen::Index>(m.size())) : 0.0;
            State s2 = evaluate(*omega, next, log_rhs, p.lambda, cn, true);
            if (!s2.positive) continue;
            if (rms(s2.F) >= merit * (1.0 - 1e-4 * alpha) && sup_norm(s2.F) >= res) continue;
            phi.swap(next);
            c = cn;
            st = std::move(s2);
            accepted = true;
            break;
        }
        if (!accepted)
            fail(ErrorKind::Divergence, "no residual decrease over " + std::to_string(ctl.max_halvings) +
                                            " damped trials (residual " + std::to_string(res) + ")");
        ++step;
        res = sup_norm(st.F);
        out.history.push_back(res);
    }

    if (p.lambda == 0) {
        const double top = max_value(phi);
        for (double& v : phi) v -= top;
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        mass += std::exp(st.logdet[i]) * m.cell_measure() * m.volume_scale() * m.partition_weight(i);
    out.phi = QuasiPshFunction(omega, std::move(phi), p.lambda == 0 ? Normalization::SupZero : Normalization::None);
    out.residual = res;
    out.steps = step;
    out.compat_shift = c;
    out.mass_defect = std::abs(mass / vol.V - 1.0);
    return out;
}

AprioriReport verify_apriori(const MaProblem& p, const MaSolution& s, const BoundCertificate& cert,
                             const PositiveMeasure& nu) {
    if (nu.weights.size() != p.density.size()) fail(ErrorKind::InvalidInput, "measure does not match the problem grid");
    AprioriReport r;
    if (cert.mode == BoundMode::Orlicz) {
        OrliczMachinery orl(cert.n, cert.eps);
        r.measured_norm = orl.luxemburg(p.density, nu.weights);
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.density.size(); ++i) acc += nu.weights[i] * std::pow(p.density[i], cert.p);
        r.measured_norm = std::pow(acc, 1.0 / cert.p);
    }
    if (r.measured_norm > cert.C * (1.0 + 1e-12))
        fail(ErrorKind::InvalidCertificate, "density norm " + std::to_string(r.measured_norm) + " exceeds C = " +
                                                std::to_string(cert.C));
    r.sup = max_value(s.phi.values());
    r.inf = min_value(s.phi.values());
    r.M = cert.M;
    r.slack = cert.M - (r.sup - r.inf);
    r.holds = r.slack >= 0.0;
    return r;
}

ComparisonReport comparison_check(const std::vector<double>& sub, const std::vector<double>& sup, const MaProblem& p,
                                  double tol) {
    if (p.lambda != 1) fail(ErrorKind::InvalidInput, "comparison_check needs a lambda = 1 problem");
    std::vector<double> fs = ma_residual(p, sub), fp = ma_residual(p, sup);
    // Subsolution: (omega + dd^c u)^n >= f e^u ref; supersolution the reverse.
    if (min_value(fs) < -tol) fail(ErrorKind::InvalidInput, "sub is not a subsolution");
    if (max_value(fp) > tol) fail(ErrorKind::InvalidInput, "sup is not a supersolution");
    ComparisonReport r;
    r.max_excess = -kInf;
    r.min_gap = kInf;
    for (std::size_t i = 0; i < sub.size(); ++i) {
        r.max_excess = std::max(r.max_excess, sub[i] - sup[i]);
        r.min_gap = std::min(r.min_gap, sup[i] - sub[i]);
    }
    r.holds = r.max_excess <= tol;
    return r;
}

}  // namespace pluri
