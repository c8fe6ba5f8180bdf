#include "pluri/psh_calculus.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pluri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_tagged(const std::vector<SingularTag>& tags, std::size_t i) {
    for (const auto& t : tags)
        if (t.index == i) return true;
    return false;
}

// Mean of finite values against omega^n / V.
double reference_mean(const ReferenceForm& omega, const std::vector<double>& v) {
    VolumeReport vr = volume(omega);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::isfinite(v[i])) s += vr.weights[i] * v[i];
    return s / vr.V;
}

}  // namespace

const char* to_string(Normalization n) {
    switch (n) {
        case Normalization::SupZero: return "sup-zero";
        case Normalization::MeanZero: return "mean-zero";
        case Normalization::None: return "none";
    }
    return "unknown";
}

QuasiPshFunction::QuasiPshFunction(FormPtr omega, std::vector<double> values, Normalization norm,
                                   std::vector<SingularTag> tags, PointEvaluator evaluator, double tol_psh)
    : omega_(std::move(omega)), values_(std::move(values)), norm_(norm), tags_(std::move(tags)),
      evaluator_(std::move(evaluator)), tol_psh_(tol_psh) {
    const ModelManifold& m = omega_->manifold();
    if (values_.size() != m.size()) fail(ErrorKind::InvalidInput, "value count does not match the grid");
    for (const auto& t : tags_)
        if (t.index >= m.size() || !(t.c >= 0.0)) fail(ErrorKind::InvalidInput, "bad singular tag");

    if (std::all_of(values_.begin(), values_.end(), [](double v) { return v == kInf; })) {
        sentinel_ = true;
        min_eig_ = kInf;
        return;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        double v = values_[i];
        if (std::isnan(v) || v == kInf) fail(ErrorKind::InvalidInput, "values must be finite or -inf");
        if (v == -kInf && !is_tagged(tags_, i)) fail(ErrorKind::InvalidInput, "-inf value at an untagged grid point");
    }

    std::vector<double> eig(m.size(), kInf);
    parallel_for(m.size(), [&](std::size_t i) {
        if (is_tagged(tags_, i)) return;
        Herm h;
        if (!complex_hessian(m, values_, i, h)) return;
        eig[i] = pluri::min_eigenvalue(omega_->at(i) + h);
    });
    min_eig_ = *std::min_element(eig.begin(), eig.end());
    if (min_eig_ < -tol_psh)
        fail(ErrorKind::NotPsh, "omega + dd^c phi has eigenvalue " + std::to_string(min_eig_));

    if (norm_ == Normalization::SupZero) {
        double sup = -kInf;
        for (double v : values_) sup = std::max(sup, v);
        if (std::abs(sup) > 1e-12) fail(ErrorKind::InvalidInput, "sup-zero tag but sup = " + std::to_string(sup));
    } else if (norm_ == Normalization::MeanZero) {
        double mean = reference_mean(*omega_, values_);
        double scale = std::max(1.0, sup_norm(values_));
        if (std::abs(mean) > 1e-10 * scale) fail(ErrorKind::InvalidInput, "mean-zero tag but mean = " + std::to_string(mean));
    }
}

DdcField ddc(const ModelManifold& m, const std::vector<double>& values) {
    DdcField f;
    f.h.assign(m.size(), Herm(m.n()));
    f.valid.assign(m.size(), 0);
    parallel_for(m.size(), [&](std::size_t i) { f.valid[i] = complex_hessian(m, values, i, f.h[i]) ? 1 : 0; });
    return f;
}

DdcField ddc(const QuasiPshFunction& phi) {
    DdcField f = ddc(phi.manifold(), phi.values());
    for (const auto& t : phi.tags()) f.valid[t.index] = 0;
    return f;
}

PositiveMeasure ma_measure(const ReferenceForm& omega, const QuasiPshFunction& phi) {
    const ModelManifold& m = omega.manifold();
    if (&m != &phi.manifold()) fail(ErrorKind::InvalidInput, "form and function live on different manifolds");
    if (phi.is_infinite_sentinel()) fail(ErrorKind::InvalidInput, "Monge-Ampere measure of the +inf sentinel");
    const double V = volume(omega).V;
    DdcField f = ddc(phi);
    PositiveMeasure mu;
    mu.weights.assign(m.size(), 0.0);
    mu.density.assign(m.size(), 0.0);
    std::vector<std::uint8_t> bad(m.size(), 0);
    const double unit = m.cell_measure() * m.volume_scale() / V;
    parallel_for(m.size(), [&](std::size_t i) {
        if (!f.valid[i]) return;
        Herm h = omega.at(i) + f.h[i];
        if (pluri::min_eigenvalue(h) < -phi.tol_psh()) {
            bad[i] = 1;
            return;
        }
        double d = std::max(det(h), 0.0);
        mu.weights[i] = d * unit * m.partition_weight(i);
        double d0 = det(omega.at(i));
        mu.density[i] = d0 > 0.0 ? d / d0 : 0.0;
    });
    if (std::any_of(bad.begin(), bad.end(), [](std::uint8_t b) { return b != 0; }))
        fail(ErrorKind::NotPsh, "negative Monge-Ampere density");
    for (double w : mu.weights) mu.mass += w;
    mu.absolutely_continuous = phi.tags().empty();
    mu.mass_defect = std::abs(1.0 - mu.mass);
    return mu;
}

PositiveMeasure ma_measure(const QuasiPshFunction& phi) { return ma_measure(phi.form(), phi); }

PositiveMeasure reference_measure(const ReferenceForm& omega) {
    VolumeReport vr = volume(omega);
    PositiveMeasure mu;
    mu.weights = vr.weights;
    for (double& w : mu.weights) w /= vr.V;
    mu.density.assign(mu.weights.size(), 1.0);
    for (double w : mu.weights) mu.mass += w;
    mu.mass_defect = std::abs(1.0 - mu.mass);
    return mu;
}

double integrate(const PositiveMeasure& mu, const std::vector<double>& values) {
    if (values.size() != mu.weights.size()) fail(ErrorKind::InvalidInput, "measure and field sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mu.weights[i] > 0.0 && std::isfinite(values[i])) s += mu.weights[i] * values[i];
    return s;
}

double interpolate(const ModelManifold& m, const std::vector<double>& values, int chart, const Eigen::VectorXd& x) {
    std::vector<int> base;
    std::vector<double> frac;
    if (!m.locate(chart, x, base, frac)) fail(ErrorKind::Domain, "interpolation point outside the chart");
    const int d = m.real_dim();
    std::vector<int> mi(d);
    double s = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            int bit = (corner >> a) & 1;
            mi[a] = base[a] + bit;
            if (m.is_torus() && mi[a] == m.resolution(a)) mi[a] = 0;
            w *= bit ? frac[a] : 1.0 - frac[a];
        }
        if (w == 0.0) continue;
        s += w * values[m.flat_index(chart, mi.data())];
    }
    return s;
}

namespace {

// Quadrature of the unit sphere S^{2n-1} (uniform probability measure).
struct SphereRule {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> weights;
};

SphereRule sphere_rule(int n) {
    SphereRule r;
    if (n == 1) {
        const int k = 64;
        for (int j = 0; j < k; ++j) {
            double t = 2.0 * kPi * (j + 0.5) / k;
            Eigen::VectorXd p(2);
            p << std::cos(t), std::sin(t);
            r.points.push_back(p);
            r.weights.push_back(1.0 / k);
        }
    } else if (n == 2) {
        // |z_2|^2 / r^2 = u is uniform on [0,1]; Gauss nodes in u, equal angles.
        using G = boost::math::quadrature::gauss<double, 16>;
        std::vector<double> us, ws;
        for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
            double a = G::abscissa()[i], w = G::weights()[i];
            us.push_back(0.5 + 0.5 * a);
            ws.push_back(0.5 * w);
            if (a != 0.0) {
                us.push_back(0.5 - 0.5 * a);
                ws.push_back(0.5 * w);
            }
        }
        const int k = 24;
        for (std::size_t i = 0; i < us.size(); ++i)
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) {
                    double t1 = 2.0 * kPi * (a + 0.5) / k, t2 = 2.0 * kPi * (b + 0.37) / k;
                    double r1 = std::sqrt(1.0 - us[i]), r2 = std::sqrt(us[i]);
                    Eigen::VectorXd p(4);
                    p << r1 * std::cos(t1), r1 * std::sin(t1), r2 * std::cos(t2), r2 * std::sin(t2);
                    r.points.push_back(p);
                    r.weights.push_back(ws[i] / (k * k));
                }
    } else {
        fail(ErrorKind::Unsupported, "Lelong numbers are implemented for n <= 2");
    }
    return r;
}

// Distance to a point on the torus using the nearest periodic image.
double torus_distance(const ModelManifold& m, const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
    Eigen::VectorXd du = m.period_inverse() * (x - a);
    for (int k = 0; k < du.size(); ++k) du(k) -= std::round(du(k));
    return (m.period() * du).norm();
}

}  // namespace

LelongReport lelong_details(const QuasiPshFunction& phi, std::size_t idx) {
    const ModelManifold& m = phi.manifold();
    if (idx >= m.size()) fail(ErrorKind::InvalidInput, "grid index out of range");
    if (phi.is_infinite_sentinel()) fail(ErrorKind::InvalidInput, "Lelong number of the +inf sentinel");
    const SphereRule rule = sphere_rule(m.n());

    const SingularTag* tag = nullptr;
    for (const auto& t : phi.tags())
        if (t.index == idx) tag = &t;

    int chart = m.chart_of(idx);
    Eigen::VectorXd x0 = m.coords(idx);
    const double r_max = 0.25;
    if (!m.is_torus()) {
        auto fits = [&](const Eigen::VectorXd& c) {
            for (int a = 0; a < c.size(); ++a)
                if (std::abs(c(a)) + r_max > m.chart_box() - 1.5 * m.spacing(a)) return false;
            return true;
        };
        if (!fits(x0)) {
            // Retry in the chart where the point is most central.
            const int owner = m.owner_chart(idx);
            std::vector<cplx> Z = m.homogeneous(idx);
            Eigen::VectorXd y(m.real_dim());
            int k = 0;
            for (int j = 0; j <= m.n(); ++j) {
                if (j == owner) continue;
                cplx w = Z[j] / Z[owner];
                y(2 * k) = w.real();
                y(2 * k + 1) = w.imag();
                ++k;
            }
            if (!fits(y)) fail(ErrorKind::Domain, "radius ladder leaves every chart");
            if (tag && !phi.has_evaluator())
                fail(ErrorKind::Domain, "tagged point needs an evaluator after a chart switch");
            chart = owner;
            x0 = y;
        }
    }

    std::function<double(const Eigen::VectorXd&)> eval;
    std::vector<double> remainder;
    double c_log = 0.0;
    if (phi.has_evaluator()) {
        eval = [&](const Eigen::VectorXd& x) { return phi.evaluator()(x, chart); };
    } else if (tag) {
        // Interpolate the smooth remainder phi - c log|z - a| and add the model back.
        c_log = tag->c;
        remainder.assign(m.size(), 0.0);
        const std::size_t begin = static_cast<std::size_t>(chart) * m.chart_size();
        for (std::size_t i = begin; i < begin + m.chart_size(); ++i) {
            if (i == idx) continue;
            Eigen::VectorXd x = m.coords(i);
            double dist = m.is_torus() ? torus_distance(m, x, x0) : (x - x0).norm();
            remainder[i] = phi[i] - c_log * std::log(dist);
        }
        double s = 0.0;
        int cnt = 0;
        for (int a = 0; a < m.real_dim(); ++a)
            for (int step : {1, -1}) {
                auto nb = m.neighbor(idx, a, step);
                if (nb != kNoNeighbor) {
                    s += remainder[nb];
                    ++cnt;
                }
            }
        remainder[idx] = s / std::max(cnt, 1);
        eval = [&](const Eigen::VectorXd& x) { return interpolate(m, remainder, chart, x); };
    } else {
        eval = [&](const Eigen::VectorXd& x) { return interpolate(m, phi.values(), chart, x); };
    }

    const int k_last = (phi.has_evaluator() && !tag) ? 20 : 6;
    LelongReport rep;
    rep.chart = chart;
    for (int k = 2; k <= k_last; ++k) {
        const double r = std::ldexp(1.0, -k);
        double mean = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            Eigen::VectorXd x = x0 + r * rule.points[q];
            mean += rule.weights[q] * eval(x);
        }
        rep.radii.push_back(r);
        rep.means.push_back(mean + c_log * std::log(r));
    }
    for (std::size_t k = 0; k + 1 < rep.means.size(); ++k)
        rep.slopes.push_back((rep.means[k] - rep.means[k + 1]) / std::log(2.0));
    // Smooth parts contribute O(r^2) to the slope.
    for (std::size_t k = 0; k + 1 < rep.slopes.size(); ++k)
        rep.richardson.push_back((4.0 * rep.slopes[k + 1] - rep.slopes[k]) / 3.0);
    rep.estimate = rep.richardson.empty() ? rep.slopes.back() : rep.richardson.back();
    return rep;
}

double lelong_number(const QuasiPshFunction& phi, std::size_t idx) {
    return std::max(0.0, lelong_details(phi, idx).estimate);
}

Mask sublevel_mask(const std::vector<double>& values, double level) {
    Mask K(values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) K[i] = values[i] < level ? 1 : 0;
    return K;
}

std::size_t mask_count(const Mask& K) {
    return static_cast<std::size_t>(std::count(K.begin(), K.end(), std::uint8_t{1}));
}

namespace {

struct Stencil {
    double cx = 0.0, cy = 0.0, diag = 0.0;
};

Stencil capacity_stencil(const ModelManifold& m) {
    if (!m.is_torus() || m.n() != 1)
        fail(ErrorKind::Unsupported, "capacities are implemented on one-dimensional tori");
    const Eigen::MatrixXd& P = m.period();
    if (P(0, 1) != 0.0 || P(1, 0) != 0.0)
        fail(ErrorKind::Unsupported, "capacities need a diagonal period matrix");
    Stencil s;
    const double hx = m.spacing(0), hy = m.spacing(1);
    s.cx = 0.25 / (P(0, 0) * P(0, 0) * hx * hx);
    s.cy = 0.25 / (P(1, 1) * P(1, 1) * hy * hy);
    s.diag = 2.0 * (s.cx + s.cy);
    return s;
}

double apply_stencil(const ModelManifold& m, const Stencil& s, const std::vector<double>& u, std::size_t i) {
    return s.cx * (u[m.neighbor(i, 0, 1)] + u[m.neighbor(i, 0, -1)]) +
           s.cy * (u[m.neighbor(i, 1, 1)] + u[m.neighbor(i, 1, -1)]) - s.diag * u[i];
}

}  // namespace

EnvelopeResult perron_envelope(const ReferenceForm& omega, const std::vector<double>& obstacle,
                               const std::vector<double>& start) {
    const ModelManifold& m = omega.manifold();
    const Stencil st = capacity_stencil(m);
    if (obstacle.size() != m.size() || start.size() != m.size())
        fail(ErrorKind::InvalidInput, "obstacle and start must match the grid");
    EnvelopeResult r;
    r.values = start;
    auto& u = r.values;
    const double relax = 1.5;
    const int max_sweeps = 100000;
    for (r.sweeps = 1; r.sweeps <= max_sweeps; ++r.sweeps) {
        double change = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double g = omega.at(i)(0, 0).real();
            const double nb = st.cx * (u[m.neighbor(i, 0, 1)] + u[m.neighbor(i, 0, -1)]) +
                              st.cy * (u[m.neighbor(i, 1, 1)] + u[m.neighbor(i, 1, -1)]);
            const double gs = (g + nb) / st.diag;
            const double next = std::min(obstacle[i], u[i] + relax * (gs - u[i]));
            change = std::max(change, std::abs(next - u[i]));
            u[i] = next;
        }
        r.last_update = change;
        if (change < 1e-9) break;
    }
    if (r.sweeps > max_sweeps) fail(ErrorKind::Divergence, "Perron envelope did not converge");
    double comp = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double lu = omega.at(i)(0, 0).real() + apply_stencil(m, st, u, i);
        comp = std::max(comp, std::abs(std::min(obstacle[i] - u[i], lu)));
    }
    r.complementarity = comp;
    return r;
}

QuasiPshFunction extremal_function(const Mask& K, const FormPtr& omega) {
    const ModelManifold& m = omega->manifold();
    if (K.size() != m.size()) fail(ErrorKind::InvalidInput, "mask size does not match the grid");
    if (mask_count(K) == 0) return QuasiPshFunction(omega, std::vector<double>(m.size(), kInf), Normalization::None);
    std::vector<double> obstacle(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) obstacle[i] = K[i] ? 0.0 : kInf;
    EnvelopeResult e = perron_envelope(*omega, obstacle, std::vector<double>(m.size(), 0.0));
    return QuasiPshFunction(omega, std::move(e.values), Normalization::None, {}, {},
                            std::max(kTolPsh, 2.0 * e.complementarity));
}

CapacityReport capacities(const Mask& K, const FormPtr& omega) {
    const ModelManifold& m = omega->manifold();
    capacity_stencil(m);
    if (K.size() != m.size()) fail(ErrorKind::InvalidInput, "mask size does not match the grid");
    CapacityReport rep;
    rep.mask = K;
    if (mask_count(K) == 0) {
        rep.extremal.assign(m.size(), kInf);
        rep.relative_extremal.assign(m.size(), 0.0);
        rep.sup_extremal = kInf;
        return rep;
    }
    std::vector<double> obstacle(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) obstacle[i] = K[i] ? 0.0 : kInf;
    EnvelopeResult v = perron_envelope(*omega, obstacle, std::vector<double>(m.size(), 0.0));
    rep.extremal = v.values;
    rep.sup_extremal = max_value(v.values);
    rep.t_cap = std::exp(-rep.sup_extremal);

    for (std::size_t i = 0; i < m.size(); ++i) obstacle[i] = K[i] ? -1.0 : 0.0;
    EnvelopeResult h = perron_envelope(*omega, obstacle, std::vector<double>(m.size(), -1.0));
    rep.relative_extremal = h.values;
    rep.complementarity = std::max(v.complementarity, h.complementarity);
    rep.sweeps = v.sweeps + h.sweeps;

    QuasiPshFunction hk(omega, h.values, Normalization::None, {}, {}, std::max(kTolPsh, 2.0 * h.complementarity));
    PositiveMeasure mu = ma_measure(hk);
    double cap = 0.0, off = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (K[i])
            cap += mu.weights[i];
        else if (h.values[i] < -1e-6)
            off += mu.weights[i];
    }
    rep.cap = std::clamp(cap, 0.0, 1.0);
    rep.mass_off_support = off;
    return rep;
}

CapmaReport capma_check(const QuasiPshFunction& phi, double s, double delta, double tol) {
    if (!(s > 0.0) || !(delta > 0.0 && delta < 1.0)) fail(ErrorKind::InvalidInput, "need s > 0 and delta in (0,1)");
    const ModelManifold& m = phi.manifold();
    for (double v : phi.values())
        if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "capma_check needs a bounded function");
    CapmaReport r;
    Mask K = sublevel_mask(phi.values(), -s - delta);
    r.lhs = mask_count(K) ? std::pow(delta, m.n()) * capacities(K, phi.form_ptr()).cap : 0.0;
    PositiveMeasure mu = ma_measure(phi);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (phi[i] < -s) r.rhs += mu.weights[i];
    r.holds = r.lhs <= r.rhs + tol;
    return r;
}

std::vector<std::vector<double>> trig_psh_dictionary(const ReferenceForm& omega, int count, std::uint64_t seed,
                                                     int max_mode) {
    const ModelManifold& m = omega.manifold();
    if (!m.is_torus()) fail(ErrorKind::Unsupported, "trigonometric dictionaries live on tori");
    if (m.n() != 1) fail(ErrorKind::Unsupported, "trigonometric dictionaries are two-dimensional");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<std::vector<double>> out;
    for (int member = 0; member < count; ++member) {
        struct Mode {
            int a, b;
            double amp, phase;
        };
        std::vector<Mode> modes;
        for (int a = -max_mode; a <= max_mode; ++a)
            for (int b = 0; b <= max_mode; ++b) {
                if (b == 0 && a <= 0) continue;
                if (U(rng) < 0.5) continue;
                modes.push_back({a, b, (2.0 * U(rng) - 1.0) / (1.0 + a * a + b * b), 2.0 * kPi * U(rng)});
            }
        if (modes.empty()) modes.push_back({1, 0, 1.0, 0.0});
        std::vector<double> T(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            Eigen::VectorXd u = m.unit_coords(i);
            double s = 0.0;
            for (const auto& md : modes) s += md.amp * std::cos(2.0 * kPi * (md.a * u(0) + md.b * u(1)) + md.phase);
            T[i] = s;
        }
        DdcField f = ddc(m, T);
        double scale = kInf;
        for (std::size_t i = 0; i < m.size(); ++i) {
            double lo = pluri::min_eigenvalue(f.h[i]);
            if (lo < 0.0) scale = std::min(scale, pluri::min_eigenvalue(omega.at(i)) / -lo);
        }
        scale *= 0.95 * (0.2 + 0.8 * U(rng));
        for (double& v : T) v *= scale;
        const double top = max_value(T);
        for (double& v : T) v -= top;
        const double depth = -min_value(T);
        if (depth > 1.0)
            for (double& v : T) v /= depth;
        out.push_back(std::move(T));
    }
    return out;
}

std::vector<std::vector<double>> pairwise_maxima(const std::vector<std::vector<double>>& dict, int count,
                                                 std::uint64_t seed) {
    if (dict.size() < 2) fail(ErrorKind::InvalidInput, "need at least two dictionary members");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, dict.size() - 1);
    std::vector<std::vector<double>> out;
    for (int k = 0; k < count; ++k) {
        std::size_t a = pick(rng), b = pick(rng);
        if (a == b) b = (b + 1) % dict.size();
        std::vector<double> v(dict[a].size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(dict[a][i], dict[b][i]);
        out.push_back(std::move(v));
    }
    return out;
}

double dictionary_capacity_lower_bound(const Mask& K, const FormPtr& omega,
                                       const std::vector<std::vector<double>>& dict) {
    double best = 0.0;
    for (const auto& u : dict) {
        if (min_value(u) < -1.0 - 1e-12 || max_value(u) > 1e-12)
            fail(ErrorKind::InvalidInput, "dictionary members must satisfy -1 <= u <= 0");
        QuasiPshFunction f(omega, u, Normalization::None);
        PositiveMeasure mu = ma_measure(f);
        double s = 0.0;
        for (std::size_t i = 0; i < K.size(); ++i)
            if (K[i]) s += mu.weights[i];
        best = std::max(best, s);
    }
    return best;
}

}  // namespace pluri
