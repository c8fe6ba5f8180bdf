#pragma once

#include "pluri/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pluri {

enum class BoundMode { Lp, Orlicz, Big };

const char* to_string(BoundMode mode);

struct HypothesisData {
    int n = 1;
    double alpha = 1.0;
    double A = 1.0;  // (H1) constant
    double p = 2.0;  // (H2) exponent
    double C = 1.0;  // (H2) constant, or the Luxemburg bound in Orlicz mode
    double eps = 1.0;
    BoundMode mode = BoundMode::Lp;

    double q() const { return p / (p - 1.0); }
};

struct BoundCertificate {
    BoundMode mode = BoundMode::Lp;
    int n = 1;
    double alpha = 0, A = 0, p = 0, q = 0, C = 0, eps = 0;
    double bn = 0;
    double D = 0;
    double s0 = 0;
    double M = 0;
    // Orlicz pipeline intermediates.
    double kappa = 0;     // capacity exponent 1 + eps/n
    double kappa_used = 0;  // exponent in (1, kappa] minimizing M
    double C2 = 0;        // mu(K) <= C2 Cap(K)^kappa
    double E = 0;         // Cap{phi < -s-1} <= E / s
    double delta0 = 0;
};

double bn_constant(int n);

// Closed-form constants for (H1) + (H2); mode Big reuses the same formula.
BoundCertificate kolodziej_bound(const HypothesisData& h);

struct GiorgioResult {
    std::vector<double> s;
    std::vector<double> delta;
    double delta0 = 0;
    double s_infinity = 0;
    double bound = 0;        // s_start + 5 D^{1/n}
    double sharp_bound = 0;  // s_start + e^2/(e-1) D^{1/n}
    bool halted = false;
};

// f: nondecreasing, possibly +inf. Iterates s_{j+1} = s_j + e D^{1/n} e^{-f(s_j)}.
GiorgioResult giorgio_iteration(const std::function<double(double)>& f, double D, int n, double s_start,
                                int max_steps = 100000);
// Same, with f given by samples (s_i, f_i), piecewise linear and +inf past the last sample.
GiorgioResult giorgio_iteration(const std::vector<double>& s_samples, const std::vector<double>& f_samples, double D,
                                int n, double s_start);

// Capacity-decay profile f(s) = f0 + beta (s - s0) - gamma log(1 - (s - s0)/L),
// +inf for s >= s0 + L.
struct GiorgioScenario {
    double D = 1.0;
    int n = 1;
    double s_start = 0.0;
    double f0 = 0.0, beta = 0.0, gamma = 0.0, L = 1.0;
    double operator()(double s) const;
};

// Checks f(s + d) >= 2 f(s) + log d - log(D)/n on a grid of s in [s_start, s_start + span]
// and d in (0, 1), plus f(s_start) >= 0 and delta_0 < 1.
bool giorgio_admissible(const std::function<double(double)>& f, double D, int n, double s_start, double span);
// Rejection-samples an admissible scenario; deterministic in the seed.
GiorgioScenario random_giorgio_scenario(std::uint64_t seed);

// chi(t) = int_0^t log(1+u)^{n+eps} du and its Legendre transform.
class OrliczMachinery {
public:
    explicit OrliczMachinery(int n, double eps = 1.0);

    int n() const { return n_; }
    double eps() const { return eps_; }
    double exponent() const { return n_ + eps_; }

    double chi(double t) const;
    double chi_prime(double t) const;
    double t_of_s(double s) const;  // inverse of chi'
    double chi_star(double s) const;
    double chi_inverse(double y) const;
    double chi_star_inverse(double y) const;
    // Luxemburg norm of |f| with respect to the probability weights w.
    double luxemburg(const std::vector<double>& f, const std::vector<double>& w) const;
    // sup_s chi*(s) e^{-s}.
    double star_exponential_ratio() const;

private:
    int n_;
    double eps_;
    bool integer_exponent_;
    int m_ = 0;
};

BoundCertificate orlicz_bound(const HypothesisData& h);

}  // namespace pluri
