#pragma once

#include "pluri/common.hpp"

#include <string>
#include <vector>

namespace pluri {

// Local semi-stable model z_0 ... z_p = t in the unit polydisk of C^{n+1}.
// Branches are z_1..z_p: the first r are strict-transform components of the
// central fiber, the first s (r <= s) carry discrepancy -1, the rest are klt.
struct SncLocalModel {
    int n = 1;  // fiber dimension, n >= p
    int p = 1;
    int r = 0;
    int s = 0;
    int m = 1;
    std::vector<double> a;  // a_1..a_p
    double delta = 0.1;
    double eps = 1.0;
    double A = 1.0;  // f^* gamma >= A log|s_E|^2; user input

    void validate() const;
    bool canonical() const;  // r = 0 and every a_i >= 0
};

// Flat "key = value" text, '#' comments; keys n, p, r, s, m, a_list (comma separated), eps, delta, A.
SncLocalModel parse_snc_model(const std::string& text);

std::vector<double> default_t_ladder();  // 10^{-k}, k = 1..8

struct IntegralCertificate {
    std::vector<double> ladder;
    std::vector<double> values;       // quadrature
    std::vector<double> closed_form;  // per t; NaN where no antiderivative is available
    std::vector<double> box_bound;    // Fubini bound on the enclosing box, per t
    double sup = 0.0;
    double limit = 0.0;     // t -> 0 value when known, else NaN
    double majorant = 0.0;  // t-independent bound; +inf when none exists
    double max_closed_form_error = 0.0;  // relative
    bool monotone = false;  // nondecreasing as t decreases
    bool bounded = false;
    std::string verdict;  // "uniformly bounded" | "diverging"
};

// int_{V_t} prod_i |z_i|^{2 min(a_i, 0) - 2 dA} dλ over the fiber of a model with r = s = 0.
IntegralCertificate canonical_integrability(const SncLocalModel& M, double dA,
                                            const std::vector<double>& ladder = default_t_ladder());

struct WtIntegral {
    double value = 0.0;
    double bound = 0.0;        // product of the 1-D integrals over [0, 1/2]
    double closed_form = 0.0;  // NaN unless p = 1
};

// int over {r in [0,1/2]^p : r_1...r_p >= t} of prod_{i<=s} [r_i (-log r_i)^{1+eps}]^{-1} prod_{i>s} r_i^{delta-1}.
WtIntegral wt_integral(const SncLocalModel& M, double eps, double delta, double t);

// The weighted integrand [(-log|s_F|)^{n+eps} + (-log|s_klt|)^{n+eps}] e^{(n+1+2eps) psi_F} times the
// fiber density, integrated over the fiber inside the box |z_i| <= 1/2.
IntegralCertificate h2prime_certificate(const SncLocalModel& M, double eps,
                                        const std::vector<double>& ladder = default_t_ladder());

// h = prod z_i^{b_i} (1 + eta z_1 ... z_p); b_i < 0 is a pole.
struct MeromorphicFactor {
    std::vector<int> b;
    double eta = 0.0;
};

struct FiberDensityTable {
    std::vector<std::vector<double>> radii;  // sample points (|z_1|, ..., |z_p|), real positive representatives
    std::vector<double> density;            // |h|^{2/m} / prod_{i<=r} |z_i|^2
    std::vector<double> exponents;          // density ~ prod |z_i|^{2 e_i}
    double lp_threshold = 0.0;              // density in L^q for q < threshold (+inf if bounded)
    bool h2 = false;                        // some q > 1 works
    bool needs_h2prime = false;
};

FiberDensityTable fiber_density_table(const SncLocalModel& M, const MeromorphicFactor& h, double t,
                                      int samples_per_axis = 16);

}  // namespace pluri
