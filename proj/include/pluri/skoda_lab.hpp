#pragma once

#include "pluri/psh_calculus.hpp"

#include <cstdint>
#include <vector>

namespace pluri {

struct PshFamily {
    std::vector<cplx> params;
    std::vector<QuasiPshFunction> members;
    std::vector<double> sups;
    std::vector<double> means;  // (1/V) int phi_t omega_t^n
};

// Members are validated as omega_t-psh by their constructors.
PshFamily make_family(std::vector<cplx> params, std::vector<QuasiPshFunction> members);

double lelong_bound_constant(double C_theta, double A, int n, double V);

struct LelongBoundReport {
    double bound = 0.0;
    double max_measured = 0.0;
    std::vector<double> measured;  // tag points, then each member's argmin
    bool holds = false;
};

// Measures Lelong numbers at every tag and at each member's minimum and
// compares them with C_theta A^{n-1} V.
LelongBoundReport uniform_lelong_bound(const PshFamily& F, double C_theta, double A, double V);

struct ProjectiveSkodaReport {
    double lhs = 0.0;       // int e^{-psi/(nd)} omega^n
    double rhs = 0.0;       // (4n)^n d exp(-(1/nd) int psi omega^n)
    double integral = 0.0;  // int psi omega^n
    bool holds = false;
    bool from_evaluator = false;
};

// n = d = 1 (P^1). Uses sphere quadrature when psi has an evaluator, grid quadrature otherwise.
ProjectiveSkodaReport projective_skoda_check(const QuasiPshFunction& psi, int n = 1, int d = 1);

// Smooth sup-normalized omega_FS-psh functions (1/2) log(Z^* A Z / |Z|^2) - (1/2) log lambda_max(A),
// scaled by c in (0, 1]; the first member is the rank-one kernel (1/2) log(|Z_1|^2/|Z|^2).
std::vector<QuasiPshFunction> projective_dictionary(const FormPtr& fs, int count, std::uint64_t seed);

struct KernelReport {
    double r = 0.0;  // |z| after moving y to [1:0:...:0]; +inf for orthogonal points
    double G = 0.0;
    double reduction_defect = 0.0;  // |G(x,y) - chart formula|
    std::vector<double> eig_i;      // e^{-2G} omega_FS - omega_G relative to omega_FS
    std::vector<double> eig_ii;     // omega_FS + dd^c chi(G) relative to omega_FS
    double lambda = 0.0;            // tangential eigenvalue of omega_FS + dd^c chi(G)
    double mu = 0.0;                // radial eigenvalue
    double lambda_closed = 0.0;     // 1 + chi'/r^2
    double mu_closed = 0.0;         // 1 - chi' + chi''/(2 r^2)
    double mu_uncorrected = 0.0;    // (1 + r^2 - chi') + chi''/(2 r^2)
    double lambda_bound = 0.0;      // e^{-2(1-delta)G}/2
    double mu_bound = 0.0;          // (delta/2) e^{-2(1-delta)G}
    bool holds_i = false;
    bool holds_ii = false;
    bool at_infinity = false;
};

// x, y homogeneous coordinates in C^{N+1}, 1 <= N <= 3.
KernelReport kernel_inequality_check(const std::vector<cplx>& x, const std::vector<cplx>& y, double delta);

struct PowerHessianReport {
    std::vector<double> eigenvalues;  // ascending, closed form
    double C_beta = 0.0;
    bool within_envelope = false;
};

PowerHessianReport power_hessian_eigenvalues(double beta, const std::vector<cplx>& z);

struct GapTable {
    std::vector<double> abs_t;
    std::vector<double> gap;  // sup phi_t - mean phi_t
    double sup_gap = 0.0;
    double slope = 0.0;  // d gap / d(-log|t|)
    bool bounded = false;
};

GapTable sup_mean_gap(const PshFamily& F, double slope_tol = 0.05);

struct ConicLevel {
    double t = 0.0;
    double integral = 0.0;  // int_{X_t} phi_t omega_t
    double mass = 0.0;      // int_{X_t} omega_t (degree 2)
    double sup = 0.0;
    double sup_expected_radius = 0.0;  // |w| on S_t
    double gap = 0.0;                  // sup - integral / mass
};

struct ConicReport {
    std::vector<ConicLevel> levels;
    double slope = 0.0;  // integral ~ slope log t + intercept
    double intercept = 0.0;
    double r2 = 0.0;
    double decades = 0.0;
};

// The conic degeneration xy = t z^2 parametrized by w -> [w^2 : t : w].
ConicReport conic_counterexample(const std::vector<double>& ladder, int nodes_per_decade = 10000);
// Integrand pieces on |w| = rho (exposed for tests).
double conic_potential(double rho, double t);
double conic_area_density(double rho, double t);  // omega_t = density dλ(w)

struct H1Measurement {
    double alpha = 0.0;
    double A = 1.0;  // max(1, max over members of int e^{-alpha (psi - sup psi)} dnu)
    std::size_t members = 0;
    std::size_t argmax = 0;
};

// nu = omega^n / V on the grid.
H1Measurement measure_h1(const ReferenceForm& omega, double alpha, const std::vector<std::vector<double>>& members);
// Trigonometric members plus heat-smoothed Green potentials (n = 1 tori).
std::vector<std::vector<double>> h1_dictionary(const FormPtr& omega, int count, std::uint64_t seed);

}  // namespace pluri
