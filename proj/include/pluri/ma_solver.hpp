#pragma once

#include "pluri/apriori_bounds.hpp"
#include "pluri/psh_calculus.hpp"

#include <functional>
#include <vector>

namespace pluri {

// Volume form the density is measured against.
enum class DensityReference {
    Form,      // (omega + dd^c phi)^n = f e^{lambda phi} omega^n
    Lebesgue,  // (omega + dd^c phi)^n = V f e^{lambda phi} dx / Area
};

struct SolverControls {
    double tolerance = 1e-9;  // sup-norm of the log-det residual
    int max_steps = 60;
    double linear_tolerance = 1e-10;
    int max_linear_iterations = 20000;
    int max_halvings = 20;
};

struct MaProblem {
    FormPtr omega;
    std::vector<double> density;
    int lambda = 0;
    DensityReference reference = DensityReference::Form;
    // Degenerate omega is replaced by omega + 1e-3 t I inside the solver.
    double regularization_t = 1.0;
    SolverControls controls;
    std::vector<double> initial;  // optional starting potential
};

struct MaSolution {
    QuasiPshFunction phi;
    FormPtr form_used;  // omega after regularization
    double residual = 0.0;
    int steps = 0;
    int linear_iterations = 0;
    double mass_defect = 0.0;
    double compat_shift = 0.0;  // lambda = 0: constant absorbed into log f
    double eta = 0.0;
    std::vector<double> history;
};

// Samples f(x) at grid points, optionally averaged over 2^{2n} subcell points.
std::vector<double> sample_density(const ModelManifold& m, const std::function<double(const Eigen::VectorXd&)>& f,
                                   bool cell_average = false);
// Mean of f against the problem's reference probability measure.
double density_mean(const MaProblem& p);
// Rescales the density to mean one.
void normalize_density(MaProblem& p);

// Discrete log-det residual log det(omega + dd^c phi) - log(ref f) - lambda phi (no constant shift).
std::vector<double> ma_residual(const MaProblem& p, const std::vector<double>& phi);

MaSolution solve_ma(const MaProblem& p);

struct AprioriReport {
    double sup = 0.0;
    double inf = 0.0;
    double M = 0.0;
    double slack = 0.0;  // M - osc
    double measured_norm = 0.0;
    bool holds = false;
};

// Checks osc(phi) <= M after confirming the density norm against nu is within the certificate.
AprioriReport verify_apriori(const MaProblem& p, const MaSolution& s, const BoundCertificate& cert,
                             const PositiveMeasure& nu);

struct ComparisonReport {
    double max_excess = 0.0;  // max(sub - sup)
    double min_gap = 0.0;     // min(sup - sub)
    bool holds = false;
};

// Pointwise sub <= sup for a sub/supersolution pair of a lambda = 1 problem.
ComparisonReport comparison_check(const std::vector<double>& sub, const std::vector<double>& sup, const MaProblem& p,
                                  double tol = 1e-8);

}  // namespace pluri
