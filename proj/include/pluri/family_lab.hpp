#pragma once

#include "pluri/density_models.hpp"
#include "pluri/ma_solver.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pluri {

enum class FamilyKind { GeneralType, StableCusp, CalabiYau, NonCollapsing, CollapsingFibration };
const char* to_string(FamilyKind kind);

struct ConvergenceReport {
    std::vector<double> ladder;
    std::vector<double> l1;       // potentials against the limit
    std::vector<double> pairing;  // max over the test dictionary of |<psi_j, T_t - T_0>|
    double rate = 0.0;            // slope of log l1 against log t
    bool converges = false;       // strict decrease over at least three trailing points
    std::string verdict;
};

struct FamilyExperiment {
    FamilyKind kind = FamilyKind::GeneralType;
    std::vector<double> ladder;
    std::map<std::string, std::vector<double>> series;  // per-t diagnostics
    std::map<std::string, double> scalars;
    std::map<std::string, bool> checks;
    std::optional<ConvergenceReport> convergence;
    std::vector<MaSolution> solutions;  // kept when requested

    bool passed() const;
    std::vector<std::string> failed_checks() const;
};

// Strictly decreasing, positive.
void validate_ladder(const std::vector<double>& ladder);

// h(t, x) on a flat n = 1 torus; the family is normalized so that int e^{h_t} dnu = 1.
using HFamily = std::function<double(double t, const Eigen::VectorXd& x)>;

struct TorusFamilyOptions {
    int resolution = 64;
    double alpha = 0.5;  // (H1) exponent for the measured constant
    int h1_members = 40;
    std::uint64_t seed = 7;
    bool keep_solutions = false;
    SolverControls controls;
};

// lambda = 1 on the unit square torus with omega = I: MA(phi_t) = e^{h_t + phi_t} nu.
// Rejects the family when sup |h_t| exceeds h_bound anywhere on the ladder.
FamilyExperiment general_type_family(const std::vector<double>& ladder, const HFamily& h, double h_bound,
                                     const TorusFamilyOptions& opt = {});

// The Bessel-normalized sin(2 pi x)(1+t) - log I_0(1+t).
HFamily sine_h_family();

struct CuspProblem {
    // |z|^2 rho(|z|) as a function of L = -log|z|, rho the radial density against Lebesgue measure.
    std::function<double(double L)> scaled_density;
    double L_out = 0.6931471805599453;         // outer ring r = 1/2, L = -log r
    double L_in = 1e6;
    int nodes = 4000;
    std::vector<double> rings;  // fit radii; empty means 2^{-k}, k = 2..40
};

struct CuspReport {
    double kappa = 0.0;
    double b = 0.0;
    double r2 = 0.0;
    double variation = 0.0;  // range of phi over the fit rings
    std::string verdict;     // "fitted" | "bounded" | "inconclusive"
    std::vector<double> rings;
    std::vector<double> values;
    double model_deviation = 0.0;  // sup |phi - (-2 log(-log r^2))| on the fit rings
};

// Radial lambda = 1 problem dd^c phi = e^phi rho on the punctured disk in L = -log r,
// Dirichlet data from the model cusp potential at both ends of the exhaustion.
CuspReport cusp_exponent(const CuspProblem& P);
// rho = 2/r^2, whose solution is -2 log(-log r^2).
std::function<double(double)> model_cusp_density();

// Solves phi'' = w e^phi on nodes L with phi(L_0) = left and either phi(L_end) = right or phi'(L_end) = 0.
std::vector<double> solve_radial(const std::vector<double>& L, const std::vector<double>& w, double left,
                                 std::optional<double> right);

struct StableFamilyOptions {
    double c = 1.0;       // density scale
    double alpha = 0.5;   // (H1) data for the certified constant
    double A = 0.0;       // 0: measure on the flat torus
    double spacing = 0.01;
    double tail = 30.0;   // inner end at log(1/t) + tail
};

// Radial local model around a branch: lc densities c/(r^2 + t^2) (s = 1), klt densities c (r^2 + t^2)^{a_1} (s = 0).
// Requires an (H2') certificate reporting uniform boundedness.
FamilyExperiment stable_family_bound(const std::vector<double>& ladder, const SncLocalModel& M,
                                     const IntegralCertificate* certificate, const StableFamilyOptions& opt = {});

// lambda = 0 on the unit square torus, mu_t = mu(t, .) rescaled to mean one.
using MuFamily = std::function<double(double t, const Eigen::VectorXd& x)>;
FamilyExperiment cy_oscillation(const std::vector<double>& ladder, const MuFamily& mu,
                                const TorusFamilyOptions& opt = {});
MuFamily cosine_mu_family();

struct NonCollapsingOptions {
    int resolution = 64;
    double c = 0.25;  // omega_0 = c (2 - cos 2 pi x - cos 2 pi y)
    double alpha = 0.5;
    double p = 1.5;   // f_t ~ 1/(|x|^2 + t) stays in L^p for p < 2 only
    int h1_members = 40;
    std::uint64_t seed = 7;
    double core_radius = 0.2;  // locally uniform error is measured outside this ball around the zero
    SolverControls controls;
};

// omega_t = omega_0 + t I with mu = 1 + cos(2 pi y)/2.
FamilyExperiment noncollapsing_limit(const std::vector<double>& ladder, const NonCollapsingOptions& opt = {});

struct CollapsingOptions {
    int resolution = 24;
    bool fiber_dependent = true;
    int dictionary = 32;
    std::uint64_t seed = 11;
    bool keep_solutions = false;
    SolverControls controls;
};

// X = E_1 x E_2 fibred over E_2, omega_t = diag(t, 1 + t), lambda = 0.
FamilyExperiment collapsing_fibration(const std::vector<double>& ladder, const CollapsingOptions& opt = {});

// Solves dd^c u = F - mean(F) on an n = 1 torus through the symbol of the solver's stencil.
// Returns u with mean zero; the base equation 1 + dd^c u = F is the case mean(F) = 1.
std::vector<double> discrete_base_solve(const ModelManifold& m, const std::vector<double>& F);

}  // namespace pluri
