#pragma once

#include "pluri/psh_calculus.hpp"

#include <cstdint>
#include <vector>

namespace pluri {

// Spectral data of a flat torus with constant omega. Delta = tr_omega dd^c,
// measures are det(g) dλ (the library's omega^n), V is their total mass.
class FlatTorusKernel {
public:
    explicit FlatTorusKernel(const ReferenceForm& omega);

    int real_dim() const { return d_; }
    double volume() const { return V_; }
    // Eigenvalue of -Delta on exp(2 pi i k.u).
    double eigenvalue(const Eigen::VectorXd& k) const;
    double spectral_gap() const { return gap_; }

    // Heat kernel H(x, x + r, t) by theta summation (image or Fourier side,
    // whichever needs fewer terms).
    double heat(const Eigen::VectorXd& r, double t) const;
    double heat_images(const Eigen::VectorXd& r, double t) const;
    double heat_fourier(const Eigen::VectorXd& r, double t) const;
    // Continuous Green function G(x, x + r) (Ewald split); +inf at r = 0.
    double green(const Eigen::VectorXd& r) const;
    double ewald_time() const { return tau_; }

private:
    double quad(const double* w, const Eigen::MatrixXd& A) const;

    Eigen::MatrixXd P_, Pinv_, Cu_, CuInv_;
    int d_ = 2;
    double detg_ = 1.0, detS_ = 1.0, V_ = 1.0, gap_ = 0.0, tau_ = 0.0;
};

struct GreenFunction {
    FormPtr omega;
    std::size_t base = 0;
    // Lattice Green function of the compact stencil Laplacian: finite at the base.
    std::vector<double> values;
    double V = 0.0;
    double mean = 0.0;  // integral against omega^n
    double inf = 0.0;   // min over the grid
    double sup = 0.0;
};

GreenFunction torus_green(std::size_t base, const FormPtr& omega);

// Discrete Laplacian tr_g dd^c with the compact stencil.
std::vector<double> discrete_laplacian(const ReferenceForm& omega, const std::vector<double>& values);

// H(x_0, x_j, t) at every grid point x_j, x_0 the grid origin (theta series folded onto the grid, one inverse DFT).
std::vector<double> heat_on_grid(const ReferenceForm& omega, double t);

struct HeatLevel {
    double t = 0.0;
    double sup_dev = 0.0;  // sup_{x,y} |H - 1/V|
    double scaled = 0.0;   // sup_dev * t^n
    double mass = 0.0;     // grid integral of H(x, ., t)
    double cauchy_schwarz_excess = 0.0;  // max |G(x,y,t)|^2 - G(x,x,t)G(y,y,t), t >= 0.01 only
    bool cauchy_schwarz_checked = false;
};

struct HeatTraceReport {
    std::vector<HeatLevel> levels;
    double C0_empirical = 0.0;
    double max_mass_error = 0.0;
};

HeatTraceReport heat_trace_check(const ReferenceForm& omega, const std::vector<double>& ladder);

// max |H(x,y,t+s) - int H(x,z,t) H(z,y,s)| over `pairs` seeded grid pairs.
double semigroup_defect(const ReferenceForm& omega, double t, double s, int pairs, std::uint64_t seed);

struct MeanValueReport {
    double min_slack = 0.0;  // min_x (mean phi - phi(x) - n V inf G)
    std::size_t argmin = 0;
    double bound = 0.0;      // n V inf G
    std::size_t checked = 0;
    bool holds = false;
};

MeanValueReport mean_value_inequality(const QuasiPshFunction& phi, const GreenFunction& G, double tol = 1e-9);

// -1/V - n 4^{1/n} C_S (C_P + 1) / (n - 1); n >= 2.
double green_lower_bound_constant(double C_S, double C_P, double V, int n);

struct FunctionalConstants {
    double C_S = 0.0;  // sup ||f||^2_{2n/(n-1)} / (||df||^2 + ||f||^2); n >= 2
    double C_P = 0.0;  // sup ||f - mean f||^2 / ||df||^2
    std::uint64_t seed = 0;
    int count = 0;
};

// Rayleigh-quotient extrema over a seeded dictionary of smooth trigonometric functions.
FunctionalConstants measure_functional_constants(const ReferenceForm& omega, int count, std::uint64_t seed);

struct GreenBoundReport {
    double inf_G = 0.0;
    double bound = 0.0;
    bool direct = false;  // n = 1: the bound is the measured inf G itself
    FunctionalConstants constants;
    bool holds = false;
};

GreenBoundReport green_bound_report(const GreenFunction& G, int count = 200, std::uint64_t seed = 7);

// -V G(base, .) smoothed by the heat flow for time s, sup-normalized: a log|theta|-type omega-psh potential (n = 1).
std::vector<double> smoothed_green_potential(const GreenFunction& G, double s);

}  // namespace pluri
