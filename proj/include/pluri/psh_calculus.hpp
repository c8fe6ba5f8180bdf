#pragma once

#include "pluri/grid_geometry.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace pluri {

enum class Normalization { SupZero, MeanZero, None };

const char* to_string(Normalization n);

// Local model c * log|z - a| at grid point `index`.
struct SingularTag {
    std::size_t index = 0;
    double c = 1.0;
};

// Point evaluation in real coordinates of a chart (x = P u on tori).
using PointEvaluator = std::function<double(const Eigen::VectorXd& x, int chart)>;

inline constexpr double kTolPsh = 1e-8;

class QuasiPshFunction {
public:
    QuasiPshFunction(FormPtr omega, std::vector<double> values, Normalization norm, std::vector<SingularTag> tags = {},
                     PointEvaluator evaluator = {}, double tol_psh = kTolPsh);

    const ModelManifold& manifold() const { return omega_->manifold(); }
    const ReferenceForm& form() const { return *omega_; }
    const FormPtr& form_ptr() const { return omega_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    Normalization normalization() const { return norm_; }
    const std::vector<SingularTag>& tags() const { return tags_; }
    const PointEvaluator& evaluator() const { return evaluator_; }
    bool has_evaluator() const { return static_cast<bool>(evaluator_); }
    // Smallest eigenvalue of omega + dd^c phi over checked points.
    double min_eigenvalue() const { return min_eig_; }
    // True for the +inf sentinel returned for pluripolar K.
    bool is_infinite_sentinel() const { return sentinel_; }
    double tol_psh() const { return tol_psh_; }

private:
    FormPtr omega_;
    std::vector<double> values_;
    Normalization norm_;
    std::vector<SingularTag> tags_;
    PointEvaluator evaluator_;
    double min_eig_ = 0.0;
    double tol_psh_ = kTolPsh;
    bool sentinel_ = false;
};

struct DdcField {
    std::vector<Herm> h;
    std::vector<std::uint8_t> valid;  // 0 where the stencil touches a singular value or leaves the chart
};

DdcField ddc(const ModelManifold& m, const std::vector<double>& values);
DdcField ddc(const QuasiPshFunction& phi);

struct PositiveMeasure {
    std::vector<double> weights;  // mass per grid cell
    std::vector<double> density;  // weight / (reference cell volume)
    double mass = 0.0;
    bool absolutely_continuous = true;
    double mass_defect = 0.0;  // |1 - mass| for normalized measures
};

// MA(phi) = V^{-1} (omega + dd^c phi)^n on the grid.
PositiveMeasure ma_measure(const ReferenceForm& omega, const QuasiPshFunction& phi);
PositiveMeasure ma_measure(const QuasiPshFunction& phi);
// omega^n / V.
PositiveMeasure reference_measure(const ReferenceForm& omega);
// Weighted mean of values against a measure (finite values only).
double integrate(const PositiveMeasure& mu, const std::vector<double>& values);

struct LelongReport {
    std::vector<double> radii;
    std::vector<double> means;
    std::vector<double> slopes;
    std::vector<double> richardson;
    double estimate = 0.0;
    int chart = 0;
};

LelongReport lelong_details(const QuasiPshFunction& phi, std::size_t idx);
double lelong_number(const QuasiPshFunction& phi, std::size_t idx);

using Mask = std::vector<std::uint8_t>;

// Strict sublevel set {values < level}.
Mask sublevel_mask(const std::vector<double>& values, double level);
std::size_t mask_count(const Mask& K);

struct EnvelopeResult {
    std::vector<double> values;
    double complementarity = 0.0;  // max |min(obstacle - u, omega + dd^c u)|
    double last_update = 0.0;
    int sweeps = 0;
};

// Largest grid function u <= obstacle with omega + dd^c u >= 0 (n = 1, diagonal period matrix).
EnvelopeResult perron_envelope(const ReferenceForm& omega, const std::vector<double>& obstacle,
                               const std::vector<double>& start);

QuasiPshFunction extremal_function(const Mask& K, const FormPtr& omega);

struct CapacityReport {
    Mask mask;
    double cap = 0.0;
    double t_cap = 0.0;
    double sup_extremal = 0.0;
    std::vector<double> extremal;           // V_K (+inf when K is empty)
    std::vector<double> relative_extremal;  // h_K
    double complementarity = 0.0;
    double mass_off_support = 0.0;  // MA(h_K) outside K and {h_K = 0}
    int sweeps = 0;
};

CapacityReport capacities(const Mask& K, const FormPtr& omega);

struct CapmaReport {
    double lhs = 0.0;  // delta^n Cap{phi < -s - delta}
    double rhs = 0.0;  // MA(phi){phi < -s}
    bool holds = true;
};

CapmaReport capma_check(const QuasiPshFunction& phi, double s, double delta, double tol = 1e-9);

// Random trigonometric omega-psh functions on a torus, scaled into [-1, 0]
// with sup 0. Deterministic in the seed.
std::vector<std::vector<double>> trig_psh_dictionary(const ReferenceForm& omega, int count, std::uint64_t seed,
                                                     int max_mode = 3);
// Pairwise maxima of a dictionary (stay omega-psh for monotone stencils).
std::vector<std::vector<double>> pairwise_maxima(const std::vector<std::vector<double>>& dict, int count,
                                                 std::uint64_t seed);

// max over the dictionary of MA(u)(K); each u must satisfy -1 <= u <= 0.
double dictionary_capacity_lower_bound(const Mask& K, const FormPtr& omega,
                                       const std::vector<std::vector<double>>& dict);

// Interpolates grid values at a point (multilinear; periodic on tori).
double interpolate(const ModelManifold& m, const std::vector<double>& values, int chart, const Eigen::VectorXd& x);

}  // namespace pluri
