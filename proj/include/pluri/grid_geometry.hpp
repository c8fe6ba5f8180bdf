#pragma once

#include "pluri/common.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pluri {

enum class ManifoldKind { Torus, ProjectiveAtlas, ProductFibration };

const char* to_string(ManifoldKind kind);

// Complex coordinate indices of the two factors of a product torus. The
// fibration is the projection onto the base factor.
struct Fibration {
    std::vector<int> fiber;
    std::vector<int> base;
};

inline constexpr std::uint32_t kNoNeighbor = 0xffffffffu;

class ModelManifold {
public:
    ManifoldKind kind() const { return kind_; }
    bool is_torus() const { return kind_ != ManifoldKind::ProjectiveAtlas; }
    int n() const { return n_; }
    int real_dim() const { return 2 * n_; }
    int resolution(int axis) const { return res_[axis]; }
    const std::vector<int>& resolutions() const { return res_; }
    int chart_count() const { return charts_; }
    std::size_t chart_size() const { return chart_size_; }
    std::size_t size() const { return chart_size_ * static_cast<std::size_t>(charts_); }

    // Torus data. x = P u with u in [0,1)^{2n}; coordinates ordered (x1,y1,x2,y2,...).
    const Eigen::MatrixXd& period() const { return period_; }
    const Eigen::MatrixXd& period_inverse() const { return period_inv_; }
    double area() const { return area_; }
    const std::optional<Fibration>& fibration() const { return fibration_; }

    // Grid spacing along a real axis, in the coordinates used by the stencils
    // (unit-cube coordinates on tori, chart coordinates on atlases).
    double spacing(int axis) const { return spacing_[axis]; }
    double chart_box() const { return box_; }

    int chart_of(std::size_t idx) const { return static_cast<int>(idx / chart_size_); }
    void multi_index(std::size_t idx, int* out) const;
    std::size_t flat_index(int chart, const int* mi) const;
    std::uint32_t neighbor(std::size_t idx, int axis, int step) const {
        return (step > 0 ? plus_ : minus_)[static_cast<std::size_t>(axis) * size() + idx];
    }

    // Real coordinates: x = P u on tori, chart coordinates on atlases.
    Eigen::VectorXd coords(std::size_t idx) const;
    Eigen::VectorXd unit_coords(std::size_t idx) const;
    std::vector<cplx> complex_coords(std::size_t idx) const;

    // Lebesgue measure of one grid cell in real coordinates.
    double cell_measure() const { return cell_; }
    // Converts det(g) dλ into the normalized volume form.
    double volume_scale() const { return volume_scale_; }

    // Atlas helpers.
    std::vector<cplx> homogeneous(std::size_t idx) const;
    int owner_chart(std::size_t idx) const;
    bool representable(std::size_t idx, int chart) const;
    double partition_weight(std::size_t idx) const { return weights_.empty() ? 1.0 : weights_[idx]; }
    // Locates the grid cell containing chart coordinates x; returns false if outside.
    bool locate(int chart, const Eigen::VectorXd& x, std::vector<int>& base, std::vector<double>& frac) const;

    friend std::shared_ptr<const ModelManifold> build_torus(int, const Eigen::MatrixXd&, int);
    friend std::shared_ptr<const ModelManifold> build_torus(int, const Eigen::MatrixXd&, const std::vector<int>&);
    friend std::shared_ptr<const ModelManifold> build_atlas(int, int);

private:
    void build_neighbors();

    ManifoldKind kind_ = ManifoldKind::Torus;
    int n_ = 1;
    std::vector<int> res_;
    std::vector<std::size_t> stride_;
    std::vector<double> spacing_;
    int charts_ = 1;
    std::size_t chart_size_ = 0;
    Eigen::MatrixXd period_, period_inv_;
    double area_ = 0.0;
    std::optional<Fibration> fibration_;
    double box_ = 0.0;
    double cell_ = 0.0;
    double volume_scale_ = 1.0;
    std::vector<double> weights_;
    std::vector<std::uint32_t> plus_, minus_;
};

using ManifoldPtr = std::shared_ptr<const ModelManifold>;

ManifoldPtr build_torus(int n, const Eigen::MatrixXd& period, int resolution);
ManifoldPtr build_torus(int n, const Eigen::MatrixXd& period, const std::vector<int>& resolution);
// Square lattice Z^{2n} scaled by `side`.
ManifoldPtr square_torus(int n, int resolution, double side = 1.0);
// Chart atlas of P^N without a form.
ManifoldPtr build_atlas(int N, int resolution);

struct FormTolerances {
    double psd = 1e-10;
    double closed = 1e-8;
};

class ReferenceForm {
public:
    ReferenceForm(ManifoldPtr owner, std::vector<Herm> coeff, std::string label, FormTolerances tol = {},
                  bool closed_by_construction = false);

    const ModelManifold& manifold() const { return *owner_; }
    const ManifoldPtr& manifold_ptr() const { return owner_; }
    const Herm& at(std::size_t idx) const { return coeff_[idx]; }
    const std::vector<Herm>& coefficients() const { return coeff_; }
    bool kahler() const { return kahler_; }
    bool semipositive() const { return true; }
    bool constant() const { return constant_; }
    double min_eigenvalue() const { return min_eig_; }
    double closedness_residual() const { return closed_residual_; }
    const std::string& label() const { return label_; }
    const FormTolerances& tolerances() const { return tol_; }

private:
    ManifoldPtr owner_;
    std::vector<Herm> coeff_;
    std::string label_;
    FormTolerances tol_;
    bool kahler_ = false;
    bool constant_ = false;
    double min_eig_ = 0.0;
    double closed_residual_ = 0.0;
};

using FormPtr = std::shared_ptr<const ReferenceForm>;

FormPtr constant_form(ManifoldPtr m, const Herm& g, const std::string& label);
FormPtr make_form(ManifoldPtr m, const std::function<Herm(std::size_t)>& coeff, const std::string& label,
                  FormTolerances tol = {});
// a + s b, sharing the manifold of a.
FormPtr form_combination(const ReferenceForm& a, const ReferenceForm& b, double s, const std::string& label);

// FS coefficient matrix ((1+|z|^2) I - z^* z) / (2 (1+|z|^2)^2) at chart coordinates z.
Herm fubini_study_matrix(const std::vector<cplx>& z);

struct Atlas {
    ManifoldPtr manifold;
    FormPtr form;
};
Atlas fubini_study_atlas(int N, int resolution);

// Largest |g_c - J^T g_c' conj(J)| over overlapping chart pairs at every grid point.
double chart_transition_defect(const ReferenceForm& fs);

struct VolumeReport {
    double V = 0.0;
    std::vector<double> weights;
};

VolumeReport volume(const ReferenceForm& omega);
// Integral of the mixed form omega_1 ^ ... ^ omega_n.
double mixed_volume(const std::vector<const ReferenceForm*>& forms);
// Coefficients c_k with V(a + t b) = sum_k c_k t^k.
std::vector<double> binomial_volume_coefficients(const ReferenceForm& a, const ReferenceForm& b);

// Complex Hessian (d_j dbar_k) of a grid function at idx in real coordinates.
// Returns false if the stencil leaves the chart or touches a non-finite value.
bool complex_hessian(const ModelManifold& m, const std::vector<double>& v, std::size_t idx, Herm& out);
// Maps a real symmetric Hessian in coordinates (x1,y1,...) to its complex Hessian.
Herm complexify_hessian(const Eigen::MatrixXd& hx, int n);

void dump_grid_csv(std::ostream& os, const ModelManifold& m, const std::vector<double>& values);

}  // namespace pluri
