#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cinelab/common.hpp"

namespace cinelab {

// Sigma(x), its first derivatives d_i Sigma and packed second derivatives
// d_i d_j Sigma (same packing as Jet::hess).
struct ChartJet {
    int param_dim = 0;
    int ambient_dim = 0;
    std::array<double, kMaxAmbient> point{};
    std::array<std::array<double, kMaxAmbient>, kMaxParam> d1{};
    std::array<std::array<double, kMaxAmbient>, kMaxHess> d2{};

    const std::array<double, kMaxAmbient>& second(int i, int j) const { return d2[hess_index(i, j, param_dim)]; }
};

enum class ChartKind { sphere_slice, unit_sphere, quadratic_graph, custom };

const char* chart_kind_name(ChartKind kind);

// Parameters of a builtin chart. For quadratic_graph, L and A are
// (n-1)x(n-1); the chart is x -> (1, y, (Ly)^T A (Ly)) with y = x - 1/2.
struct ChartSpec {
    ChartKind kind = ChartKind::sphere_slice;
    int n = 3;
    double c = 0.5;       // sphere_slice height
    double radius = 1.0;  // unit_sphere radius
    Eigen::MatrixXd L;
    Eigen::MatrixXd A;
};

// A C^2 chart Sigma: [0,1]^k -> R^d. Builtin charts are defined on all of
// R^k (the enlarged parameter domain included). Immutable; share freely.
class ManifoldChart {
public:
    // order 0: point only, 1: + first derivatives, 2: + second derivatives
    using JetFn = std::function<void(std::span<const double> x, ChartJet& out, int order)>;

    ManifoldChart() = default;

    ChartKind kind() const { return kind_; }
    int param_dim() const { return param_dim_; }
    int ambient_dim() const { return ambient_dim_; }
    // n for the ambient R^{n+1}
    int n() const { return ambient_dim_ - 1; }
    bool codim_zero() const { return param_dim_ == ambient_dim_ - 1; }
    // Builtin charts whose image lies on the unit sphere.
    bool on_unit_sphere() const { return on_unit_sphere_; }
    bool builtin() const { return kind_ != ChartKind::custom; }
    const ChartSpec& spec() const { return spec_; }
    const std::string& label() const { return label_; }
    // +1 or -1: normal orientation fixed at the chart center.
    double orientation() const { return orientation_; }

    ChartJet jet(std::span<const double> x, int order = 2) const;
    void point(std::span<const double> x, double* out) const;

    // Closed-form charts
    static ManifoldChart sphere_slice(double c, int n);
    static ManifoldChart unit_sphere(int n, double radius = 1.0);
    static ManifoldChart quadratic_graph(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A, int n);
    static ManifoldChart builtin(const ChartSpec& spec);

    // User charts. With a jet function the derivatives are taken as given;
    // with a point function they come from central differences.
    static ManifoldChart custom(int param_dim, int ambient_dim, JetFn fn, std::string label = "custom");
    static ManifoldChart custom_points(int param_dim, int ambient_dim,
                                       std::function<void(std::span<const double>, double*)> point_fn,
                                       std::string label = "custom");
    // Sigma = v / |v| for a user map v with exact jets; the image lies on the unit sphere.
    static ManifoldChart radial_projection(int param_dim, int ambient_dim, JetFn v_fn, std::string label = "radial");

private:
    void finalize();

    ChartKind kind_ = ChartKind::custom;
    int param_dim_ = 0;
    int ambient_dim_ = 0;
    bool on_unit_sphere_ = false;
    double orientation_ = 1.0;
    ChartSpec spec_;
    std::string label_;
    JetFn fn_;
};

// Jet of q = v/|v| given the jet of v.
ChartJet normalize_jet(const ChartJet& v, int order);

struct TangentFrame {
    int param_dim = 0;
    int ambient_dim = 0;
    std::vector<double> x;
    Eigen::VectorXd e0;                 // Sigma(x)/|Sigma(x)|
    std::vector<Eigen::VectorXd> tangent;  // orthonormal e_1..e_k
    Eigen::VectorXd nu;
    bool codim_zero = false;            // nu = +-e0, no independent normal
    double orthonormality_residual = 0.0;
};

TangentFrame tangent_frame(const ManifoldChart& chart, std::span<const double> x);

enum class CurvatureMethod { closed_form, finite_difference };

// Finite-difference step for differentiating the frame field.
inline constexpr double kFrameStep = 1e-4;

struct CurvatureEntry {
    std::vector<double> x;
    std::vector<double> kappa;  // ascending
    double sectional_min = 0.0;  // NaN when the chart is not on the unit sphere
    double sectional_max = 0.0;
};

CurvatureEntry principal_curvatures(const ManifoldChart& chart, std::span<const double> x,
                                    CurvatureMethod method = CurvatureMethod::closed_form);

// Second fundamental form B_ij = <d_i d_j Sigma, nu> and metric G = J J^T.
void second_fundamental_form(const ManifoldChart& chart, std::span<const double> x, CurvatureMethod method,
                             Eigen::MatrixXd& B, Eigen::MatrixXd& G);

// kappa_i kappa_j + 1 (Gauss relation inside S^n). Requires |Sigma(x)| = 1.
double sectional_curvature(const ManifoldChart& chart, std::span<const double> x, int i, int j,
                           CurvatureMethod method = CurvatureMethod::closed_form);

// Sectional curvature of the tangent plane spanned by d Sigma(a), d Sigma(b)
// from the Euclidean Gauss equation: <B(X,X),B(Y,Y)> - |B(X,Y)|^2 with B the
// vector-valued second fundamental form in R^d. Independent of nu.
double sectional_curvature_ambient(const ManifoldChart& chart, std::span<const double> x,
                                   std::span<const double> a, std::span<const double> b);

// The same plane through the sphere-side relation 1 + II(X,X)II(Y,Y) - II(X,Y)^2.
double sectional_curvature_gauss(const ManifoldChart& chart, std::span<const double> x,
                                 std::span<const double> a, std::span<const double> b);

struct CurvatureReport {
    int param_dim = 0;
    std::vector<CurvatureEntry> entries;
    bool all_same_sign = false;
    double min_abs = 0.0;
    double max_abs = 0.0;
    double kappa_bound = 0.0;  // max(max_abs, 1/min_abs)
    bool on_sphere = false;
    double min_sectional = 0.0;
    bool sectional_gate = false;  // min sectional > 1
    bool passed = false;
    std::string note;
};

struct NondegeneracyOptions {
    int points_per_axis = 33;
    std::size_t max_samples = 100000;
    std::uint64_t seed = 0;
    CurvatureMethod method = CurvatureMethod::closed_form;
};

CurvatureReport verify_nondegenerate(const ManifoldChart& chart, const NondegeneracyOptions& opts = {});

// Deterministic flags from a list of entries.
void summarize_curvature(CurvatureReport& report);

void write_curvature_csv(const CurvatureReport& report, std::ostream& os);

// Sup over the parameter cube (sampled) of |Sigma| + |d Sigma| + |d^2 Sigma|, used as
// the Lipschitz constant of z -> f_z in the C^2 norm.
double chart_c2_bound(const ManifoldChart& chart, int points_per_axis = 17);

}  // namespace cinelab
