#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cinelab/common.hpp"
#include "cinelab/geometry.hpp"
#include "cinelab/simd.hpp"

namespace cinelab {

enum class FieldKind { induced, polynomial, constant, grid_sampled, sphere_cap, combination, custom };

const char* field_kind_name(FieldKind kind);

struct Monomial {
    double coef = 0.0;
    std::array<int, kMaxParam> exps{};
};

namespace detail {
struct FieldImpl;
}

// A C^2 function on a box. Value-semantic handle to immutable data.
class ScalarField {
public:
    ScalarField() = default;

    FieldKind kind() const;
    const Box& domain() const;
    int dim() const { return domain().dim; }

    double value(std::span<const double> x) const;
    Jet jet(std::span<const double> x) const;
    double dir2(std::span<const double> x, std::span<const double> xi) const { return jet(x).dir2(xi); }
    // xs holds n points, row-major with dim() coordinates each.
    void values(const double* xs, std::size_t n, double* out) const;

    static ScalarField constant(const Box& domain, double c);
    static ScalarField polynomial(const Box& domain, std::vector<Monomial> terms);
    static ScalarField affine(const Box& domain, std::span<const double> slope, double offset);
    // offset + sign * sqrt(radius^2 - |x - center|^2); the domain must stay inside the ball.
    static ScalarField sphere_cap(const Box& domain, std::span<const double> center, double radius, double offset,
                                  double sign);
    // scale * <Sigma(x), z> + shift on the parameter cube (or the given box).
    static ScalarField induced(std::shared_ptr<const ManifoldChart> chart, std::span<const double> z, double scale = 1.0,
                               double shift = 0.0, std::optional<Box> domain = std::nullopt);
    // Tensor natural cubic spline through values on a uniform node lattice
    // (nodes[a] per axis, first axis fastest).
    static ScalarField grid_sampled(const Box& domain, std::array<int, kMaxParam> nodes, std::vector<double> values);
    static ScalarField combination(double a, const ScalarField& f, double b, const ScalarField& g);
    static ScalarField custom(const Box& domain, std::function<Jet(std::span<const double>)> jet_fn,
                              std::string label = "custom");

    // Data used by serialization; empty when not applicable to the kind.
    const std::vector<Monomial>& monomials() const;
    double constant_value() const;
    const std::vector<double>& induced_z() const;
    double induced_scale() const;
    double induced_shift() const;
    std::shared_ptr<const ManifoldChart> induced_chart() const;
    const std::vector<double>& cap_center() const;
    double cap_radius() const;
    double cap_offset() const;
    double cap_sign() const;
    const std::vector<double>& grid_values() const;
    std::array<int, kMaxParam> grid_nodes() const;

private:
    explicit ScalarField(std::shared_ptr<const detail::FieldImpl> impl) : impl_(std::move(impl)) {}
    const detail::FieldImpl& impl() const;
    std::shared_ptr<const detail::FieldImpl> impl_;
};

inline ScalarField operator-(const ScalarField& f, const ScalarField& g) {
    return ScalarField::combination(1.0, f, -1.0, g);
}

struct InducedOrigin {
    std::shared_ptr<const ManifoldChart> chart;
    std::vector<std::vector<double>> Z;
    double renorm_L = 1.0;  // members are (f_z + L) / (2L); 0 means no renormalization
    bool renormalized = true;
};

struct FunctionFamily {
    Box domain;
    std::vector<ScalarField> members;
    std::optional<InducedOrigin> origin;

    std::size_t size() const { return members.size(); }
};

FunctionFamily induced_projection_family(std::shared_ptr<const ManifoldChart> chart,
                                         const std::vector<std::vector<double>>& Z, bool renormalize = true);

FunctionFamily make_family(std::vector<ScalarField> members);

// Unit directions xi (up to sign) for the second-derivative sup/inf:
// 64 angles on a half circle for k=2, 256 Fibonacci points on a hemisphere
// for k=3. coef holds packed quadratic-form coefficients per direction.
struct SphereNet {
    int dim = 0;
    std::size_t count = 0;
    std::vector<double> dirs;
    std::vector<double> coef;
};
const SphereNet& sphere_net(int k);

// Field jets on a uniform (N per axis) node lattice over a box, SoA layout.
struct SampledField {
    int dim = 0;
    int nodes = 0;
    Box box;
    std::vector<double> value;
    std::array<std::vector<double>, kMaxParam> grad;
    std::array<std::vector<double>, kMaxHess> hess;

    simd::FieldSamples view() const;
    double step(int a) const { return box.side(a) / (nodes - 1); }
    std::vector<double> node(std::size_t id) const;
};

SampledField sample_field(const ScalarField& f, const Box& box, int nodes_per_axis);

inline constexpr int kDefaultGridNodes = 65;

struct NormEstimate {
    double total = 0.0;
    double sup_value = 0.0;
    double sup_grad = 0.0;
    double sup_dir2 = 0.0;
    double uncertainty = 0.0;  // grid step * sup |d^2 h|
};

struct ExtremumEstimate {
    double value = 0.0;
    std::vector<double> point;
    double uncertainty = 0.0;
};

// ||f - g||_{C^2} = sup|h| + sup|grad h| + sup_xi |xi^T H xi| over the domain grid,
// each sup refined once (step halved twice) around its grid argmax.
NormEstimate c2_distance(const ScalarField& f, const ScalarField& g, int nodes_per_axis = kDefaultGridNodes);
NormEstimate c2_norm(const ScalarField& h, int nodes_per_axis = kDefaultGridNodes);

// Same quantities from precomputed samples (pair sweeps).
NormEstimate c2_distance_sampled(const ScalarField& f, const ScalarField& g, const SampledField& sf,
                                 const SampledField* sg, simd::PairMetrics* metrics_out = nullptr);

// inf_x (|h| + |grad h|) over U, grid then local descent.
ExtremumEstimate tangency_parameter(const ScalarField& f, const ScalarField& g, const Box& U,
                                    int nodes_per_axis = kDefaultGridNodes);
// inf_x (|h| + |grad h| + min_xi |xi^T H xi|) over the domain.
ExtremumEstimate cinematic_infimum(const ScalarField& f, const ScalarField& g,
                                   int nodes_per_axis = kDefaultGridNodes);

struct AlphaSample {
    double eta = 0.0;
    double alpha = 0.0;
};

struct CinematicReport {
    double K = 1.0;
    double diameter = 0.0;
    double D = 1.0;
    std::vector<AlphaSample> alpha;  // starts with (0, 0)
    std::size_t pairs_tested = 0;
    double worst_ratio = 0.0;
    std::size_t witness_i = 0;
    std::size_t witness_j = 0;
    bool clause_diameter = true;
    bool clause_doubling = true;
    bool clause_infimum = true;
    bool clause_modulus = true;
    bool passed = true;
    double max_uncertainty = 0.0;
    int grid_nodes = kDefaultGridNodes;
    std::string note;

    // alpha at eta by monotone interpolation of the samples
    double alpha_at(double eta) const;
};

struct CinematicOptions {
    std::size_t pair_budget = 400;
    int grid_nodes = kDefaultGridNodes;
    std::uint64_t seed = 0;
};

CinematicReport estimate_cinematic_constant(const FunctionFamily& family, const CinematicOptions& opts = {});

enum class TangencyCase { value_separated, transversal, tangent, mixed, none };

const char* tangency_case_name(TangencyCase c);

inline constexpr unsigned kCaseValue = 1u;      // |h| clears the threshold on 2U
inline constexpr unsigned kCaseGradient = 2u;   // |grad h| clears it
inline constexpr unsigned kCaseCurvature = 4u;  // min_xi |xi^T H xi| clears it

struct SubcubeLabel {
    Box cube;
    unsigned cases = 0;
    TangencyCase primary = TangencyCase::none;
    int convexity = 0;  // +1 convex, -1 concave, when the curvature case holds
    int critical_points = 0;
    std::vector<double> critical_point;
};

struct TangencyClassification {
    double tangency = 0.0;  // Delta(f,g) over the domain
    double c2 = 0.0;
    double threshold = 0.0;  // ||h|| / (3K)
    double cube_side = 0.0;
    bool window_clamped = false;
    TangencyCase overall = TangencyCase::none;
    std::vector<SubcubeLabel> cubes;
};

struct ClassifyOptions {
    // alpha(K^{-1}/6); subcube diameters land in (alpha/4, alpha/2]. Negative: use 1/(6K^2).
    double alpha = -1.0;
    int finest_level = 6;  // subcubes no smaller than 2^-finest_level
    int nodes_per_cube = 9;
};

TangencyClassification classify_pair(const ScalarField& f, const ScalarField& g, double delta, double K,
                                     const ClassifyOptions& opts = {});

// Newton iteration on grad h from x0 (clipped to the box); returns the point
// and whether |grad h| fell below tol.
bool find_critical_point(const ScalarField& h, const Box& box, std::span<const double> x0, double tol,
                         std::vector<double>& out);

}  // namespace cinelab
