#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cinelab/dyadic.hpp"
#include "cinelab/fields.hpp"

namespace cinelab {

// Vertical delta-neighborhood f^delta(D) = {(x,y) : x in D, |y - f(x)| <= delta}.
struct Slab {
    ScalarField f;
    double delta = 0.0;
    Box region;

    bool contains(std::span<const double> x, double y) const;
    double measure() const;  // 2 delta |D|
};

struct IntersectionOptions {
    double resolution = 0.0;           // cell side; 0 means delta/8
    std::optional<Box> region;         // D; defaults to the shared domain
    double clip_lo = -std::numeric_limits<double>::infinity();  // vertical window
    double clip_hi = std::numeric_limits<double>::infinity();
    double K = 0.0;                    // > 0: classify the pair with this cinematic constant
    bool compute_projection = true;
    double small_t_factor = 2.0;       // t <= factor * delta is the small-t regime
};

struct IntersectionReport {
    double delta = 0.0;
    double resolution = 0.0;
    Box region;
    double measure = 0.0;
    double band = 0.0;  // +- boundary-cell volume
    std::size_t cells = 0;
    std::size_t columns_nonempty = 0;
    std::size_t columns_visited = 0;
    double slab_measure = 0.0;  // 2 delta |D|, the measure of either slab
    // delta-cells of {x : |f - g| <= 2 delta}; only when delta is dyadic and D lies in the unit cube
    DyadicSet projection;
    bool projection_valid = false;
    double t = 0.0;
    double tangency = 0.0;
    double lambda_bar = std::numeric_limits<double>::quiet_NaN();
    bool classified = false;
    TangencyCase tangency_class = TangencyCase::none;
    bool small_t = false;
    double ratio = 0.0;  // measure * t / delta^2
};

// Center-rule quadrature of L^n(f^delta cap g^delta) over D x R.
IntersectionReport intersection_measure(const ScalarField& f, const ScalarField& g, double delta,
                                        const IntersectionOptions& opts = {});

struct BoundRow {
    std::size_t pair_id = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    double delta = 0.0;
    double t = 0.0;
    double tangency = 0.0;
    std::string cls;
    double measure = 0.0;
    double ratio = 0.0;
    bool skipped = false;
    std::string note;
};

struct BoundTable {
    std::vector<BoundRow> rows;
    std::vector<double> deltas;
    std::vector<double> max_ratio;  // per delta
    double trend = 0.0;             // max_ratio at the finest delta / at the coarsest
    std::size_t skipped = 0;
};

// pairs empty: all unordered pairs.
BoundTable verify_intersection_bound(const FunctionFamily& family, std::vector<std::pair<std::size_t, std::size_t>> pairs,
                                     const std::vector<double>& deltas, const IntersectionOptions& opts = {});

void write_bound_csv(const BoundTable& table, std::ostream& os);

struct FlowOptions {
    double step = 0.0;      // 0 means delta/4
    double grad_tol = 0.0;  // 0 means 1e-9 * max(1, sup|grad h|)
    int field_grid = 33;    // nodes per axis for the sup of |grad(grad h/|grad h|)|
};

struct FlowCurve {
    std::vector<double> seed;
    std::vector<double> points;  // samples at arclength i*step, then the exit point
    std::size_t uniform_samples = 0;  // leading points on the i*step grid
    double arclength = 0.0;
    bool monotone = true;
    bool truncated = false;
};

struct FlowFoliation {
    int dim = 0;
    Box U;
    double delta = 0.0;
    double step = 0.0;
    std::vector<FlowCurve> curves;
    std::size_t cells_total = 0;
    std::size_t cells_covered = 0;
    double coverage = 0.0;
    double lipschitz = 1.0;                // max seed-divergence ratio over neighboring seeds
    double unit_field_gradient_sup = 0.0;  // sup |grad(grad h / |grad h|)|
    double max_arclength = 0.0;
    double gronwall_bound = 1.0;           // exp(sup * max arclength)
    bool monotone = true;
};

// Integrates unit-speed gradient curves from the inflow boundary of U.
FlowFoliation gradient_flow_foliation(const ScalarField& h, const Box& U, double delta, const FlowOptions& opts = {});

enum class SublevelMode { transversal, tangent };

struct SublevelOptions {
    SublevelMode mode = SublevelMode::transversal;
    double K = 1.0;
    double c2 = -1.0;  // negative: 1/(3K)
    double c1 = -1.0;  // negative: c2/4
    double t = -1.0;   // negative: the C^2 norm of h on [0,a]
    double derivative_tol = -1.0;  // |h'(0)| allowance in tangent mode; negative: 1e-8 max(1,t)
    int scan_steps = 4096;
};

struct SublevelResult {
    std::vector<std::pair<double, double>> intervals;  // E_{2 delta}
    double measure = 0.0;
    double scan_step = 0.0;
    double t = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double lambda1 = 0.0;  // inf |h| + |h'|
    double lambda2 = 0.0;  // |h(0)|
    bool precondition_ok = true;
    std::vector<std::string> failed;  // violated inequalities, human readable
    double ratio = 0.0;               // transversal: |E| t / delta; tangent: |E| sqrt((lambda2+delta) t) / delta
    double endpoint_bound = 0.0;      // tangent: c2^-1 sqrt((lambda2+delta)/t)
    double max_endpoint = 0.0;        // tangent: sup of E_delta = {|h| <= delta}
    bool contained = true;
    bool single_interval = true;
};

// E_{2 delta} = {s in [0,a] : |h(s)| <= 2 delta} for a one-variable field on [0,a].
SublevelResult sublevel_interval(const ScalarField& h, double delta, const SublevelOptions& opts = {});

struct PolarRay {
    std::vector<double> dir;
    double reach = 0.0;  // exit distance from x_M along dir
    std::vector<std::pair<double, double>> intervals;
};

struct PolarOptions {
    int directions = 0;       // 0: 256 on the circle, 1024 on the sphere
    double resolution = 0.0;  // direct-count cell side; 0 means delta/8
    double K = 1.0;
};

struct PolarReport {
    bool interior = true;
    double boundary_distance = 0.0;
    double grad_norm = 0.0;
    bool grad_ok = true;  // |grad h(x_M)| <= 10 delta
    bool convex = true;   // Hessian definite of one sign on U
    int sign = 1;         // +1 convex, -1 concave
    double lambda2 = 0.0;
    std::vector<PolarRay> rays;
    double polar_measure = 0.0;
    double direct_measure = 0.0;
    double discrepancy = 0.0;  // |polar - direct| / direct
    bool single_intervals = true;
};

PolarReport polar_slices(const ScalarField& h, std::span<const double> x_M, double delta, const Box& U,
                         const PolarOptions& opts = {});

struct ShapeReport {
    std::size_t count = 0;
    std::size_t set_size = 0;
    double t = 0.0;
    double bound = 0.0;  // delta^{-(n-2)} / t^s
    double ratio = 0.0;
};

// Cells of E (scale delta, dimension n-1) meeting {x : |f - g| <= 2 delta}.
ShapeReport shape_count(const DyadicSet& E, const ScalarField& f, const ScalarField& g, double s);

}  // namespace cinelab
