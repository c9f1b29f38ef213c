#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cinelab/dyadic.hpp"
#include "cinelab/geometry.hpp"

namespace cinelab {

struct DimensionEstimate {
    std::vector<int> scales;  // m, with delta = 2^-m
    std::vector<std::size_t> counts;
    double slope = 0.0;  // least squares of log2(count) against m
    double intercept = 0.0;
    double residual = 0.0;  // rms of the fit
    double band_lo = 0.0;   // min of the slopes over the first half, last half and full range
    double band_hi = 0.0;
};

// Fit over explicit counts. Needs at least 4 scales.
DimensionEstimate fit_dimension(const std::vector<int>& scales, const std::vector<std::size_t>& counts, int max_slope);

// Covering numbers of set at each listed scale (all <= set.scale()).
DimensionEstimate box_dimension(const DyadicSet& set, const std::vector<int>& scales);
// Every scale from 0 through set.scale().
DimensionEstimate box_dimension(const DyadicSet& set);

enum class PointSetKind { cantor_product, segment, points, point };

const char* point_set_kind_name(PointSetKind kind);

// A finite set Z in R^d. cantor_product: the first `axes` coordinates run
// over a `branches`-branch Cantor set with contraction `ratio` to `depth`
// levels, scaled by `scale`; the rest are zero. segment: `count` evenly
// spaced points on [0, scale] e_1.
struct PointSetSpec {
    PointSetKind kind = PointSetKind::cantor_product;
    int dim = 4;
    double ratio = 1.0 / 16.0;
    int branches = 2;
    int depth = 6;
    int axes = 2;
    double scale = 0.5;
    std::size_t count = 0;  // segment; 0 means 4 * 2^{m_max}
    std::vector<std::vector<double>> points;
};

// Rows of length spec.dim.
std::vector<double> generate_points(const PointSetSpec& spec, int m_max);

struct ExperimentSpec {
    ChartSpec chart;
    PointSetSpec z;
    int m_min = 6;
    int m_max = 12;
    std::size_t directions = 50;
    std::uint64_t seed = 0;
};

struct DirectionResult {
    std::vector<double> x;  // parameter point
    std::vector<double> z;  // Sigma(x)
    double range = 0.0;     // max - min of the raw projections
    DimensionEstimate estimate;
};

struct ProjectionReport {
    CurvatureReport curvature;
    bool refused = false;  // chart failed the curvature gate
    std::size_t point_count = 0;
    std::vector<int> fit_scales;
    std::vector<DirectionResult> directions;

    double fraction_in(double lo, double hi) const;
};

// Box-counting slopes of the normalized projections {<p, Sigma(x)>} for
// directions x uniform in the parameter cube; the fit drops the coarsest and
// finest scale of [m_min, m_max].
ProjectionReport project_dim_experiment(const ExperimentSpec& spec);

struct SweepRow {
    double s = 0.0;
    std::size_t exceptional = 0;
    double fraction = 0.0;
    double param_dimension = 0.0;  // box-dimension estimate of the exceptional parameters; NaN when too few
    double reference = 0.0;        // (n-2)+s
};

std::vector<SweepRow> exceptional_sweep(const ProjectionReport& report, int n, const std::vector<double>& s_grid);
std::vector<SweepRow> exceptional_sweep(const ExperimentSpec& spec, const std::vector<double>& s_grid);

}  // namespace cinelab
