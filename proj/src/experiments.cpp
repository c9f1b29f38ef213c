#include "cinelab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "cinelab/simd.hpp"

namespace cinelab {

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

LineFit least_squares(const std::vector<int>& xs, const std::vector<double>& ys, std::size_t from, std::size_t to) {
    const double n = static_cast<double>(to - from);
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double r = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        double e = ys[i] - (f.intercept + f.slope * xs[i]);
        r += e * e;
    }
    f.rms = std::sqrt(r / n);
    return f;
}

}  // namespace

DimensionEstimate fit_dimension(const std::vector<int>& scales, const std::vector<std::size_t>& counts, int max_slope) {
    if (scales.size() != counts.size()) fail(ErrorCode::invalid_parameter, "scales and counts differ in length");
    if (scales.size() < 4) fail(ErrorCode::insufficient_scales, "box dimension needs at least 4 scales");
    std::vector<double> ys(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) fail(ErrorCode::invalid_parameter, "empty set at some scale");
        ys[i] = std::log2(static_cast<double>(counts[i]));
    }
    DimensionEstimate est;
    est.scales = scales;
    est.counts = counts;
    const std::size_t n = scales.size();
    LineFit full = least_squares(scales, ys, 0, n);
    LineFit first = least_squares(scales, ys, 0, n / 2 + n % 2);
    LineFit last = least_squares(scales, ys, n / 2, n);
    auto clampd = [&](double v) { return std::clamp(v, 0.0, static_cast<double>(max_slope)); };
    est.slope = clampd(full.slope);
    est.intercept = full.intercept;
    est.residual = full.rms;
    est.band_lo = clampd(std::min({first.slope, last.slope, full.slope}));
    est.band_hi = clampd(std::max({first.slope, last.slope, full.slope}));
    return est;
}

DimensionEstimate box_dimension(const DyadicSet& set, const std::vector<int>& scales) {
    if (scales.size() < 4) fail(ErrorCode::insufficient_scales, "box dimension needs at least 4 scales");
    std::vector<std::size_t> counts;
    counts.reserve(scales.size());
    for (int m : scales) counts.push_back(covering_number(set, m));
    return fit_dimension(scales, counts, set.dim());
}

DimensionEstimate box_dimension(const DyadicSet& set) {
    std::vector<int> scales;
    for (int m = 0; m <= set.scale(); ++m) scales.push_back(m);
    return box_dimension(set, scales);
}

const char* point_set_kind_name(PointSetKind kind) {
    switch (kind) {
        case PointSetKind::cantor_product: return "cantor_product";
        case PointSetKind::segment: return "segment";
        case PointSetKind::points: return "points";
        case PointSetKind::point: return "point";
    }
    return "unknown";
}

std::vector<double> generate_points(const PointSetSpec& spec, int m_max) {
    const int d = spec.dim;
    if (d < 1 || d > kMaxAmbient) fail(ErrorCode::invalid_parameter, "point dimension must lie in [1, 5]");
    std::vector<double> rows;
    switch (spec.kind) {
        case PointSetKind::cantor_product: {
            if (spec.axes < 1 || spec.axes > d) fail(ErrorCode::invalid_parameter, "Cantor axes must lie in [1, dim]");
            if (spec.branches < 2 || !(spec.ratio > 0.0) || spec.ratio * spec.branches > 1.0)
                fail(ErrorCode::invalid_parameter, "Cantor pieces must fit disjointly");
            if (spec.depth < 1) fail(ErrorCode::invalid_parameter, "Cantor depth must be positive");
            // One coordinate: branch b at level l starts at b * gap * ratio^l.
            const double gap = spec.branches > 1 ? (1.0 - spec.ratio) / (spec.branches - 1) : 0.0;
            std::size_t per_axis = 1;
            for (int l = 0; l < spec.depth; ++l) per_axis *= static_cast<std::size_t>(spec.branches);
            std::size_t total = 1;
            for (int a = 0; a < spec.axes; ++a) total *= per_axis;
            if (total > (std::size_t{1} << 24)) fail(ErrorCode::too_fine, "Cantor product has too many points");
            std::vector<double> coord(per_axis);
            for (std::size_t i = 0; i < per_axis; ++i) {
                double x = 0.0, w = 1.0;
                std::size_t t = i;
                std::vector<int> digits(spec.depth);
                for (int l = spec.depth - 1; l >= 0; --l) {
                    digits[l] = static_cast<int>(t % spec.branches);
                    t /= spec.branches;
                }
                for (int l = 0; l < spec.depth; ++l) {
                    x += digits[l] * gap * w;
                    w *= spec.ratio;
                }
                coord[i] = spec.scale * (x + 0.5 * w);
            }
            rows.assign(total * d, 0.0);
            for (std::size_t p = 0; p < total; ++p) {
                std::size_t t = p;
                for (int a = 0; a < spec.axes; ++a) {
                    rows[p * d + a] = coord[t % per_axis];
                    t /= per_axis;
                }
            }
            break;
        }
        case PointSetKind::segment: {
            std::size_t count = spec.count ? spec.count : (std::size_t{4} << m_max);
            if (count < 2) fail(ErrorCode::invalid_parameter, "segment needs at least 2 points");
            rows.assign(count * d, 0.0);
            for (std::size_t p = 0; p < count; ++p)
                rows[p * d] = spec.scale * static_cast<double>(p) / static_cast<double>(count - 1);
            break;
        }
        case PointSetKind::points:
        case PointSetKind::point: {
            if (spec.points.empty()) {
                if (spec.kind == PointSetKind::points) fail(ErrorCode::invalid_parameter, "no points given");
                rows.assign(d, 0.0);
                break;
            }
            if (spec.kind == PointSetKind::point && spec.points.size() != 1)
                fail(ErrorCode::invalid_parameter, "a single point is expected");
            for (const auto& p : spec.points) {
                if (static_cast<int>(p.size()) != d) fail(ErrorCode::invalid_parameter, "point has the wrong dimension");
                rows.insert(rows.end(), p.begin(), p.end());
            }
            break;
        }
    }
    for (std::size_t p = 0; p * d < rows.size(); ++p) {
        double r = 0.0;
        for (int a = 0; a < d; ++a) r += rows[p * d + a] * rows[p * d + a];
        if (r > 1.0 + 1e-12) fail(ErrorCode::invalid_parameter, "Z must lie in the closed unit ball");
    }
    return rows;
}

double ProjectionReport::fraction_in(double lo, double hi) const {
    if (directions.empty()) return 0.0;
    std::size_t c = 0;
    for (const auto& d : directions)
        if (d.estimate.slope >= lo && d.estimate.slope <= hi) ++c;
    return static_cast<double>(c) / static_cast<double>(directions.size());
}

ProjectionReport project_dim_experiment(const ExperimentSpec& spec) {
    if (spec.m_min < 0 || spec.m_max > 24 || spec.m_max - spec.m_min + 1 < 6)
        fail(ErrorCode::insufficient_scales, "need m_max - m_min >= 5 so the trimmed fit keeps 4 scales");
    if (spec.directions == 0) fail(ErrorCode::invalid_parameter, "at least one direction is required");
    ManifoldChart chart = ManifoldChart::builtin(spec.chart);
    if (spec.z.dim != chart.ambient_dim()) fail(ErrorCode::domain_mismatch, "Z must live in the chart's ambient space");

    ProjectionReport rep;
    NondegeneracyOptions no;
    no.seed = spec.seed;
    rep.curvature = verify_nondegenerate(chart, no);
    if (!rep.curvature.passed) {
        rep.refused = true;
        return rep;
    }
    const std::vector<double> Z = generate_points(spec.z, spec.m_max);
    const std::size_t d = static_cast<std::size_t>(chart.ambient_dim());
    const std::size_t N = Z.size() / d;
    rep.point_count = N;
    for (int m = spec.m_min + 1; m < spec.m_max; ++m) rep.fit_scales.push_back(m);

    const int k = chart.param_dim();
    Rng rng(mix_seed(spec.seed, 7));
    rep.directions.resize(spec.directions);
    for (auto& dr : rep.directions) {
        dr.x.resize(k);
        for (auto& v : dr.x) v = rng.uniform();
    }
    const std::uint32_t top = static_cast<std::uint32_t>((std::uint64_t{1} << spec.m_max) - 1);
    parallel_for(rep.directions.size(), [&](std::size_t q) {
        auto& dr = rep.directions[q];
        dr.z.resize(d);
        chart.point(dr.x, dr.z.data());
        std::vector<double> proj(N);
        simd::dot_rows(Z.data(), N, d, dr.z.data(), proj.data());
        auto [mn, mx] = std::minmax_element(proj.begin(), proj.end());
        const double lo = *mn;
        dr.range = *mx - *mn;
        // Normalized to [0,1]; a degenerate range collapses to one cell.
        const double scale = dr.range > 0.0 ? std::ldexp(1.0, spec.m_max) / dr.range : 0.0;
        std::vector<std::uint32_t> idx(N);
        simd::quantize(proj.data(), N, lo, scale, top, idx.data());
        std::vector<Cell> cells(N);
        for (std::size_t i = 0; i < N; ++i) cells[i] = Cell{idx[i], 0, 0, 0};
        DyadicSet s = DyadicSet::from_cells(1, spec.m_max, cells);
        dr.estimate = box_dimension(s, rep.fit_scales);
    });
    return rep;
}

std::vector<SweepRow> exceptional_sweep(const ProjectionReport& report, int n, const std::vector<double>& s_grid) {
    std::vector<SweepRow> rows;
    const int k = report.directions.empty() ? 0 : static_cast<int>(report.directions.front().x.size());
    for (double s : s_grid) {
        SweepRow r;
        r.s = s;
        r.reference = n - 2.0 + s;
        std::vector<double> pts;
        for (const auto& d : report.directions) {
            if (d.estimate.slope < s) {
                ++r.exceptional;
                pts.insert(pts.end(), d.x.begin(), d.x.end());
            }
        }
        r.fraction = report.directions.empty()
                         ? 0.0
                         : static_cast<double>(r.exceptional) / static_cast<double>(report.directions.size());
        r.param_dimension = std::numeric_limits<double>::quiet_NaN();
        if (r.exceptional >= 2 && k > 0) {
            // Sample points only resolve a handful of scales; this is illustration, not a certificate.
            DyadicSet set = DyadicSet::from_points(k, 5, pts);
            r.param_dimension = box_dimension(set).slope;
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<SweepRow> exceptional_sweep(const ExperimentSpec& spec, const std::vector<double>& s_grid) {
    ProjectionReport rep = project_dim_experiment(spec);
    if (rep.refused) fail(ErrorCode::degenerate_chart, "chart failed the curvature gate: " + rep.curvature.note);
    return exceptional_sweep(rep, ManifoldChart::builtin(spec.chart).n(), s_grid);
}

}  // namespace cinelab
