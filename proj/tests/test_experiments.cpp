#include <doctest.h>

#include <cmath>
#include <vector>

#include "cinelab/experiments.hpp"

using namespace cinelab;

namespace {

std::vector<int> range(int a, int b) {
    std::vector<int> v;
    for (int m = a; m <= b; ++m) v.push_back(m);
    return v;
}

ExperimentSpec small_spec(PointSetKind kind) {
    ExperimentSpec s;
    s.chart.kind = ChartKind::sphere_slice;
    s.chart.c = 0.5;
    s.z.kind = kind;
    s.m_min = 6;
    s.m_max = 12;
    s.directions = 12;
    return s;
}

}  // namespace

TEST_CASE("box dimension of the full interval") {
    DimensionEstimate e = box_dimension(uniform_set(14, 1));
    CHECK(e.slope == doctest::Approx(1.0).epsilon(0.01));
    CHECK(e.band_lo <= e.slope);
    CHECK(e.band_hi >= e.slope);
}

TEST_CASE("box dimension of self-similar Cantor sets") {
    DyadicSet c = cantor_set(0.25, 7, 1);
    DimensionEstimate e = box_dimension(c, range(6, 14));
    CHECK(e.slope == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::fabs(e.slope - 0.5) <= 0.05);

    DyadicSet p = product_set({cantor_set(0.25, 6, 1), cantor_set(0.25, 6, 1)});
    DimensionEstimate ep = box_dimension(p);
    CHECK(std::fabs(ep.slope - 1.0) <= 0.07);

    for (int pw : {1, 2, 3}) {
        DyadicSet s = cantor_set(std::ldexp(1.0, -pw), 5, 1);
        CHECK(std::fabs(box_dimension(s).slope - 1.0 / pw) <= 0.05);
    }
}

TEST_CASE("box dimension needs four scales") {
    try {
        box_dimension(uniform_set(8, 1), {1, 2, 3});
        FAIL("three scales accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_scales);
    }
}

TEST_CASE("fit reports the residual of a perfect line as zero") {
    DimensionEstimate e = fit_dimension({1, 2, 3, 4, 5}, {2, 4, 8, 16, 32}, 1);
    CHECK(e.slope == doctest::Approx(1.0));
    CHECK(e.residual == doctest::Approx(0.0).scale(1.0));
    CHECK(e.intercept == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("point set generators") {
    PointSetSpec c;
    auto pts = generate_points(c, 12);
    CHECK(pts.size() == 4096u * 4u);
    for (std::size_t i = 0; i < pts.size(); i += 4) {
        CHECK(pts[i + 2] == 0.0);
        CHECK(pts[i + 3] == 0.0);
        CHECK(pts[i] >= 0.0);
        CHECK(pts[i] <= 0.5);
    }
    PointSetSpec far;
    far.kind = PointSetKind::points;
    far.points = {{1.0, 1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(generate_points(far, 8), Error);
}

TEST_CASE("projections of a single point have slope zero") {
    ProjectionReport r = project_dim_experiment(small_spec(PointSetKind::point));
    REQUIRE_FALSE(r.refused);
    CHECK(r.fit_scales == range(7, 11));
    for (const auto& d : r.directions) CHECK(d.estimate.slope == 0.0);
}

TEST_CASE("projections of a segment have slope near one and never above it") {
    ProjectionReport r = project_dim_experiment(small_spec(PointSetKind::segment));
    for (const auto& d : r.directions) {
        CHECK(d.estimate.slope <= 1.02);
        // Directions nearly orthogonal to e_1 shrink the range but the normalized slope stays 1.
        if (std::fabs(d.z[0]) > 0.05) CHECK(d.estimate.slope >= 0.95);
    }
}

TEST_CASE("projection experiment is deterministic and seeded") {
    ExperimentSpec s = small_spec(PointSetKind::cantor_product);
    ProjectionReport a = project_dim_experiment(s);
    ProjectionReport b = project_dim_experiment(s);
    REQUIRE(a.directions.size() == b.directions.size());
    for (std::size_t i = 0; i < a.directions.size(); ++i) CHECK(a.directions[i].estimate.slope == b.directions[i].estimate.slope);
    s.seed = 1;
    ProjectionReport c = project_dim_experiment(s);
    CHECK(c.directions[0].x != a.directions[0].x);
}

TEST_CASE("indefinite quadratic charts are rejected before projecting") {
    ExperimentSpec s = small_spec(PointSetKind::point);
    s.chart.kind = ChartKind::quadratic_graph;
    s.chart.L = Eigen::MatrixXd::Identity(2, 2);
    s.chart.A = Eigen::MatrixXd(2, 2);
    s.chart.A << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(project_dim_experiment(s), Error);
}

TEST_CASE("exceptional sweep") {
    ExperimentSpec s = small_spec(PointSetKind::cantor_product);
    auto rows = exceptional_sweep(s, {0.1, 1.0});
    REQUIRE(rows.size() == 2u);
    CHECK(rows[0].fraction <= 0.1);
    CHECK(rows[1].fraction >= 0.9);
    CHECK(rows[0].reference == doctest::Approx(1.1));
    CHECK(rows[1].reference == doctest::Approx(2.0));
}
