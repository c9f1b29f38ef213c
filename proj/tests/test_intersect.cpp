#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "cinelab/intersect.hpp"

using namespace cinelab;

namespace {

ScalarField poly(int k, std::vector<Monomial> t) { return ScalarField::polynomial(Box::unit(k), std::move(t)); }

ScalarField poly1(double a, std::vector<Monomial> t) {
    std::vector<double> lo{0.0}, hi{a};
    return ScalarField::polynomial(Box::make(lo, hi), std::move(t));
}

// Column-exact oracle: the vertical overlap of two slabs is an interval of
// length max(0, 2 delta - |f - g|); only the horizontal direction is sampled.
double column_oracle(const ScalarField& f, const ScalarField& g, double delta, int per_axis) {
    const double h = 1.0 / per_axis;
    double total = 0.0;
    for (int i = 0; i < per_axis; ++i)
        for (int j = 0; j < per_axis; ++j) {
            std::vector<double> x{(i + 0.5) * h, (j + 0.5) * h};
            total += std::max(0.0, 2 * delta - std::fabs(f.value(x) - g.value(x)));
        }
    return total * h * h;
}

}  // namespace

TEST_CASE("overlapping constant slabs") {
    const double delta = 1.0 / 64;
    auto f = ScalarField::constant(Box::unit(2), 0.5);
    auto g = ScalarField::constant(Box::unit(2), 0.5 + delta / 2);
    IntersectionReport r = intersection_measure(f, g, delta);
    CHECK(r.measure == doctest::Approx(1.5 * delta).epsilon(1e-12));
    CHECK(r.ratio <= 1.0);
    CHECK(r.small_t);
    CHECK(r.projection_valid);
    CHECK(r.projection.size() == 64u * 64u);
    CHECK(r.slab_measure == doctest::Approx(2 * delta));
}

TEST_CASE("disjoint constant slabs") {
    const double delta = 1.0 / 64;
    auto f = ScalarField::constant(Box::unit(2), 0.2);
    auto g = ScalarField::constant(Box::unit(2), 0.2 + 3 * delta);
    IntersectionReport r = intersection_measure(f, g, delta);
    CHECK(r.measure == 0.0);
    CHECK(r.projection.empty());
}

TEST_CASE("transversal affine pair matches the closed form") {
    const double delta = 1.0 / 64, a = 0.5;
    auto f = poly(2, {Monomial{a, {1, 0, 0}}});
    auto g = ScalarField::constant(Box::unit(2), 0.0);
    IntersectionReport r = intersection_measure(f, g, delta);
    const double exact = 2 * delta * delta / a;  // integral of (2 delta - a x1)_+
    CHECK(std::fabs(r.measure - exact) <= r.band + 1e-15);
    CHECK(r.measure == doctest::Approx(exact).epsilon(0.02));
    CHECK(r.t == doctest::Approx(2 * a).epsilon(1e-9));
}

TEST_CASE("near-tangent sphere caps agree with the column oracle") {
    const double delta = 1.0 / 32;
    std::vector<double> c{0.5, 0.5};
    auto f = ScalarField::sphere_cap(Box::unit(2), c, 2.0, 0.0, 1.0);
    auto g = ScalarField::sphere_cap(Box::unit(2), c, 1.2, 0.8 + delta, 1.0);
    IntersectionReport r = intersection_measure(f, g, delta);
    const double oracle = column_oracle(f, g, delta, 1024);
    CHECK(r.measure == doctest::Approx(oracle).epsilon(0.02));
    IntersectionOptions fine;
    fine.resolution = delta / 32;
    IntersectionReport rf = intersection_measure(f, g, delta, fine);
    CHECK(rf.measure == doctest::Approx(oracle).epsilon(0.01));
    CHECK(std::fabs(r.measure - rf.measure) <= r.band + rf.band);
    CHECK(r.ratio > 0.0);
    CHECK(std::isfinite(r.ratio));
}

TEST_CASE("resolution coarser than delta/8 is refused") {
    auto f = ScalarField::constant(Box::unit(2), 0.0);
    IntersectionOptions o;
    o.resolution = 1.0 / 64;
    CHECK_THROWS_AS(intersection_measure(f, f, 1.0 / 64, o), Error);
}

TEST_CASE("bound table over a family") {
    std::vector<ScalarField> m;
    for (int i = 0; i < 3; ++i) m.push_back(poly(2, {Monomial{0.3 * (i + 1), {1, 0, 0}}, Monomial{0.1 * i, {0, 0, 0}}}));
    FunctionFamily fam = make_family(std::move(m));
    BoundTable t = verify_intersection_bound(fam, {}, {1.0 / 16, 1.0 / 32});
    CHECK(t.rows.size() == 6u);
    CHECK(t.max_ratio.size() == 2u);
    std::ostringstream os;
    write_bound_csv(t, os);
    CHECK(os.str().rfind("pair_id,delta,t,Delta,class,measure,ratio\n", 0) == 0);
}

TEST_CASE("gradient flow of a linear field") {
    auto h = poly(2, {Monomial{1.0, {1, 0, 0}}});
    std::vector<double> lo{0.25, 0.25}, hi{0.75, 0.75};
    FlowFoliation fl = gradient_flow_foliation(h, Box::make(lo, hi), 1.0 / 32);
    CHECK(fl.coverage == doctest::Approx(1.0));
    CHECK(fl.lipschitz == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fl.monotone);
    for (const auto& c : fl.curves) {
        REQUIRE(c.points.size() >= 4);
        CHECK(c.points[1] == doctest::Approx(c.seed[1]).epsilon(1e-12));
        CHECK(c.points.back() == doctest::Approx(c.seed[1]).epsilon(1e-12));
    }
}

TEST_CASE("gradient flow of a radial field is monotone") {
    auto h = poly(2, {Monomial{0.5, {2, 0, 0}}, Monomial{0.5, {0, 2, 0}}});
    std::vector<double> lo{0.3, 0.3}, hi{0.7, 0.7};
    FlowFoliation fl = gradient_flow_foliation(h, Box::make(lo, hi), 1.0 / 32);
    CHECK(fl.monotone);
    CHECK(fl.coverage >= 0.99);
    CHECK(fl.lipschitz <= fl.gronwall_bound * (1 + 1e-9));
}

TEST_CASE("gradient flow refuses a critical point") {
    auto h = poly(2, {Monomial{1.0, {2, 0, 0}}, Monomial{-1.0, {1, 0, 0}}});
    CHECK_THROWS_AS(gradient_flow_foliation(h, Box::unit(2), 1.0 / 16), Error);
}

TEST_CASE("one-dimensional sublevel sets") {
    SublevelOptions tan;
    tan.mode = SublevelMode::tangent;
    SublevelResult a = sublevel_interval(poly1(1.0, {Monomial{1.0, {2, 0, 0}}}), 0.005, tan);
    REQUIRE(a.intervals.size() == 1u);
    CHECK(a.intervals[0].first == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(a.intervals[0].second == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(a.single_interval);
    CHECK(a.contained);

    SublevelResult b = sublevel_interval(poly1(1.0, {Monomial{1.0, {2, 0, 0}}, Monomial{0.04, {0, 0, 0}}}), 0.005, tan);
    CHECK(b.intervals.empty());
    CHECK(b.measure == 0.0);

    SublevelOptions tr;
    SublevelResult c = sublevel_interval(poly1(1.0, {Monomial{1.0, {2, 0, 0}}, Monomial{-0.04, {0, 0, 0}}}), 0.005, tr);
    REQUIRE(c.intervals.size() == 1u);
    CHECK(c.intervals[0].first == doctest::Approx(std::sqrt(0.03)).epsilon(1e-9));
    CHECK(c.intervals[0].second == doctest::Approx(std::sqrt(0.05)).epsilon(1e-9));
    CHECK(c.measure == doctest::Approx(std::sqrt(0.05) - std::sqrt(0.03)).epsilon(1e-8));
}

TEST_CASE("sublevel preconditions are reported") {
    SublevelOptions tan;
    tan.mode = SublevelMode::tangent;
    // h'(0) = 1 breaks the tangent-mode hypothesis.
    SublevelResult r = sublevel_interval(poly1(1.0, {Monomial{1.0, {2, 0, 0}}, Monomial{1.0, {1, 0, 0}}}), 0.005, tan);
    CHECK_FALSE(r.precondition_ok);
    CHECK_FALSE(r.failed.empty());
}

TEST_CASE("polar slices of a round paraboloid") {
    const double delta = 1.0 / 256;
    std::vector<double> xm{0.5, 0.5};
    std::vector<double> lo{0.2, 0.2}, hi{0.8, 0.8};
    const Box U = Box::make(lo, hi);
    for (double lam : {0.0, 16 * delta}) {
        auto h = poly(2, {Monomial{1.0, {2, 0, 0}}, Monomial{-1.0, {1, 0, 0}}, Monomial{1.0, {0, 2, 0}},
                          Monomial{-1.0, {0, 1, 0}}, Monomial{0.5 - lam, {0, 0, 0}}});
        PolarReport p = polar_slices(h, xm, delta, U);
        const double exact = lam == 0.0 ? M_PI * 2 * delta : M_PI * 4 * delta;
        CHECK(p.polar_measure == doctest::Approx(exact).epsilon(0.03));
        CHECK(p.discrepancy <= 0.05);
        CHECK(p.single_intervals);
        CHECK(p.convex);
    }
}

TEST_CASE("polar slices of an anisotropic bowl match the direct count") {
    const double delta = 1.0 / 256;
    std::vector<double> xm{0.45, 0.55};
    auto h = poly(2, {Monomial{1.0, {2, 0, 0}}, Monomial{-0.9, {1, 0, 0}}, Monomial{2.0, {0, 2, 0}},
                      Monomial{-2.2, {0, 1, 0}}, Monomial{0.2025 + 0.605 - 8 * delta, {0, 0, 0}}});
    std::vector<double> lo{0.1, 0.2}, hi{0.8, 0.9};
    PolarReport p = polar_slices(h, xm, delta, Box::make(lo, hi));
    CHECK(p.discrepancy <= 0.05);
}

TEST_CASE("shape count") {
    const double delta = 1.0 / 32;
    auto f = ScalarField::constant(Box::unit(2), 0.5);
    auto g = ScalarField::constant(Box::unit(2), 0.5 + delta);
    DyadicSet full = uniform_set(5, 2);
    ShapeReport r = shape_count(full, f, g, 1.0);
    CHECK(r.count == full.size());
    CHECK(std::isfinite(r.ratio));

    // One row of cells against a transversal strip |a x1| <= 2 delta.
    std::vector<Cell> row;
    for (std::uint32_t i = 0; i < 32; ++i) row.push_back(Cell{i, 7});
    auto lin = poly(2, {Monomial{0.5, {1, 0, 0}}});
    auto zero = ScalarField::constant(Box::unit(2), 0.0);
    ShapeReport s = shape_count(DyadicSet::from_cells(2, 5, row), lin, zero, 1.0);
    // The strip is 0 <= x1 <= 4 delta, so 4 cells plus at most two boundary cells.
    CHECK(s.count >= 4u);
    CHECK(s.count <= 6u);
}
