#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "cinelab/furstenberg.hpp"

using namespace cinelab;

namespace {

ScalarField constant(double c) { return ScalarField::constant(Box::unit(2), c); }

std::vector<std::vector<double>> distances_of(const std::vector<double>& pts) {
    std::vector<std::vector<double>> d(pts.size(), std::vector<double>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) d[i][j] = std::fabs(pts[i] - pts[j]);
    return d;
}

// Brute force over member-centered balls of every radius in a fine list.
double brute_family_spread(const std::vector<std::vector<double>>& d, double delta, double t) {
    double best = 0.0;
    const double N = static_cast<double>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t jr = 0; jr < d.size(); ++jr) {
            const double r = std::max(d[i][jr], delta);
            double count = 0.0;
            for (std::size_t j = 0; j < d.size(); ++j)
                if (d[i][j] <= r) count += 1.0;
            best = std::max(best, count / (std::pow(r, t) * N));
        }
    return best;
}

// A union of cells at one height over the 2-D set X.
DyadicSet lift(const DyadicSet& X, std::uint32_t j) {
    std::vector<Cell> cells = X.cells();
    for (auto& c : cells) c[2] = j;
    return DyadicSet::from_cells(3, X.scale(), cells);
}

}  // namespace

TEST_CASE("family spread matches brute force") {
    Rng r(2);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> pts;
        for (int i = 0; i < 20; ++i) pts.push_back(r.uniform());
        auto d = distances_of(pts);
        FamilySpread s = family_spread(d, 1.0 / 64, 0.5);
        CHECK(s.C == doctest::Approx(brute_family_spread(d, 1.0 / 64, 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("energy of a single field and of disjoint slabs") {
    const double delta = 1.0 / 32;
    EnergyReport one = l2_energy(make_family({constant(0.5)}), delta);
    CHECK(one.lhs == doctest::Approx(2 * delta).epsilon(1e-12));
    CHECK(one.discrepancy == doctest::Approx(0.0).scale(1.0));

    std::vector<ScalarField> m;
    for (int i = 0; i < 5; ++i) m.push_back(constant(0.2 + 3 * delta * i));
    EnergyReport many = l2_energy(make_family(std::move(m)), delta);
    CHECK(many.lhs == doctest::Approx(5 * 2 * delta).epsilon(1e-12));
    CHECK(many.off_diagonal == 0.0);
    CHECK(many.pairwise == doctest::Approx(many.lhs).epsilon(1e-12));
}

TEST_CASE("energy identity on an induced family") {
    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::sphere_slice(0.5, 3));
    Rng r(4);
    std::vector<std::vector<double>> Z;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> z(4);
        for (auto& v : z) v = r.uniform(-0.45, 0.45);
        Z.push_back(z);
    }
    FunctionFamily fam = induced_projection_family(chart, Z);
    EnergyReport e = l2_energy(fam, 1.0 / 32);
    CHECK(e.discrepancy <= 0.02);
    CHECK(e.lhs >= e.diagonal);
    std::size_t pairs = 0;
    for (auto [b, c] : e.annulus) pairs += c;
    CHECK(pairs == 30u);
}

TEST_CASE("energy refuses a family that is not separated") {
    CHECK_THROWS_AS(l2_energy(make_family({constant(0.5), constant(0.5 + 1e-4)}), 1.0 / 32), Error);
}

TEST_CASE("Cauchy-Schwarz union bound") {
    CsBound disjoint = cs_union_lower_bound({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
    CHECK(disjoint.value == doctest::Approx(2.0));
    CsBound same = cs_union_lower_bound({1.0, 1.0}, {{1.0, 1.0}, {1.0, 1.0}});
    CHECK(same.value == doctest::Approx(1.0));
    CHECK(cs_union_lower_bound({0.0}, {{0.0}}).degenerate);
    CHECK_THROWS_AS(cs_union_lower_bound({1.0, 1.0}, {{1.0, 0.5}, {0.2, 1.0}}), Error);
}

TEST_CASE("Cauchy-Schwarz bound never exceeds a grid union of rectangles") {
    Rng r(8);
    const int G = 256;
    for (int trial = 0; trial < 20; ++trial) {
        const int count = 2 + static_cast<int>(r.below(6));
        std::vector<std::array<int, 4>> rects;
        for (int i = 0; i < count; ++i) {
            int x0 = static_cast<int>(r.below(G - 1)), y0 = static_cast<int>(r.below(G - 1));
            int x1 = x0 + 1 + static_cast<int>(r.below(G - x0 - 1)), y1 = y0 + 1 + static_cast<int>(r.below(G - y0 - 1));
            rects.push_back({x0, y0, x1, y1});
        }
        std::vector<double> meas(count);
        std::vector<std::vector<double>> ov(count, std::vector<double>(count));
        for (int i = 0; i < count; ++i)
            for (int j = 0; j < count; ++j) {
                int w = std::min(rects[i][2], rects[j][2]) - std::max(rects[i][0], rects[j][0]);
                int h = std::min(rects[i][3], rects[j][3]) - std::max(rects[i][1], rects[j][1]);
                ov[i][j] = w > 0 && h > 0 ? static_cast<double>(w) * h : 0.0;
            }
        for (int i = 0; i < count; ++i) meas[i] = ov[i][i];
        std::vector<char> grid(G * G, 0);
        for (const auto& q : rects)
            for (int x = q[0]; x < q[2]; ++x)
                for (int y = q[1]; y < q[3]; ++y) grid[x * G + y] = 1;
        double uni = 0.0;
        for (char c : grid) uni += c;
        CHECK(cs_union_lower_bound(meas, ov).value <= uni * (1 + 1e-12));
    }
}

TEST_CASE("cell neighborhoods") {
    DyadicSet inner = DyadicSet::from_cells(3, 4, {Cell{5, 5, 5}});
    CHECK(cell_neighborhood(inner).size() == 27u);
    DyadicSet corner = DyadicSet::from_cells(3, 4, {Cell{0, 0, 0}});
    CHECK(cell_neighborhood(corner).size() == 8u);
    DyadicSet proj = project_cells(DyadicSet::from_cells(3, 4, {Cell{1, 2, 3}, Cell{1, 2, 9}}));
    CHECK(proj.dim() == 2);
    CHECK(proj.size() == 1u);
}

TEST_CASE("parallel planes with planted product sets form a valid configuration") {
    const int m = 6;
    const double delta = std::ldexp(1.0, -m);
    DyadicSet X = random_spread_set(1.5, m, 2, 11);
    std::vector<ScalarField> members;
    std::vector<DyadicSet> sets;
    for (std::uint32_t j : {3u, 20u, 41u, 60u}) {
        members.push_back(constant((j + 0.5) * delta));
        sets.push_back(lift(X, j));
    }
    ConfigParams p{delta, 0.5, 0.25, 0.05};
    Configuration cfg = build_configuration(make_family(std::move(members)), sets, p);
    CHECK(cfg.separated);
    CHECK(cfg.M == X.size());
    CHECK(cfg.valid);
    IncidenceReport r = incidence_lower_bound_check(cfg, 0.05);
    CHECK(r.union_count == 4 * X.size());
    CHECK(r.cs_consistent);
    CHECK(r.passed);
}

TEST_CASE("a cell off its graph is rejected") {
    const int m = 5;
    const double delta = std::ldexp(1.0, -m);
    DyadicSet E = DyadicSet::from_cells(3, m, {Cell{1, 1, 16}, Cell{2, 2, 30}});
    try {
        build_configuration(make_family({constant(16.5 * delta)}), {E}, ConfigParams{delta, 0.5, 0.5, 0.05});
        FAIL("accepted a misaligned cell");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::misaligned_cell);
        CHECK(std::string(e.what()).find("(2,2,30)") != std::string::npos);
    }
}

TEST_CASE("sets are trimmed to a common size") {
    const int m = 5;
    const double delta = std::ldexp(1.0, -m);
    DyadicSet a = lift(uniform_set(m, 2), 4);
    DyadicSet b = lift(random_spread_set(1.5, m, 2, 1), 20);
    Configuration cfg = build_configuration(make_family({constant(4.5 * delta), constant(20.5 * delta)}), {a, b},
                                            ConfigParams{delta, 0.5, 0.5, 0.05});
    CHECK(cfg.M == b.size());
    CHECK(cfg.sets[0].size() == b.size());
    BuildOptions strict;
    strict.trim = false;
    CHECK_THROWS_AS(build_configuration(make_family({constant(4.5 * delta), constant(20.5 * delta)}), {a, b},
                                        ConfigParams{delta, 0.5, 0.5, 0.05}, strict),
                    Error);
}

TEST_CASE("incidence check requires t <= s") {
    Configuration cfg = sharpness_configuration(3, 5, 0.3, 0.3, 0.05, 1);
    cfg.params.t = 0.6;
    CHECK_THROWS_AS(incidence_lower_bound_check(cfg, 0.05), Error);
}

TEST_CASE("sharpness construction attains the bound up to delta^-16eps") {
    // Even m keeps 2^{m/2} and 2^{3m/2} integral, so the count is exact.
    for (int m : {4, 6}) {
        Configuration cfg = sharpness_configuration(3, m, 0.5, 0.5, 0.05, 7);
        const double delta = std::ldexp(1.0, -m);
        IncidenceReport r = incidence_lower_bound_check(cfg, 0.05);
        const double expected = std::pow(delta, -0.5 - 1.5);
        CHECK(static_cast<double>(r.union_count) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(r.passed);
        CHECK(static_cast<double>(r.union_count) / r.bound == doctest::Approx(std::pow(delta, -0.8)).epsilon(1e-9));
    }
}

TEST_CASE("disjoint slabs have no neighborhood overlap") {
    const int m = 5;
    const double delta = std::ldexp(1.0, -m);
    DyadicSet X = uniform_set(m, 2);
    Configuration cfg = build_configuration(make_family({constant(4.5 * delta), constant(20.5 * delta)}),
                                            {lift(X, 4), lift(X, 20)}, ConfigParams{delta, 1.0, 0.5, 0.05});
    OverlapReport o = neighborhood_overlap(cfg, 0, 1);
    CHECK(o.overlap == 0.0);
    CHECK(o.t == doctest::Approx(16 * delta));
}

TEST_CASE("generated configurations are reproducible") {
    GenerateOptions g;
    g.m = 5;
    g.seed = 3;
    Configuration a = generate_configuration(g);
    Configuration b = generate_configuration(g);
    REQUIRE(a.sets.size() == b.sets.size());
    for (std::size_t i = 0; i < a.sets.size(); ++i) CHECK(a.sets[i] == b.sets[i]);
    CHECK(a.separated);
    CHECK(a.family.size() == static_cast<std::size_t>(std::lround(std::pow(2.0, 2.5))));
}
