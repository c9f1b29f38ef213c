#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "cinelab/dyadic.hpp"

using namespace cinelab;

namespace {

// Exhaustive spread constant: every lattice center, every dyadic radius,
// cells counted when they meet the closed ball.
double brute_spread(const DyadicSet& P, double s) {
    const int k = P.dim(), m = P.scale();
    const long side = 1L << m;
    const auto cells = P.cells();
    double best = 0.0;
    long total = 1;
    for (int a = 0; a < k; ++a) total *= side;
    for (int j = 0; j <= m; ++j) {
        const double R = std::ldexp(1.0, m - j);
        for (long id = 0; id < total; ++id) {
            long t = id;
            std::array<long, 4> c{};
            for (int a = 0; a < k; ++a) {
                c[a] = t % side;
                t /= side;
            }
            std::size_t count = 0;
            for (const auto& q : cells) {
                double d2 = 0.0;
                for (int a = 0; a < k; ++a) {
                    double d = std::fabs(static_cast<double>(q[a]) - static_cast<double>(c[a])) - 0.5;
                    if (d > 0) d2 += d * d;
                }
                if (d2 <= R * R) ++count;
            }
            double C = count / (std::pow(std::ldexp(1.0, -j), s) * static_cast<double>(P.size()));
            best = std::max(best, C);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("encoding round trips and keys order by coarse parent") {
    DyadicSet s(3, 5);
    Rng r(1);
    for (int i = 0; i < 200; ++i) {
        Cell c{static_cast<std::uint32_t>(r.below(32)), static_cast<std::uint32_t>(r.below(32)),
               static_cast<std::uint32_t>(r.below(32)), 0};
        CHECK(s.decode(s.encode(c)) == c);
        Cell p{c[0] >> 2, c[1] >> 2, c[2] >> 2, 0};
        DyadicSet coarse(3, 3);
        CHECK((s.encode(c) >> 6) == coarse.encode(p));
    }
}

TEST_CASE("scale limits") {
    CHECK_THROWS_AS(DyadicSet(4, 16), Error);
    CHECK_NOTHROW(DyadicSet(3, 21));
    CHECK_THROWS_AS(check_scale(3, 13), Error);
    CHECK_NOTHROW(check_scale(2, 16));
}

TEST_CASE("covering numbers") {
    CHECK(covering_number(uniform_set(3, 2), 3) == 64u);
    CHECK(covering_number(DyadicSet(2, 4), 2) == 0u);
    DyadicSet c = cantor_set(0.25, 8, 1);
    CHECK(c.scale() == 16);
    CHECK(c.size() == 256u);
    for (int j = 0; j <= 8; ++j) CHECK(covering_number(c, 2 * j) == (std::size_t{1} << j));
}

TEST_CASE("from_points and coarsen") {
    std::vector<double> pts{0.1, 0.1, 0.12, 0.11, 0.9, 0.9, 1.0, 1.0};
    DyadicSet s = DyadicSet::from_points(2, 3, pts);
    CHECK(s.size() == 2u);
    DyadicSet c = s.coarsen(1);
    CHECK(c.size() == 2u);
    CHECK(c.coarsen(0).size() == 1u);
}

TEST_CASE("set algebra") {
    DyadicSet a = DyadicSet::from_cells(2, 2, {Cell{0, 0}, Cell{1, 1}, Cell{2, 3}});
    DyadicSet b = DyadicSet::from_cells(2, 2, {Cell{1, 1}, Cell{3, 3}});
    CHECK(set_union(a, b).size() == 4u);
    CHECK(set_intersection(a, b).size() == 1u);
    CHECK(set_intersection(a, b).contains(Cell{1, 1}));
    CHECK(set_union(std::vector<DyadicSet>{a, b, a}).size() == 4u);
    CHECK_THROWS_AS(set_union(a, DyadicSet(2, 3)), Error);
}

TEST_CASE("spread constant of a singleton is delta^-s") {
    DyadicSet p = DyadicSet::from_cells(2, 5, {Cell{7, 9}});
    SpreadReport r = spread_constant(p, 0.7);
    CHECK(r.C == doctest::Approx(std::pow(2.0, 5 * 0.7)).epsilon(1e-12));
}

TEST_CASE("spread constant of the full line grid is O(1)") {
    SpreadReport r = spread_constant(uniform_set(8, 1), 1.0);
    CHECK(r.C >= 1.0);
    CHECK(r.C <= 4.0);
}

TEST_CASE("spread constant matches exhaustive search") {
    Rng r(3);
    for (int trial = 0; trial < 6; ++trial) {
        const int k = trial % 2 ? 2 : 1;
        const int m = k == 1 ? 7 : 4;
        std::vector<Cell> cells;
        for (int i = 0; i < 12; ++i) {
            Cell c{};
            for (int a = 0; a < k; ++a) c[a] = static_cast<std::uint32_t>(r.below(1u << m));
            cells.push_back(c);
        }
        DyadicSet P = DyadicSet::from_cells(k, m, cells);
        const double s = 0.3 + 0.1 * trial;
        CHECK(spread_constant(P, s).C == doctest::Approx(brute_spread(P, s)).epsilon(1e-12));
    }
}

TEST_CASE("self-similar Cantor sets are spread with small constant") {
    SpreadReport r = spread_constant(cantor_set(0.25, 8, 1), 0.5);
    CHECK(r.C <= 8.0);
}

TEST_CASE("spread subset extraction") {
    ExtractResult full = extract_spread_subset(uniform_set(8, 1), 1.0);
    CHECK(full.subset.size() >= 200u);

    DyadicSet cantor = cantor_set(0.25, 8, 1);
    const double parent = spread_constant(cantor, 0.25).C;
    ExtractResult e = extract_spread_subset(cantor, 0.25);
    for (std::size_t i = 0; i < e.subset.size(); ++i) CHECK(cantor.contains(e.subset.cell(i)));
    CHECK(e.report.C <= 2.0 * parent + 1e-12);
    CHECK(e.subset.size() >= 8u);

    std::vector<Cell> column;
    for (std::uint32_t y = 0; y < 64; ++y) column.push_back(Cell{5, y});
    DyadicSet col = DyadicSet::from_cells(2, 6, column);
    CHECK(extract_spread_subset(col, 1.0).subset.size() == 64u);
    ExtractResult c = extract_spread_subset(col, 0.5);
    CHECK(c.subset.size() == 8u);
    CHECK(c.report.C <= 4.0 * spread_constant(col, 0.5).C);

    for (int trial = 0; trial < 4; ++trial) {
        DyadicSet rs = random_spread_set(1.4, 6, 2, 100 + trial);
        const double tt = 0.6 + 0.2 * trial;
        CHECK(extract_spread_subset(rs, tt).report.C <= 4.0 * spread_constant(rs, tt).C);
    }
}

TEST_CASE("generators") {
    CHECK(cantor_set(0.25, 6, 1).size() == 64u);
    DyadicSet prod = product_set({cantor_set(0.25, 6, 1), cantor_set(0.25, 6, 1)});
    CHECK(prod.dim() == 2);
    CHECK(prod.size() == 4096u);
    DyadicSet rs = random_spread_set(0.7, 10, 1, 42);
    CHECK(rs.size() == static_cast<std::size_t>(std::lround(std::pow(2.0, 7.0))));
    CHECK(spread_constant(rs, 0.7).C <= 16.0);
    CHECK(random_spread_set(0.7, 10, 1, 42) == rs);
    CHECK_FALSE(random_spread_set(0.7, 10, 1, 43) == rs);
}

TEST_CASE("binary format round trip") {
    DyadicSet s = random_spread_set(1.2, 6, 2, 5);
    std::stringstream ss;
    write_binary(s, ss);
    const std::string bytes = ss.str();
    CHECK(bytes.size() == 16 + 4 * 2 * s.size());
    DyadicSet t = read_binary(ss);
    CHECK(t == s);
    std::stringstream bad("xx");
    CHECK_THROWS_AS(read_binary(bad), Error);
}
