#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "cinelab/fields.hpp"

using namespace cinelab;

namespace {

ScalarField poly(int k, std::vector<Monomial> t) { return ScalarField::polynomial(Box::unit(k), std::move(t)); }

// |x - c|^2 - r2 on the unit square.
ScalarField paraboloid(double cx, double cy, double r2) {
    return poly(2, {Monomial{1.0, {2, 0, 0}}, Monomial{-2 * cx, {1, 0, 0}}, Monomial{1.0, {0, 2, 0}},
                    Monomial{-2 * cy, {0, 1, 0}}, Monomial{cx * cx + cy * cy - r2, {0, 0, 0}}});
}

}  // namespace

TEST_CASE("field jets match finite differences") {
    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::sphere_slice(0.5, 3));
    std::vector<double> z{0.3, -0.2, 0.5, 0.1};
    std::vector<double> c{0.4, 0.6};
    std::vector<ScalarField> fields{
        poly(2, {Monomial{1.0, {2, 1, 0}}, Monomial{-0.5, {0, 3, 0}}}),
        ScalarField::induced(chart, z, 0.7, 0.1),
        ScalarField::sphere_cap(Box::unit(2), c, 1.5, 0.2, 1.0),
    };
    const double h = 1e-5;
    std::vector<double> x{0.31, 0.77};
    for (const auto& f : fields) {
        Jet j = f.jet(x);
        CHECK(j.value == doctest::Approx(f.value(x)).epsilon(1e-13));
        for (int a = 0; a < 2; ++a) {
            auto xp = x, xm = x;
            xp[a] += h;
            xm[a] -= h;
            CHECK(j.grad[a] == doctest::Approx((f.value(xp) - f.value(xm)) / (2 * h)).epsilon(1e-6));
            Jet jp = f.jet(xp), jm = f.jet(xm);
            for (int b = 0; b < 2; ++b)
                CHECK(j.h2(a, b) == doctest::Approx((jp.grad[b] - jm.grad[b]) / (2 * h)).epsilon(1e-5));
        }
        std::vector<double> xs{0.1, 0.2, 0.31, 0.77, 0.9, 0.05};
        std::vector<double> out(3);
        f.values(xs.data(), 3, out.data());
        for (int i = 0; i < 3; ++i)
            CHECK(out[i] == doctest::Approx(f.value(std::span<const double>(xs.data() + 2 * i, 2))).epsilon(1e-14));
    }
}

TEST_CASE("C2 distance of constant fields is the gap") {
    auto f = ScalarField::constant(Box::unit(2), 0.0);
    auto g = ScalarField::constant(Box::unit(2), 0.3);
    NormEstimate n = c2_distance(f, g);
    CHECK(n.total == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(n.sup_grad == 0.0);
    CHECK(n.sup_dir2 == 0.0);
}

TEST_CASE("C2 norm of x1^2 on the unit square is 1 + 2 + 2") {
    auto f = poly(2, {Monomial{1.0, {2, 0, 0}}});
    NormEstimate n = c2_norm(f);
    CHECK(n.sup_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(n.sup_grad == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(n.sup_dir2 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(n.total == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("C2 distance agrees with a brute-force dense grid") {
    auto f = poly(2, {Monomial{0.7, {2, 1, 0}}, Monomial{-0.4, {1, 0, 0}}});
    auto g = poly(2, {Monomial{0.2, {0, 2, 0}}, Monomial{0.1, {0, 0, 0}}});
    NormEstimate n = c2_distance(f, g);
    ScalarField h = f - g;
    double sv = 0.0, sg = 0.0, sq = 0.0;
    const int N = 401;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            std::vector<double> x{i / (N - 1.0), j / (N - 1.0)};
            Jet jt = h.jet(x);
            sv = std::max(sv, std::fabs(jt.value));
            sg = std::max(sg, jt.grad_norm());
            sq = std::max(sq, jt.hess_spectral_norm());
        }
    CHECK(n.sup_value == doctest::Approx(sv).epsilon(1e-4));
    CHECK(n.sup_grad == doctest::Approx(sg).epsilon(1e-4));
    CHECK(n.sup_dir2 == doctest::Approx(sq).epsilon(1e-3));
}

TEST_CASE("induced fields: zero vector and the height direction") {
    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::sphere_slice(0.6, 3));
    FunctionFamily zero = induced_projection_family(chart, {{0.0, 0.0, 0.0, 0.0}});
    std::vector<double> x{0.3, 0.9};
    CHECK(zero.members[0].value(x) == doctest::Approx(0.5));

    FunctionFamily e4 = induced_projection_family(chart, {{0.0, 0.0, 0.0, 1.0}, {0.5, 0.5, 0.0, 0.0}});
    const double L = e4.origin->renorm_L;
    CHECK(L > 0.0);
    for (double a : {0.0, 0.5, 1.0}) {
        std::vector<double> p{a, 1.0 - a};
        CHECK(e4.members[0].value(p) == doctest::Approx((0.6 + L) / (2 * L)).epsilon(1e-12));
    }
    for (const auto& f : e4.members) {
        NormEstimate n = c2_norm(f);
        CHECK(n.sup_value <= 1.0 + 1e-9);
    }
}

TEST_CASE("induced family distances are Lipschitz in the index point") {
    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::sphere_slice(0.5, 3));
    const double Cb = chart_c2_bound(*chart);
    Rng r(9);
    std::vector<std::vector<double>> Z;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> z(4);
        for (auto& v : z) v = r.uniform(-0.45, 0.45);
        Z.push_back(z);
    }
    FunctionFamily fam = induced_projection_family(chart, Z, false);
    for (std::size_t i = 0; i < Z.size(); ++i)
        for (std::size_t j = i + 1; j < Z.size(); ++j) {
            double dz = 0.0;
            for (int a = 0; a < 4; ++a) dz += (Z[i][a] - Z[j][a]) * (Z[i][a] - Z[j][a]);
            dz = std::sqrt(dz);
            CHECK(c2_distance(fam.members[i], fam.members[j]).total <= Cb * dz * (1 + 1e-9));
        }
}

TEST_CASE("tangency parameter of constants and linear fields") {
    auto f = ScalarField::constant(Box::unit(2), 0.25);
    auto z = ScalarField::constant(Box::unit(2), 0.0);
    CHECK(tangency_parameter(f, z, Box::unit(2)).value == doctest::Approx(0.25).epsilon(1e-12));
    auto lin = poly(2, {Monomial{-0.8, {1, 0, 0}}});
    CHECK(tangency_parameter(lin, z, Box::unit(2)).value == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("tangency parameter of near-tangent caps matches a dense grid") {
    std::vector<double> c1{0.5, 0.5}, c2{0.52, 0.49};
    auto f = ScalarField::sphere_cap(Box::unit(2), c1, 2.0, 0.0, 1.0);
    auto g = ScalarField::sphere_cap(Box::unit(2), c2, 1.6, 0.39, 1.0);
    ExtremumEstimate e = tangency_parameter(f, g, Box::unit(2));
    ScalarField h = f - g;
    double best = 1e300;
    const int N = 513;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            std::vector<double> x{i / (N - 1.0), j / (N - 1.0)};
            Jet jt = h.jet(x);
            best = std::min(best, std::fabs(jt.value) + jt.grad_norm());
        }
    CHECK(e.value <= best + 1e-12);
    CHECK(e.value >= best - 0.01);
    CHECK(e.value < 0.2 * c2_distance(f, g).total);
}

TEST_CASE("cinematic infimum vanishes for a saddle") {
    auto saddle = poly(2, {Monomial{1.0, {1, 1, 0}}});
    auto z = ScalarField::constant(Box::unit(2), 0.0);
    CHECK(cinematic_infimum(saddle, z).value == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
    auto c = ScalarField::constant(Box::unit(2), 0.4);
    CHECK(cinematic_infimum(c, z).value == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("parallel affine family is cinematic") {
    std::vector<ScalarField> m;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> slope{0.3, 0.0};
        m.push_back(ScalarField::affine(Box::unit(2), slope, 0.1 * i));
    }
    CinematicReport r = estimate_cinematic_constant(make_family(std::move(m)));
    CHECK(r.passed);
    CHECK(std::isfinite(r.K));
    CHECK(r.K >= 1.0);
    CHECK(r.worst_ratio <= 1.0 + 1e-9);
}

TEST_CASE("single member family passes trivially") {
    FunctionFamily fam = make_family({ScalarField::constant(Box::unit(2), 0.5)});
    CinematicReport r = estimate_cinematic_constant(fam);
    CHECK(r.passed);
    CHECK(r.K >= 1.0);
}

TEST_CASE("saddle family fails the cinematic gate") {
    FunctionFamily fam = make_family({ScalarField::constant(Box::unit(2), 0.0), poly(2, {Monomial{1.0, {1, 1, 0}}})});
    CinematicReport r = estimate_cinematic_constant(fam);
    CHECK_FALSE(r.passed);
    CHECK_FALSE(r.clause_infimum);
}

TEST_CASE("pair classification") {
    auto z = ScalarField::constant(Box::unit(2), 0.0);
    auto c = ScalarField::constant(Box::unit(2), 0.5);
    CHECK(classify_pair(c, z, 1.0 / 64, 1.0).overall == TangencyCase::value_separated);
    auto lin = poly(2, {Monomial{0.7, {1, 0, 0}}});
    CHECK(classify_pair(lin, z, 1.0 / 64, 1.0).overall == TangencyCase::transversal);
    auto p = paraboloid(0.5, 0.5, 0.1);
    TangencyClassification t = classify_pair(p, z, 1.0 / 64, 1.0);
    CHECK(t.overall == TangencyCase::tangent);
    int with_cp = 0;
    for (const auto& cube : t.cubes) {
        CHECK(cube.critical_points <= 1);
        if (cube.critical_points == 1) {
            ++with_cp;
            CHECK(cube.critical_point[0] == doctest::Approx(0.5).epsilon(1e-6));
            CHECK(cube.critical_point[1] == doctest::Approx(0.5).epsilon(1e-6));
            CHECK(cube.convexity == 1);
        }
    }
    CHECK(with_cp >= 1);
}

TEST_CASE("sphere nets are unit vectors") {
    for (int k = 1; k <= 3; ++k) {
        const SphereNet& n = sphere_net(k);
        CHECK(n.count > 0);
        for (std::size_t d = 0; d < n.count; ++d) {
            double s = 0.0;
            for (int a = 0; a < k; ++a) s += n.dirs[d * k + a] * n.dirs[d * k + a];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}
