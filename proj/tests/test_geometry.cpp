#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "cinelab/geometry.hpp"

using namespace cinelab;

namespace {

double norm(const double* p, int d) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += p[a] * p[a];
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("sphere slice lies on the sphere at height c") {
    for (double c : {0.3, 0.6}) {
        ManifoldChart ch = ManifoldChart::sphere_slice(c, 3);
        CHECK(ch.param_dim() == 2);
        CHECK(ch.ambient_dim() == 4);
        Rng r(1);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> x{r.uniform(), r.uniform()};
            ChartJet j = ch.jet(x, 2);
            CHECK(norm(j.point.data(), 4) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(j.point[3] == doctest::Approx(c).epsilon(1e-12));
            for (int a = 0; a < 2; ++a) CHECK(j.d1[a][3] == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("chart derivatives match central differences") {
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2, 2), A(2, 2);
    A << 1.0, 0.2, 0.2, 2.0;
    std::vector<ManifoldChart> charts{ManifoldChart::sphere_slice(0.5, 3), ManifoldChart::unit_sphere(3),
                                      ManifoldChart::quadratic_graph(L, A, 3)};
    const double h = 1e-5;
    for (const auto& ch : charts) {
        const int k = ch.param_dim(), d = ch.ambient_dim();
        std::vector<double> x(k, 0.37);
        ChartJet j = ch.jet(x, 2);
        for (int a = 0; a < k; ++a) {
            auto xp = x, xm = x;
            xp[a] += h;
            xm[a] -= h;
            ChartJet jp = ch.jet(xp, 1), jm = ch.jet(xm, 1);
            for (int c = 0; c < d; ++c) {
                CHECK(j.d1[a][c] == doctest::Approx((jp.point[c] - jm.point[c]) / (2 * h)).epsilon(1e-6));
                for (int b = 0; b < k; ++b)
                    CHECK(j.second(a, b)[c] ==
                          doctest::Approx((jp.d1[b][c] - jm.d1[b][c]) / (2 * h)).epsilon(1e-5).scale(1.0));
            }
        }
    }
}

TEST_CASE("unit sphere chart is codimension zero") {
    ManifoldChart ch = ManifoldChart::unit_sphere(3);
    CHECK(ch.param_dim() == 3);
    CHECK(ch.codim_zero());
    std::vector<double> x{0.2, 0.7, 0.4};
    TangentFrame f = tangent_frame(ch, x);
    CHECK(f.codim_zero);
    CHECK(f.orthonormality_residual < 1e-10);
    CHECK(std::fabs(std::fabs(f.nu.dot(f.e0)) - 1.0) < 1e-10);
}

TEST_CASE("sphere slice frame: normal is tangent to the sphere and orthogonal to the slice") {
    ManifoldChart ch = ManifoldChart::sphere_slice(0.6, 3);
    std::vector<double> x{0.3, 0.8};
    TangentFrame f = tangent_frame(ch, x);
    CHECK_FALSE(f.codim_zero);
    CHECK(f.orthonormality_residual < 1e-10);
    CHECK(std::fabs(f.nu.dot(f.e0)) < 1e-10);
    for (const auto& t : f.tangent) CHECK(std::fabs(f.nu.dot(t)) < 1e-10);
    CHECK(f.nu.norm() == doctest::Approx(1.0));
}

TEST_CASE("quadratic graph passes through (1, y, |y|^2)") {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    ManifoldChart ch = ManifoldChart::quadratic_graph(I, I, 3);
    std::vector<double> x{0.8, 0.1};
    double p[4];
    ch.point(x, p);
    const double y0 = 0.3, y1 = -0.4;
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(y0));
    CHECK(p[2] == doctest::Approx(y1));
    CHECK(p[3] == doctest::Approx(y0 * y0 + y1 * y1));
}

TEST_CASE("sectional curvature of sphere slices is 1/(1-c^2)") {
    for (double c : {0.3, 0.5, 0.6, 0.8}) {
        ManifoldChart ch = ManifoldChart::sphere_slice(c, 3);
        std::vector<double> x{0.25, 0.75};
        const double want = 1.0 / (1.0 - c * c);
        CHECK(sectional_curvature(ch, x, 0, 1) == doctest::Approx(want).epsilon(1e-9));
        CHECK(sectional_curvature(ch, x, 0, 1, CurvatureMethod::finite_difference) ==
              doctest::Approx(want).epsilon(1e-4));
        CurvatureEntry e = principal_curvatures(ch, x);
        for (double k : e.kappa) CHECK(std::fabs(k) == doctest::Approx(c / std::sqrt(1.0 - c * c)).epsilon(1e-9));
    }
}

TEST_CASE("ambient Gauss equation agrees with the sphere-side relation") {
    Rng r(5);
    for (double c : {0.3, 0.7}) {
        ManifoldChart ch = ManifoldChart::sphere_slice(c, 3);
        for (int i = 0; i < 20; ++i) {
            std::vector<double> x{r.uniform(), r.uniform()};
            std::vector<double> a{r.normal(), r.normal()}, b{r.normal(), r.normal()};
            double amb = sectional_curvature_ambient(ch, x, a, b);
            double gau = sectional_curvature_gauss(ch, x, a, b);
            CHECK(amb == doctest::Approx(gau).epsilon(1e-8));
            CHECK(amb == doctest::Approx(1.0 / (1.0 - c * c)).epsilon(1e-8));
        }
    }
}

TEST_CASE("quadratic graph curvatures at the vertex are the Hessian eigenvalues") {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2), A(2, 2);
    A << 1.0, 0.0, 0.0, 2.0;
    ManifoldChart ch = ManifoldChart::quadratic_graph(I, A, 3);
    std::vector<double> x{0.5, 0.5};
    CurvatureEntry e = principal_curvatures(ch, x);
    REQUIRE(e.kappa.size() == 2);
    CHECK(std::fabs(e.kappa[0]) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::fabs(e.kappa[1]) == doctest::Approx(4.0).epsilon(1e-9));
    CurvatureEntry f = principal_curvatures(ch, x, CurvatureMethod::finite_difference);
    CHECK(f.kappa[0] == doctest::Approx(e.kappa[0]).epsilon(1e-4));
    CHECK(f.kappa[1] == doctest::Approx(e.kappa[1]).epsilon(1e-4));
}

TEST_CASE("round sphere of radius r has curvature 1/r") {
    ManifoldChart ch = ManifoldChart::unit_sphere(2, 2.0);
    std::vector<double> x{0.4, 0.6};
    CurvatureEntry e = principal_curvatures(ch, x);
    for (double k : e.kappa) CHECK(std::fabs(k) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("nondegeneracy gate") {
    CurvatureReport good = verify_nondegenerate(ManifoldChart::sphere_slice(0.5, 3));
    CHECK(good.passed);
    CHECK(good.min_sectional == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2), A(2, 2);
    A << 1.0, 0.0, 0.0, 3.0;
    CHECK(verify_nondegenerate(ManifoldChart::quadratic_graph(I, A, 3)).passed);

    auto flat = ManifoldChart::custom_points(2, 4, [](std::span<const double> x, double* p) {
        p[0] = x[0];
        p[1] = x[1];
        p[2] = 0.0;
        p[3] = 1.0;
    });
    CurvatureReport bad = verify_nondegenerate(flat);
    CHECK_FALSE(bad.passed);
    CHECK_FALSE(bad.note.empty());

    Eigen::MatrixXd S(2, 2);
    S << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(ManifoldChart::quadratic_graph(I, S, 3), Error);
}

TEST_CASE("curvature csv has a constant sectional column for sphere slices") {
    CurvatureReport r = verify_nondegenerate(ManifoldChart::sphere_slice(0.6, 3));
    std::ostringstream os;
    write_curvature_csv(r, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "x1,x2,kappa1,kappa2,K_min,K_max");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(line.substr(line.rfind(',') + 1) == "1.5625");
    }
    CHECK(rows == 33 * 33);
}

TEST_CASE("chart C2 bound dominates the jet norms") {
    ManifoldChart ch = ManifoldChart::sphere_slice(0.5, 3);
    double b = chart_c2_bound(ch);
    CHECK(b >= 1.0);
    CHECK(std::isfinite(b));
}
