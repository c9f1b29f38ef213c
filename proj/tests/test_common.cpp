#include <doctest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "cinelab/common.hpp"

using namespace cinelab;

TEST_CASE("box geometry") {
    Box u = Box::unit(2);
    CHECK(u.side(0) == 1.0);
    CHECK(u.diameter() == doctest::Approx(std::sqrt(2.0)));
    std::vector<double> in{0.5, 0.5}, out{1.5, 0.5};
    CHECK(u.contains(in));
    CHECK_FALSE(u.contains(out));
    Box d = u.dilated(2.0);
    CHECK(d.lo[0] == doctest::Approx(-0.5));
    CHECK(d.hi[1] == doctest::Approx(1.5));
    Box c = d.clipped(u);
    CHECK(c == u);
    CHECK(d.contains(u));
    CHECK_FALSE(u.contains(d));
}

TEST_CASE("box rejects inverted corners") {
    std::vector<double> lo{0.0, 1.0}, hi{1.0, 0.0};
    CHECK_THROWS_AS(Box::make(lo, hi), Error);
}

TEST_CASE("packed hessian index is a bijection onto the upper triangle") {
    for (int k = 1; k <= kMaxParam; ++k) {
        std::vector<int> seen(k * (k + 1) / 2, 0);
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j) {
                int id = hess_index(i, j, k);
                REQUIRE(id >= 0);
                REQUIRE(id < static_cast<int>(seen.size()));
                seen[id]++;
                CHECK(hess_index(j, i, k) == id);
            }
        for (int s : seen) CHECK(s == 1);
    }
}

TEST_CASE("jet directional second derivative and spectral norm") {
    Jet j;
    j.dim = 2;
    j.hess[hess_index(0, 0, 2)] = 2.0;
    j.hess[hess_index(0, 1, 2)] = 0.0;
    j.hess[hess_index(1, 1, 2)] = -3.0;
    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
    CHECK(j.dir2(e1) == doctest::Approx(2.0));
    CHECK(j.dir2(e2) == doctest::Approx(-3.0));
    CHECK(j.hess_spectral_norm() == doctest::Approx(3.0));
    j.grad = {3.0, 4.0, 0.0};
    CHECK(j.grad_norm() == doctest::Approx(5.0));
}

TEST_CASE("rng streams are reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    Rng c(7);
    for (int i = 0; i < 1000; ++i) CHECK(c.below(13) < 13u);
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    CHECK(mix_seed(5, 0) == mix_seed(5, 0));
}

TEST_CASE("normal draws have unit variance") {
    Rng r(3);
    double s = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::fabs(s / n) < 0.05);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("parallel_for visits every index once regardless of thread count") {
    for (int threads : {1, 3, 8}) {
        set_num_threads(threads);
        std::vector<std::atomic<int>> hits(1001);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    set_num_threads(0);
}

TEST_CASE("errors carry their code") {
    try {
        fail(ErrorCode::too_fine, "x");
        FAIL("fail returned");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::too_fine);
        CHECK(std::string(e.what()).find("too") != std::string::npos);
    }
}
