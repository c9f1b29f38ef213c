#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "cinelab/common.hpp"
#include "cinelab/fields.hpp"
#include "cinelab/simd.hpp"

using namespace cinelab;

namespace {

bool have_avx2() { return simd::isa_available(simd::Isa::avx2); }

std::vector<double> random_vec(Rng& r, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("dispatch reports an available variant") {
    CHECK(simd::isa_available(simd::Isa::scalar));
    CHECK(simd::isa_available(simd::active_isa()));
    const auto saved = simd::active_isa();
    simd::force_isa(simd::Isa::scalar);
    CHECK(simd::active_isa() == simd::Isa::scalar);
    simd::force_isa(saved);
}

TEST_CASE("dot_rows variants agree bit for bit") {
    if (!have_avx2()) return;
    Rng r(11);
    for (std::size_t dim : {1u, 3u, 4u, 5u}) {
        for (std::size_t rows : {0u, 1u, 3u, 4u, 17u, 1000u}) {
            auto m = random_vec(r, rows * dim, -1.0, 1.0);
            auto v = random_vec(r, dim, -1.0, 1.0);
            std::vector<double> a(rows), b(rows);
            simd::scalar::dot_rows(m.data(), rows, dim, v.data(), a.data());
            simd::avx2::dot_rows(m.data(), rows, dim, v.data(), b.data());
            CHECK(std::memcmp(a.data(), b.data(), rows * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("dot_rows matches a plain loop") {
    Rng r(12);
    const std::size_t rows = 33, dim = 4;
    auto m = random_vec(r, rows * dim, -1.0, 1.0);
    auto v = random_vec(r, dim, -1.0, 1.0);
    std::vector<double> out(rows);
    simd::dot_rows(m.data(), rows, dim, v.data(), out.data());
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t a = 0; a < dim; ++a) s += m[i * dim + a] * v[a];
        CHECK(out[i] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("quantize variants agree and clamp") {
    Rng r(13);
    auto vals = random_vec(r, 1003, -0.2, 1.2);
    vals[0] = 0.0;
    vals[1] = 1.0;
    std::vector<std::uint32_t> a(vals.size()), b(vals.size());
    simd::scalar::quantize(vals.data(), vals.size(), 0.0, 256.0, 255, a.data());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        double q = std::floor(vals[i] * 256.0);
        q = std::min(std::max(q, 0.0), 255.0);
        CHECK(a[i] == static_cast<std::uint32_t>(q));
    }
    if (have_avx2()) {
        simd::avx2::quantize(vals.data(), vals.size(), 0.0, 256.0, 255, b.data());
        CHECK(a == b);
    }
}

TEST_CASE("slab overlap counts agree with a brute-force lattice count") {
    Rng r(14);
    const std::size_t n = 517;
    auto f = random_vec(r, n, 0.0, 1.0);
    auto g = f;
    for (auto& x : g) x += r.uniform(-0.05, 0.05);
    const double delta = 0.02, rho = delta / 8.0;
    std::vector<double> ca(n), cb(n);
    double ta = simd::scalar::slab_overlap_counts(f.data(), g.data(), n, delta, rho, 0.1, 0.9, ca.data());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = std::max({f[i], g[i]}) - delta, hi = std::min(f[i], g[i]) + delta;
        double c = 0.0;
        for (long j = -200; j < 1200; ++j) {
            double y = (j + 0.5) * rho;
            if (y >= lo && y <= hi && y >= 0.1 && y <= 0.9) c += 1.0;
        }
        CHECK(ca[i] == c);
        total += c;
    }
    CHECK(ta == total);
    if (have_avx2()) {
        double tb = simd::avx2::slab_overlap_counts(f.data(), g.data(), n, delta, rho, 0.1, 0.9, cb.data());
        CHECK(ta == tb);
        CHECK(ca == cb);
        double tn = simd::avx2::slab_overlap_counts(f.data(), g.data(), n, delta, rho, simd::kNoClipLo,
                                                    simd::kNoClipHi, nullptr);
        double ts = simd::scalar::slab_overlap_counts(f.data(), g.data(), n, delta, rho, simd::kNoClipLo,
                                                      simd::kNoClipHi, nullptr);
        CHECK(tn == ts);
    }
}

TEST_CASE("pair metrics variants agree on sampled fields") {
    if (!have_avx2()) return;
    for (int k = 1; k <= 3; ++k) {
        const Box dom = Box::unit(k);
        std::vector<Monomial> tf, tg;
        Rng r(20 + k);
        for (int q = 0; q < 6; ++q) {
            Monomial m;
            m.coef = r.uniform(-1.0, 1.0);
            for (int a = 0; a < k; ++a) m.exps[a] = static_cast<int>(r.below(3));
            tf.push_back(m);
            m.coef = r.uniform(-1.0, 1.0);
            tg.push_back(m);
        }
        auto f = ScalarField::polynomial(dom, tf);
        auto g = ScalarField::polynomial(dom, tg);
        const int nodes = k == 3 ? 9 : 17;
        SampledField sf = sample_field(f, dom, nodes), sg = sample_field(g, dom, nodes);
        const SphereNet& net = sphere_net(k);
        auto vf = sf.view(), vg = sg.view();
        for (bool pair : {false, true}) {
            simd::PairMetrics a, b;
            simd::scalar::pair_metrics(vf, pair ? &vg : nullptr, net.coef.data(), net.count, a);
            simd::avx2::pair_metrics(vf, pair ? &vg : nullptr, net.coef.data(), net.count, b);
            CHECK(a.sup_value == b.sup_value);
            CHECK(a.arg_value == b.arg_value);
            CHECK(a.sup_grad == b.sup_grad);
            CHECK(a.arg_grad == b.arg_grad);
            CHECK(a.sup_dir2 == b.sup_dir2);
            CHECK(a.arg_dir2 == b.arg_dir2);
            CHECK(a.min_full == b.min_full);
            CHECK(a.arg_full == b.arg_full);
            CHECK(a.min_value_grad == b.min_value_grad);
            CHECK(a.arg_value_grad == b.arg_value_grad);
        }
    }
}

TEST_CASE("field-level results do not depend on the variant") {
    if (!have_avx2()) return;
    const Box dom = Box::unit(2);
    auto f = ScalarField::polynomial(dom, {Monomial{1.0, {2, 0, 0}}, Monomial{0.5, {1, 1, 0}}});
    auto g = ScalarField::polynomial(dom, {Monomial{-0.3, {0, 2, 0}}, Monomial{0.1, {0, 0, 0}}});
    const auto saved = simd::active_isa();
    simd::force_isa(simd::Isa::scalar);
    NormEstimate a = c2_distance(f, g);
    simd::force_isa(simd::Isa::avx2);
    NormEstimate b = c2_distance(f, g);
    simd::force_isa(saved);
    CHECK(a.total == b.total);
    CHECK(a.sup_dir2 == b.sup_dir2);
}
