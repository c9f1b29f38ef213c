#include <algorithm>
#include <cmath>

#include "cinelab/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CINELAB_X86 1
#include <immintrin.h>
#else
#define CINELAB_X86 0
#endif

namespace cinelab::simd::avx2 {

#if CINELAB_X86 && defined(__AVX2__)

bool compiled() { return true; }

namespace {

inline __m256d vabs(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

// Lane-wise running extremum with the index of its first occurrence.
struct LaneBest {
    __m256d val;
    __m256d idx;
};

inline void update_max(LaneBest& b, __m256d v, __m256d idx) {
    __m256d gt = _mm256_cmp_pd(v, b.val, _CMP_GT_OQ);
    b.val = _mm256_blendv_pd(b.val, v, gt);
    b.idx = _mm256_blendv_pd(b.idx, idx, gt);
}

inline void update_min(LaneBest& b, __m256d v, __m256d idx) {
    __m256d lt = _mm256_cmp_pd(v, b.val, _CMP_LT_OQ);
    b.val = _mm256_blendv_pd(b.val, v, lt);
    b.idx = _mm256_blendv_pd(b.idx, idx, lt);
}

template <bool IsMax>
void reduce(const LaneBest& b, double& val, std::size_t& arg) {
    alignas(32) double v[4];
    alignas(32) double ix[4];
    _mm256_store_pd(v, b.val);
    _mm256_store_pd(ix, b.idx);
    for (int l = 0; l < 4; ++l) {
        std::size_t li = static_cast<std::size_t>(ix[l]);
        bool better = IsMax ? v[l] > val : v[l] < val;
        if (better || (v[l] == val && li < arg)) {
            val = v[l];
            arg = li;
        }
    }
}

}  // namespace

void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out) {
    std::size_t r = 0;
    const __m256i stride = _mm256_set_epi64x(3 * static_cast<long long>(dim), 2 * static_cast<long long>(dim),
                                             static_cast<long long>(dim), 0);
    for (; r + 4 <= nrows; r += 4) {
        const double* base = rows + r * dim;
        __m256d s = _mm256_setzero_pd();
        for (std::size_t a = 0; a < dim; ++a) {
            __m256d x = _mm256_i64gather_pd(base + a, stride, 8);
            s = _mm256_add_pd(s, _mm256_mul_pd(x, _mm256_set1_pd(v[a])));
        }
        _mm256_storeu_pd(out + r, s);
    }
    if (r < nrows) scalar::dot_rows(rows + r * dim, nrows - r, dim, v, out + r);
}

void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out) {
    std::size_t i = 0;
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vscale = _mm256_set1_pd(scale);
    const __m256d vtop = _mm256_set1_pd(static_cast<double>(max_index));
    const __m256d zero = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        __m256d q = _mm256_floor_pd(_mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(vals + i), vlo), vscale));
        q = _mm256_min_pd(_mm256_max_pd(q, zero), vtop);
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, q);
        for (int l = 0; l < 4; ++l) out[i + l] = static_cast<std::uint32_t>(tmp[l]);
    }
    if (i < n) scalar::quantize(vals + i, n - i, lo, scale, max_index, out + i);
}

double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts) {
    std::size_t i = 0;
    const __m256d vd = _mm256_set1_pd(delta);
    const __m256d vrho = _mm256_set1_pd(rho);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d clo = _mm256_set1_pd(clip_lo);
    const __m256d chi = _mm256_set1_pd(clip_hi);
    double lanes_total[4] = {0, 0, 0, 0};
    __m256d acc = _mm256_setzero_pd();
    double total = 0.0;
    for (; i + 4 <= n; i += 4) {
        __m256d fv = _mm256_loadu_pd(f + i);
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d lo = _mm256_sub_pd(_mm256_max_pd(fv, gv), vd);
        __m256d hi = _mm256_add_pd(_mm256_min_pd(fv, gv), vd);
        lo = _mm256_max_pd(lo, clo);
        hi = _mm256_min_pd(hi, chi);
        __m256d jmin = _mm256_ceil_pd(_mm256_sub_pd(_mm256_div_pd(lo, vrho), half));
        __m256d jmax = _mm256_floor_pd(_mm256_sub_pd(_mm256_div_pd(hi, vrho), half));
        __m256d c = _mm256_max_pd(_mm256_add_pd(_mm256_sub_pd(jmax, jmin), one), zero);
        if (counts) _mm256_storeu_pd(counts + i, c);
        // Counts are integers well below 2^53, so summation order does not matter.
        acc = _mm256_add_pd(acc, c);
    }
    _mm256_storeu_pd(lanes_total, acc);
    total = lanes_total[0] + lanes_total[1] + lanes_total[2] + lanes_total[3];
    if (i < n) total += scalar::slab_overlap_counts(f + i, g + i, n - i, delta, rho, clip_lo, clip_hi,
                                                    counts ? counts + i : nullptr);
    return total;
}

void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out) {
    const int k = f.dim;
    const int nh = k * (k + 1) / 2;
    out = PairMetrics{};
    const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    const __m256d zero = _mm256_setzero_pd();
    LaneBest bv{zero, zero}, bg{zero, zero}, bq{zero, zero}, bf{inf, zero}, bt{inf, zero};
    __m256d idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    const __m256d four = _mm256_set1_pd(4.0);
    std::size_t i = 0;
    for (; i + 4 <= f.count; i += 4, idx = _mm256_add_pd(idx, four)) {
        __m256d v = _mm256_loadu_pd(f.value + i);
        if (g) v = _mm256_sub_pd(v, _mm256_loadu_pd(g->value + i));
        __m256d gsq = zero;
        for (int a = 0; a < k; ++a) {
            __m256d ga = _mm256_loadu_pd(f.grad[a] + i);
            if (g) ga = _mm256_sub_pd(ga, _mm256_loadu_pd(g->grad[a] + i));
            gsq = _mm256_add_pd(gsq, _mm256_mul_pd(ga, ga));
        }
        __m256d hs[kMaxHess];
        for (int m = 0; m < nh; ++m) {
            hs[m] = _mm256_loadu_pd(f.hess[m] + i);
            if (g) hs[m] = _mm256_sub_pd(hs[m], _mm256_loadu_pd(g->hess[m] + i));
        }
        __m256d av = vabs(v);
        __m256d gn = _mm256_sqrt_pd(gsq);
        __m256d qmax = zero;
        __m256d qmin = inf;
        for (std::size_t d = 0; d < net_count; ++d) {
            const double* c = net_coef + d * nh;
            __m256d q = zero;
            for (int m = 0; m < nh; ++m) q = _mm256_add_pd(q, _mm256_mul_pd(_mm256_set1_pd(c[m]), hs[m]));
            q = vabs(q);
            qmax = _mm256_max_pd(qmax, q);
            qmin = _mm256_min_pd(qmin, q);
        }
        update_max(bv, av, idx);
        update_max(bg, gn, idx);
        update_max(bq, qmax, idx);
        __m256d vg = _mm256_add_pd(av, gn);
        update_min(bf, _mm256_add_pd(vg, qmin), idx);
        update_min(bt, vg, idx);
    }
    reduce<true>(bv, out.sup_value, out.arg_value);
    reduce<true>(bg, out.sup_grad, out.arg_grad);
    reduce<true>(bq, out.sup_dir2, out.arg_dir2);
    reduce<false>(bf, out.min_full, out.arg_full);
    reduce<false>(bt, out.min_value_grad, out.arg_value_grad);
    if (i < f.count) {
        // Tail nodes: run the reference on an offset view and merge. Tail
        // indices exceed all vector indices, so strict comparisons keep the
        // first-occurrence tie rule.
        FieldSamples ft = f;
        ft.count = f.count - i;
        ft.value = f.value + i;
        for (int a = 0; a < k; ++a) ft.grad[a] = f.grad[a] + i;
        for (int m = 0; m < nh; ++m) ft.hess[m] = f.hess[m] + i;
        FieldSamples gt;
        if (g) {
            gt = *g;
            gt.count = ft.count;
            gt.value = g->value + i;
            for (int a = 0; a < k; ++a) gt.grad[a] = g->grad[a] + i;
            for (int m = 0; m < nh; ++m) gt.hess[m] = g->hess[m] + i;
        }
        PairMetrics t;
        scalar::pair_metrics(ft, g ? &gt : nullptr, net_coef, net_count, t);
        if (t.sup_value > out.sup_value) { out.sup_value = t.sup_value; out.arg_value = t.arg_value + i; }
        if (t.sup_grad > out.sup_grad) { out.sup_grad = t.sup_grad; out.arg_grad = t.arg_grad + i; }
        if (t.sup_dir2 > out.sup_dir2) { out.sup_dir2 = t.sup_dir2; out.arg_dir2 = t.arg_dir2 + i; }
        if (t.min_full < out.min_full) { out.min_full = t.min_full; out.arg_full = t.arg_full + i; }
        if (t.min_value_grad < out.min_value_grad) {
            out.min_value_grad = t.min_value_grad;
            out.arg_value_grad = t.arg_value_grad + i;
        }
    }
}

#else

bool compiled() { return false; }
void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out) {
    scalar::dot_rows(rows, nrows, dim, v, out);
}
void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out) {
    scalar::quantize(vals, n, lo, scale, max_index, out);
}
double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts) {
    return scalar::slab_overlap_counts(f, g, n, delta, rho, clip_lo, clip_hi, counts);
}
void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out) {
    scalar::pair_metrics(f, g, net_coef, net_count, out);
}

#endif

}  // namespace cinelab::simd::avx2
