#include <algorithm>
#include <cmath>

#include "cinelab/simd.hpp"

namespace cinelab::simd::scalar {

void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out) {
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* row = rows + r * dim;
        double s = 0.0;
        for (std::size_t a = 0; a < dim; ++a) s += row[a] * v[a];
        out[r] = s;
    }
}

void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out) {
    const double top = static_cast<double>(max_index);
    for (std::size_t i = 0; i < n; ++i) {
        double q = std::floor((vals[i] - lo) * scale);
        q = std::min(std::max(q, 0.0), top);
        out[i] = static_cast<std::uint32_t>(q);
    }
}

double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double lo = std::max(f[i], g[i]) - delta;
        double hi = std::min(f[i], g[i]) + delta;
        lo = std::max(lo, clip_lo);
        hi = std::min(hi, clip_hi);
        double jmin = std::ceil(lo / rho - 0.5);
        double jmax = std::floor(hi / rho - 0.5);
        double c = std::max(jmax - jmin + 1.0, 0.0);
        if (counts) counts[i] = c;
        total += c;
    }
    return total;
}

void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out) {
    const int k = f.dim;
    const int nh = k * (k + 1) / 2;
    out = PairMetrics{};
    for (std::size_t i = 0; i < f.count; ++i) {
        double v = f.value[i];
        double gr[kMaxParam];
        double hs[kMaxHess];
        if (g) v = v - g->value[i];
        double gsq = 0.0;
        for (int a = 0; a < k; ++a) {
            gr[a] = g ? f.grad[a][i] - g->grad[a][i] : f.grad[a][i];
            gsq = gsq + gr[a] * gr[a];
        }
        for (int m = 0; m < nh; ++m) hs[m] = g ? f.hess[m][i] - g->hess[m][i] : f.hess[m][i];
        double av = std::fabs(v);
        double gn = std::sqrt(gsq);
        double qmax = 0.0;
        double qmin = std::numeric_limits<double>::infinity();
        for (std::size_t d = 0; d < net_count; ++d) {
            const double* c = net_coef + d * nh;
            double q = 0.0;
            for (int m = 0; m < nh; ++m) q = q + c[m] * hs[m];
            q = std::fabs(q);
            qmax = std::max(qmax, q);
            qmin = std::min(qmin, q);
        }
        if (av > out.sup_value) {
            out.sup_value = av;
            out.arg_value = i;
        }
        if (gn > out.sup_grad) {
            out.sup_grad = gn;
            out.arg_grad = i;
        }
        if (qmax > out.sup_dir2) {
            out.sup_dir2 = qmax;
            out.arg_dir2 = i;
        }
        double vg = av + gn;
        double full = vg + qmin;
        if (full < out.min_full) {
            out.min_full = full;
            out.arg_full = i;
        }
        if (vg < out.min_value_grad) {
            out.min_value_grad = vg;
            out.arg_value_grad = i;
        }
    }
}

}  // namespace cinelab::simd::scalar
