#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "cinelab/common.hpp"

// Data-parallel inner loops. Every kernel has a scalar reference in
// cinelab::simd::scalar and, on x86-64, an AVX2 variant in cinelab::simd::avx2.
// The unqualified entry points dispatch at runtime to the best available
// variant; CINELAB_SIMD=scalar|avx2 overrides the choice.
namespace cinelab::simd {

enum class Isa { scalar, avx2 };

bool isa_available(Isa isa);
Isa active_isa();
void force_isa(Isa isa);  // throws unsupported when unavailable
const char* isa_name(Isa isa);

// Structure-of-arrays samples of a scalar field on a node set.
struct FieldSamples {
    int dim = 0;
    std::size_t count = 0;
    const double* value = nullptr;
    const double* grad[kMaxParam] = {nullptr, nullptr, nullptr};
    const double* hess[kMaxHess] = {nullptr, nullptr, nullptr, nullptr, nullptr, nullptr};
};

// Reductions over the nodes of h = f - g (or h = f when g is absent).
// Ties resolve to the lowest node index.
struct PairMetrics {
    double sup_value = 0.0;
    std::size_t arg_value = 0;
    double sup_grad = 0.0;
    std::size_t arg_grad = 0;
    double sup_dir2 = 0.0;  // max over nodes and net of |xi^T H xi|
    std::size_t arg_dir2 = 0;
    double min_full = std::numeric_limits<double>::infinity();  // |h|+|grad h|+min_xi|xi^T H xi|
    std::size_t arg_full = 0;
    double min_value_grad = std::numeric_limits<double>::infinity();  // |h|+|grad h|
    std::size_t arg_value_grad = 0;
};

inline constexpr double kNoClipLo = -std::numeric_limits<double>::infinity();
inline constexpr double kNoClipHi = std::numeric_limits<double>::infinity();

// out[r] = <rows[r*dim .. r*dim+dim), v>
void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out);

// out[i] = clamp(floor((vals[i]-lo)*scale), 0, max_index)
void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out);

// Per column i, the number of lattice centers (j+1/2)*rho inside
// [max(f,g)-delta, min(f,g)+delta] intersected with [clip_lo, clip_hi].
// Writes counts (may be null) and returns the total.
double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts);

// net_coef holds net_count rows of packed quadratic-form coefficients
// (xi_i xi_j, off-diagonals doubled) matching the packed Hessian layout.
void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out);

namespace scalar {
void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out);
void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out);
double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts);
void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out);
}  // namespace scalar

namespace avx2 {
bool compiled();
void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out);
void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out);
double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts);
void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out);
}  // namespace avx2

}  // namespace cinelab::simd
