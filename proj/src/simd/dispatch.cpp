#include <atomic>
#include <cstdlib>
#include <cstring>

#include "cinelab/simd.hpp"

namespace cinelab::simd {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() {
    Isa best = isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
    const char* env = std::getenv("CINELAB_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (env && std::strcmp(env, "avx2") == 0 && isa_available(Isa::avx2)) return Isa::avx2;
    return best;
}

std::atomic<int>& current() {
    static std::atomic<int> isa{static_cast<int>(detect())};
    return isa;
}

}  // namespace

bool isa_available(Isa isa) {
    if (isa == Isa::scalar) return true;
    static const bool avx2_ok = avx2::compiled() && cpu_has_avx2();
    return avx2_ok;
}

Isa active_isa() { return static_cast<Isa>(current().load()); }

void force_isa(Isa isa) {
    if (!isa_available(isa)) fail(ErrorCode::unsupported, std::string("instruction set not available: ") + isa_name(isa));
    current().store(static_cast<int>(isa));
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void dot_rows(const double* rows, std::size_t nrows, std::size_t dim, const double* v, double* out) {
    if (active_isa() == Isa::avx2) return avx2::dot_rows(rows, nrows, dim, v, out);
    scalar::dot_rows(rows, nrows, dim, v, out);
}

void quantize(const double* vals, std::size_t n, double lo, double scale, std::uint32_t max_index,
              std::uint32_t* out) {
    if (active_isa() == Isa::avx2) return avx2::quantize(vals, n, lo, scale, max_index, out);
    scalar::quantize(vals, n, lo, scale, max_index, out);
}

double slab_overlap_counts(const double* f, const double* g, std::size_t n, double delta, double rho,
                           double clip_lo, double clip_hi, double* counts) {
    if (active_isa() == Isa::avx2) return avx2::slab_overlap_counts(f, g, n, delta, rho, clip_lo, clip_hi, counts);
    return scalar::slab_overlap_counts(f, g, n, delta, rho, clip_lo, clip_hi, counts);
}

void pair_metrics(const FieldSamples& f, const FieldSamples* g, const double* net_coef,
                  std::size_t net_count, PairMetrics& out) {
    if (active_isa() == Isa::avx2) return avx2::pair_metrics(f, g, net_coef, net_count, out);
    scalar::pair_metrics(f, g, net_coef, net_count, out);
}

}  // namespace cinelab::simd
