#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cinelab {

// Parameter dimension k = n-1 is at most 3 (n <= 4), ambient dimension at most 5.
inline constexpr int kMaxParam = 3;
inline constexpr int kMaxAmbient = 5;
inline constexpr int kMaxHess = kMaxParam * (kMaxParam + 1) / 2;

enum class ErrorCode {
    invalid_parameter,
    degenerate_chart,
    non_transverse,
    unsupported,
    domain_mismatch,
    invalid_scale,
    too_fine,
    too_coarse,
    cinematic_violation,
    flow_degenerate,
    insufficient_scales,
    invalid_family,
    out_of_regime,
    misaligned_cell,
    io_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Axis-aligned box in R^k.
struct Box {
    int dim = 0;
    std::array<double, kMaxParam> lo{};
    std::array<double, kMaxParam> hi{};

    static Box unit(int k);
    static Box make(std::span<const double> lo, std::span<const double> hi);
    double side(int a) const { return hi[a] - lo[a]; }
    double diameter() const;
    bool contains(std::span<const double> x, double tol = 0.0) const;
    bool contains(const Box& other, double tol = 1e-12) const;
    bool operator==(const Box& o) const;
    Box dilated(double factor) const;  // same center, sides scaled
    Box clipped(const Box& bounds) const;
};

// Packed symmetric Hessian index: (0,0),(0,1),..,(0,k-1),(1,1),...
constexpr int hess_index(int i, int j, int k) {
    if (i > j) {
        int t = i;
        i = j;
        j = t;
    }
    return i * k - i * (i - 1) / 2 + (j - i);
}

// Value, gradient and packed Hessian of a scalar function at a point.
struct Jet {
    int dim = 0;
    double value = 0.0;
    std::array<double, kMaxParam> grad{};
    std::array<double, kMaxHess> hess{};

    double grad_norm() const;
    double dir2(std::span<const double> xi) const;  // xi^T H xi
    double h2(int i, int j) const { return hess[hess_index(i, j, dim)]; }
    double hess_spectral_norm() const;
};

// Thread count used by every parallel loop (default: hardware concurrency).
void set_num_threads(int n);
int num_threads();

// Runs body(i) for i in [0, n). Chunking is static so results written to
// per-index slots are independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Deterministic random stream; conversions avoid implementation-defined
// std distributions so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next_u64() { return engine_(); }
    double uniform();  // [0,1)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t below(std::uint64_t n);  // [0,n)
    double normal();

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cinelab
