#include "cinelab/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

namespace cinelab {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_parameter: return "invalid-parameter";
        case ErrorCode::degenerate_chart: return "degenerate-chart";
        case ErrorCode::non_transverse: return "non-transverse";
        case ErrorCode::unsupported: return "unsupported";
        case ErrorCode::domain_mismatch: return "domain-mismatch";
        case ErrorCode::invalid_scale: return "invalid-scale";
        case ErrorCode::too_fine: return "too-fine";
        case ErrorCode::too_coarse: return "too-coarse";
        case ErrorCode::cinematic_violation: return "cinematic-violation";
        case ErrorCode::flow_degenerate: return "flow-degenerate";
        case ErrorCode::insufficient_scales: return "insufficient-scales";
        case ErrorCode::invalid_family: return "invalid-family";
        case ErrorCode::out_of_regime: return "out-of-regime";
        case ErrorCode::misaligned_cell: return "misaligned-cell";
        case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

Box Box::unit(int k) {
    if (k < 1 || k > kMaxParam) fail(ErrorCode::invalid_parameter, "box dimension out of range");
    Box b;
    b.dim = k;
    for (int a = 0; a < k; ++a) {
        b.lo[a] = 0.0;
        b.hi[a] = 1.0;
    }
    return b;
}

Box Box::make(std::span<const double> lo, std::span<const double> hi) {
    if (lo.size() != hi.size() || lo.empty() || lo.size() > static_cast<std::size_t>(kMaxParam))
        fail(ErrorCode::invalid_parameter, "box corner dimensions");
    Box b;
    b.dim = static_cast<int>(lo.size());
    for (int a = 0; a < b.dim; ++a) {
        if (!(hi[a] > lo[a])) fail(ErrorCode::invalid_parameter, "empty box side");
        b.lo[a] = lo[a];
        b.hi[a] = hi[a];
    }
    return b;
}

double Box::diameter() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += side(a) * side(a);
    return std::sqrt(s);
}

bool Box::contains(std::span<const double> x, double tol) const {
    for (int a = 0; a < dim; ++a)
        if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
    return true;
}

bool Box::contains(const Box& other, double tol) const {
    if (other.dim != dim) return false;
    for (int a = 0; a < dim; ++a)
        if (other.lo[a] < lo[a] - tol || other.hi[a] > hi[a] + tol) return false;
    return true;
}

bool Box::operator==(const Box& o) const {
    if (dim != o.dim) return false;
    for (int a = 0; a < dim; ++a)
        if (lo[a] != o.lo[a] || hi[a] != o.hi[a]) return false;
    return true;
}

Box Box::dilated(double factor) const {
    Box b = *this;
    for (int a = 0; a < dim; ++a) {
        double c = 0.5 * (lo[a] + hi[a]);
        double r = 0.5 * side(a) * factor;
        b.lo[a] = c - r;
        b.hi[a] = c + r;
    }
    return b;
}

Box Box::clipped(const Box& bounds) const {
    Box b = *this;
    for (int a = 0; a < dim; ++a) {
        b.lo[a] = std::max(lo[a], bounds.lo[a]);
        b.hi[a] = std::min(hi[a], bounds.hi[a]);
    }
    return b;
}

double Jet::grad_norm() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += grad[a] * grad[a];
    return std::sqrt(s);
}

double Jet::dir2(std::span<const double> xi) const {
    double q = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) q += xi[i] * h2(i, j) * xi[j];
    return q;
}

double Jet::hess_spectral_norm() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = h2(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 0 : n); }

int num_threads() {
    int n = g_threads.load();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> errored{false};
    std::mutex err_mu;
    auto run = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n || errored.load()) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                errored.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    for (;;) {
        std::uint64_t v = engine_();
        if (v < limit) return v % n;
    }
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace cinelab
