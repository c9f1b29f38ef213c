#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cinelab/common.hpp"

namespace cinelab {

inline constexpr int kMaxCellDim = 4;

using Cell = std::array<std::uint32_t, kMaxCellDim>;

// Finite union of dyadic cells of side 2^-m in [0,1)^k. Cells are stored as
// Morton (bit-interleaved) keys, sorted and unique, so coarsening is a right
// shift that preserves order.
class DyadicSet {
public:
    DyadicSet() = default;
    DyadicSet(int k, int m);

    static DyadicSet from_cells(int k, int m, const std::vector<Cell>& cells);
    static DyadicSet from_keys(int k, int m, std::vector<std::uint64_t> keys);  // sorts, dedupes
    // Cells containing the given points of [0,1]^k (row-major, k coordinates each).
    static DyadicSet from_points(int k, int m, const std::vector<double>& points);

    int dim() const { return k_; }
    int scale() const { return m_; }
    double delta() const;
    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    const std::vector<std::uint64_t>& keys() const { return keys_; }

    Cell cell(std::size_t i) const { return decode(keys_[i]); }
    std::vector<Cell> cells() const;
    bool contains(const Cell& c) const;
    // Per-axis inclusive index bounds; meaningless for an empty set.
    void bounding_box(Cell& lo, Cell& hi) const;

    DyadicSet coarsen(int m_coarse) const;

    std::uint64_t encode(const Cell& c) const;
    Cell decode(std::uint64_t key) const;

    bool operator==(const DyadicSet& o) const { return k_ == o.k_ && m_ == o.m_ && keys_ == o.keys_; }

private:
    int k_ = 1;
    int m_ = 0;
    std::vector<std::uint64_t> keys_;
};

// Checks k*m fits in a key and the scale caps of the generators.
void check_scale(int k, int m);

// Number of distinct parent cells at scale 2^-m_coarse (exact).
std::size_t covering_number(const DyadicSet& set, int m_coarse);

DyadicSet set_union(const DyadicSet& a, const DyadicSet& b);
DyadicSet set_union(const std::vector<DyadicSet>& sets);
DyadicSet set_intersection(const DyadicSet& a, const DyadicSet& b);

struct SpreadReport {
    double s = 0.0;
    double C = 0.0;
    std::vector<double> witness_center;  // coordinates in [0,1]^k
    double witness_radius = 0.0;
    std::size_t witness_count = 0;
    std::size_t set_size = 0;
    std::size_t balls_tested = 0;
};

// Work budget per radius for testing every grid center; past it, centers are
// spaced r/2 apart and the result can undershoot by at most a factor 2^{s+k}.
inline constexpr double kExhaustiveSpreadWork = 5e7;

// max over Euclidean balls (delta-grid centers in the bounding box, dyadic radii
// delta <= r <= 1) of |P cap B(x,r)|_delta / (r^s |P|_delta).
SpreadReport spread_constant(const DyadicSet& P, double s);

struct ExtractResult {
    DyadicSet subset;
    SpreadReport report;
};

// Top-down pigeonholing: at level l at most ceil(2^{t l}) cells survive, split
// as evenly as possible down the tree of survivors (every surviving parent
// keeps a child), children ranked by descendant count.
ExtractResult extract_spread_subset(const DyadicSet& P, double t);

// Generators. ratio must be 2^-p; each level keeps the first and last subinterval.
DyadicSet cantor_set(double ratio, int depth, int k);
DyadicSet product_set(const std::vector<DyadicSet>& factors);
DyadicSet uniform_set(int m, int k);
// Level-wise subsampling: level l keeps about 2^{s l} cells, children per
// parent balanced (floor/ceil of the average), chosen uniformly at random.
DyadicSet random_spread_set(double s, int m, int k, std::uint64_t seed);

// Binary: u32 k, u32 m, u64 count, then count*k little-endian u32 coordinates.
void write_binary(const DyadicSet& set, std::ostream& os);
DyadicSet read_binary(std::istream& is);
void write_binary_file(const DyadicSet& set, const std::string& path);
DyadicSet read_binary_file(const std::string& path);

}  // namespace cinelab
