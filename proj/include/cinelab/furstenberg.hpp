#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cinelab/dyadic.hpp"
#include "cinelab/fields.hpp"
#include "cinelab/intersect.hpp"

namespace cinelab {

struct ConfigParams {
    double delta = 0.0;  // must be 2^-m
    double s = 0.5;
    double t = 0.5;
    double epsilon = 0.05;
};

// Spread of a function family under the C^2 metric, over balls centered at
// members with every radius at which the count changes (r >= delta).
struct FamilySpread {
    double C = 0.0;
    std::size_t witness = 0;
    double witness_radius = 0.0;
    std::size_t witness_count = 0;
};

FamilySpread family_spread(const std::vector<std::vector<double>>& distances, double delta, double t);

// Pairwise C^2 distances, symmetric with zero diagonal.
std::vector<std::vector<double>> c2_distance_matrix(const FunctionFamily& family, int grid_nodes = kDefaultGridNodes);

struct Configuration {
    FunctionFamily family;
    std::vector<DyadicSet> sets;  // E(f), cells of [0,1]^n at scale delta
    ConfigParams params;
    int n = 0;
    std::size_t M = 0;
    std::vector<std::vector<double>> distances;
    double min_distance = 0.0;
    bool separated = false;
    FamilySpread family_spread;
    std::vector<SpreadReport> set_spread;
    double max_set_spread = 0.0;
    // delta^-eps, and the same threshold with the documented sampling factors
    // absorbed: 2^t for member-centered family balls, 2^{(n-2+s)+n} for the
    // dyadic ball sampling of E(f).
    double threshold = 0.0;
    double family_threshold = 0.0;
    double set_threshold = 0.0;
    bool strict_valid = false;
    bool valid = false;
    std::vector<std::string> notes;
};

struct BuildOptions {
    bool trim = true;
    int grid_nodes = kDefaultGridNodes;
};

// Validates a configuration; throws misaligned-cell for a cell off its graph.
Configuration build_configuration(const FunctionFamily& family, std::vector<DyadicSet> sets, const ConfigParams& params,
                                  const BuildOptions& opts = {});

// Does the cell (n coordinates at scale 2^-m) meet f^delta?
bool cell_meets_slab(const ScalarField& f, const Cell& cell, int m, double sup_grad_bound);

struct EnergyOptions {
    double resolution = 0.0;  // 0 means delta/8
    double epsilon = 0.05;
    double t = 0.5;           // spread exponent for the budget
    bool pairwise = true;
    int grid_nodes = kDefaultGridNodes;
};

struct EnergyReport {
    double delta = 0.0;
    double resolution = 0.0;
    double lhs = 0.0;           // quadrature of the squared counting function
    double diagonal = 0.0;      // sum_f L(f^delta)
    double off_diagonal = 0.0;  // sum_{f != g} L(f^delta cap g^delta)
    double pairwise = 0.0;      // diagonal + off_diagonal
    double discrepancy = 0.0;   // |lhs - pairwise| / lhs
    double rhs = 0.0;           // delta^{-2 eps} |F|^2 delta^{1+t}
    bool within_budget = false;
    double min_distance = 0.0;
    std::map<int, std::size_t> annulus;  // i -> number of ordered pairs with d in (2^-(i+1), 2^-i]
    std::vector<std::map<int, std::size_t>> annulus_per_member;
    bool annulus_ok = true;  // every i <= log2(1/delta)
};

EnergyReport l2_energy(const FunctionFamily& family, double delta, const EnergyOptions& opts = {});

struct CsBound {
    double value = 0.0;
    bool degenerate = false;
};

// (sum_i L(A_i))^2 / sum_ij L(A_i cap A_j)
CsBound cs_union_lower_bound(const std::vector<double>& measures, const std::vector<std::vector<double>>& overlaps);

struct IncidenceReport {
    std::size_t union_count = 0;  // |union E(f)|_delta
    double bound = 0.0;           // delta^{16 eps - t - (n-2+s)}
    bool passed = false;
    double neighborhood_sum = 0.0;    // sum_f L(E^delta(f))
    double overlap_sum = 0.0;         // sum_{f,g} L(E^delta(f) cap E^delta(g))
    double off_diagonal_sum = 0.0;
    double cs_bound = 0.0;
    bool cs_degenerate = false;
    double union_measure = 0.0;       // L(union E^delta(f))
    bool cs_consistent = false;       // cs_bound <= union_measure
    double pair_budget = 0.0;         // delta^{-6 eps} delta^{2-t-s}
    bool within_pair_budget = false;
    bool delta0_condition = false;    // 2 log(1/delta) < delta^{-eps}/2 with unit implicit constant
    std::vector<std::string> warnings;
};

IncidenceReport incidence_lower_bound_check(const Configuration& config, double epsilon);

// delta-neighborhood of a cell set as the union of its 3^n neighbor blocks.
DyadicSet cell_neighborhood(const DyadicSet& set);

struct OverlapReport {
    double overlap = 0.0;  // L(E^delta(f) cap E^delta(g))
    double t = 0.0;
    double bound = 0.0;    // delta^{-3 eps} delta^2 / t^s
    double ratio = 0.0;
    SpreadReport projected;  // P_{E(f)} at exponent n-2+s
    // delta^{-3 eps} with the dyadic sampling factor 2^{(n-2+s)+(n-1)} absorbed
    double projected_threshold = 0.0;
    bool projected_ok = false;
};

OverlapReport neighborhood_overlap(const Configuration& config, std::size_t i, std::size_t j);

// Projection of n-dimensional cells to the first n-1 coordinates.
DyadicSet project_cells(const DyadicSet& set);

struct GenerateOptions {
    ChartSpec chart;  // defaults to sphere_slice(0.5, 3)
    int m = 8;
    double s = 0.5;
    double t = 0.5;
    double epsilon = 0.05;
    std::uint64_t seed = 0;
};

// Induced family on the chart with about delta^-t members and sets
// E(f) = lift of a planted (delta, n-2+s)-set X onto graph(f).
Configuration generate_configuration(const GenerateOptions& opts);

// Parallel horizontal planes f_i = c_i with E(f_i) = X x {c_i}: union count
// is exactly |F| |X| = delta^{-t-(n-2+s)}.
Configuration sharpness_configuration(int n, int m, double s, double t, double epsilon, std::uint64_t seed);

}  // namespace cinelab
