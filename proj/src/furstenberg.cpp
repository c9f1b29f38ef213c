#include "cinelab/furstenberg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cinelab {

namespace {

std::string cell_string(const Cell& c, int n) {
    std::string s = "(";
    for (int a = 0; a < n; ++a) {
        if (a) s += ",";
        s += std::to_string(c[a]);
    }
    return s + ")";
}

int exponent_of(double delta) {
    int e = 0;
    double mant = std::frexp(delta, &e);
    if (mant != 0.5 || 1 - e < 0) fail(ErrorCode::invalid_scale, "delta must be a power 2^-m");
    return 1 - e;
}

}  // namespace

FamilySpread family_spread(const std::vector<std::vector<double>>& distances, double delta, double t) {
    const std::size_t N = distances.size();
    if (N == 0) fail(ErrorCode::invalid_family, "empty family");
    FamilySpread best;
    best.C = -1.0;
    std::vector<double> d;
    for (std::size_t i = 0; i < N; ++i) {
        d = distances[i];
        std::sort(d.begin(), d.end());
        for (std::size_t q = 0; q < N; ++q) {
            if (q + 1 < N && d[q + 1] == d[q]) continue;
            const double r = std::max(d[q], delta);
            std::size_t count = q + 1;
            // Everything within delta shares the r = delta ball.
            if (d[q] < delta) {
                while (count < N && d[count] <= delta) ++count;
                if (count - 1 != q) continue;
            }
            double C = static_cast<double>(count) / (std::pow(r, t) * static_cast<double>(N));
            if (C > best.C) {
                best.C = C;
                best.witness = i;
                best.witness_radius = r;
                best.witness_count = count;
            }
        }
    }
    return best;
}

std::vector<std::vector<double>> c2_distance_matrix(const FunctionFamily& family, int grid_nodes) {
    const std::size_t N = family.size();
    std::vector<SampledField> samples(N);
    parallel_for(N, [&](std::size_t i) { samples[i] = sample_field(family.members[i], family.domain, grid_nodes); });
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) pairs.emplace_back(i, j);
    std::vector<double> vals(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        auto [i, j] = pairs[p];
        vals[p] = c2_distance_sampled(family.members[i], family.members[j], samples[i], &samples[j]).total;
    });
    std::vector<std::vector<double>> d(N, std::vector<double>(N, 0.0));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        d[pairs[p].first][pairs[p].second] = vals[p];
        d[pairs[p].second][pairs[p].first] = vals[p];
    }
    return d;
}

bool cell_meets_slab(const ScalarField& f, const Cell& cell, int m, double sup_grad_bound) {
    const int k = f.dim();
    const double delta = std::ldexp(1.0, -m);
    std::array<double, kMaxParam> c{};
    for (int a = 0; a < k; ++a) c[a] = (static_cast<double>(cell[a]) + 0.5) * delta;
    const double v = f.value(std::span<const double>(c.data(), k));
    const double ylo = static_cast<double>(cell[k]) * delta, yhi = ylo + delta;
    const double gap = v < ylo ? ylo - v : (v > yhi ? v - yhi : 0.0);
    const double r = 0.5 * delta * std::sqrt(static_cast<double>(k));
    return gap <= delta + sup_grad_bound * r;
}

Configuration build_configuration(const FunctionFamily& family, std::vector<DyadicSet> sets, const ConfigParams& params,
                                  const BuildOptions& opts) {
    if (family.size() == 0) fail(ErrorCode::invalid_family, "empty family");
    if (sets.size() != family.size()) fail(ErrorCode::invalid_parameter, "one set per family member is required");
    const int m = exponent_of(params.delta);
    const int k = family.domain.dim;
    if (!(family.domain == Box::unit(k))) fail(ErrorCode::domain_mismatch, "family must live on the unit cube");
    const int n = k + 1;
    if (!(params.s > 0.0 && params.s <= 1.0 && params.t > 0.0 && params.t <= 1.0))
        fail(ErrorCode::invalid_parameter, "s and t must lie in (0,1]");
    for (const auto& s : sets) {
        if (s.dim() != n) fail(ErrorCode::invalid_parameter, "sets must have dimension n");
        if (s.scale() != m) fail(ErrorCode::invalid_scale, "sets must live at scale delta");
        if (s.empty()) fail(ErrorCode::invalid_parameter, "empty set E(f)");
    }

    Configuration cfg;
    cfg.family = family;
    cfg.params = params;
    cfg.n = n;

    std::vector<double> gbound(family.size());
    parallel_for(family.size(), [&](std::size_t i) {
        NormEstimate ne = c2_norm(family.members[i], 33);
        gbound[i] = 1.05 * ne.sup_grad + ne.sup_dir2 * params.delta + ne.uncertainty;
    });
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t q = 0; q < sets[i].size(); ++q) {
            Cell c = sets[i].cell(q);
            if (!cell_meets_slab(family.members[i], c, m, gbound[i]))
                fail(ErrorCode::misaligned_cell,
                     "member " + std::to_string(i) + " cell " + cell_string(c, n) + " misses the vertical neighborhood");
        }
    }

    std::size_t M = sets[0].size();
    for (const auto& s : sets) M = std::min(M, s.size());
    for (auto& s : sets) {
        if (s.size() == M) continue;
        if (!opts.trim) fail(ErrorCode::invalid_parameter, "sets differ in cardinality");
        std::vector<std::uint64_t> keys(s.keys().begin(), s.keys().begin() + static_cast<std::ptrdiff_t>(M));
        s = DyadicSet::from_keys(n, m, std::move(keys));
    }
    cfg.M = M;
    cfg.sets = std::move(sets);

    cfg.distances = c2_distance_matrix(family, opts.grid_nodes);
    cfg.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.size(); ++i)
        for (std::size_t j = i + 1; j < family.size(); ++j) cfg.min_distance = std::min(cfg.min_distance, cfg.distances[i][j]);
    if (family.size() == 1) cfg.min_distance = 0.0;
    cfg.separated = family.size() == 1 || cfg.min_distance >= params.delta;

    const double se = static_cast<double>(n) - 2.0 + params.s;
    cfg.family_spread = family_spread(cfg.distances, params.delta, params.t);
    cfg.set_spread.resize(cfg.sets.size());
    for (std::size_t i = 0; i < cfg.sets.size(); ++i) cfg.set_spread[i] = spread_constant(cfg.sets[i], se);
    for (const auto& r : cfg.set_spread) cfg.max_set_spread = std::max(cfg.max_set_spread, r.C);

    cfg.threshold = std::pow(params.delta, -params.epsilon);
    cfg.family_threshold = cfg.threshold * std::pow(2.0, params.t);
    cfg.set_threshold = cfg.threshold * std::pow(2.0, se + n);
    cfg.strict_valid = cfg.separated && cfg.family_spread.C <= cfg.threshold && cfg.max_set_spread <= cfg.threshold;
    cfg.valid = cfg.separated && cfg.family_spread.C <= cfg.family_threshold && cfg.max_set_spread <= cfg.set_threshold;

    char buf[256];
    if (!cfg.separated) {
        std::snprintf(buf, sizeof buf, "family not delta-separated: min C2 distance %.6g", cfg.min_distance);
        cfg.notes.emplace_back(buf);
    }
    if (cfg.family_spread.C > cfg.family_threshold) {
        std::snprintf(buf, sizeof buf, "family spread %.6g exceeds %.6g: ball at member %zu radius %.6g holds %zu",
                      cfg.family_spread.C, cfg.family_threshold, cfg.family_spread.witness,
                      cfg.family_spread.witness_radius, cfg.family_spread.witness_count);
        cfg.notes.emplace_back(buf);
    }
    for (std::size_t i = 0; i < cfg.set_spread.size(); ++i) {
        const auto& r = cfg.set_spread[i];
        if (r.C <= cfg.set_threshold) continue;
        std::string c;
        for (double v : r.witness_center) c += (c.empty() ? "" : ",") + std::to_string(v);
        std::snprintf(buf, sizeof buf, "set %zu spread %.6g exceeds %.6g: ball radius %.6g holds %zu at ", i, r.C,
                      cfg.set_threshold, r.witness_radius, r.witness_count);
        cfg.notes.emplace_back(std::string(buf) + "(" + c + ")");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// L2 energy

EnergyReport l2_energy(const FunctionFamily& family, double delta, const EnergyOptions& opts) {
    if (!(delta > 0.0)) fail(ErrorCode::invalid_scale, "delta must be positive");
    const double rho = opts.resolution > 0.0 ? opts.resolution : delta / 8.0;
    if (rho > delta / 8.0 * (1.0 + 1e-12)) fail(ErrorCode::too_coarse, "resolution must not exceed delta/8");
    const std::size_t N = family.size();
    const int k = family.domain.dim;
    const Box& D = family.domain;

    EnergyReport rep;
    rep.delta = delta;
    rep.resolution = rho;
    auto dist = c2_distance_matrix(family, opts.grid_nodes);
    rep.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) rep.min_distance = std::min(rep.min_distance, dist[i][j]);
    if (N > 1 && rep.min_distance < delta) fail(ErrorCode::invalid_family, "family is not delta-separated");

    const int top = static_cast<int>(std::floor(std::log2(1.0 / delta) + 1e-12));
    rep.annulus_per_member.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            int e = 0;
            double mant = std::frexp(dist[i][j], &e);
            // d in (2^-(b+1), 2^-b]  <=>  b = floor(-log2 d)
            int b = mant == 0.5 ? 1 - e : -e;
            rep.annulus_per_member[i][b] += 1;
            rep.annulus[b] += 1;
            if (b > top) rep.annulus_ok = false;
        }

    std::array<std::int64_t, kMaxParam> nc{};
    std::size_t columns = 1;
    for (int a = 0; a < k; ++a) {
        double cols = D.side(a) / rho;
        nc[a] = static_cast<std::int64_t>(std::llround(cols));
        if (nc[a] < 1 || std::fabs(cols - static_cast<double>(nc[a])) > 1e-9 * std::max(1.0, cols))
            fail(ErrorCode::invalid_parameter, "domain sides must be multiples of the resolution");
        columns *= static_cast<std::size_t>(nc[a]);
    }
    const std::size_t rows = columns / static_cast<std::size_t>(nc[0]);
    const bool induced = family.origin && family.origin->chart;
    std::vector<double> row_sq(rows, 0.0), row_diag(rows, 0.0);
    parallel_for(rows, [&](std::size_t rid) {
        const std::size_t len = static_cast<std::size_t>(nc[0]);
        std::vector<double> xs(len * k), vals(N * len);
        std::size_t t = rid;
        for (std::size_t i = 0; i < len; ++i) xs[i * k] = D.lo[0] + (static_cast<double>(i) + 0.5) * rho;
        for (int a = 1; a < k; ++a) {
            double v = D.lo[a] + (static_cast<double>(t % nc[a]) + 0.5) * rho;
            t /= nc[a];
            for (std::size_t i = 0; i < len; ++i) xs[i * k + a] = v;
        }
        if (induced) {
            const auto& chart = *family.origin->chart;
            const int d = chart.ambient_dim();
            for (std::size_t i = 0; i < len; ++i) {
                ChartJet cj = chart.jet(std::span<const double>(xs.data() + i * k, k), 0);
                for (std::size_t q = 0; q < N; ++q) {
                    const ScalarField& fq = family.members[q];
                    const auto& z = fq.induced_z();
                    double v = 0.0;
                    for (int a = 0; a < d; ++a) v += cj.point[a] * z[a];
                    vals[q * len + i] = fq.induced_scale() * v + fq.induced_shift();
                }
            }
        } else {
            for (std::size_t q = 0; q < N; ++q) family.members[q].values(xs.data(), len, vals.data() + q * len);
        }
        // Squared counting function on the vertical lattice (j + 1/2) rho via sorted events.
        std::vector<std::pair<std::int64_t, int>> ev(2 * N);
        double sq = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            std::size_t ne = 0;
            for (std::size_t q = 0; q < N; ++q) {
                const double v = vals[q * len + i];
                const double lo = v - delta, hi = v + delta;
                std::int64_t jmin = static_cast<std::int64_t>(std::ceil(lo / rho - 0.5));
                std::int64_t jmax = static_cast<std::int64_t>(std::floor(hi / rho - 0.5));
                if (jmax < jmin) continue;
                ev[ne++] = {jmin, +1};
                ev[ne++] = {jmax + 1, -1};
                diag += static_cast<double>(jmax - jmin + 1);
            }
            std::sort(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(ne));
            std::int64_t cur = 0;
            std::int64_t last = 0;
            for (std::size_t e = 0; e < ne; ++e) {
                if (cur > 0) sq += static_cast<double>(cur * cur) * static_cast<double>(ev[e].first - last);
                cur += ev[e].second;
                last = ev[e].first;
            }
        }
        row_sq[rid] = sq;
        row_diag[rid] = diag;
    });
    const double cell_volume = std::pow(rho, k + 1);
    double sq = 0.0, diag = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        sq += row_sq[r];
        diag += row_diag[r];
    }
    rep.lhs = sq * cell_volume;
    rep.diagonal = diag * cell_volume;
    if (opts.pairwise) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = i + 1; j < N; ++j) pairs.emplace_back(i, j);
        std::vector<double> meas(pairs.size());
        IntersectionOptions io;
        io.resolution = rho;
        io.compute_projection = false;
        for (std::size_t p = 0; p < pairs.size(); ++p)
            meas[p] = intersection_measure(family.members[pairs[p].first], family.members[pairs[p].second], delta, io).measure;
        double off = 0.0;
        for (double v : meas) off += 2.0 * v;
        rep.off_diagonal = off;
        rep.pairwise = rep.diagonal + rep.off_diagonal;
        rep.discrepancy = rep.lhs > 0.0 ? std::fabs(rep.lhs - rep.pairwise) / rep.lhs : 0.0;
    }
    rep.rhs = std::pow(delta, -2.0 * opts.epsilon) * static_cast<double>(N) * static_cast<double>(N) *
              std::pow(delta, 1.0 + opts.t);
    rep.within_budget = rep.lhs <= rep.rhs;
    return rep;
}

CsBound cs_union_lower_bound(const std::vector<double>& measures, const std::vector<std::vector<double>>& overlaps) {
    const std::size_t N = measures.size();
    if (overlaps.size() != N) fail(ErrorCode::invalid_parameter, "overlap matrix size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        if (overlaps[i].size() != N) fail(ErrorCode::invalid_parameter, "overlap matrix must be square");
        const double tol = 1e-9 * std::max(1.0, std::fabs(measures[i]));
        if (std::fabs(overlaps[i][i] - measures[i]) > tol)
            fail(ErrorCode::invalid_parameter, "overlap diagonal must equal the measures");
        for (std::size_t j = 0; j < N; ++j) {
            if (std::fabs(overlaps[i][j] - overlaps[j][i]) > 1e-9 * std::max(1.0, std::fabs(overlaps[i][j])))
                fail(ErrorCode::invalid_parameter, "overlap matrix must be symmetric");
            den += overlaps[i][j];
        }
        num += measures[i];
    }
    CsBound b;
    if (!(den > 0.0)) {
        b.degenerate = true;
        return b;
    }
    b.value = num * num / den;
    return b;
}

DyadicSet cell_neighborhood(const DyadicSet& set) {
    const int n = set.dim();
    const std::int64_t side = std::int64_t{1} << set.scale();
    int offsets = 1;
    for (int a = 0; a < n; ++a) offsets *= 3;
    std::vector<std::uint64_t> keys;
    keys.reserve(set.size() * static_cast<std::size_t>(offsets));
    for (std::size_t i = 0; i < set.size(); ++i) {
        Cell c = set.cell(i);
        for (int o = 0; o < offsets; ++o) {
            int t = o;
            Cell d{};
            bool ok = true;
            for (int a = 0; a < n; ++a) {
                std::int64_t v = static_cast<std::int64_t>(c[a]) + (t % 3) - 1;
                t /= 3;
                if (v < 0 || v >= side) ok = false;
                d[a] = static_cast<std::uint32_t>(v);
            }
            if (ok) keys.push_back(set.encode(d));
        }
    }
    return DyadicSet::from_keys(n, set.scale(), std::move(keys));
}

DyadicSet project_cells(const DyadicSet& set) {
    if (set.dim() < 2) fail(ErrorCode::invalid_parameter, "projection needs dimension >= 2");
    std::vector<Cell> cells;
    cells.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        Cell c = set.cell(i);
        c[set.dim() - 1] = 0;
        cells.push_back(c);
    }
    return DyadicSet::from_cells(set.dim() - 1, set.scale(), cells);
}

IncidenceReport incidence_lower_bound_check(const Configuration& config, double epsilon) {
    const auto& p = config.params;
    if (p.t > p.s) fail(ErrorCode::out_of_regime, "the incidence bound assumes t <= s");
    if (!(p.t > 0.0 && p.s <= 1.0)) fail(ErrorCode::out_of_regime, "the incidence bound assumes 0 < t <= s <= 1");
    const int n = config.n;
    const double delta = p.delta;
    const double se = n - 2.0 + p.s;
    IncidenceReport rep;
    rep.union_count = set_union(config.sets).size();
    rep.bound = std::pow(delta, 16.0 * epsilon - p.t - se);
    rep.passed = static_cast<double>(rep.union_count) >= rep.bound;

    const std::size_t N = config.sets.size();
    std::vector<DyadicSet> nb(N);
    parallel_for(N, [&](std::size_t i) { nb[i] = cell_neighborhood(config.sets[i]); });
    const double vol = std::pow(delta, n);
    std::vector<double> meas(N);
    for (std::size_t i = 0; i < N; ++i) meas[i] = static_cast<double>(nb[i].size()) * vol;
    std::vector<std::vector<double>> ov(N, std::vector<double>(N, 0.0));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) pairs.emplace_back(i, j);
    std::vector<double> pv(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t q) {
        const auto& a = nb[pairs[q].first].keys();
        const auto& b = nb[pairs[q].second].keys();
        std::size_t c = 0;
        auto ia = a.begin();
        auto ib = b.begin();
        while (ia != a.end() && ib != b.end()) {
            if (*ia < *ib) ++ia;
            else if (*ib < *ia) ++ib;
            else {
                ++c;
                ++ia;
                ++ib;
            }
        }
        pv[q] = static_cast<double>(c) * vol;
    });
    for (std::size_t i = 0; i < N; ++i) ov[i][i] = meas[i];
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        ov[pairs[q].first][pairs[q].second] = pv[q];
        ov[pairs[q].second][pairs[q].first] = pv[q];
        rep.off_diagonal_sum += 2.0 * pv[q];
    }
    for (double v : meas) rep.neighborhood_sum += v;
    rep.overlap_sum = rep.neighborhood_sum + rep.off_diagonal_sum;
    CsBound cs = cs_union_lower_bound(meas, ov);
    rep.cs_bound = cs.value;
    rep.cs_degenerate = cs.degenerate;
    rep.union_measure = static_cast<double>(set_union(nb).size()) * vol;
    rep.cs_consistent = rep.cs_bound <= rep.union_measure * (1.0 + 1e-12);
    rep.pair_budget = std::pow(delta, -6.0 * epsilon) * std::pow(delta, 2.0 - p.t - p.s);
    rep.within_pair_budget = rep.overlap_sum <= rep.pair_budget;
    rep.delta0_condition = 2.0 * std::log(1.0 / delta) < 0.5 * std::pow(delta, -epsilon);
    if (!rep.delta0_condition)
        rep.warnings.emplace_back("delta exceeds the threshold scale tied to epsilon (2 log(1/delta) >= delta^-eps / 2)");
    if (!config.valid) rep.warnings.emplace_back("configuration failed validation");
    return rep;
}

OverlapReport neighborhood_overlap(const Configuration& config, std::size_t i, std::size_t j) {
    const std::size_t N = config.sets.size();
    if (i >= N || j >= N) fail(ErrorCode::invalid_parameter, "member index out of range");
    if (i == j) fail(ErrorCode::invalid_parameter, "overlap needs two distinct members");
    const auto& p = config.params;
    const int n = config.n;
    OverlapReport rep;
    DyadicSet a = cell_neighborhood(config.sets[i]);
    DyadicSet b = cell_neighborhood(config.sets[j]);
    rep.overlap = static_cast<double>(set_intersection(a, b).size()) * std::pow(p.delta, n);
    rep.t = config.distances.empty() ? c2_distance(config.family.members[i], config.family.members[j]).total
                                     : config.distances[i][j];
    rep.bound = std::pow(p.delta, -3.0 * p.epsilon) * p.delta * p.delta / std::pow(rep.t, p.s);
    rep.ratio = rep.overlap / rep.bound;
    const double se = n - 2.0 + p.s;
    rep.projected = spread_constant(project_cells(config.sets[i]), se);
    rep.projected_threshold = std::pow(p.delta, -3.0 * p.epsilon) * std::pow(2.0, se + n - 1);
    rep.projected_ok = rep.projected.C <= rep.projected_threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

std::vector<std::vector<double>> spread_ball_points(int d, std::size_t count, Rng& rng) {
    // Max-min selection from a candidate pool keeps the points apart at every scale.
    const std::size_t pool = std::max<std::size_t>(8 * count, 64);
    std::vector<std::vector<double>> cand(pool, std::vector<double>(d));
    for (auto& c : cand) {
        double s = 0.0;
        for (auto& v : c) {
            v = rng.normal();
            s += v * v;
        }
        double r = std::pow(rng.uniform(), 1.0 / d) / std::sqrt(s);
        for (auto& v : c) v *= r;
    }
    std::vector<std::vector<double>> out;
    std::vector<double> mind(pool, std::numeric_limits<double>::infinity());
    std::size_t next = 0;
    for (std::size_t q = 0; q < count; ++q) {
        out.push_back(cand[next]);
        std::size_t best = 0;
        double bd = -1.0;
        for (std::size_t c = 0; c < pool; ++c) {
            double e = 0.0;
            for (int a = 0; a < d; ++a) e += (cand[c][a] - cand[next][a]) * (cand[c][a] - cand[next][a]);
            mind[c] = std::min(mind[c], e);
            if (mind[c] > bd) {
                bd = mind[c];
                best = c;
            }
        }
        next = best;
    }
    return out;
}

DyadicSet lift_to_graph(const ScalarField& f, const DyadicSet& X) {
    const int k = X.dim();
    const int m = X.scale();
    const double delta = X.delta();
    const double top = std::ldexp(1.0, m) - 1.0;
    std::vector<Cell> cells;
    cells.reserve(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        Cell c = X.cell(i);
        std::array<double, kMaxParam> x{};
        for (int a = 0; a < k; ++a) x[a] = (static_cast<double>(c[a]) + 0.5) * delta;
        double y = f.value(std::span<const double>(x.data(), k));
        c[k] = static_cast<std::uint32_t>(std::clamp(std::floor(y / delta), 0.0, top));
        cells.push_back(c);
    }
    return DyadicSet::from_cells(k + 1, m, cells);
}

}  // namespace

Configuration generate_configuration(const GenerateOptions& opts) {
    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::builtin(opts.chart));
    const int k = chart->param_dim();
    const int n = k + 1;
    const double delta = std::ldexp(1.0, -opts.m);
    const std::size_t count = static_cast<std::size_t>(std::max(1.0, std::round(std::pow(delta, -opts.t))));
    Rng rng(mix_seed(opts.seed, 0));
    auto Z = spread_ball_points(chart->ambient_dim(), count, rng);
    FunctionFamily fam = induced_projection_family(chart, Z);
    DyadicSet X = random_spread_set(n - 2.0 + opts.s, opts.m, k, mix_seed(opts.seed, 1));
    std::vector<DyadicSet> sets;
    for (const auto& f : fam.members) sets.push_back(lift_to_graph(f, X));
    ConfigParams p{delta, opts.s, opts.t, opts.epsilon};
    return build_configuration(fam, std::move(sets), p);
}

Configuration sharpness_configuration(int n, int m, double s, double t, double epsilon, std::uint64_t seed) {
    if (n < 2 || n > kMaxParam + 1) fail(ErrorCode::invalid_parameter, "n must lie in [2, 4]");
    const int k = n - 1;
    const double delta = std::ldexp(1.0, -m);
    DyadicSet heights = random_spread_set(t, m, 1, mix_seed(seed, 0));
    DyadicSet X = random_spread_set(n - 2.0 + s, m, k, mix_seed(seed, 1));
    std::vector<ScalarField> members;
    std::vector<DyadicSet> sets;
    const auto xcells = X.cells();
    for (std::size_t i = 0; i < heights.size(); ++i) {
        const std::uint32_t j = heights.cell(i)[0];
        members.push_back(ScalarField::constant(Box::unit(k), (static_cast<double>(j) + 0.5) * delta));
        std::vector<Cell> cells = xcells;
        for (auto& c : cells) c[k] = j;
        sets.push_back(DyadicSet::from_cells(n, m, cells));
    }
    ConfigParams p{delta, s, t, epsilon};
    return build_configuration(make_family(std::move(members)), std::move(sets), p);
}

}  // namespace cinelab
