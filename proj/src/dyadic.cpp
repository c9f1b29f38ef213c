#include "cinelab/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>

namespace cinelab {

namespace {

void check_key_capacity(int k, int m) {
    if (k < 1 || k > kMaxCellDim) fail(ErrorCode::invalid_parameter, "cell dimension must be in [1, 4]");
    if (m < 0) fail(ErrorCode::invalid_scale, "negative scale exponent");
    if (k * m > 63 || m > 31) fail(ErrorCode::too_fine, "scale 2^-" + std::to_string(m) + " too fine for dimension " + std::to_string(k));
}

std::uint64_t interleave(const Cell& c, int k, int m) {
    std::uint64_t key = 0;
    for (int b = m - 1; b >= 0; --b)
        for (int a = 0; a < k; ++a) key = (key << 1) | ((c[a] >> b) & 1u);
    return key;
}

Cell deinterleave(std::uint64_t key, int k, int m) {
    Cell c{};
    for (int b = 0; b < m; ++b)
        for (int a = k - 1; a >= 0; --a) {
            c[a] |= static_cast<std::uint32_t>(key & 1u) << b;
            key >>= 1;
        }
    return c;
}

}  // namespace

void check_scale(int k, int m) {
    check_key_capacity(k, m);
    int cap = k <= 2 ? 16 : (k == 3 ? 12 : 10);
    if (m > cap) fail(ErrorCode::too_fine, "generator scale 2^-" + std::to_string(m) + " exceeds the cap for k=" + std::to_string(k));
}

DyadicSet::DyadicSet(int k, int m) : k_(k), m_(m) { check_key_capacity(k, m); }

double DyadicSet::delta() const { return std::ldexp(1.0, -m_); }

std::uint64_t DyadicSet::encode(const Cell& c) const { return interleave(c, k_, m_); }
Cell DyadicSet::decode(std::uint64_t key) const { return deinterleave(key, k_, m_); }

DyadicSet DyadicSet::from_keys(int k, int m, std::vector<std::uint64_t> keys) {
    DyadicSet s(k, m);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (!keys.empty() && k * m < 64 && keys.back() >> (k * m) != 0) fail(ErrorCode::invalid_parameter, "cell key out of range");
    s.keys_ = std::move(keys);
    return s;
}

DyadicSet DyadicSet::from_cells(int k, int m, const std::vector<Cell>& cells) {
    check_key_capacity(k, m);
    const std::uint64_t side = std::uint64_t{1} << m;
    std::vector<std::uint64_t> keys;
    keys.reserve(cells.size());
    for (const auto& c : cells) {
        for (int a = 0; a < k; ++a)
            if (c[a] >= side) fail(ErrorCode::invalid_parameter, "cell coordinate outside [0, 2^m)");
        keys.push_back(interleave(c, k, m));
    }
    return from_keys(k, m, std::move(keys));
}

DyadicSet DyadicSet::from_points(int k, int m, const std::vector<double>& points) {
    check_key_capacity(k, m);
    const double side = std::ldexp(1.0, m);
    const std::uint32_t top = static_cast<std::uint32_t>((std::uint64_t{1} << m) - 1);
    std::vector<std::uint64_t> keys;
    keys.reserve(points.size() / k);
    for (std::size_t i = 0; i + k <= points.size(); i += k) {
        Cell c{};
        for (int a = 0; a < k; ++a) {
            double v = std::floor(points[i + a] * side);
            v = std::clamp(v, 0.0, static_cast<double>(top));
            c[a] = static_cast<std::uint32_t>(v);
        }
        keys.push_back(interleave(c, k, m));
    }
    return from_keys(k, m, std::move(keys));
}

std::vector<Cell> DyadicSet::cells() const {
    std::vector<Cell> out;
    out.reserve(keys_.size());
    for (auto key : keys_) out.push_back(decode(key));
    return out;
}

bool DyadicSet::contains(const Cell& c) const {
    const std::uint64_t side = std::uint64_t{1} << m_;
    for (int a = 0; a < k_; ++a)
        if (c[a] >= side) return false;
    return std::binary_search(keys_.begin(), keys_.end(), encode(c));
}

void DyadicSet::bounding_box(Cell& lo, Cell& hi) const {
    lo.fill(std::numeric_limits<std::uint32_t>::max());
    hi.fill(0);
    for (auto key : keys_) {
        Cell c = decode(key);
        for (int a = 0; a < k_; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
}

DyadicSet DyadicSet::coarsen(int m_coarse) const {
    if (m_coarse > m_ || m_coarse < 0) fail(ErrorCode::invalid_scale, "coarse scale must lie in [0, m]");
    DyadicSet out(k_, m_coarse);
    const int shift = k_ * (m_ - m_coarse);
    out.keys_.reserve(keys_.size());
    for (auto key : keys_) {
        std::uint64_t p = shift >= 64 ? 0 : key >> shift;
        if (out.keys_.empty() || out.keys_.back() != p) out.keys_.push_back(p);
    }
    return out;
}

std::size_t covering_number(const DyadicSet& set, int m_coarse) {
    if (m_coarse > set.scale() || m_coarse < 0) fail(ErrorCode::invalid_scale, "coarse scale must lie in [0, m]");
    const int shift = set.dim() * (set.scale() - m_coarse);
    std::size_t count = 0;
    std::uint64_t last = 0;
    for (auto key : set.keys()) {
        std::uint64_t p = shift >= 64 ? 0 : key >> shift;
        if (count == 0 || p != last) {
            ++count;
            last = p;
        }
    }
    return count;
}

DyadicSet set_union(const DyadicSet& a, const DyadicSet& b) {
    if (a.dim() != b.dim() || a.scale() != b.scale()) fail(ErrorCode::invalid_scale, "union of sets at different scales");
    std::vector<std::uint64_t> keys;
    keys.reserve(a.size() + b.size());
    std::set_union(a.keys().begin(), a.keys().end(), b.keys().begin(), b.keys().end(), std::back_inserter(keys));
    return DyadicSet::from_keys(a.dim(), a.scale(), std::move(keys));
}

DyadicSet set_union(const std::vector<DyadicSet>& sets) {
    if (sets.empty()) fail(ErrorCode::invalid_parameter, "union of no sets");
    std::size_t total = 0;
    for (const auto& s : sets) {
        if (s.dim() != sets[0].dim() || s.scale() != sets[0].scale())
            fail(ErrorCode::invalid_scale, "union of sets at different scales");
        total += s.size();
    }
    std::vector<std::uint64_t> keys;
    keys.reserve(total);
    for (const auto& s : sets) keys.insert(keys.end(), s.keys().begin(), s.keys().end());
    return DyadicSet::from_keys(sets[0].dim(), sets[0].scale(), std::move(keys));
}

DyadicSet set_intersection(const DyadicSet& a, const DyadicSet& b) {
    if (a.dim() != b.dim() || a.scale() != b.scale()) fail(ErrorCode::invalid_scale, "intersection of sets at different scales");
    std::vector<std::uint64_t> keys;
    std::set_intersection(a.keys().begin(), a.keys().end(), b.keys().begin(), b.keys().end(), std::back_inserter(keys));
    return DyadicSet::from_keys(a.dim(), a.scale(), std::move(keys));
}

// ---------------------------------------------------------------------------
// Spread constant

namespace {

// Occupancy lattice with prefix sums along the last axis.
struct RowPrefix {
    int k = 0;
    std::int64_t side = 0;
    std::vector<std::uint32_t> prefix;  // per row: side+1 entries

    std::size_t row_index(const std::array<std::int64_t, kMaxCellDim>& c) const {
        std::size_t r = 0;
        for (int a = 0; a < k - 1; ++a) r = r * static_cast<std::size_t>(side) + static_cast<std::size_t>(c[a]);
        return r;
    }

    // Cells within cell-distance R of the cell center c: per axis offset d
    // contributes max(|d| - 1/2, 0)^2.
    std::uint64_t count_ball(const std::array<std::int64_t, kMaxCellDim>& c, double R) const {
        std::uint64_t total = 0;
        std::array<std::int64_t, kMaxCellDim> cur{};
        const std::int64_t span = static_cast<std::int64_t>(std::floor(R + 0.5));
        // Iterate over the first k-1 axes recursively.
        std::function<void(int, double)> rec = [&](int a, double used) {
            if (a == k - 1) {
                double rem = R * R - used;
                if (rem < 0) return;
                std::int64_t w = static_cast<std::int64_t>(std::floor(std::sqrt(rem) + 0.5));
                std::int64_t lo = std::max<std::int64_t>(0, c[a] - w);
                std::int64_t hi = std::min<std::int64_t>(side - 1, c[a] + w);
                if (lo > hi) return;
                std::size_t base = row_index(cur) * static_cast<std::size_t>(side + 1);
                total += prefix[base + hi + 1] - prefix[base + lo];
                return;
            }
            for (std::int64_t d = -span; d <= span; ++d) {
                std::int64_t v = c[a] + d;
                if (v < 0 || v >= side) continue;
                double e = std::max(std::fabs(static_cast<double>(d)) - 0.5, 0.0);
                double u = used + e * e;
                if (u > R * R) continue;
                cur[a] = v;
                rec(a + 1, u);
            }
        };
        rec(0, 0.0);
        return total;
    }
};

}  // namespace

SpreadReport spread_constant(const DyadicSet& P, double s) {
    if (P.empty()) fail(ErrorCode::invalid_parameter, "spread constant of an empty set");
    const int k = P.dim();
    const int m = P.scale();
    SpreadReport rep;
    rep.s = s;
    rep.set_size = P.size();
    const double total = static_cast<double>(P.size());
    const double delta = P.delta();
    const std::int64_t side = std::int64_t{1} << m;
    Cell blo, bhi;
    P.bounding_box(blo, bhi);
    std::vector<Cell> cells = P.cells();

    const bool use_lattice = k <= 3 && m * k <= 24;
    RowPrefix rp;
    if (use_lattice) {
        rp.k = k;
        rp.side = side;
        std::size_t rows = 1;
        for (int a = 0; a < k - 1; ++a) rows *= static_cast<std::size_t>(side);
        rp.prefix.assign(rows * static_cast<std::size_t>(side + 1), 0);
        for (const auto& c : cells) {
            std::array<std::int64_t, kMaxCellDim> cc{};
            for (int a = 0; a < k; ++a) cc[a] = c[a];
            rp.prefix[rp.row_index(cc) * (side + 1) + c[k - 1] + 1] += 1;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            std::uint32_t* row = &rp.prefix[r * (side + 1)];
            for (std::int64_t i = 1; i <= side; ++i) row[i] += row[i - 1];
        }
    }

    struct Best {
        double C = -1.0;
        std::size_t order = std::numeric_limits<std::size_t>::max();
        std::array<std::int64_t, kMaxCellDim> center{};
        double r = 0.0;
        std::uint64_t count = 0;
    };
    Best best;
    std::size_t order_base = 0;
    for (int j = 0; j <= m; ++j) {
        const double r = std::ldexp(1.0, -j);
        const double R = r / delta;  // radius in cells
        // Center lattice: every cell while that stays affordable, else spacing R/2.
        double per_center = use_lattice ? std::pow(2.0 * R + 1.0, k - 1) : static_cast<double>(P.size());
        double exact_centers = 1.0, exact_near = static_cast<double>(P.size());
        for (int a = 0; a < k; ++a) {
            exact_centers *= static_cast<double>(bhi[a]) - static_cast<double>(blo[a]) + 1.0;
            exact_near *= 2.0 * std::ceil(R) + 1.0;
        }
        const bool exhaustive = std::min(exact_centers, exact_near) * per_center <= kExhaustiveSpreadWork;
        const std::int64_t sp = exhaustive ? 1 : std::max<std::int64_t>(1, static_cast<std::int64_t>(R / 2));
        std::vector<std::array<std::int64_t, kMaxCellDim>> centers;
        std::array<std::int64_t, kMaxCellDim> lo{}, n{};
        std::uint64_t grid_count = 1;
        for (int a = 0; a < k; ++a) {
            lo[a] = (static_cast<std::int64_t>(blo[a]) / sp) * sp;
            n[a] = (static_cast<std::int64_t>(bhi[a]) - lo[a]) / sp + 1;
            grid_count *= static_cast<std::uint64_t>(n[a]);
        }
        double near_count = static_cast<double>(P.size());
        for (int a = 0; a < k; ++a) near_count *= (2.0 * std::ceil(R / sp) + 1.0);
        if (near_count < static_cast<double>(grid_count)) {
            // Only centers within reach of some cell can see it.
            std::vector<std::array<std::int64_t, kMaxCellDim>> cand;
            const std::int64_t reach = static_cast<std::int64_t>(std::ceil(R / sp));
            for (const auto& c : cells) {
                std::array<std::int64_t, kMaxCellDim> base{};
                for (int a = 0; a < k; ++a) base[a] = (static_cast<std::int64_t>(c[a]) / sp) * sp;
                std::int64_t combos = 1;
                for (int a = 0; a < k; ++a) combos *= 2 * reach + 1;
                for (std::int64_t q = 0; q < combos; ++q) {
                    std::int64_t t = q;
                    std::array<std::int64_t, kMaxCellDim> x{};
                    bool ok = true;
                    for (int a = 0; a < k; ++a) {
                        x[a] = base[a] + (t % (2 * reach + 1) - reach) * sp;
                        t /= 2 * reach + 1;
                        if (x[a] < lo[a] || x[a] > static_cast<std::int64_t>(bhi[a])) ok = false;
                    }
                    if (ok) cand.push_back(x);
                }
            }
            std::sort(cand.begin(), cand.end());
            cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
            centers = std::move(cand);
        } else {
            centers.reserve(grid_count);
            for (std::uint64_t id = 0; id < grid_count; ++id) {
                std::uint64_t t = id;
                std::array<std::int64_t, kMaxCellDim> x{};
                for (int a = k - 1; a >= 0; --a) {
                    x[a] = lo[a] + static_cast<std::int64_t>(t % n[a]) * sp;
                    t /= n[a];
                }
                centers.push_back(x);
            }
        }
        const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(centers.size(), 64));
        std::vector<Best> local(chunks);
        parallel_for(chunks, [&](std::size_t ch) {
            std::size_t b = centers.size() * ch / chunks, e = centers.size() * (ch + 1) / chunks;
            Best lb;
            for (std::size_t i = b; i < e; ++i) {
                const auto& x = centers[i];
                std::uint64_t cnt = 0;
                if (use_lattice) {
                    cnt = rp.count_ball(x, R);
                } else {
                    for (const auto& c : cells) {
                        double d2 = 0.0;
                        for (int a = 0; a < k; ++a) {
                            double e2 = std::max(std::fabs(static_cast<double>(c[a]) - x[a]) - 0.5, 0.0);
                            d2 += e2 * e2;
                        }
                        if (d2 <= R * R) ++cnt;
                    }
                }
                double C = static_cast<double>(cnt) / (std::pow(r, s) * total);
                if (C > lb.C) {
                    lb.C = C;
                    lb.order = order_base + i;
                    lb.center = x;
                    lb.r = r;
                    lb.count = cnt;
                }
            }
            local[ch] = lb;
        });
        for (const auto& lb : local)
            if (lb.C > best.C || (lb.C == best.C && lb.order < best.order)) best = lb;
        order_base += centers.size();
    }
    rep.balls_tested = order_base;
    rep.C = best.C;
    rep.witness_radius = best.r;
    rep.witness_count = best.count;
    rep.witness_center.resize(k);
    for (int a = 0; a < k; ++a) rep.witness_center[a] = (static_cast<double>(best.center[a]) + 0.5) * delta;
    return rep;
}

ExtractResult extract_spread_subset(const DyadicSet& P, double t) {
    if (P.empty()) fail(ErrorCode::invalid_parameter, "extraction from an empty set");
    const int k = P.dim();
    const int m = P.scale();
    // Descendant counts per node at each level: level l keys are key >> k(m-l).
    std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> levels(m + 1);
    for (int l = 0; l <= m; ++l) {
        const int shift = k * (m - l);
        auto& lv = levels[l];
        for (auto key : P.keys()) {
            std::uint64_t p = shift >= 64 ? 0 : key >> shift;
            if (lv.empty() || lv.back().first != p) lv.emplace_back(p, 1);
            else lv.back().second += 1;
        }
    }
    // kept[l]: surviving keys at level l, sorted, so children of a node are contiguous.
    std::vector<std::vector<std::uint64_t>> kept(m + 1);
    kept[0] = {levels[0].front().first};
    for (int l = 1; l <= m; ++l) {
        const std::size_t budget = static_cast<std::size_t>(std::ceil(std::pow(2.0, t * l) - 1e-9));
        const auto& lv = levels[l];
        // cap: cells available below a node at level l; need: one per surviving parent.
        std::vector<std::vector<std::size_t>> cap(l), need(l), child_lo(l), quota(l);
        std::vector<std::size_t> kid_lo(kept[l - 1].size());
        cap[l - 1].resize(kept[l - 1].size());
        need[l - 1].assign(kept[l - 1].size(), 1);
        for (std::size_t i = 0; i < kept[l - 1].size(); ++i) {
            const std::uint64_t pk = kept[l - 1][i];
            auto it = std::lower_bound(lv.begin(), lv.end(), std::make_pair(pk << k, std::size_t{0}));
            kid_lo[i] = static_cast<std::size_t>(it - lv.begin());
            std::size_t c = 0;
            for (; it != lv.end() && (it->first >> k) == pk; ++it) ++c;
            cap[l - 1][i] = c;
        }
        for (int j = l - 2; j >= 0; --j) {
            const auto& nodes = kept[j];
            const auto& kids = kept[j + 1];
            cap[j].assign(nodes.size(), 0);
            need[j].assign(nodes.size(), 0);
            child_lo[j].resize(nodes.size() + 1);
            std::size_t c = 0;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                child_lo[j][i] = c;
                for (; c < kids.size() && (kids[c] >> k) == nodes[i]; ++c) {
                    cap[j][i] += cap[j + 1][c];
                    need[j][i] += need[j + 1][c];
                }
            }
            child_lo[j][nodes.size()] = c;
        }
        // Split quotas top-down as evenly as capacities allow.
        quota[0] = {std::clamp(budget, need[0][0], cap[0][0])};
        for (int j = 0; j + 1 < l; ++j) {
            quota[j + 1].assign(kept[j + 1].size(), 0);
            for (std::size_t i = 0; i < kept[j].size(); ++i) {
                const std::size_t b = child_lo[j][i], e = child_lo[j][i + 1];
                std::size_t left = quota[j][i];
                using Entry = std::pair<std::size_t, std::size_t>;  // (assigned, child)
                std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
                for (std::size_t c = b; c < e; ++c) {
                    quota[j + 1][c] = need[j + 1][c];
                    left -= need[j + 1][c];
                    if (quota[j + 1][c] < cap[j + 1][c]) pq.emplace(quota[j + 1][c], c);
                }
                while (left > 0 && !pq.empty()) {
                    auto [q, c] = pq.top();
                    pq.pop();
                    quota[j + 1][c] = q + 1;
                    --left;
                    if (q + 1 < cap[j + 1][c]) pq.emplace(q + 1, c);
                }
            }
        }
        std::vector<std::uint64_t> next;
        for (std::size_t i = 0; i < kept[l - 1].size(); ++i) {
            std::vector<std::pair<std::size_t, std::uint64_t>> kids;  // (descendants, key)
            for (std::size_t c = kid_lo[i]; c < kid_lo[i] + cap[l - 1][i]; ++c) kids.emplace_back(lv[c].second, lv[c].first);
            std::sort(kids.begin(), kids.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            for (std::size_t c = 0; c < quota[l - 1][i]; ++c) next.push_back(kids[c].second);
        }
        std::sort(next.begin(), next.end());
        kept[l] = std::move(next);
    }
    ExtractResult out;
    out.subset = DyadicSet::from_keys(k, m, kept[m]);
    out.report = spread_constant(out.subset, t);
    return out;
}

// ---------------------------------------------------------------------------
// Generators

DyadicSet cantor_set(double ratio, int depth, int k) {
    if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::invalid_parameter, "Cantor ratio must lie in (0,1)");
    int p = static_cast<int>(std::lround(-std::log2(ratio)));
    if (p < 1 || std::ldexp(1.0, -p) != ratio) fail(ErrorCode::invalid_parameter, "Cantor ratio must be a power 2^-p");
    if (depth < 0) fail(ErrorCode::invalid_parameter, "negative depth");
    const int m = p * depth;
    check_scale(k, m);
    std::vector<std::uint32_t> line{0};
    const std::uint32_t jump = (1u << p) - 1u;
    for (int d = 0; d < depth; ++d) {
        std::vector<std::uint32_t> next;
        next.reserve(line.size() * 2);
        for (auto v : line) {
            next.push_back(v << p);
            next.push_back((v << p) + jump);
        }
        line = std::move(next);
    }
    std::vector<Cell> cells;
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= line.size();
    if (total > (std::size_t{1} << 26)) fail(ErrorCode::too_fine, "Cantor product too large");
    cells.reserve(total);
    for (std::size_t id = 0; id < total; ++id) {
        std::size_t t = id;
        Cell c{};
        for (int a = 0; a < k; ++a) {
            c[a] = line[t % line.size()];
            t /= line.size();
        }
        cells.push_back(c);
    }
    return DyadicSet::from_cells(k, m, cells);
}

DyadicSet product_set(const std::vector<DyadicSet>& factors) {
    if (factors.empty()) fail(ErrorCode::invalid_parameter, "product of no sets");
    const int m = factors[0].scale();
    int k = 0;
    std::size_t total = 1;
    for (const auto& f : factors) {
        if (f.scale() != m) fail(ErrorCode::invalid_scale, "product factors must share the scale");
        k += f.dim();
        total *= f.size();
    }
    check_scale(k, m);
    if (total > (std::size_t{1} << 26)) fail(ErrorCode::too_fine, "product set too large");
    std::vector<std::vector<Cell>> fc;
    for (const auto& f : factors) fc.push_back(f.cells());
    std::vector<Cell> cells;
    cells.reserve(total);
    for (std::size_t id = 0; id < total; ++id) {
        std::size_t t = id;
        Cell c{};
        int off = 0;
        for (std::size_t f = 0; f < factors.size(); ++f) {
            const Cell& x = fc[f][t % fc[f].size()];
            t /= fc[f].size();
            for (int a = 0; a < factors[f].dim(); ++a) c[off + a] = x[a];
            off += factors[f].dim();
        }
        cells.push_back(c);
    }
    return DyadicSet::from_cells(k, m, cells);
}

DyadicSet uniform_set(int m, int k) {
    check_scale(k, m);
    if (static_cast<std::uint64_t>(k) * m > 26) fail(ErrorCode::too_fine, "uniform set too large");
    const std::uint64_t total = std::uint64_t{1} << (k * m);
    std::vector<std::uint64_t> keys(total);
    std::iota(keys.begin(), keys.end(), std::uint64_t{0});
    return DyadicSet::from_keys(k, m, std::move(keys));
}

DyadicSet random_spread_set(double s, int m, int k, std::uint64_t seed) {
    check_scale(k, m);
    if (!(s >= 0.0 && s <= k)) fail(ErrorCode::invalid_parameter, "spread exponent must lie in [0, k]");
    Rng rng(seed);
    const std::uint64_t nchild = std::uint64_t{1} << k;
    std::vector<std::uint64_t> alive{0};
    for (int l = 1; l <= m; ++l) {
        double target = std::max(1.0, std::round(std::pow(2.0, s * l)));
        std::uint64_t want = static_cast<std::uint64_t>(target);
        want = std::clamp<std::uint64_t>(want, alive.size(), alive.size() * nchild);
        const std::uint64_t base = want / alive.size();
        std::uint64_t extra = want - base * alive.size();
        // Parents receiving one extra child: a uniformly random subset.
        std::vector<std::size_t> order(alive.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < extra; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
        std::vector<std::uint64_t> counts(alive.size(), base);
        for (std::size_t i = 0; i < extra; ++i) counts[order[i]] += 1;
        std::vector<std::uint64_t> next;
        next.reserve(want);
        for (std::size_t p = 0; p < alive.size(); ++p) {
            std::vector<std::uint64_t> kids(nchild);
            std::iota(kids.begin(), kids.end(), std::uint64_t{0});
            for (std::uint64_t i = 0; i < counts[p]; ++i) std::swap(kids[i], kids[i + rng.below(nchild - i)]);
            for (std::uint64_t i = 0; i < counts[p]; ++i) next.push_back((alive[p] << k) | kids[i]);
        }
        std::sort(next.begin(), next.end());
        alive = std::move(next);
    }
    return DyadicSet::from_keys(k, m, std::move(alive));
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(std::istream& is, int bytes) {
    unsigned char b[8] = {};
    is.read(reinterpret_cast<char*>(b), bytes);
    if (!is) fail(ErrorCode::io_error, "truncated set file");
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

}  // namespace

void write_binary(const DyadicSet& set, std::ostream& os) {
    put_u32(os, static_cast<std::uint32_t>(set.dim()));
    put_u32(os, static_cast<std::uint32_t>(set.scale()));
    put_u64(os, set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        Cell c = set.cell(i);
        for (int a = 0; a < set.dim(); ++a) put_u32(os, c[a]);
    }
}

DyadicSet read_binary(std::istream& is) {
    int k = static_cast<int>(get_le(is, 4));
    int m = static_cast<int>(get_le(is, 4));
    std::uint64_t count = get_le(is, 8);
    check_key_capacity(k, m);
    if (count > (std::uint64_t{1} << 32)) fail(ErrorCode::io_error, "implausible cell count");
    std::vector<Cell> cells(count);
    for (std::uint64_t i = 0; i < count; ++i)
        for (int a = 0; a < k; ++a) cells[i][a] = static_cast<std::uint32_t>(get_le(is, 4));
    return DyadicSet::from_cells(k, m, cells);
}

void write_binary_file(const DyadicSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::io_error, "cannot write " + path);
    write_binary(set, os);
}

DyadicSet read_binary_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::io_error, "cannot read " + path);
    return read_binary(is);
}

}  // namespace cinelab
