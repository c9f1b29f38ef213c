#include "cinelab/intersect.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/Dense>

namespace cinelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct HPoint {
    double value = 0.0;
    std::array<double, kMaxParam> grad{};
    double grad_norm = 0.0;
};

HPoint h_point(const ScalarField& f, const ScalarField& g, std::span<const double> x) {
    Jet a = f.jet(x), b = g.jet(x);
    HPoint p;
    p.value = a.value - b.value;
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) {
        p.grad[i] = a.grad[i] - b.grad[i];
        s += p.grad[i] * p.grad[i];
    }
    p.grad_norm = std::sqrt(s);
    return p;
}

double box_volume(const Box& b) {
    double v = 1.0;
    for (int a = 0; a < b.dim; ++a) v *= b.side(a);
    return v;
}

// Exponent m with delta = 2^-m, or -1.
int dyadic_exponent(double delta) {
    int e = 0;
    double mant = std::frexp(delta, &e);
    if (mant != 0.5) return -1;
    int m = 1 - e;
    return m >= 0 ? m : -1;
}

struct Block {
    std::array<std::int64_t, kMaxParam> lo{};
    std::array<std::int64_t, kMaxParam> n{};
};

}  // namespace

bool Slab::contains(std::span<const double> x, double y) const {
    if (!region.contains(x, 0.0)) return false;
    return std::fabs(y - f.value(x)) <= delta;
}

double Slab::measure() const { return 2.0 * delta * box_volume(region); }

// ---------------------------------------------------------------------------
// Intersection measure

IntersectionReport intersection_measure(const ScalarField& f, const ScalarField& g, double delta,
                                        const IntersectionOptions& opts) {
    if (!(delta > 0.0)) fail(ErrorCode::invalid_scale, "delta must be positive");
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    const int k = f.dim();
    const double rho = opts.resolution > 0.0 ? opts.resolution : delta / 8.0;
    if (rho > delta / 8.0 * (1.0 + 1e-12)) fail(ErrorCode::too_coarse, "resolution must not exceed delta/8");
    const Box D = opts.region ? *opts.region : f.domain();
    if (D.dim != k || !f.domain().contains(D)) fail(ErrorCode::domain_mismatch, "region leaves the shared domain");

    IntersectionReport rep;
    rep.delta = delta;
    rep.resolution = rho;
    rep.region = D;
    rep.slab_measure = 2.0 * delta * box_volume(D);

    Block root;
    for (int a = 0; a < k; ++a) {
        double cols = D.side(a) / rho;
        std::int64_t nc = static_cast<std::int64_t>(std::llround(cols));
        if (nc < 1 || std::fabs(cols - static_cast<double>(nc)) > 1e-9 * std::max(1.0, cols))
            fail(ErrorCode::invalid_parameter, "region sides must be multiples of the resolution");
        root.n[a] = nc;
    }

    NormEstimate ne = c2_distance(f, g);
    rep.t = ne.total;
    rep.small_t = rep.t <= opts.small_t_factor * delta;
    const double M2 = 1.25 * ne.sup_dir2 + ne.uncertainty + 1e-12;

    const int m = dyadic_exponent(delta);
    const bool want_p = opts.compute_projection && m >= 0 && Box::unit(k).contains(D) && k <= kMaxCellDim &&
                        k * m <= 63 && m <= 31;

    // Split into leaves, pruning blocks where |h| > 2 delta throughout.
    std::vector<Block> leaves;
    std::vector<double> leaf_grad;  // bound on |grad h| inside the leaf
    std::vector<Block> stack{root};
    std::array<double, kMaxParam> c{};
    while (!stack.empty()) {
        Block b = stack.back();
        stack.pop_back();
        double r2 = 0.0;
        int widest = 0;
        for (int a = 0; a < k; ++a) {
            c[a] = D.lo[a] + (static_cast<double>(b.lo[a]) + 0.5 * static_cast<double>(b.n[a])) * rho;
            double half = 0.5 * static_cast<double>(b.n[a]) * rho;
            r2 += half * half;
            if (b.n[a] > b.n[widest]) widest = a;
        }
        const double r = std::sqrt(r2);
        HPoint hp = h_point(f, g, std::span<const double>(c.data(), k));
        double lower = std::fabs(hp.value) - hp.grad_norm * r - 0.5 * M2 * r * r;
        if (lower > 2.0 * delta) continue;
        if (b.n[widest] <= 8) {
            leaves.push_back(b);
            leaf_grad.push_back(hp.grad_norm + M2 * r);
            continue;
        }
        Block lo = b, hi = b;
        lo.n[widest] = b.n[widest] / 2;
        hi.lo[widest] = b.lo[widest] + lo.n[widest];
        hi.n[widest] = b.n[widest] - lo.n[widest];
        stack.push_back(hi);
        stack.push_back(lo);
    }

    struct LeafOut {
        double count = 0.0;
        std::size_t nonempty = 0;
        std::size_t visited = 0;
        double band_cells = 0.0;
        std::vector<Cell> pcells;
    };
    const std::size_t chunks = std::min<std::size_t>(leaves.size(), 256);
    std::vector<LeafOut> outs(chunks);
    const double half_diag_col = 0.5 * rho * std::sqrt(static_cast<double>(k));
    parallel_for(chunks, [&](std::size_t ch) {
        LeafOut& out = outs[ch];
        std::vector<double> xs, fv, gv, counts;
        const std::size_t b0 = leaves.size() * ch / chunks, b1 = leaves.size() * (ch + 1) / chunks;
        for (std::size_t li = b0; li < b1; ++li) {
            const Block& b = leaves[li];
            std::size_t total = 1;
            for (int a = 0; a < k; ++a) total *= static_cast<std::size_t>(b.n[a]);
            xs.resize(total * k);
            for (std::size_t id = 0; id < total; ++id) {
                std::size_t tmp = id;
                for (int a = 0; a < k; ++a) {
                    std::int64_t i = b.lo[a] + static_cast<std::int64_t>(tmp % b.n[a]);
                    tmp /= b.n[a];
                    xs[id * k + a] = D.lo[a] + (static_cast<double>(i) + 0.5) * rho;
                }
            }
            fv.resize(total);
            gv.resize(total);
            counts.resize(total);
            f.values(xs.data(), total, fv.data());
            g.values(xs.data(), total, gv.data());
            out.count += simd::slab_overlap_counts(fv.data(), gv.data(), total, delta, rho, opts.clip_lo, opts.clip_hi,
                                                   counts.data());
            out.visited += total;
            const double w = leaf_grad[li] * half_diag_col;
            for (std::size_t id = 0; id < total; ++id) {
                const double ah = std::fabs(fv[id] - gv[id]);
                if (counts[id] > 0) {
                    ++out.nonempty;
                    out.band_cells += 2.0;
                }
                if (std::fabs(ah - 2.0 * delta) <= w) out.band_cells += 2.0 * w / rho + 1.0;
                if (want_p && ah <= 2.0 * delta) {
                    Cell cell{};
                    for (int a = 0; a < k; ++a) {
                        double v = std::floor(std::ldexp(xs[id * k + a], m));
                        double top = std::ldexp(1.0, m) - 1.0;
                        cell[a] = static_cast<std::uint32_t>(std::clamp(v, 0.0, top));
                    }
                    out.pcells.push_back(cell);
                }
            }
        }
    });
    double count = 0.0, band_cells = 0.0;
    std::vector<Cell> pcells;
    for (auto& o : outs) {
        count += o.count;
        band_cells += o.band_cells;
        rep.columns_nonempty += o.nonempty;
        rep.columns_visited += o.visited;
        pcells.insert(pcells.end(), o.pcells.begin(), o.pcells.end());
    }
    const double cell_volume = std::pow(rho, k + 1);
    rep.cells = static_cast<std::size_t>(count);
    rep.measure = count * cell_volume;
    rep.band = band_cells * cell_volume;
    if (want_p) {
        rep.projection = DyadicSet::from_cells(k, m, pcells);
        rep.projection_valid = true;
    }
    rep.ratio = rep.measure * rep.t / (delta * delta);

    rep.tangency = tangency_parameter(f, g, D).value;
    if (opts.K > 0.0 && rep.t >= delta) {
        try {
            TangencyClassification tc = classify_pair(f, g, delta, opts.K);
            rep.classified = true;
            rep.tangency_class = tc.overall;
            for (const auto& cube : tc.cubes) {
                if (cube.critical_points > 0 && !cube.critical_point.empty()) {
                    rep.lambda_bar = f.value(cube.critical_point) - g.value(cube.critical_point);
                    break;
                }
            }
        } catch (const Error&) {
            rep.classified = false;
        }
    }
    return rep;
}

BoundTable verify_intersection_bound(const FunctionFamily& family, std::vector<std::pair<std::size_t, std::size_t>> pairs,
                                     const std::vector<double>& deltas, const IntersectionOptions& opts) {
    if (deltas.empty()) fail(ErrorCode::invalid_parameter, "no delta values");
    if (pairs.empty())
        for (std::size_t i = 0; i < family.size(); ++i)
            for (std::size_t j = i + 1; j < family.size(); ++j) pairs.emplace_back(i, j);
    for (const auto& [i, j] : pairs)
        if (i >= family.size() || j >= family.size()) fail(ErrorCode::invalid_parameter, "pair index out of range");

    BoundTable table;
    table.deltas = deltas;
    table.max_ratio.assign(deltas.size(), 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const ScalarField& f = family.members[pairs[p].first];
        const ScalarField& g = family.members[pairs[p].second];
        const double t = c2_distance(f, g).total;
        const double tangency = tangency_parameter(f, g, opts.region ? *opts.region : f.domain()).value;
        std::string cls = "unclassified";
        if (opts.K > 0.0) {
            try {
                cls = tangency_case_name(classify_pair(f, g, std::min(t, deltas.front()), opts.K).overall);
            } catch (const Error& e) {
                cls = e.code() == ErrorCode::cinematic_violation ? "violation" : "unclassified";
            }
        }
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            BoundRow row;
            row.pair_id = p;
            row.i = pairs[p].first;
            row.j = pairs[p].second;
            row.delta = deltas[d];
            row.t = t;
            row.tangency = tangency;
            row.cls = cls;
            if (t < deltas[d]) {
                row.skipped = true;
                row.note = "C2 distance below delta";
                row.measure = std::numeric_limits<double>::quiet_NaN();
                row.ratio = std::numeric_limits<double>::quiet_NaN();
                ++table.skipped;
            } else {
                IntersectionOptions o = opts;
                o.K = 0.0;
                o.compute_projection = false;
                IntersectionReport r = intersection_measure(f, g, deltas[d], o);
                row.measure = r.measure;
                row.ratio = r.measure * t / (deltas[d] * deltas[d]);
                if (r.small_t) row.note = "small-t regime";
                table.max_ratio[d] = std::max(table.max_ratio[d], row.ratio);
            }
            table.rows.push_back(std::move(row));
        }
    }
    table.trend = table.max_ratio.front() > 0.0 ? table.max_ratio.back() / table.max_ratio.front() : 0.0;
    return table;
}

void write_bound_csv(const BoundTable& table, std::ostream& os) {
    os << "pair_id,delta,t,Delta,class,measure,ratio\n";
    char buf[512];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%s,%.12g,%.12g\n", r.pair_id, r.delta, r.t, r.tangency,
                      r.skipped ? "skipped" : r.cls.c_str(), r.measure, r.ratio);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Gradient flow

namespace {

struct UnitField {
    const ScalarField& h;
    double tol;
    int k;

    void eval(const double* x, double* u) const {
        Jet j = h.jet(std::span<const double>(x, k));
        double n = j.grad_norm();
        if (!(n >= tol)) fail(ErrorCode::flow_degenerate, "gradient vanishes along a flow curve");
        for (int a = 0; a < k; ++a) u[a] = j.grad[a] / n;
    }

    void rk4(const double* x, double tau, double* out) const {
        double k1[kMaxParam], k2[kMaxParam], k3[kMaxParam], k4[kMaxParam], y[kMaxParam];
        eval(x, k1);
        for (int a = 0; a < k; ++a) y[a] = x[a] + 0.5 * tau * k1[a];
        eval(y, k2);
        for (int a = 0; a < k; ++a) y[a] = x[a] + 0.5 * tau * k2[a];
        eval(y, k3);
        for (int a = 0; a < k; ++a) y[a] = x[a] + tau * k3[a];
        eval(y, k4);
        for (int a = 0; a < k; ++a) out[a] = x[a] + tau / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
    }
};

bool inside(const Box& U, const double* x) {
    for (int a = 0; a < U.dim; ++a)
        if (x[a] < U.lo[a] || x[a] > U.hi[a]) return false;
    return true;
}

// |grad(grad h/|grad h|)| = |(I - u u^T) H| / |grad h|
double unit_field_gradient(const Jet& j) {
    const int k = j.dim;
    double n = j.grad_norm();
    if (n == 0.0) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd H(k, k), P = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd u(k);
    for (int a = 0; a < k; ++a) {
        u(a) = j.grad[a] / n;
        for (int b = 0; b < k; ++b) H(a, b) = j.h2(a, b);
    }
    P -= u * u.transpose();
    Eigen::MatrixXd G = P * H / n;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
    return svd.singularValues()(0);
}

}  // namespace

FlowFoliation gradient_flow_foliation(const ScalarField& h, const Box& U, double delta, const FlowOptions& opts) {
    if (!(delta > 0.0)) fail(ErrorCode::invalid_scale, "delta must be positive");
    const int k = h.dim();
    if (U.dim != k) fail(ErrorCode::domain_mismatch, "subcube dimension differs from the field");
    const double step = opts.step > 0.0 ? opts.step : delta / 4.0;
    if (step > delta / 4.0 * (1.0 + 1e-12)) fail(ErrorCode::too_coarse, "flow step must not exceed delta/4");

    FlowFoliation out;
    out.dim = k;
    out.U = U;
    out.delta = delta;
    out.step = step;

    // Grid statistics: gradient floor and the unit-field gradient sup.
    const int N = std::max(3, opts.field_grid);
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= static_cast<std::size_t>(N);
    double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0, Lsup = 0.0;
    double hmin = std::numeric_limits<double>::infinity(), hmax = -hmin;
    {
        std::vector<double> gn(total), lu(total), hv(total);
        parallel_for(total, [&](std::size_t id) {
            std::array<double, kMaxParam> x{};
            std::size_t t = id;
            for (int a = 0; a < k; ++a) {
                x[a] = U.lo[a] + U.side(a) * static_cast<double>(t % N) / (N - 1);
                t /= N;
            }
            Jet j = h.jet(std::span<const double>(x.data(), k));
            gn[id] = j.grad_norm();
            lu[id] = unit_field_gradient(j);
            hv[id] = j.value;
        });
        for (std::size_t i = 0; i < total; ++i) {
            gmin = std::min(gmin, gn[i]);
            gmax = std::max(gmax, gn[i]);
            Lsup = std::max(Lsup, lu[i]);
            hmin = std::min(hmin, hv[i]);
            hmax = std::max(hmax, hv[i]);
        }
    }
    const double tol = opts.grad_tol > 0.0 ? opts.grad_tol : 1e-9 * std::max(1.0, gmax);
    if (!(gmin >= tol)) fail(ErrorCode::flow_degenerate, "gradient vanishes on the subcube");
    UnitField uf{h, tol, k};

    // Seeds on the inflow part of the boundary, spaced at most delta/2 along each face.
    struct Seed {
        std::array<double, kMaxParam> x{};
        int face = 0;
        std::array<std::int64_t, kMaxParam> idx{};
    };
    std::vector<Seed> seeds;
    for (int a = 0; a < k; ++a) {
        for (int side = 0; side < 2; ++side) {
            std::array<std::int64_t, kMaxParam> n{};
            std::size_t count = 1;
            for (int b = 0; b < k; ++b) {
                if (b == a) {
                    n[b] = 1;
                    continue;
                }
                n[b] = static_cast<std::int64_t>(std::ceil(U.side(b) / (0.5 * delta) - 1e-9)) + 1;
                count *= static_cast<std::size_t>(n[b]);
            }
            for (std::size_t id = 0; id < count; ++id) {
                Seed s;
                s.face = 2 * a + side;
                std::size_t t = id;
                for (int b = 0; b < k; ++b) {
                    if (b == a) {
                        s.x[b] = side == 0 ? U.lo[b] : U.hi[b];
                        continue;
                    }
                    s.idx[b] = static_cast<std::int64_t>(t % n[b]);
                    t /= n[b];
                    s.x[b] = U.lo[b] + U.side(b) * static_cast<double>(s.idx[b]) / static_cast<double>(n[b] - 1);
                }
                Jet j = h.jet(std::span<const double>(s.x.data(), k));
                double outward = side == 0 ? -j.grad[a] : j.grad[a];
                if (outward < 0.0) seeds.push_back(s);
            }
        }
    }

    const double diam = U.diameter();
    const double max_len = 4.0 * (diam + (hmax - hmin) / gmin) + 4.0 * step;
    const std::size_t max_steps = std::min<std::size_t>(static_cast<std::size_t>(max_len / step) + 2, 4000000);
    out.curves.resize(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t si) {
        FlowCurve& cv = out.curves[si];
        cv.seed.assign(seeds[si].x.begin(), seeds[si].x.begin() + k);
        std::array<double, kMaxParam> x = seeds[si].x, y{};
        cv.points.insert(cv.points.end(), x.begin(), x.begin() + k);
        double hprev = h.value(std::span<const double>(x.data(), k));
        std::size_t steps = 0;
        while (true) {
            uf.rk4(x.data(), step, y.data());
            if (!inside(U, y.data())) {
                double lo = 0.0, hi = step;
                std::array<double, kMaxParam> z{};
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    uf.rk4(x.data(), mid, z.data());
                    if (inside(U, z.data())) lo = mid;
                    else hi = mid;
                }
                uf.rk4(x.data(), lo, z.data());
                cv.uniform_samples = cv.points.size() / k;
                cv.arclength += lo;
                // A curve ending on the boundary after a full step has nothing left to add.
                if (lo > 1e-9 * step) {
                    double hz = h.value(std::span<const double>(z.data(), k));
                    if (!(hz > hprev)) cv.monotone = false;
                    cv.points.insert(cv.points.end(), z.begin(), z.begin() + k);
                }
                break;
            }
            double hy = h.value(std::span<const double>(y.data(), k));
            if (!(hy > hprev)) cv.monotone = false;
            hprev = hy;
            x = y;
            cv.arclength += step;
            cv.points.insert(cv.points.end(), x.begin(), x.begin() + k);
            if (++steps >= max_steps) {
                cv.truncated = true;
                cv.uniform_samples = cv.points.size() / k;
                break;
            }
        }
    });

    // Coverage of U's delta-cells.
    std::array<std::int64_t, kMaxParam> nc{};
    std::array<double, kMaxParam> cs{};
    std::size_t cells = 1;
    for (int a = 0; a < k; ++a) {
        nc[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(U.side(a) / delta - 1e-9)));
        cs[a] = U.side(a) / static_cast<double>(nc[a]);
        cells *= static_cast<std::size_t>(nc[a]);
    }
    std::vector<std::uint8_t> mark(cells, 0);
    const double d2max = delta * delta;
    for (const auto& cv : out.curves) {
        for (std::size_t p = 0; p + k <= cv.points.size(); p += k) {
            std::array<std::int64_t, kMaxParam> lo{}, hi{};
            for (int a = 0; a < k; ++a) {
                double rel = (cv.points[p + a] - U.lo[a]) / cs[a];
                std::int64_t reach = static_cast<std::int64_t>(std::ceil(delta / cs[a])) + 1;
                lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(rel)) - reach);
                hi[a] = std::min<std::int64_t>(nc[a] - 1, static_cast<std::int64_t>(std::floor(rel)) + reach);
            }
            std::array<std::int64_t, kMaxParam> i = lo;
            while (true) {
                double d2 = 0.0;
                std::size_t id = 0;
                for (int a = k - 1; a >= 0; --a) {
                    double cc = U.lo[a] + (static_cast<double>(i[a]) + 0.5) * cs[a];
                    double e = cc - cv.points[p + a];
                    d2 += e * e;
                    id = id * static_cast<std::size_t>(nc[a]) + static_cast<std::size_t>(i[a]);
                }
                if (d2 <= d2max) mark[id] = 1;
                int a = 0;
                while (a < k && ++i[a] > hi[a]) {
                    i[a] = lo[a];
                    ++a;
                }
                if (a == k) break;
            }
        }
    }
    out.cells_total = cells;
    for (auto v : mark) out.cells_covered += v;
    out.coverage = static_cast<double>(out.cells_covered) / static_cast<double>(cells);

    // Seed divergence between face neighbors at equal arclength.
    double lip = 1.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        for (std::size_t q = s + 1; q < seeds.size(); ++q) {
            if (seeds[q].face != seeds[s].face) continue;
            int diff = 0;
            for (int a = 0; a < k; ++a) diff += static_cast<int>(std::llabs(seeds[q].idx[a] - seeds[s].idx[a]));
            if (diff != 1) continue;
            const auto& c1 = out.curves[s];
            const auto& c2 = out.curves[q];
            double d0 = 0.0;
            for (int a = 0; a < k; ++a) d0 += (c1.seed[a] - c2.seed[a]) * (c1.seed[a] - c2.seed[a]);
            d0 = std::sqrt(d0);
            if (d0 == 0.0) continue;
            std::size_t common = std::min(c1.uniform_samples, c2.uniform_samples);
            for (std::size_t i = 0; i < common; ++i) {
                double d = 0.0;
                for (int a = 0; a < k; ++a) {
                    double e = c1.points[i * k + a] - c2.points[i * k + a];
                    d += e * e;
                }
                lip = std::max(lip, std::sqrt(d) / d0);
            }
        }
    }
    out.lipschitz = lip;
    for (const auto& cv : out.curves) {
        out.max_arclength = std::max(out.max_arclength, cv.arclength);
        out.monotone = out.monotone && cv.monotone;
        for (std::size_t p = 0; p + k <= cv.points.size(); p += k * 8) {
            Jet j = h.jet(std::span<const double>(cv.points.data() + p, k));
            Lsup = std::max(Lsup, unit_field_gradient(j));
        }
    }
    out.unit_field_gradient_sup = Lsup;
    out.gronwall_bound = std::exp(Lsup * out.max_arclength);
    return out;
}

// ---------------------------------------------------------------------------
// One-variable sublevel sets

SublevelResult sublevel_interval(const ScalarField& h, double delta, const SublevelOptions& opts) {
    if (h.dim() != 1) fail(ErrorCode::invalid_parameter, "sublevel_interval needs a one-variable field");
    if (!(delta > 0.0)) fail(ErrorCode::invalid_scale, "delta must be positive");
    if (opts.scan_steps < 2) fail(ErrorCode::invalid_parameter, "scan needs at least two steps");
    const Box& dom = h.domain();
    const double s0 = dom.lo[0], a = dom.side(0);
    const int N = opts.scan_steps;
    SublevelResult r;
    r.scan_step = a / N;
    r.c2 = opts.c2 > 0.0 ? opts.c2 : 1.0 / (3.0 * opts.K);
    r.c1 = opts.c1 > 0.0 ? opts.c1 : r.c2 / 4.0;

    std::vector<double> s(N + 1), hv(N + 1), d1(N + 1), d2(N + 1);
    double supv = 0.0, supd = 0.0, supdd = 0.0, lam1 = std::numeric_limits<double>::infinity();
    double min_dd = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= N; ++i) {
        s[i] = i == N ? dom.hi[0] : s0 + r.scan_step * i;
        Jet j = h.jet(std::span<const double>(&s[i], 1));
        hv[i] = j.value;
        d1[i] = j.grad[0];
        d2[i] = j.hess[0];
        supv = std::max(supv, std::fabs(hv[i]));
        supd = std::max(supd, std::fabs(d1[i]));
        supdd = std::max(supdd, std::fabs(d2[i]));
        lam1 = std::min(lam1, std::fabs(hv[i]) + std::fabs(d1[i]));
        if (i > 0 && i < N) min_dd = std::min(min_dd, d2[i]);
    }
    if (N == 1) min_dd = std::min(d2[0], d2[1]);
    r.t = opts.t > 0.0 ? opts.t : supv + supd + supdd;
    r.lambda1 = lam1;
    r.lambda2 = std::fabs(hv[0]);

    // {|h| <= level} by scan, with bisection at each crossing.
    auto sublevel = [&](double level) {
        auto in = [&](double x) { return std::fabs(h.value(std::span<const double>(&x, 1))) <= level; };
        auto bisect = [&](double out_pt, double in_pt) {
            for (int it = 0; it < 100; ++it) {
                double mid = 0.5 * (out_pt + in_pt);
                if (mid == out_pt || mid == in_pt) break;
                if (in(mid)) in_pt = mid;
                else out_pt = mid;
            }
            return in_pt;
        };
        std::vector<std::pair<double, double>> out;
        int i = 0;
        while (i <= N) {
            if (!(std::fabs(hv[i]) <= level)) {
                ++i;
                continue;
            }
            int j = i;
            while (j + 1 <= N && std::fabs(hv[j + 1]) <= level) ++j;
            double left = i == 0 ? s[0] : bisect(s[i - 1], s[i]);
            double right = j == N ? s[N] : bisect(s[j + 1], s[j]);
            out.emplace_back(left, right);
            i = j + 1;
        }
        return out;
    };
    r.intervals = sublevel(2.0 * delta);
    for (const auto& iv : r.intervals) r.measure += iv.second - iv.first;
    r.single_interval = r.intervals.size() <= 1;

    if (!(delta < r.c1 * r.t)) {
        r.precondition_ok = false;
        r.failed.push_back("delta < c1*t");
    }
    if (opts.mode == SublevelMode::transversal) {
        if (!(r.lambda1 >= r.c2 * r.t)) {
            r.precondition_ok = false;
            r.failed.push_back("lambda1 >= c2*t");
        }
        r.ratio = r.measure * r.t / delta;
    } else {
        const double dtol = opts.derivative_tol >= 0.0 ? opts.derivative_tol : 1e-8 * std::max(1.0, r.t);
        if (!(std::fabs(d1[0]) <= dtol)) {
            r.precondition_ok = false;
            r.failed.push_back("h'(0) = 0");
        }
        if (!(min_dd >= r.c2 * r.t)) {
            r.precondition_ok = false;
            r.failed.push_back("h''(s) >= c2*t");
        }
        r.endpoint_bound = std::sqrt((r.lambda2 + delta) / r.t) / r.c2;
        // The containment claim concerns E_delta, not E_{2 delta}.
        for (const auto& iv : sublevel(delta)) r.max_endpoint = std::max(r.max_endpoint, iv.second - s0);
        r.contained = r.max_endpoint <= r.endpoint_bound * (1.0 + 1e-12);
        r.ratio = r.measure * std::sqrt((r.lambda2 + delta) * r.t) / delta;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Polar slicing

namespace {

std::vector<std::vector<double>> polar_directions(int k, int count) {
    std::vector<std::vector<double>> dirs;
    if (k == 1) {
        dirs = {{1.0}, {-1.0}};
    } else if (k == 2) {
        int n = count > 0 ? count : 256;
        for (int i = 0; i < n; ++i) {
            double th = 2.0 * kPi * i / n;
            dirs.push_back({std::cos(th), std::sin(th)});
        }
    } else {
        int n = count > 0 ? count : 1024;
        const double golden = kPi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            double z = 1.0 - (2.0 * i + 1.0) / n;
            double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
            double ph = golden * i;
            dirs.push_back({rr * std::cos(ph), rr * std::sin(ph), z});
        }
    }
    return dirs;
}

double sphere_area(int k) {
    if (k == 1) return 2.0;
    if (k == 2) return 2.0 * kPi;
    return 4.0 * kPi;
}

}  // namespace

PolarReport polar_slices(const ScalarField& h, std::span<const double> x_M, double delta, const Box& U,
                         const PolarOptions& opts) {
    const int k = h.dim();
    if (static_cast<int>(x_M.size()) != k || U.dim != k) fail(ErrorCode::invalid_parameter, "dimension mismatch");
    if (!(delta > 0.0)) fail(ErrorCode::invalid_scale, "delta must be positive");
    PolarReport rep;
    double bd = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a) bd = std::min({bd, x_M[a] - U.lo[a], U.hi[a] - x_M[a]});
    rep.boundary_distance = bd;
    rep.interior = bd > 0.0;
    if (!rep.interior) return rep;

    Jet jm = h.jet(x_M);
    rep.grad_norm = jm.grad_norm();
    rep.grad_ok = rep.grad_norm <= 10.0 * delta;
    rep.lambda2 = std::fabs(jm.value);
    {
        Eigen::MatrixXd H(k, k);
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) H(a, b) = jm.h2(a, b);
        rep.sign = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().sum() >= 0.0 ? 1 : -1;
    }
    // Definiteness on a 17^k grid of U.
    {
        const int N = 17;
        std::size_t total = 1;
        for (int a = 0; a < k; ++a) total *= N;
        for (std::size_t id = 0; id < total && rep.convex; ++id) {
            std::array<double, kMaxParam> x{};
            std::size_t t = id;
            for (int a = 0; a < k; ++a) {
                x[a] = U.lo[a] + U.side(a) * static_cast<double>(t % N) / (N - 1);
                t /= N;
            }
            Jet j = h.jet(std::span<const double>(x.data(), k));
            Eigen::MatrixXd H(k, k);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) H(a, b) = rep.sign * j.h2(a, b);
            if (!(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff() > 0.0)) rep.convex = false;
        }
    }

    const auto dirs = polar_directions(k, opts.directions);
    const double weight = sphere_area(k) / static_cast<double>(dirs.size());
    rep.rays.resize(dirs.size());
    std::vector<double> part(dirs.size(), 0.0);
    std::vector<std::vector<double>> base(1, std::vector<double>(x_M.begin(), x_M.end()));
    const double sgn = rep.sign;
    parallel_for(dirs.size(), [&](std::size_t d) {
        PolarRay& ray = rep.rays[d];
        ray.dir = dirs[d];
        double reach = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a) {
            if (ray.dir[a] > 0) reach = std::min(reach, (U.hi[a] - x_M[a]) / ray.dir[a]);
            else if (ray.dir[a] < 0) reach = std::min(reach, (U.lo[a] - x_M[a]) / ray.dir[a]);
        }
        ray.reach = reach;
        const std::vector<double> xm = base[0];
        const std::vector<double> xi = ray.dir;
        ScalarField line = ScalarField::custom(Box::make(std::vector<double>{0.0}, std::vector<double>{reach}),
                                               [&h, xm, xi, k, sgn](std::span<const double> s) {
                                                   std::array<double, kMaxParam> p{};
                                                   for (int a = 0; a < k; ++a) p[a] = xm[a] + s[0] * xi[a];
                                                   Jet j = h.jet(std::span<const double>(p.data(), k));
                                                   Jet o;
                                                   o.dim = 1;
                                                   o.value = sgn * j.value;
                                                   o.grad[0] = 0.0;
                                                   for (int a = 0; a < k; ++a) o.grad[0] += sgn * j.grad[a] * xi[a];
                                                   o.hess[0] = sgn * j.dir2(xi);
                                                   return o;
                                               });
        SublevelOptions so;
        so.mode = SublevelMode::tangent;
        so.K = opts.K;
        so.derivative_tol = 10.0 * delta;
        SublevelResult sr = sublevel_interval(line, delta, so);
        ray.intervals = sr.intervals;
        double acc = 0.0;
        for (const auto& iv : sr.intervals) acc += (std::pow(iv.second, k) - std::pow(iv.first, k)) / k;
        part[d] = acc * weight;
    });
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        rep.polar_measure += part[d];
        if (rep.rays[d].intervals.size() > 1) rep.single_intervals = false;
    }

    // Direct count of {|h| <= 2 delta} on a fine lattice.
    const double rho = opts.resolution > 0.0 ? opts.resolution : delta / 8.0;
    std::array<std::int64_t, kMaxParam> nc{};
    std::array<double, kMaxParam> cs{};
    std::size_t total = 1;
    double cell_volume = 1.0;
    for (int a = 0; a < k; ++a) {
        nc[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(U.side(a) / rho - 1e-9)));
        cs[a] = U.side(a) / static_cast<double>(nc[a]);
        total *= static_cast<std::size_t>(nc[a]);
        cell_volume *= cs[a];
    }
    const std::size_t rows = total / static_cast<std::size_t>(nc[0]);
    std::vector<std::size_t> row_counts(rows, 0);
    parallel_for(rows, [&](std::size_t rid) {
        std::vector<double> xs(static_cast<std::size_t>(nc[0]) * k), vals(nc[0]);
        std::size_t t = rid;
        std::array<double, kMaxParam> fixed{};
        for (int a = 1; a < k; ++a) {
            fixed[a] = U.lo[a] + (static_cast<double>(t % nc[a]) + 0.5) * cs[a];
            t /= nc[a];
        }
        for (std::int64_t i = 0; i < nc[0]; ++i) {
            xs[i * k] = U.lo[0] + (static_cast<double>(i) + 0.5) * cs[0];
            for (int a = 1; a < k; ++a) xs[i * k + a] = fixed[a];
        }
        h.values(xs.data(), nc[0], vals.data());
        std::size_t c = 0;
        for (auto v : vals)
            if (std::fabs(v) <= 2.0 * delta) ++c;
        row_counts[rid] = c;
    });
    std::size_t inside_cells = 0;
    for (auto c : row_counts) inside_cells += c;
    rep.direct_measure = static_cast<double>(inside_cells) * cell_volume;
    rep.discrepancy = rep.direct_measure > 0.0 ? std::fabs(rep.polar_measure - rep.direct_measure) / rep.direct_measure
                                               : (rep.polar_measure > 0.0 ? 1.0 : 0.0);
    return rep;
}

// ---------------------------------------------------------------------------
// Shape count

ShapeReport shape_count(const DyadicSet& E, const ScalarField& f, const ScalarField& g, double s) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    const int k = f.dim();
    if (E.dim() != k) fail(ErrorCode::invalid_parameter, "set dimension differs from the parameter dimension");
    const double delta = E.delta();
    NormEstimate ne = c2_distance(f, g);
    const double M2 = 1.25 * ne.sup_dir2 + ne.uncertainty + 1e-12;
    ShapeReport rep;
    rep.set_size = E.size();
    rep.t = ne.total;
    const double r = 0.5 * delta * std::sqrt(static_cast<double>(k));
    std::vector<std::uint8_t> hit(E.size(), 0);
    parallel_for(E.size(), [&](std::size_t i) {
        Cell c = E.cell(i);
        std::array<double, kMaxParam> x{};
        for (int a = 0; a < k; ++a) x[a] = (static_cast<double>(c[a]) + 0.5) * delta;
        HPoint hp = h_point(f, g, std::span<const double>(x.data(), k));
        if (std::fabs(hp.value) - hp.grad_norm * r - 0.5 * M2 * r * r > 2.0 * delta) return;
        // 5^k samples including the corners; a sign change means a zero inside.
        std::size_t total = 1;
        for (int a = 0; a < k; ++a) total *= 5;
        bool pos = false, neg = false;
        for (std::size_t id = 0; id < total; ++id) {
            std::size_t t = id;
            for (int a = 0; a < k; ++a) {
                x[a] = (static_cast<double>(c[a]) + static_cast<double>(t % 5) / 4.0) * delta;
                t /= 5;
            }
            double v = f.value(std::span<const double>(x.data(), k)) - g.value(std::span<const double>(x.data(), k));
            if (std::fabs(v) <= 2.0 * delta) {
                hit[i] = 1;
                return;
            }
            (v > 0 ? pos : neg) = true;
        }
        if (pos && neg) hit[i] = 1;
    });
    for (auto v : hit) rep.count += v;
    rep.bound = std::pow(delta, -(k - 1)) / std::pow(rep.t, s);
    rep.ratio = static_cast<double>(rep.count) / rep.bound;
    return rep;
}

}  // namespace cinelab
