#include "cinelab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include <Eigen/Dense>

namespace cinelab {

namespace detail {

struct FieldImpl {
    FieldKind kind;
    Box domain;
    explicit FieldImpl(FieldKind k, const Box& d) : kind(k), domain(d) {}
    virtual ~FieldImpl() = default;
    virtual Jet jet(std::span<const double> x) const = 0;
    virtual double value(std::span<const double> x) const { return jet(x).value; }
};

}  // namespace detail

namespace {

using detail::FieldImpl;

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

struct ConstantField final : FieldImpl {
    double c;
    ConstantField(const Box& d, double c_) : FieldImpl(FieldKind::constant, d), c(c_) {}
    Jet jet(std::span<const double>) const override {
        Jet j;
        j.dim = domain.dim;
        j.value = c;
        return j;
    }
    double value(std::span<const double>) const override { return c; }
};

struct PolynomialField final : FieldImpl {
    std::vector<Monomial> terms;
    PolynomialField(const Box& d, std::vector<Monomial> t) : FieldImpl(FieldKind::polynomial, d), terms(std::move(t)) {}
    Jet jet(std::span<const double> x) const override {
        const int k = domain.dim;
        Jet j;
        j.dim = k;
        for (const auto& m : terms) {
            std::array<double, kMaxParam> p{}, dp{}, ddp{};
            for (int a = 0; a < k; ++a) {
                int e = m.exps[a];
                p[a] = ipow(x[a], e);
                dp[a] = e >= 1 ? e * ipow(x[a], e - 1) : 0.0;
                ddp[a] = e >= 2 ? e * (e - 1) * ipow(x[a], e - 2) : 0.0;
            }
            auto prod_except = [&](int i, int jj) {
                double r = 1.0;
                for (int a = 0; a < k; ++a)
                    if (a != i && a != jj) r *= p[a];
                return r;
            };
            j.value += m.coef * prod_except(-1, -1);
            for (int i = 0; i < k; ++i) {
                j.grad[i] += m.coef * dp[i] * prod_except(i, -1);
                for (int jj = i; jj < k; ++jj) {
                    double h = i == jj ? ddp[i] * prod_except(i, -1) : dp[i] * dp[jj] * prod_except(i, jj);
                    j.hess[hess_index(i, jj, k)] += m.coef * h;
                }
            }
        }
        return j;
    }
};

struct SphereCapField final : FieldImpl {
    std::vector<double> center;
    double radius, offset, sign;
    SphereCapField(const Box& d, std::vector<double> c, double r, double o, double s)
        : FieldImpl(FieldKind::sphere_cap, d), center(std::move(c)), radius(r), offset(o), sign(s) {}
    Jet jet(std::span<const double> x) const override {
        const int k = domain.dim;
        Jet j;
        j.dim = k;
        std::array<double, kMaxParam> u{};
        double r2 = 0.0;
        for (int a = 0; a < k; ++a) {
            u[a] = x[a] - center[a];
            r2 += u[a] * u[a];
        }
        double w2 = radius * radius - r2;
        if (!(w2 > 0.0)) w2 = 1e-300;
        double w = std::sqrt(w2);
        j.value = offset + sign * w;
        for (int a = 0; a < k; ++a) j.grad[a] = -sign * u[a] / w;
        for (int a = 0; a < k; ++a)
            for (int b = a; b < k; ++b)
                j.hess[hess_index(a, b, k)] = -sign * ((a == b ? 1.0 : 0.0) / w + u[a] * u[b] / (w2 * w));
        return j;
    }
};

struct InducedField final : FieldImpl {
    std::shared_ptr<const ManifoldChart> chart;
    std::vector<double> z;
    double scale, shift;
    InducedField(const Box& d, std::shared_ptr<const ManifoldChart> c, std::vector<double> z_, double s, double t)
        : FieldImpl(FieldKind::induced, d), chart(std::move(c)), z(std::move(z_)), scale(s), shift(t) {}
    Jet jet(std::span<const double> x) const override {
        const int k = domain.dim;
        const int d = chart->ambient_dim();
        ChartJet cj = chart->jet(x, 2);
        Jet j;
        j.dim = k;
        double v = 0.0;
        for (int a = 0; a < d; ++a) v += cj.point[a] * z[a];
        j.value = scale * v + shift;
        for (int i = 0; i < k; ++i) {
            double g = 0.0;
            for (int a = 0; a < d; ++a) g += cj.d1[i][a] * z[a];
            j.grad[i] = scale * g;
        }
        for (int h = 0; h < k * (k + 1) / 2; ++h) {
            double s = 0.0;
            for (int a = 0; a < d; ++a) s += cj.d2[h][a] * z[a];
            j.hess[h] = scale * s;
        }
        return j;
    }
    double value(std::span<const double> x) const override {
        ChartJet cj = chart->jet(x, 0);
        double v = 0.0;
        for (int a = 0; a < chart->ambient_dim(); ++a) v += cj.point[a] * z[a];
        return scale * v + shift;
    }
};

// Natural cubic spline on n uniform nodes: second derivatives M = S y.
struct Spline1D {
    int n = 0;
    double lo = 0.0, h = 1.0;
    Eigen::MatrixXd S;

    Spline1D() = default;
    Spline1D(int n_, double lo_, double hi_) : n(n_), lo(lo_), h((hi_ - lo_) / (n_ - 1)) {
        S = Eigen::MatrixXd::Zero(n, n);
        if (n < 3) return;
        const int m = n - 2;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, n);
        for (int i = 0; i < m; ++i) {
            A(i, i) = 4.0;
            if (i > 0) A(i, i - 1) = 1.0;
            if (i + 1 < m) A(i, i + 1) = 1.0;
            B(i, i) = 6.0 / (h * h);
            B(i, i + 1) = -12.0 / (h * h);
            B(i, i + 2) = 6.0 / (h * h);
        }
        S.block(1, 0, m, n) = A.partialPivLu().solve(B);
    }

    // Cardinal weights for value, first and second derivative at x.
    void weights(double x, std::vector<double>& w0, std::vector<double>& w1, std::vector<double>& w2) const {
        w0.assign(n, 0.0);
        w1.assign(n, 0.0);
        w2.assign(n, 0.0);
        int i = static_cast<int>(std::floor((x - lo) / h));
        i = std::clamp(i, 0, n - 2);
        double t = (x - lo) / h - i;
        double A = 1.0 - t, B = t;
        w0[i] += A;
        w0[i + 1] += B;
        w1[i] += -1.0 / h;
        w1[i + 1] += 1.0 / h;
        double cA0 = (A * A * A - A) * h * h / 6.0, cB0 = (B * B * B - B) * h * h / 6.0;
        double cA1 = -(3.0 * A * A - 1.0) * h / 6.0, cB1 = (3.0 * B * B - 1.0) * h / 6.0;
        for (int c = 0; c < n; ++c) {
            w0[c] += cA0 * S(i, c) + cB0 * S(i + 1, c);
            w1[c] += cA1 * S(i, c) + cB1 * S(i + 1, c);
            w2[c] += A * S(i, c) + B * S(i + 1, c);
        }
    }
};

struct GridField final : FieldImpl {
    std::array<int, kMaxParam> nodes;
    std::vector<double> vals;
    std::array<Spline1D, kMaxParam> splines;
    GridField(const Box& d, std::array<int, kMaxParam> n, std::vector<double> v)
        : FieldImpl(FieldKind::grid_sampled, d), nodes(n), vals(std::move(v)) {
        for (int a = 0; a < d.dim; ++a) splines[a] = Spline1D(nodes[a], d.lo[a], d.hi[a]);
    }
    Jet jet(std::span<const double> x) const override {
        const int k = domain.dim;
        std::array<std::array<std::vector<double>, 3>, kMaxParam> w;
        for (int a = 0; a < k; ++a) splines[a].weights(x[a], w[a][0], w[a][1], w[a][2]);
        // Derivative order per axis for each jet component.
        struct Comp {
            std::array<int, kMaxParam> ord;
            double* out;
        };
        Jet j;
        j.dim = k;
        std::vector<Comp> comps;
        comps.push_back({{0, 0, 0}, &j.value});
        for (int i = 0; i < k; ++i) {
            Comp c{{0, 0, 0}, &j.grad[i]};
            c.ord[i] = 1;
            comps.push_back(c);
        }
        for (int i = 0; i < k; ++i)
            for (int jj = i; jj < k; ++jj) {
                Comp c{{0, 0, 0}, &j.hess[hess_index(i, jj, k)]};
                c.ord[i] += 1;
                c.ord[jj] += 1;
                comps.push_back(c);
            }
        std::size_t total = vals.size();
        for (auto& c : comps) {
            double s = 0.0;
            for (std::size_t id = 0; id < total; ++id) {
                std::size_t t = id;
                double wprod = 1.0;
                for (int a = 0; a < k; ++a) {
                    int ia = static_cast<int>(t % nodes[a]);
                    t /= nodes[a];
                    wprod *= w[a][c.ord[a]][ia];
                    if (wprod == 0.0) break;
                }
                s += wprod * vals[id];
            }
            *c.out = s;
        }
        return j;
    }
};

struct CombinationField final : FieldImpl {
    double a, b;
    ScalarField f, g;
    CombinationField(const Box& d, double a_, ScalarField f_, double b_, ScalarField g_)
        : FieldImpl(FieldKind::combination, d), a(a_), b(b_), f(std::move(f_)), g(std::move(g_)) {}
    Jet jet(std::span<const double> x) const override {
        Jet jf = f.jet(x), jg = g.jet(x);
        Jet j;
        j.dim = domain.dim;
        j.value = a * jf.value + b * jg.value;
        for (int i = 0; i < kMaxParam; ++i) j.grad[i] = a * jf.grad[i] + b * jg.grad[i];
        for (int i = 0; i < kMaxHess; ++i) j.hess[i] = a * jf.hess[i] + b * jg.hess[i];
        return j;
    }
    double value(std::span<const double> x) const override { return a * f.value(x) + b * g.value(x); }
};

struct CustomField final : FieldImpl {
    std::function<Jet(std::span<const double>)> fn;
    CustomField(const Box& d, std::function<Jet(std::span<const double>)> f) : FieldImpl(FieldKind::custom, d), fn(std::move(f)) {}
    Jet jet(std::span<const double> x) const override {
        Jet j = fn(x);
        j.dim = domain.dim;
        return j;
    }
};

const std::vector<Monomial> kNoMonomials;
const std::vector<double> kNoDoubles;

}  // namespace

const char* field_kind_name(FieldKind kind) {
    switch (kind) {
        case FieldKind::induced: return "induced";
        case FieldKind::polynomial: return "polynomial";
        case FieldKind::constant: return "constant";
        case FieldKind::grid_sampled: return "grid_sampled";
        case FieldKind::sphere_cap: return "sphere_cap";
        case FieldKind::combination: return "combination";
        case FieldKind::custom: return "custom";
    }
    return "custom";
}

const detail::FieldImpl& ScalarField::impl() const {
    if (!impl_) fail(ErrorCode::invalid_parameter, "empty scalar field");
    return *impl_;
}

FieldKind ScalarField::kind() const { return impl().kind; }
const Box& ScalarField::domain() const { return impl().domain; }
double ScalarField::value(std::span<const double> x) const { return impl().value(x); }
Jet ScalarField::jet(std::span<const double> x) const { return impl().jet(x); }

void ScalarField::values(const double* xs, std::size_t n, double* out) const {
    const auto& im = impl();
    const std::size_t k = static_cast<std::size_t>(im.domain.dim);
    for (std::size_t i = 0; i < n; ++i) out[i] = im.value(std::span<const double>(xs + i * k, k));
}

ScalarField ScalarField::constant(const Box& domain, double c) {
    return ScalarField(std::make_shared<ConstantField>(domain, c));
}

ScalarField ScalarField::polynomial(const Box& domain, std::vector<Monomial> terms) {
    return ScalarField(std::make_shared<PolynomialField>(domain, std::move(terms)));
}

ScalarField ScalarField::affine(const Box& domain, std::span<const double> slope, double offset) {
    if (static_cast<int>(slope.size()) != domain.dim) fail(ErrorCode::invalid_parameter, "affine slope dimension");
    std::vector<Monomial> t;
    t.push_back({offset, {0, 0, 0}});
    for (int a = 0; a < domain.dim; ++a) {
        Monomial m{slope[a], {0, 0, 0}};
        m.exps[a] = 1;
        t.push_back(m);
    }
    return polynomial(domain, std::move(t));
}

ScalarField ScalarField::sphere_cap(const Box& domain, std::span<const double> center, double radius, double offset,
                                    double sign) {
    if (static_cast<int>(center.size()) != domain.dim) fail(ErrorCode::invalid_parameter, "cap center dimension");
    if (!(radius > 0.0)) fail(ErrorCode::invalid_parameter, "cap radius must be positive");
    double far = 0.0;
    for (int a = 0; a < domain.dim; ++a) {
        double e = std::max(std::fabs(domain.lo[a] - center[a]), std::fabs(domain.hi[a] - center[a]));
        far += e * e;
    }
    if (std::sqrt(far) >= radius) fail(ErrorCode::invalid_parameter, "domain leaves the cap's ball");
    return ScalarField(std::make_shared<SphereCapField>(domain, std::vector<double>(center.begin(), center.end()),
                                                        radius, offset, sign >= 0 ? 1.0 : -1.0));
}

ScalarField ScalarField::induced(std::shared_ptr<const ManifoldChart> chart, std::span<const double> z, double scale,
                                 double shift, std::optional<Box> domain) {
    if (!chart) fail(ErrorCode::invalid_parameter, "induced field needs a chart");
    if (static_cast<int>(z.size()) != chart->ambient_dim()) fail(ErrorCode::invalid_parameter, "z has the wrong dimension");
    Box d = domain ? *domain : Box::unit(chart->param_dim());
    if (d.dim != chart->param_dim()) fail(ErrorCode::invalid_parameter, "domain dimension differs from the chart");
    return ScalarField(
        std::make_shared<InducedField>(d, std::move(chart), std::vector<double>(z.begin(), z.end()), scale, shift));
}

ScalarField ScalarField::grid_sampled(const Box& domain, std::array<int, kMaxParam> nodes, std::vector<double> values) {
    std::size_t total = 1;
    for (int a = 0; a < domain.dim; ++a) {
        if (nodes[a] < 2) fail(ErrorCode::invalid_parameter, "grid needs at least two nodes per axis");
        total *= static_cast<std::size_t>(nodes[a]);
    }
    if (values.size() != total) fail(ErrorCode::invalid_parameter, "grid value count mismatch");
    return ScalarField(std::make_shared<GridField>(domain, nodes, std::move(values)));
}

ScalarField ScalarField::combination(double a, const ScalarField& f, double b, const ScalarField& g) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    return ScalarField(std::make_shared<CombinationField>(f.domain(), a, f, b, g));
}

ScalarField ScalarField::custom(const Box& domain, std::function<Jet(std::span<const double>)> jet_fn, std::string) {
    return ScalarField(std::make_shared<CustomField>(domain, std::move(jet_fn)));
}

const std::vector<Monomial>& ScalarField::monomials() const {
    if (auto p = dynamic_cast<const PolynomialField*>(impl_.get())) return p->terms;
    return kNoMonomials;
}
double ScalarField::constant_value() const {
    if (auto p = dynamic_cast<const ConstantField*>(impl_.get())) return p->c;
    return 0.0;
}
const std::vector<double>& ScalarField::induced_z() const {
    if (auto p = dynamic_cast<const InducedField*>(impl_.get())) return p->z;
    return kNoDoubles;
}
double ScalarField::induced_scale() const {
    if (auto p = dynamic_cast<const InducedField*>(impl_.get())) return p->scale;
    return 1.0;
}
double ScalarField::induced_shift() const {
    if (auto p = dynamic_cast<const InducedField*>(impl_.get())) return p->shift;
    return 0.0;
}
std::shared_ptr<const ManifoldChart> ScalarField::induced_chart() const {
    if (auto p = dynamic_cast<const InducedField*>(impl_.get())) return p->chart;
    return nullptr;
}
const std::vector<double>& ScalarField::cap_center() const {
    if (auto p = dynamic_cast<const SphereCapField*>(impl_.get())) return p->center;
    return kNoDoubles;
}
double ScalarField::cap_radius() const {
    if (auto p = dynamic_cast<const SphereCapField*>(impl_.get())) return p->radius;
    return 0.0;
}
double ScalarField::cap_offset() const {
    if (auto p = dynamic_cast<const SphereCapField*>(impl_.get())) return p->offset;
    return 0.0;
}
double ScalarField::cap_sign() const {
    if (auto p = dynamic_cast<const SphereCapField*>(impl_.get())) return p->sign;
    return 1.0;
}
const std::vector<double>& ScalarField::grid_values() const {
    if (auto p = dynamic_cast<const GridField*>(impl_.get())) return p->vals;
    return kNoDoubles;
}
std::array<int, kMaxParam> ScalarField::grid_nodes() const {
    if (auto p = dynamic_cast<const GridField*>(impl_.get())) return p->nodes;
    return {0, 0, 0};
}

// ---------------------------------------------------------------------------
// Sampling, sphere nets

const SphereNet& sphere_net(int k) {
    static std::once_flag once;
    static std::array<SphereNet, kMaxParam + 1> nets;
    std::call_once(once, [] {
        for (int d = 1; d <= kMaxParam; ++d) {
            SphereNet& s = nets[d];
            s.dim = d;
            if (d == 1) {
                s.dirs = {1.0};
            } else if (d == 2) {
                for (int i = 0; i < 64; ++i) {
                    double th = M_PI * i / 64.0;
                    s.dirs.push_back(std::cos(th));
                    s.dirs.push_back(std::sin(th));
                }
            } else {
                const double golden = M_PI * (3.0 - std::sqrt(5.0));
                for (int i = 0; i < 256; ++i) {
                    double z = (i + 0.5) / 256.0;
                    double r = std::sqrt(1.0 - z * z);
                    double ph = golden * i;
                    s.dirs.push_back(r * std::cos(ph));
                    s.dirs.push_back(r * std::sin(ph));
                    s.dirs.push_back(z);
                }
            }
            s.count = s.dirs.size() / d;
            for (std::size_t c = 0; c < s.count; ++c) {
                const double* xi = &s.dirs[c * d];
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) s.coef.push_back((i == j ? 1.0 : 2.0) * xi[i] * xi[j]);
            }
        }
    });
    if (k < 1 || k > kMaxParam) fail(ErrorCode::invalid_parameter, "sphere net dimension");
    return nets[k];
}

simd::FieldSamples SampledField::view() const {
    simd::FieldSamples s;
    s.dim = dim;
    s.count = value.size();
    s.value = value.data();
    for (int a = 0; a < dim; ++a) s.grad[a] = grad[a].data();
    for (int m = 0; m < dim * (dim + 1) / 2; ++m) s.hess[m] = hess[m].data();
    return s;
}

std::vector<double> SampledField::node(std::size_t id) const {
    std::vector<double> x(dim);
    for (int a = 0; a < dim; ++a) {
        std::size_t ia = id % static_cast<std::size_t>(nodes);
        id /= static_cast<std::size_t>(nodes);
        x[a] = ia + 1 == static_cast<std::size_t>(nodes) ? box.hi[a] : box.lo[a] + static_cast<double>(ia) * step(a);
    }
    return x;
}

SampledField sample_field(const ScalarField& f, const Box& box, int nodes_per_axis) {
    if (nodes_per_axis < 2) fail(ErrorCode::invalid_parameter, "sampling needs at least two nodes per axis");
    SampledField s;
    s.dim = box.dim;
    s.nodes = nodes_per_axis;
    s.box = box;
    std::size_t total = 1;
    for (int a = 0; a < box.dim; ++a) total *= static_cast<std::size_t>(nodes_per_axis);
    const int nh = box.dim * (box.dim + 1) / 2;
    s.value.resize(total);
    for (int a = 0; a < box.dim; ++a) s.grad[a].resize(total);
    for (int m = 0; m < nh; ++m) s.hess[m].resize(total);
    for (std::size_t id = 0; id < total; ++id) {
        std::vector<double> x = s.node(id);
        Jet j = f.jet(x);
        s.value[id] = j.value;
        for (int a = 0; a < box.dim; ++a) s.grad[a][id] = j.grad[a];
        for (int m = 0; m < nh; ++m) s.hess[m][id] = j.hess[m];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Norms and infima

namespace {

struct HJet {
    double abs_value, grad_norm, qmax, qmin;
};

HJet h_jet(const ScalarField& f, const ScalarField* g, std::span<const double> x) {
    Jet jf = f.jet(x);
    if (g) {
        Jet jg = g->jet(x);
        jf.value -= jg.value;
        for (int a = 0; a < kMaxParam; ++a) jf.grad[a] -= jg.grad[a];
        for (int m = 0; m < kMaxHess; ++m) jf.hess[m] -= jg.hess[m];
    }
    const SphereNet& net = sphere_net(jf.dim);
    const int nh = jf.dim * (jf.dim + 1) / 2;
    HJet r{std::fabs(jf.value), jf.grad_norm(), 0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t d = 0; d < net.count; ++d) {
        double q = 0.0;
        for (int m = 0; m < nh; ++m) q += net.coef[d * nh + m] * jf.hess[m];
        q = std::fabs(q);
        r.qmax = std::max(r.qmax, q);
        r.qmin = std::min(r.qmin, q);
    }
    return r;
}

// Two local passes (5^k lattice, spacing step/2 then step/4) around x0 inside box.
// sense = +1 maximizes, -1 minimizes. Returns the best value, updates x0.
double refine_local(const std::function<double(std::span<const double>)>& obj, const Box& box, std::vector<double>& x0,
                    double best, std::array<double, kMaxParam> step, int sense) {
    const int k = box.dim;
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= 5;
    for (int pass = 1; pass <= 2; ++pass) {
        for (int a = 0; a < k; ++a) step[a] *= 0.5;
        std::vector<double> center = x0, x(k);
        for (std::size_t id = 0; id < total; ++id) {
            std::size_t t = id;
            for (int a = 0; a < k; ++a) {
                int o = static_cast<int>(t % 5) - 2;
                t /= 5;
                x[a] = std::clamp(center[a] + o * step[a], box.lo[a], box.hi[a]);
            }
            double v = obj(x);
            if (sense > 0 ? v > best : v < best) {
                best = v;
                x0 = x;
            }
        }
    }
    return best;
}

// Compass search down to a tiny step; keeps x inside box.
double descend(const std::function<double(std::span<const double>)>& obj, const Box& box, std::vector<double>& x,
               double best, double step) {
    const int k = box.dim;
    const double stop = 1e-12 * std::max(1.0, box.diameter());
    std::vector<double> y(k);
    for (int iter = 0; iter < 100000 && step > stop; ++iter) {
        bool moved = false;
        for (int a = 0; a < k && !moved; ++a)
            for (int s = -1; s <= 1 && !moved; s += 2) {
                y = x;
                y[a] = std::clamp(x[a] + s * step, box.lo[a], box.hi[a]);
                if (y[a] == x[a]) continue;
                double v = obj(y);
                if (v < best) {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        if (!moved) step *= 0.5;
    }
    return best;
}

std::array<double, kMaxParam> grid_steps(const SampledField& s) {
    std::array<double, kMaxParam> st{};
    for (int a = 0; a < s.dim; ++a) st[a] = s.step(a);
    return st;
}

double max_step(const SampledField& s) {
    double m = 0.0;
    for (int a = 0; a < s.dim; ++a) m = std::max(m, s.step(a));
    return m;
}

}  // namespace

NormEstimate c2_distance_sampled(const ScalarField& f, const ScalarField& g, const SampledField& sf,
                                 const SampledField* sg, simd::PairMetrics* metrics_out) {
    const SphereNet& net = sphere_net(sf.dim);
    simd::PairMetrics pm;
    simd::FieldSamples vf = sf.view();
    simd::FieldSamples vg;
    if (sg) vg = sg->view();
    simd::pair_metrics(vf, sg ? &vg : nullptr, net.coef.data(), net.count, pm);
    if (metrics_out) *metrics_out = pm;
    const ScalarField* gp = sg ? &g : nullptr;
    auto steps = grid_steps(sf);
    NormEstimate r;
    {
        auto x = sf.node(pm.arg_value);
        r.sup_value = refine_local([&](std::span<const double> p) { return h_jet(f, gp, p).abs_value; }, sf.box, x,
                                   pm.sup_value, steps, +1);
    }
    {
        auto x = sf.node(pm.arg_grad);
        r.sup_grad = refine_local([&](std::span<const double> p) { return h_jet(f, gp, p).grad_norm; }, sf.box, x,
                                  pm.sup_grad, steps, +1);
    }
    {
        auto x = sf.node(pm.arg_dir2);
        r.sup_dir2 = refine_local([&](std::span<const double> p) { return h_jet(f, gp, p).qmax; }, sf.box, x,
                                  pm.sup_dir2, steps, +1);
    }
    r.total = r.sup_value + r.sup_grad + r.sup_dir2;
    r.uncertainty = max_step(sf) * r.sup_dir2;
    return r;
}

NormEstimate c2_distance(const ScalarField& f, const ScalarField& g, int nodes_per_axis) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    SampledField sf = sample_field(f, f.domain(), nodes_per_axis);
    SampledField sg = sample_field(g, g.domain(), nodes_per_axis);
    return c2_distance_sampled(f, g, sf, &sg);
}

NormEstimate c2_norm(const ScalarField& h, int nodes_per_axis) {
    SampledField sh = sample_field(h, h.domain(), nodes_per_axis);
    return c2_distance_sampled(h, h, sh, nullptr);
}

ExtremumEstimate tangency_parameter(const ScalarField& f, const ScalarField& g, const Box& U, int nodes_per_axis) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    if (!f.domain().contains(U)) fail(ErrorCode::domain_mismatch, "subdomain leaves the field domain");
    SampledField sf = sample_field(f, U, nodes_per_axis);
    SampledField sg = sample_field(g, U, nodes_per_axis);
    const SphereNet& net = sphere_net(U.dim);
    simd::PairMetrics pm;
    simd::FieldSamples vf = sf.view(), vg = sg.view();
    simd::pair_metrics(vf, &vg, net.coef.data(), net.count, pm);
    ExtremumEstimate r;
    r.point = sf.node(pm.arg_value_grad);
    auto obj = [&](std::span<const double> p) {
        HJet hj = h_jet(f, &g, p);
        return hj.abs_value + hj.grad_norm;
    };
    r.value = descend(obj, U, r.point, pm.min_value_grad, 0.5 * max_step(sf));
    r.uncertainty = max_step(sf) * pm.sup_dir2;
    return r;
}

ExtremumEstimate cinematic_infimum(const ScalarField& f, const ScalarField& g, int nodes_per_axis) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    SampledField sf = sample_field(f, f.domain(), nodes_per_axis);
    SampledField sg = sample_field(g, g.domain(), nodes_per_axis);
    const SphereNet& net = sphere_net(sf.dim);
    simd::PairMetrics pm;
    simd::FieldSamples vf = sf.view(), vg = sg.view();
    simd::pair_metrics(vf, &vg, net.coef.data(), net.count, pm);
    ExtremumEstimate r;
    r.point = sf.node(pm.arg_full);
    auto obj = [&](std::span<const double> p) {
        HJet hj = h_jet(f, &g, p);
        return hj.abs_value + hj.grad_norm + hj.qmin;
    };
    r.value = refine_local(obj, sf.box, r.point, pm.min_full, grid_steps(sf), -1);
    r.uncertainty = max_step(sf) * pm.sup_dir2;
    return r;
}

// ---------------------------------------------------------------------------
// Families

FunctionFamily make_family(std::vector<ScalarField> members) {
    if (members.empty()) fail(ErrorCode::invalid_family, "family has no members");
    FunctionFamily fam;
    fam.domain = members.front().domain();
    for (const auto& m : members)
        if (!(m.domain() == fam.domain)) fail(ErrorCode::domain_mismatch, "family members live on different boxes");
    fam.members = std::move(members);
    return fam;
}

FunctionFamily induced_projection_family(std::shared_ptr<const ManifoldChart> chart,
                                         const std::vector<std::vector<double>>& Z, bool renormalize) {
    if (!chart) fail(ErrorCode::invalid_parameter, "induced family needs a chart");
    if (Z.empty()) fail(ErrorCode::invalid_family, "empty index set");
    for (const auto& z : Z) {
        if (static_cast<int>(z.size()) != chart->ambient_dim()) fail(ErrorCode::invalid_parameter, "z has the wrong dimension");
        double s = 0.0;
        for (double v : z) s += v * v;
        if (std::sqrt(s) > 1.0 + 1e-12) fail(ErrorCode::invalid_parameter, "index point outside the unit ball");
    }
    const Box dom = Box::unit(chart->param_dim());
    std::vector<ScalarField> raw;
    raw.reserve(Z.size());
    for (const auto& z : Z) raw.push_back(ScalarField::induced(chart, z));
    InducedOrigin origin;
    origin.chart = chart;
    origin.Z = Z;
    origin.renormalized = renormalize;
    if (!renormalize) {
        origin.renorm_L = 0.0;
        FunctionFamily fam = make_family(std::move(raw));
        fam.origin = origin;
        return fam;
    }
    // L = max member sup-norm over the grid with local refinement.
    std::vector<double> sups(raw.size());
    parallel_for(raw.size(), [&](std::size_t i) {
        SampledField s = sample_field(raw[i], dom, kDefaultGridNodes);
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t n = 0; n < s.value.size(); ++n)
            if (std::fabs(s.value[n]) > best) {
                best = std::fabs(s.value[n]);
                arg = n;
            }
        auto x = s.node(arg);
        sups[i] = refine_local([&](std::span<const double> p) { return std::fabs(raw[i].value(p)); }, dom, x, best,
                               grid_steps(s), +1);
    });
    double L = *std::max_element(sups.begin(), sups.end());
    if (!(L > 0.0)) L = 1.0;
    origin.renorm_L = L;
    std::vector<ScalarField> members;
    members.reserve(Z.size());
    for (const auto& z : Z) members.push_back(ScalarField::induced(chart, z, 1.0 / (2.0 * L), 0.5));
    FunctionFamily fam = make_family(std::move(members));
    fam.origin = origin;
    return fam;
}

// ---------------------------------------------------------------------------
// Cinematic constant

double CinematicReport::alpha_at(double eta) const {
    double best = 0.0;
    for (const auto& s : alpha)
        if (s.eta <= eta) best = std::max(best, s.alpha);
    return best;
}

namespace {

double spectral_norm_packed(const double* h, int k) {
    if (k == 1) return std::fabs(h[0]);
    if (k == 2) {
        double m = 0.5 * (h[0] + h[2]);
        double d = 0.5 * (h[0] - h[2]);
        return std::fabs(m) + std::sqrt(d * d + h[1] * h[1]);
    }
    Eigen::Matrix3d M;
    M << h[0], h[1], h[2], h[1], h[3], h[4], h[2], h[4], h[5];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Largest Hessian-difference spectral norm of h = f - g between lattice nodes at
// the given offset (in node units).
double hessian_oscillation(const SampledField& f, const SampledField& g, const std::array<int, kMaxParam>& off) {
    const int k = f.dim;
    const int n = f.nodes;
    const int nh = k * (k + 1) / 2;
    std::size_t total = f.value.size();
    double worst = 0.0;
    for (std::size_t id = 0; id < total; ++id) {
        std::size_t t = id;
        std::array<int, kMaxParam> idx{};
        bool ok = true;
        std::size_t other = 0, mul = 1;
        for (int a = 0; a < k; ++a) {
            idx[a] = static_cast<int>(t % n);
            t /= n;
            int o = idx[a] + off[a];
            if (o < 0 || o >= n) {
                ok = false;
                break;
            }
            other += static_cast<std::size_t>(o) * mul;
            mul *= static_cast<std::size_t>(n);
        }
        if (!ok) continue;
        double d[kMaxHess];
        for (int m = 0; m < nh; ++m)
            d[m] = (f.hess[m][id] - g.hess[m][id]) - (f.hess[m][other] - g.hess[m][other]);
        worst = std::max(worst, spectral_norm_packed(d, k));
    }
    return worst;
}

}  // namespace

CinematicReport estimate_cinematic_constant(const FunctionFamily& family, const CinematicOptions& opts) {
    const std::size_t n = family.members.size();
    if (n == 0) fail(ErrorCode::invalid_family, "empty family");
    CinematicReport rep;
    rep.grid_nodes = opts.grid_nodes;
    const Box& dom = family.domain;
    const int k = dom.dim;
    std::vector<SampledField> samples(n);
    parallel_for(n, [&](std::size_t i) { samples[i] = sample_field(family.members[i], dom, opts.grid_nodes); });

    // Pair selection: all pairs within budget, otherwise a seeded subset.
    const std::size_t all_pairs = n * (n - 1) / 2;
    std::vector<std::size_t> pair_ids;
    if (all_pairs <= opts.pair_budget) {
        pair_ids.resize(all_pairs);
        std::iota(pair_ids.begin(), pair_ids.end(), 0);
    } else {
        Rng rng(opts.seed);
        std::vector<std::size_t> ids(all_pairs);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < opts.pair_budget; ++i) std::swap(ids[i], ids[i + rng.below(all_pairs - i)]);
        pair_ids.assign(ids.begin(), ids.begin() + opts.pair_budget);
        std::sort(pair_ids.begin(), pair_ids.end());
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(pair_ids.size());
    {
        std::size_t id = 0, cursor = 0;
        for (std::size_t i = 0; i < n && cursor < pair_ids.size(); ++i)
            for (std::size_t j = i + 1; j < n && cursor < pair_ids.size(); ++j, ++id)
                if (pair_ids[cursor] == id) {
                    pairs.emplace_back(i, j);
                    ++cursor;
                }
    }
    rep.pairs_tested = pairs.size();

    struct PairResult {
        double c2 = 0.0, inf = 0.0, unc = 0.0;
    };
    std::vector<PairResult> res(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        auto [i, j] = pairs[p];
        const ScalarField& f = family.members[i];
        const ScalarField& g = family.members[j];
        simd::PairMetrics pm;
        NormEstimate ne = c2_distance_sampled(f, g, samples[i], &samples[j], &pm);
        auto x = samples[i].node(pm.arg_full);
        auto obj = [&](std::span<const double> pt) {
            HJet hj = h_jet(f, &g, pt);
            return hj.abs_value + hj.grad_norm + hj.qmin;
        };
        double inf = refine_local(obj, dom, x, pm.min_full, grid_steps(samples[i]), -1);
        res[p] = {ne.total, inf, ne.uncertainty};
    });

    double diameter = 0.0, worst = 0.0;
    bool zero_inf = false;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        diameter = std::max(diameter, res[p].c2);
        rep.max_uncertainty = std::max(rep.max_uncertainty, res[p].unc);
        double tol = 1e-9 * std::max(1.0, res[p].c2);
        if (res[p].c2 <= tol) continue;  // coincident members carry no information
        if (res[p].inf <= tol) {
            if (!zero_inf) {
                rep.witness_i = pairs[p].first;
                rep.witness_j = pairs[p].second;
            }
            zero_inf = true;
            continue;
        }
        double ratio = res[p].c2 / res[p].inf;
        if (!zero_inf && ratio > worst) {
            worst = ratio;
            rep.witness_i = pairs[p].first;
            rep.witness_j = pairs[p].second;
        }
    }
    rep.diameter = diameter;
    rep.worst_ratio = zero_inf ? std::numeric_limits<double>::infinity() : worst;
    rep.K = std::max({1.0, diameter, worst});
    rep.clause_infimum = !zero_inf;
    if (zero_inf) {
        rep.K = std::numeric_limits<double>::infinity();
        rep.note = "cinematic infimum vanishes for pair (" + std::to_string(rep.witness_i) + ", " +
                   std::to_string(rep.witness_j) + ")";
    }

    // Doubling constant from greedy r/2-nets inside C^2 balls of radius r.
    const std::size_t dn = std::min<std::size_t>(n, 64);
    std::vector<std::size_t> sub(dn);
    for (std::size_t i = 0; i < dn; ++i) sub[i] = i * n / dn;
    std::vector<double> dist(dn * dn, 0.0);
    {
        const SphereNet& net = sphere_net(k);
        std::vector<std::pair<std::size_t, std::size_t>> dp;
        for (std::size_t a = 0; a < dn; ++a)
            for (std::size_t b = a + 1; b < dn; ++b) dp.emplace_back(a, b);
        parallel_for(dp.size(), [&](std::size_t p) {
            auto [a, b] = dp[p];
            simd::PairMetrics pm;
            simd::FieldSamples va = samples[sub[a]].view(), vb = samples[sub[b]].view();
            simd::pair_metrics(va, &vb, net.coef.data(), net.count, pm);
            double d = pm.sup_value + pm.sup_grad + pm.sup_dir2;
            dist[a * dn + b] = dist[b * dn + a] = d;
        });
    }
    double ddiam = *std::max_element(dist.begin(), dist.end());
    double D = 1.0;
    if (ddiam > 0.0) {
        for (double r : {ddiam / 2.0, ddiam / 4.0}) {
            for (std::size_t c = 0; c < dn; ++c) {
                std::vector<std::size_t> ball;
                for (std::size_t q = 0; q < dn; ++q)
                    if (dist[c * dn + q] <= r) ball.push_back(q);
                std::vector<std::size_t> centers;
                for (std::size_t q : ball) {
                    bool covered = false;
                    for (std::size_t ce : centers)
                        if (dist[ce * dn + q] <= r / 2.0) {
                            covered = true;
                            break;
                        }
                    if (!covered) centers.push_back(q);
                }
                D = std::max(D, static_cast<double>(centers.size()));
            }
        }
    }
    rep.D = D;

    // Modulus of continuity: oscillation of the Hessian difference over node
    // offsets, then the largest dyadic step whose oscillation stays below eta.
    std::vector<std::pair<double, double>> omega;  // (distance, oscillation), envelope later
    {
        const std::size_t np = std::min<std::size_t>(pairs.size(), 64);
        std::vector<std::array<int, kMaxParam>> offs;
        for (int m = 1; m < opts.grid_nodes; m *= 2) {
            for (int a = 0; a < k; ++a) {
                std::array<int, kMaxParam> o{};
                o[a] = m;
                offs.push_back(o);
            }
            if (k >= 2) {
                std::array<int, kMaxParam> o{};
                o[0] = m;
                o[1] = m;
                offs.push_back(o);
                o[1] = -m;
                offs.push_back(o);
            }
        }
        std::vector<double> osc(offs.size(), 0.0);
        std::vector<std::vector<double>> per(np, std::vector<double>(offs.size(), 0.0));
        parallel_for(np, [&](std::size_t p) {
            auto [i, j] = pairs[p];
            for (std::size_t o = 0; o < offs.size(); ++o) per[p][o] = hessian_oscillation(samples[i], samples[j], offs[o]);
        });
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t o = 0; o < offs.size(); ++o) osc[o] = std::max(osc[o], per[p][o]);
        for (std::size_t o = 0; o < offs.size(); ++o) {
            double len = 0.0;
            for (int a = 0; a < k; ++a) {
                double d = offs[o][a] * samples[0].step(a);
                len += d * d;
            }
            omega.emplace_back(std::sqrt(len), osc[o]);
        }
        std::sort(omega.begin(), omega.end());
        for (std::size_t i = 1; i < omega.size(); ++i) omega[i].second = std::max(omega[i].second, omega[i - 1].second);
    }
    auto omega_at = [&](double d) {
        if (omega.empty()) return 0.0;
        if (d < omega.front().first) return omega.front().second * d / omega.front().first;
        double w = 0.0;
        for (const auto& [len, o] : omega)
            if (len <= d) w = o;
        return w;
    };
    rep.alpha.push_back({0.0, 0.0});
    const double Kinv = std::isfinite(rep.K) ? 1.0 / rep.K : 0.0;
    bool modulus_ok = true;
    for (int e = 8; e >= 1; --e) {
        double eta = std::ldexp(1.0, -e);
        double a = 0.0;
        for (int j = 0; j <= 30; ++j) {
            double cand = std::ldexp(1.0, -j);
            if (omega_at(cand) <= eta) {
                a = cand;
                break;
            }
        }
        a = std::min(a, Kinv * eta);
        if (!(a > 0.0)) modulus_ok = false;
        rep.alpha.push_back({eta, a});
    }
    rep.clause_modulus = modulus_ok;
    rep.clause_diameter = std::isfinite(rep.K);
    rep.clause_doubling = std::isfinite(rep.D);
    rep.passed = rep.clause_diameter && rep.clause_doubling && rep.clause_infimum && rep.clause_modulus;
    return rep;
}

// ---------------------------------------------------------------------------
// Classification

const char* tangency_case_name(TangencyCase c) {
    switch (c) {
        case TangencyCase::value_separated: return "value-separated";
        case TangencyCase::transversal: return "transversal";
        case TangencyCase::tangent: return "tangent";
        case TangencyCase::mixed: return "mixed";
        case TangencyCase::none: return "none";
    }
    return "none";
}

bool find_critical_point(const ScalarField& h, const Box& box, std::span<const double> x0, double tol,
                         std::vector<double>& out) {
    const int k = box.dim;
    Eigen::VectorXd x(k);
    for (int a = 0; a < k; ++a) x[a] = std::clamp(x0[a], box.lo[a], box.hi[a]);
    auto grad_at = [&](const Eigen::VectorXd& p, Jet& j) {
        std::vector<double> v(p.data(), p.data() + k);
        j = h.jet(v);
        Eigen::VectorXd g(k);
        for (int a = 0; a < k; ++a) g[a] = j.grad[a];
        return g;
    };
    Jet j;
    Eigen::VectorXd g = grad_at(x, j);
    for (int it = 0; it < 100 && g.norm() > tol; ++it) {
        Eigen::MatrixXd H(k, k);
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) H(a, b) = j.h2(a, b);
        Eigen::VectorXd step = H.colPivHouseholderQr().solve(g);
        if (!step.allFinite()) break;
        double lam = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
            Eigen::VectorXd y = x - lam * step;
            for (int a = 0; a < k; ++a) y[a] = std::clamp(y[a], box.lo[a], box.hi[a]);
            Jet jy;
            Eigen::VectorXd gy = grad_at(y, jy);
            if (gy.norm() < g.norm()) {
                x = y;
                g = gy;
                j = jy;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    out.assign(x.data(), x.data() + k);
    return g.norm() <= tol;
}

TangencyClassification classify_pair(const ScalarField& f, const ScalarField& g, double delta, double K,
                                     const ClassifyOptions& opts) {
    if (!(f.domain() == g.domain())) fail(ErrorCode::domain_mismatch, "fields live on different boxes");
    if (!(K >= 1.0) || !std::isfinite(K)) fail(ErrorCode::invalid_parameter, "cinematic constant must be finite and >= 1");
    const Box& dom = f.domain();
    const int k = dom.dim;
    TangencyClassification out;
    NormEstimate ne = c2_distance(f, g);
    out.c2 = ne.total;
    if (out.c2 < delta) fail(ErrorCode::invalid_parameter, "C2 distance below the scale delta");
    out.threshold = out.c2 / (3.0 * K);
    out.tangency = tangency_parameter(f, g, dom).value;

    double alpha = opts.alpha > 0.0 ? opts.alpha : 1.0 / (6.0 * K * K);
    double maxside = 0.0;
    for (int a = 0; a < k; ++a) maxside = std::max(maxside, dom.side(a));
    int level = 0;
    while (std::sqrt(static_cast<double>(k)) * maxside * std::ldexp(1.0, -level) > alpha / 2.0) ++level;
    if (level > opts.finest_level) {
        level = opts.finest_level;
        out.window_clamped = true;
    }
    const int per_axis = 1 << level;
    out.cube_side = maxside / per_axis;
    std::size_t ncubes = 1;
    for (int a = 0; a < k; ++a) ncubes *= static_cast<std::size_t>(per_axis);
    out.cubes.resize(ncubes);
    const ScalarField h = f - g;
    const SphereNet& net = sphere_net(k);
    const int nh = k * (k + 1) / 2;
    const int m = opts.nodes_per_cube;
    const double crit_tol_scale = 1e-8;

    parallel_for(ncubes, [&](std::size_t c) {
        SubcubeLabel lab;
        std::size_t t = c;
        for (int a = 0; a < k; ++a) {
            int ia = static_cast<int>(t % per_axis);
            t /= per_axis;
            double s = dom.side(a) / per_axis;
            lab.cube.dim = k;
            lab.cube.lo[a] = dom.lo[a] + ia * s;
            lab.cube.hi[a] = ia + 1 == per_axis ? dom.hi[a] : dom.lo[a] + (ia + 1) * s;
        }
        Box twice = lab.cube.dilated(2.0).clipped(dom);
        SampledField s = sample_field(h, twice, m);
        double min_v = std::numeric_limits<double>::infinity(), min_g = min_v, min_q = min_v;
        double max_g = 0.0, max_h2 = 0.0, qsign_min = min_v, qsign_max = -min_v;
        std::size_t arg_g = 0;
        for (std::size_t id = 0; id < s.value.size(); ++id) {
            min_v = std::min(min_v, std::fabs(s.value[id]));
            double gs = 0.0;
            for (int a = 0; a < k; ++a) gs += s.grad[a][id] * s.grad[a][id];
            double gn = std::sqrt(gs);
            if (gn < min_g) {
                min_g = gn;
                arg_g = id;
            }
            max_g = std::max(max_g, gn);
            for (std::size_t d = 0; d < net.count; ++d) {
                double q = 0.0;
                for (int mm = 0; mm < nh; ++mm) q += net.coef[d * nh + mm] * s.hess[mm][id];
                min_q = std::min(min_q, std::fabs(q));
                max_h2 = std::max(max_h2, std::fabs(q));
                qsign_min = std::min(qsign_min, q);
                qsign_max = std::max(qsign_max, q);
            }
        }
        // Between nodes a value or gradient can dip by at most (Lipschitz bound) * half diagonal.
        double half_diag = 0.0;
        for (int a = 0; a < k; ++a) half_diag += s.step(a) * s.step(a);
        half_diag = 0.5 * std::sqrt(half_diag);
        double inf_v = min_v - max_g * half_diag;
        double inf_g = min_g - max_h2 * half_diag;
        if (inf_v >= out.threshold) lab.cases |= kCaseValue;
        if (inf_g >= out.threshold) lab.cases |= kCaseGradient;
        if (min_q >= out.threshold) lab.cases |= kCaseCurvature;
        if (lab.cases & kCaseGradient) lab.primary = TangencyCase::transversal;
        else if (lab.cases & kCaseCurvature) lab.primary = TangencyCase::tangent;
        else if (lab.cases & kCaseValue) lab.primary = TangencyCase::value_separated;
        if (lab.cases & kCaseCurvature) {
            lab.convexity = qsign_min > 0 ? 1 : (qsign_max < 0 ? -1 : 0);
            double tol = crit_tol_scale * std::max(max_h2, 1e-300) * twice.diameter();
            // Several starts; distinct converged points are counted.
            std::vector<std::vector<double>> found;
            std::vector<std::vector<double>> starts{s.node(arg_g)};
            std::size_t corners = std::size_t{1} << k;
            for (std::size_t cc = 0; cc < corners; ++cc) {
                std::vector<double> x(k);
                for (int a = 0; a < k; ++a)
                    x[a] = (cc >> a & 1) ? twice.lo[a] + 0.75 * twice.side(a) : twice.lo[a] + 0.25 * twice.side(a);
                starts.push_back(x);
            }
            for (const auto& st : starts) {
                std::vector<double> cp;
                if (!find_critical_point(h, twice, st, tol, cp)) continue;
                bool interior = true;
                for (int a = 0; a < k; ++a)
                    if (cp[a] <= twice.lo[a] || cp[a] >= twice.hi[a]) interior = false;
                if (!interior) continue;
                bool dup = false;
                for (const auto& q : found) {
                    double d = 0.0;
                    for (int a = 0; a < k; ++a) d += (q[a] - cp[a]) * (q[a] - cp[a]);
                    if (std::sqrt(d) < 1e-6 * std::max(1.0, twice.diameter())) dup = true;
                }
                if (!dup) found.push_back(cp);
            }
            lab.critical_points = static_cast<int>(found.size());
            if (!found.empty()) lab.critical_point = found.front();
        }
        out.cubes[c] = std::move(lab);
    });
    for (const auto& lab : out.cubes) {
        if (lab.cases == 0) {
            std::string where;
            for (int a = 0; a < k; ++a)
                where += (a ? " x " : "") + std::string("[") + std::to_string(lab.cube.lo[a]) + ", " +
                         std::to_string(lab.cube.hi[a]) + "]";
            fail(ErrorCode::cinematic_violation, "no case holds on subcube " + where);
        }
    }
    auto all = [&](unsigned bit) {
        return std::all_of(out.cubes.begin(), out.cubes.end(), [&](const SubcubeLabel& l) { return (l.cases & bit) != 0; });
    };
    if (all(kCaseGradient)) out.overall = TangencyCase::transversal;
    else if (all(kCaseCurvature)) out.overall = TangencyCase::tangent;
    else if (all(kCaseValue)) out.overall = TangencyCase::value_separated;
    else out.overall = TangencyCase::mixed;
    return out;
}

}  // namespace cinelab
