#include "cinelab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace cinelab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// v(x) = (x - 1/2, 1) in R^{k+1}: the gnomonic lift used by the sphere charts.
ChartJet gnomonic_lift(std::span<const double> x, int k) {
    ChartJet v;
    v.param_dim = k;
    v.ambient_dim = k + 1;
    for (int a = 0; a < k; ++a) v.point[a] = x[a] - 0.5;
    v.point[k] = 1.0;
    for (int i = 0; i < k; ++i) v.d1[i][i] = 1.0;
    return v;
}

VectorXd to_vec(const std::array<double, kMaxAmbient>& a, int d) {
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = a[i];
    return v;
}

MatrixXd jacobian(const ChartJet& j) {
    MatrixXd J(j.param_dim, j.ambient_dim);
    for (int i = 0; i < j.param_dim; ++i)
        for (int a = 0; a < j.ambient_dim; ++a) J(i, a) = j.d1[i][a];
    return J;
}

struct RawFrame {
    VectorXd point;
    MatrixXd J;
    VectorXd e0;
    std::vector<VectorXd> tangent;
    VectorXd nu_raw;
    double det_sign = 1.0;
    bool codim_zero = false;
};

RawFrame raw_frame(const ManifoldChart& chart, const ChartJet& jet) {
    const int k = chart.param_dim();
    const int d = chart.ambient_dim();
    RawFrame f;
    f.codim_zero = chart.codim_zero();
    f.point = to_vec(jet.point, d);
    f.J = jacobian(jet);

    Eigen::JacobiSVD<MatrixXd> svd(f.J);
    const auto& sv = svd.singularValues();
    double smax = sv.maxCoeff();
    double smin = sv.minCoeff();
    if (!(smax > 1e-300) || smin < 1e-10 * smax)
        fail(ErrorCode::degenerate_chart, "derivative of the chart is rank deficient");

    for (int i = 0; i < k; ++i) {
        VectorXd e = f.J.row(i).transpose();
        for (const auto& prev : f.tangent) e -= prev.dot(e) * prev;
        for (const auto& prev : f.tangent) e -= prev.dot(e) * prev;
        f.tangent.push_back(e.normalized());
    }

    double pn = f.point.norm();
    if (!(pn > 1e-300)) fail(ErrorCode::non_transverse, "chart passes through the origin");
    f.e0 = f.point / pn;
    VectorXd r = f.e0;
    for (const auto& t : f.tangent) r -= t.dot(r) * t;
    if (r.norm() < 1e-10) fail(ErrorCode::non_transverse, "Sigma(x) lies in the tangent space");

    // Columns span {Sigma, tangents} (or just the tangents in codimension 0);
    // the last Householder column is orthogonal to all of them.
    int cols = f.codim_zero ? k : k + 1;
    MatrixXd M(d, cols);
    int c = 0;
    if (!f.codim_zero) M.col(c++) = f.e0;
    for (int i = 0; i < k; ++i) M.col(c++) = f.J.row(i).transpose();
    Eigen::HouseholderQR<MatrixXd> qr(M);
    MatrixXd Q = qr.householderQ();
    f.nu_raw = Q.col(d - 1);

    MatrixXd D(d, d);
    int row = 0;
    if (!f.codim_zero) D.row(row++) = f.point.transpose();
    for (int i = 0; i < k; ++i) D.row(row++) = f.J.row(i);
    D.row(row) = f.nu_raw.transpose();
    f.det_sign = D.determinant() >= 0.0 ? 1.0 : -1.0;
    return f;
}

void check_param(const ManifoldChart& chart, std::span<const double> x) {
    if (static_cast<int>(x.size()) != chart.param_dim())
        fail(ErrorCode::invalid_parameter, "parameter point has the wrong dimension");
}

}  // namespace

const char* chart_kind_name(ChartKind kind) {
    switch (kind) {
        case ChartKind::sphere_slice: return "sphere_slice";
        case ChartKind::unit_sphere: return "unit_sphere";
        case ChartKind::quadratic_graph: return "quadratic_graph";
        case ChartKind::custom: return "custom";
    }
    return "custom";
}

ChartJet normalize_jet(const ChartJet& v, int order) {
    const int k = v.param_dim;
    const int d = v.ambient_dim;
    ChartJet q;
    q.param_dim = k;
    q.ambient_dim = d;
    double s2 = 0.0;
    for (int a = 0; a < d; ++a) s2 += v.point[a] * v.point[a];
    double s = std::sqrt(s2);
    for (int a = 0; a < d; ++a) q.point[a] = v.point[a] / s;
    if (order < 1) return q;
    std::array<double, kMaxParam> ds{};  // d_i |v| = <q, d_i v>
    for (int i = 0; i < k; ++i) {
        double t = 0.0;
        for (int a = 0; a < d; ++a) t += q.point[a] * v.d1[i][a];
        ds[i] = t;
        for (int a = 0; a < d; ++a) q.d1[i][a] = v.d1[i][a] / s - v.point[a] * t / s2;
    }
    if (order < 2) return q;
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            const auto& vij = v.second(i, j);
            // d_j d_i |v| = <d_j q, d_i v> + <q, d_i d_j v>
            double dds = 0.0;
            for (int a = 0; a < d; ++a) dds += q.d1[j][a] * v.d1[i][a] + q.point[a] * vij[a];
            auto& out = q.d2[hess_index(i, j, k)];
            for (int a = 0; a < d; ++a) {
                out[a] = vij[a] / s - (v.d1[i][a] * ds[j] + v.d1[j][a] * ds[i]) / s2 - v.point[a] * dds / s2 +
                         2.0 * v.point[a] * ds[i] * ds[j] / (s2 * s);
            }
        }
    }
    return q;
}

ChartJet ManifoldChart::jet(std::span<const double> x, int order) const {
    check_param(*this, x);
    ChartJet j;
    j.param_dim = param_dim_;
    j.ambient_dim = ambient_dim_;
    fn_(x, j, order);
    return j;
}

void ManifoldChart::point(std::span<const double> x, double* out) const {
    ChartJet j = jet(x, 0);
    for (int a = 0; a < ambient_dim_; ++a) out[a] = j.point[a];
}

void ManifoldChart::finalize() {
    std::vector<double> center(param_dim_, 0.5);
    ChartJet j = jet(center, 2);
    RawFrame f = raw_frame(*this, j);
    VectorXd d11 = to_vec(j.second(0, 0), ambient_dim_);
    double s = f.nu_raw.dot(d11) >= 0.0 ? 1.0 : -1.0;
    orientation_ = s * f.det_sign;
}

ManifoldChart ManifoldChart::sphere_slice(double c, int n) {
    if (n < 2 || n > kMaxParam + 1) fail(ErrorCode::invalid_parameter, "sphere_slice supports n in [2, 4]");
    if (!(c > -1.0 && c < 1.0) || c == 0.0)
        fail(ErrorCode::invalid_parameter, "sphere_slice needs c in (-1,0) or (0,1)");
    ManifoldChart m;
    m.kind_ = ChartKind::sphere_slice;
    m.param_dim_ = n - 1;
    m.ambient_dim_ = n + 1;
    m.on_unit_sphere_ = true;
    m.spec_.kind = ChartKind::sphere_slice;
    m.spec_.n = n;
    m.spec_.c = c;
    m.label_ = "sphere_slice";
    const double r = std::sqrt(1.0 - c * c);
    const int k = n - 1;
    m.fn_ = [r, c, k](std::span<const double> x, ChartJet& out, int order) {
        ChartJet q = normalize_jet(gnomonic_lift(x, k), order);
        for (int a = 0; a <= k; ++a) out.point[a] = r * q.point[a];
        out.point[k + 1] = c;
        if (order >= 1)
            for (int i = 0; i < k; ++i)
                for (int a = 0; a <= k; ++a) out.d1[i][a] = r * q.d1[i][a];
        if (order >= 2)
            for (int h = 0; h < k * (k + 1) / 2; ++h)
                for (int a = 0; a <= k; ++a) out.d2[h][a] = r * q.d2[h][a];
    };
    m.finalize();
    return m;
}

ManifoldChart ManifoldChart::unit_sphere(int n, double radius) {
    if (n < 1 || n > kMaxParam) fail(ErrorCode::invalid_parameter, "unit_sphere supports n in [1, 3]");
    if (!(radius > 0.0)) fail(ErrorCode::invalid_parameter, "sphere radius must be positive");
    ManifoldChart m;
    m.kind_ = ChartKind::unit_sphere;
    m.param_dim_ = n;
    m.ambient_dim_ = n + 1;
    m.on_unit_sphere_ = radius == 1.0;
    m.spec_.kind = ChartKind::unit_sphere;
    m.spec_.n = n;
    m.spec_.radius = radius;
    m.label_ = "unit_sphere";
    m.fn_ = [radius, n](std::span<const double> x, ChartJet& out, int order) {
        ChartJet q = normalize_jet(gnomonic_lift(x, n), order);
        for (int a = 0; a <= n; ++a) out.point[a] = radius * q.point[a];
        if (order >= 1)
            for (int i = 0; i < n; ++i)
                for (int a = 0; a <= n; ++a) out.d1[i][a] = radius * q.d1[i][a];
        if (order >= 2)
            for (int h = 0; h < n * (n + 1) / 2; ++h)
                for (int a = 0; a <= n; ++a) out.d2[h][a] = radius * q.d2[h][a];
    };
    m.finalize();
    return m;
}

ManifoldChart ManifoldChart::quadratic_graph(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A, int n) {
    const int k = n - 1;
    if (k < 1 || k > kMaxParam) fail(ErrorCode::invalid_parameter, "quadratic_graph supports n in [2, 4]");
    if (L.rows() != k || L.cols() != k || A.rows() != k || A.cols() != k)
        fail(ErrorCode::invalid_parameter, "quadratic_graph needs (n-1)x(n-1) matrices");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
        fail(ErrorCode::invalid_parameter, "A must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) fail(ErrorCode::invalid_parameter, "A must be positive definite");
    if (!(std::fabs(L.determinant()) > 1e-12)) fail(ErrorCode::invalid_parameter, "L must be invertible");
    ManifoldChart m;
    m.kind_ = ChartKind::quadratic_graph;
    m.param_dim_ = k;
    m.ambient_dim_ = n + 1;
    m.spec_.kind = ChartKind::quadratic_graph;
    m.spec_.n = n;
    m.spec_.L = L;
    m.spec_.A = A;
    m.label_ = "quadratic_graph";
    MatrixXd M = L.transpose() * A * L;
    M = 0.5 * (M + M.transpose());
    m.fn_ = [M, k](std::span<const double> x, ChartJet& out, int order) {
        VectorXd y(k);
        for (int a = 0; a < k; ++a) y[a] = x[a] - 0.5;
        VectorXd My = M * y;
        out.point[0] = 1.0;
        for (int a = 0; a < k; ++a) out.point[1 + a] = y[a];
        out.point[k + 1] = y.dot(My);
        if (order >= 1)
            for (int i = 0; i < k; ++i) {
                out.d1[i].fill(0.0);
                out.d1[i][1 + i] = 1.0;
                out.d1[i][k + 1] = 2.0 * My[i];
            }
        if (order >= 2)
            for (int i = 0; i < k; ++i)
                for (int j = i; j < k; ++j) {
                    auto& v = out.d2[hess_index(i, j, k)];
                    v.fill(0.0);
                    v[k + 1] = 2.0 * M(i, j);
                }
    };
    m.finalize();
    return m;
}

ManifoldChart ManifoldChart::builtin(const ChartSpec& spec) {
    switch (spec.kind) {
        case ChartKind::sphere_slice: return sphere_slice(spec.c, spec.n);
        case ChartKind::unit_sphere: return unit_sphere(spec.n, spec.radius);
        case ChartKind::quadratic_graph: return quadratic_graph(spec.L, spec.A, spec.n);
        case ChartKind::custom: break;
    }
    fail(ErrorCode::invalid_parameter, "custom charts have no builtin construction");
}

ManifoldChart ManifoldChart::custom(int param_dim, int ambient_dim, JetFn fn, std::string label) {
    if (param_dim < 1 || param_dim > kMaxParam || ambient_dim > kMaxAmbient || ambient_dim < param_dim + 1 ||
        ambient_dim > param_dim + 2)
        fail(ErrorCode::invalid_parameter, "custom chart dimensions");
    ManifoldChart m;
    m.kind_ = ChartKind::custom;
    m.param_dim_ = param_dim;
    m.ambient_dim_ = ambient_dim;
    m.spec_.kind = ChartKind::custom;
    m.spec_.n = ambient_dim - 1;
    m.label_ = std::move(label);
    m.fn_ = std::move(fn);
    m.finalize();
    return m;
}

ManifoldChart ManifoldChart::custom_points(int param_dim, int ambient_dim,
                                           std::function<void(std::span<const double>, double*)> point_fn,
                                           std::string label) {
    auto fn = [point_fn, param_dim, ambient_dim](std::span<const double> x, ChartJet& out, int order) {
        const int k = param_dim;
        const int d = ambient_dim;
        point_fn(x, out.point.data());
        if (order < 1) return;
        std::array<double, kMaxParam> xs{};
        std::array<double, kMaxAmbient> p{}, m{}, pp{}, pm{}, mp{}, mm{};
        auto eval = [&](std::array<double, kMaxAmbient>& o) { point_fn(std::span<const double>(xs.data(), k), o.data()); };
        const double h1 = 1e-5;
        for (int i = 0; i < k; ++i) {
            for (int a = 0; a < k; ++a) xs[a] = x[a];
            xs[i] = x[i] + h1;
            eval(p);
            xs[i] = x[i] - h1;
            eval(m);
            for (int a = 0; a < d; ++a) out.d1[i][a] = (p[a] - m[a]) / (2.0 * h1);
        }
        if (order < 2) return;
        const double h2 = 1e-4;
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j) {
                auto& o = out.d2[hess_index(i, j, k)];
                for (int a = 0; a < k; ++a) xs[a] = x[a];
                if (i == j) {
                    xs[i] = x[i] + h2;
                    eval(p);
                    xs[i] = x[i] - h2;
                    eval(m);
                    for (int a = 0; a < d; ++a) o[a] = (p[a] - 2.0 * out.point[a] + m[a]) / (h2 * h2);
                } else {
                    xs[i] = x[i] + h2; xs[j] = x[j] + h2; eval(pp);
                    xs[i] = x[i] + h2; xs[j] = x[j] - h2; eval(pm);
                    xs[i] = x[i] - h2; xs[j] = x[j] + h2; eval(mp);
                    xs[i] = x[i] - h2; xs[j] = x[j] - h2; eval(mm);
                    for (int a = 0; a < d; ++a) o[a] = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h2 * h2);
                }
            }
    };
    return custom(param_dim, ambient_dim, fn, std::move(label));
}

ManifoldChart ManifoldChart::radial_projection(int param_dim, int ambient_dim, JetFn v_fn, std::string label) {
    auto fn = [v_fn, param_dim, ambient_dim](std::span<const double> x, ChartJet& out, int order) {
        ChartJet v;
        v.param_dim = param_dim;
        v.ambient_dim = ambient_dim;
        v_fn(x, v, order);
        out = normalize_jet(v, order);
    };
    ManifoldChart m = custom(param_dim, ambient_dim, fn, std::move(label));
    m.on_unit_sphere_ = true;
    return m;
}

TangentFrame tangent_frame(const ManifoldChart& chart, std::span<const double> x) {
    check_param(chart, x);
    ChartJet j = chart.jet(x, 1);
    RawFrame f = raw_frame(chart, j);
    TangentFrame t;
    t.param_dim = chart.param_dim();
    t.ambient_dim = chart.ambient_dim();
    t.x.assign(x.begin(), x.end());
    t.e0 = f.e0;
    t.tangent = f.tangent;
    t.codim_zero = f.codim_zero;
    t.nu = chart.orientation() * f.det_sign * f.nu_raw;
    double res = std::fabs(t.nu.norm() - 1.0);
    for (std::size_t a = 0; a < t.tangent.size(); ++a) {
        res = std::max(res, std::fabs(t.nu.dot(t.tangent[a])));
        for (std::size_t b = a; b < t.tangent.size(); ++b)
            res = std::max(res, std::fabs(t.tangent[a].dot(t.tangent[b]) - (a == b ? 1.0 : 0.0)));
    }
    if (!t.codim_zero) res = std::max(res, std::fabs(t.nu.dot(t.e0)));
    t.orthonormality_residual = res;
    return t;
}

void second_fundamental_form(const ManifoldChart& chart, std::span<const double> x, CurvatureMethod method,
                             Eigen::MatrixXd& B, Eigen::MatrixXd& G) {
    const int k = chart.param_dim();
    const int d = chart.ambient_dim();
    ChartJet j = chart.jet(x, 2);
    MatrixXd J = jacobian(j);
    G = J * J.transpose();
    B.resize(k, k);
    if (method == CurvatureMethod::closed_form) {
        TangentFrame fr = tangent_frame(chart, x);
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) B(a, b) = fr.nu.dot(to_vec(j.second(a, b), d));
        return;
    }
    // -<d_a nu, d_b Sigma> with d_a nu from central differences of the frame field.
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    MatrixXd dnu(k, d);
    for (int a = 0; a < k; ++a) {
        xp[a] = x[a] + kFrameStep;
        xm[a] = x[a] - kFrameStep;
        VectorXd np = tangent_frame(chart, xp).nu;
        VectorXd nm = tangent_frame(chart, xm).nu;
        dnu.row(a) = ((np - nm) / (2.0 * kFrameStep)).transpose();
        xp[a] = x[a];
        xm[a] = x[a];
    }
    MatrixXd raw = -dnu * J.transpose();
    B = 0.5 * (raw + raw.transpose());
}

CurvatureEntry principal_curvatures(const ManifoldChart& chart, std::span<const double> x, CurvatureMethod method) {
    check_param(chart, x);
    MatrixXd B, G;
    second_fundamental_form(chart, x, method, B, G);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(B, G, Eigen::EigenvaluesOnly);
    CurvatureEntry e;
    e.x.assign(x.begin(), x.end());
    const auto& ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) e.kappa.push_back(ev[i]);
    std::sort(e.kappa.begin(), e.kappa.end());
    bool sphere = false;
    if (chart.on_unit_sphere()) {
        ChartJet j = chart.jet(x, 0);
        double s = 0.0;
        for (int a = 0; a < chart.ambient_dim(); ++a) s += j.point[a] * j.point[a];
        sphere = std::fabs(std::sqrt(s) - 1.0) <= 1e-8;
    }
    if (!sphere) {
        e.sectional_min = e.sectional_max = std::numeric_limits<double>::quiet_NaN();
    } else if (chart.codim_zero() || e.kappa.size() < 2) {
        // Sigma = S^n itself (or a curve): the form inside S^n vanishes.
        e.sectional_min = e.sectional_max = 1.0;
    } else {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < e.kappa.size(); ++i)
            for (std::size_t jj = i + 1; jj < e.kappa.size(); ++jj) {
                double K = e.kappa[i] * e.kappa[jj] + 1.0;
                lo = std::min(lo, K);
                hi = std::max(hi, K);
            }
        e.sectional_min = lo;
        e.sectional_max = hi;
    }
    return e;
}

double sectional_curvature(const ManifoldChart& chart, std::span<const double> x, int i, int j, CurvatureMethod method) {
    check_param(chart, x);
    const int k = chart.param_dim();
    if (i == j || i < 0 || j < 0 || i >= k || j >= k) fail(ErrorCode::invalid_parameter, "sectional curvature needs i != j");
    ChartJet jet = chart.jet(x, 0);
    double s = 0.0;
    for (int a = 0; a < chart.ambient_dim(); ++a) s += jet.point[a] * jet.point[a];
    if (std::fabs(std::sqrt(s) - 1.0) > 1e-8)
        fail(ErrorCode::unsupported, "sectional curvature via the Gauss relation needs a chart on the unit sphere");
    if (chart.codim_zero()) return 1.0;
    CurvatureEntry e = principal_curvatures(chart, x, method);
    return e.kappa[i] * e.kappa[j] + 1.0;
}

namespace {

// Orthonormal tangent vectors X, Y spanning d Sigma(a), d Sigma(b), expressed
// back in parameter coordinates (pa, pb) so that d Sigma(pa) = X, d Sigma(pb) = Y.
void orthonormal_plane(const MatrixXd& J, std::span<const double> a, std::span<const double> b, VectorXd& pa,
                       VectorXd& pb) {
    const int k = static_cast<int>(J.rows());
    MatrixXd G = J * J.transpose();
    VectorXd va(k), vb(k);
    for (int i = 0; i < k; ++i) {
        va[i] = a[i];
        vb[i] = b[i];
    }
    auto ip = [&](const VectorXd& u, const VectorXd& v) { return u.dot(G * v); };
    pa = va / std::sqrt(ip(va, va));
    pb = vb - ip(pa, vb) * pa;
    double nb = std::sqrt(ip(pb, pb));
    if (!(nb > 1e-12)) fail(ErrorCode::invalid_parameter, "tangent vectors are parallel");
    pb /= nb;
}

VectorXd second_along(const ChartJet& j, const VectorXd& u, const VectorXd& v) {
    const int k = j.param_dim;
    VectorXd out = VectorXd::Zero(j.ambient_dim);
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) out += u[p] * v[q] * to_vec(j.second(p, q), j.ambient_dim);
    return out;
}

}  // namespace

double sectional_curvature_ambient(const ManifoldChart& chart, std::span<const double> x, std::span<const double> a,
                                   std::span<const double> b) {
    check_param(chart, x);
    ChartJet j = chart.jet(x, 2);
    MatrixXd J = jacobian(j);
    VectorXd pa, pb;
    orthonormal_plane(J, a, b, pa, pb);
    // Projector onto the Euclidean normal space of the image.
    Eigen::HouseholderQR<MatrixXd> qr(J.transpose());
    MatrixXd Q = qr.householderQ();
    const int k = chart.param_dim();
    const int d = chart.ambient_dim();
    MatrixXd N = Q.rightCols(d - k);
    auto normal = [&](const VectorXd& v) -> VectorXd { return N * (N.transpose() * v); };
    VectorXd bxx = normal(second_along(j, pa, pa));
    VectorXd byy = normal(second_along(j, pb, pb));
    VectorXd bxy = normal(second_along(j, pa, pb));
    return bxx.dot(byy) - bxy.squaredNorm();
}

double sectional_curvature_gauss(const ManifoldChart& chart, std::span<const double> x, std::span<const double> a,
                                 std::span<const double> b) {
    check_param(chart, x);
    MatrixXd B, G;
    second_fundamental_form(chart, x, CurvatureMethod::closed_form, B, G);
    ChartJet j = chart.jet(x, 1);
    VectorXd pa, pb;
    orthonormal_plane(jacobian(j), a, b, pa, pb);
    if (chart.codim_zero()) return 1.0;
    double xx = pa.dot(B * pa), yy = pb.dot(B * pb), xy = pa.dot(B * pb);
    return 1.0 + xx * yy - xy * xy;
}

void summarize_curvature(CurvatureReport& r) {
    r.min_abs = std::numeric_limits<double>::infinity();
    r.max_abs = 0.0;
    bool any_pos = false, any_neg = false, any_zero = false;
    for (const auto& e : r.entries)
        for (double kv : e.kappa) r.max_abs = std::max(r.max_abs, std::fabs(kv));
    const double zero_tol = 1e-9 * std::max(1.0, r.max_abs);
    r.on_sphere = !r.entries.empty();
    r.min_sectional = std::numeric_limits<double>::infinity();
    for (const auto& e : r.entries) {
        for (double kv : e.kappa) {
            r.min_abs = std::min(r.min_abs, std::fabs(kv));
            if (std::fabs(kv) <= zero_tol) any_zero = true;
            else if (kv > 0) any_pos = true;
            else any_neg = true;
        }
        if (std::isnan(e.sectional_min)) r.on_sphere = false;
        else r.min_sectional = std::min(r.min_sectional, e.sectional_min);
    }
    if (r.entries.empty()) r.min_abs = 0.0;
    r.all_same_sign = !r.entries.empty() && !any_zero && !(any_pos && any_neg);
    r.kappa_bound = r.all_same_sign ? std::max(r.max_abs, 1.0 / r.min_abs) : std::numeric_limits<double>::infinity();
    if (!r.on_sphere) r.min_sectional = std::numeric_limits<double>::quiet_NaN();
    r.sectional_gate = r.on_sphere && r.min_sectional > 1.0;
    r.passed = r.all_same_sign;
    if (any_zero) r.note = "vanishing principal curvature";
    else if (any_pos && any_neg) r.note = "principal curvatures change sign";
    else r.note.clear();
}

CurvatureReport verify_nondegenerate(const ManifoldChart& chart, const NondegeneracyOptions& opts) {
    if (opts.points_per_axis < 33) fail(ErrorCode::invalid_parameter, "curvature lattice spacing must be at most 1/32");
    const int k = chart.param_dim();
    const std::size_t N = static_cast<std::size_t>(opts.points_per_axis);
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= N;
    std::vector<std::size_t> ids;
    if (total <= opts.max_samples) {
        ids.resize(total);
        std::iota(ids.begin(), ids.end(), 0);
    } else {
        // Partial Fisher-Yates on the index range, then sorted for stable output order.
        Rng rng(opts.seed);
        std::vector<std::size_t> all(total);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = 0; i < opts.max_samples; ++i) std::swap(all[i], all[i + rng.below(total - i)]);
        ids.assign(all.begin(), all.begin() + opts.max_samples);
        std::sort(ids.begin(), ids.end());
    }
    CurvatureReport r;
    r.param_dim = k;
    r.entries.resize(ids.size());
    const double step = 1.0 / static_cast<double>(N - 1);
    parallel_for(ids.size(), [&](std::size_t s) {
        std::size_t id = ids[s];
        std::vector<double> x(k);
        for (int a = 0; a < k; ++a) {
            x[a] = static_cast<double>(id % N) * step;
            id /= N;
        }
        r.entries[s] = principal_curvatures(chart, x, opts.method);
    });
    summarize_curvature(r);
    return r;
}

void write_curvature_csv(const CurvatureReport& r, std::ostream& os) {
    const int k = r.param_dim;
    for (int a = 0; a < k; ++a) os << "x" << a + 1 << ",";
    for (int a = 0; a < k; ++a) os << "kappa" << a + 1 << ",";
    os << "K_min,K_max\n";
    char buf[64];
    auto put = [&](double v) {
        if (std::isnan(v)) os << "nan";
        else {
            std::snprintf(buf, sizeof buf, "%.12g", v);
            os << buf;
        }
    };
    for (const auto& e : r.entries) {
        for (double v : e.x) {
            put(v);
            os << ",";
        }
        for (double v : e.kappa) {
            put(v);
            os << ",";
        }
        put(e.sectional_min);
        os << ",";
        put(e.sectional_max);
        os << "\n";
    }
}

double chart_c2_bound(const ManifoldChart& chart, int points_per_axis) {
    const int k = chart.param_dim();
    const int d = chart.ambient_dim();
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) total *= static_cast<std::size_t>(points_per_axis);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    const double step = 1.0 / (points_per_axis - 1);
    for (std::size_t id = 0; id < total; ++id) {
        std::vector<double> x(k);
        std::size_t t = id;
        for (int a = 0; a < k; ++a) {
            x[a] = static_cast<double>(t % points_per_axis) * step;
            t /= points_per_axis;
        }
        ChartJet j = chart.jet(x, 2);
        s0 = std::max(s0, to_vec(j.point, d).norm());
        MatrixXd J = jacobian(j);
        s1 = std::max(s1, Eigen::JacobiSVD<MatrixXd>(J).singularValues().maxCoeff());
        // sup over unit xi of |d^2 Sigma(xi, xi)|, bounded by the Frobenius-type sum.
        double h = 0.0;
        for (int p = 0; p < k; ++p)
            for (int q = 0; q < k; ++q) h += to_vec(j.second(p, q), d).squaredNorm();
        s2 = std::max(s2, std::sqrt(h));
    }
    return s0 + s1 + s2;
}

}  // namespace cinelab
