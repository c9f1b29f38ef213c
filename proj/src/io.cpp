#include "cinelab/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cinelab::io {

namespace fs = std::filesystem;

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::io_error, "cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        fail(ErrorCode::io_error, path + ": " + e.what());
    }
}

void write_text_file(const std::string& text, const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) ensure_directory(p.parent_path().string());
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::io_error, "cannot write " + path);
    os << text;
    if (!os) fail(ErrorCode::io_error, "write failed for " + path);
}

void write_json_file(const json& j, const std::string& path) { write_text_file(j.dump(2) + "\n", path); }

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) fail(ErrorCode::io_error, "cannot create directory " + path + ": " + ec.message());
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

json matrix_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = j.size();
    const auto cols = rows ? j[0].size() : 0;
    Eigen::MatrixXd M(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) fail(ErrorCode::invalid_parameter, "ragged matrix");
        for (std::size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
    }
    return M;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(double_or_null(x));
    return a;
}

}  // namespace

json to_json(const Box& box) {
    json lo = json::array(), hi = json::array();
    for (int a = 0; a < box.dim; ++a) {
        lo.push_back(box.lo[a]);
        hi.push_back(box.hi[a]);
    }
    return json{{"lo", lo}, {"hi", hi}};
}

Box box_from_json(const json& j) {
    auto lo = j.at("lo").get<std::vector<double>>();
    auto hi = j.at("hi").get<std::vector<double>>();
    if (lo.size() != hi.size()) fail(ErrorCode::invalid_parameter, "box corners differ in dimension");
    return Box::make(lo, hi);
}

json to_json(const ChartSpec& spec) {
    json j;
    j["kind"] = chart_kind_name(spec.kind);
    j["n"] = spec.n;
    switch (spec.kind) {
        case ChartKind::sphere_slice: j["c"] = spec.c; break;
        case ChartKind::unit_sphere: j["radius"] = spec.radius; break;
        case ChartKind::quadratic_graph:
            j["L"] = matrix_json(spec.L);
            j["A"] = matrix_json(spec.A);
            break;
        case ChartKind::custom: fail(ErrorCode::unsupported, "custom charts are not serializable");
    }
    return j;
}

ChartSpec chart_spec_from_json(const json& j) {
    ChartSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    s.n = get_or(j, "n", 3);
    if (kind == "sphere_slice") {
        s.kind = ChartKind::sphere_slice;
        s.c = j.at("c").get<double>();
    } else if (kind == "unit_sphere") {
        s.kind = ChartKind::unit_sphere;
        s.radius = get_or(j, "radius", 1.0);
    } else if (kind == "quadratic_graph") {
        s.kind = ChartKind::quadratic_graph;
        s.L = matrix_from(j.at("L"));
        s.A = matrix_from(j.at("A"));
    } else {
        fail(ErrorCode::invalid_parameter, "unknown chart kind '" + kind + "'");
    }
    return s;
}

json to_json(const ScalarField& f) {
    json j;
    j["kind"] = field_kind_name(f.kind());
    j["domain"] = to_json(f.domain());
    switch (f.kind()) {
        case FieldKind::constant: j["value"] = f.constant_value(); break;
        case FieldKind::polynomial: {
            json terms = json::array();
            for (const auto& m : f.monomials()) {
                json e = json::array();
                for (int a = 0; a < f.dim(); ++a) e.push_back(m.exps[a]);
                terms.push_back(json{{"coef", m.coef}, {"exps", e}});
            }
            j["terms"] = terms;
            break;
        }
        case FieldKind::sphere_cap:
            j["center"] = f.cap_center();
            j["radius"] = f.cap_radius();
            j["offset"] = f.cap_offset();
            j["sign"] = f.cap_sign();
            break;
        case FieldKind::induced:
            j["chart"] = to_json(f.induced_chart()->spec());
            j["z"] = f.induced_z();
            j["scale"] = f.induced_scale();
            j["shift"] = f.induced_shift();
            break;
        case FieldKind::grid_sampled: {
            json nodes = json::array();
            for (int a = 0; a < f.dim(); ++a) nodes.push_back(f.grid_nodes()[a]);
            j["nodes"] = nodes;
            j["values"] = f.grid_values();
            break;
        }
        case FieldKind::combination:
        case FieldKind::custom: fail(ErrorCode::unsupported, "field kind is not serializable");
    }
    return j;
}

ScalarField field_from_json(const json& j, const Box& default_domain) {
    const std::string kind = j.at("kind").get<std::string>();
    const Box dom = j.contains("domain") ? box_from_json(j["domain"]) : default_domain;
    if (kind == "constant") return ScalarField::constant(dom, j.at("value").get<double>());
    if (kind == "polynomial") {
        std::vector<Monomial> terms;
        for (const auto& t : j.at("terms")) {
            Monomial m;
            m.coef = t.at("coef").get<double>();
            auto e = t.at("exps").get<std::vector<int>>();
            if (static_cast<int>(e.size()) != dom.dim) fail(ErrorCode::invalid_parameter, "monomial exponent count");
            for (int a = 0; a < dom.dim; ++a) m.exps[a] = e[a];
            terms.push_back(m);
        }
        return ScalarField::polynomial(dom, std::move(terms));
    }
    if (kind == "affine") {
        auto slope = j.at("slope").get<std::vector<double>>();
        return ScalarField::affine(dom, slope, get_or(j, "offset", 0.0));
    }
    if (kind == "sphere_cap") {
        auto c = j.at("center").get<std::vector<double>>();
        return ScalarField::sphere_cap(dom, c, j.at("radius").get<double>(), get_or(j, "offset", 0.0),
                                       get_or(j, "sign", 1.0));
    }
    if (kind == "induced") {
        auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::builtin(chart_spec_from_json(j.at("chart"))));
        auto z = j.at("z").get<std::vector<double>>();
        std::optional<Box> d;
        if (j.contains("domain")) d = dom;
        return ScalarField::induced(chart, z, get_or(j, "scale", 1.0), get_or(j, "shift", 0.0), d);
    }
    if (kind == "grid_sampled") {
        auto nodes = j.at("nodes").get<std::vector<int>>();
        std::array<int, kMaxParam> n{};
        for (std::size_t a = 0; a < nodes.size() && a < n.size(); ++a) n[a] = nodes[a];
        return ScalarField::grid_sampled(dom, n, j.at("values").get<std::vector<double>>());
    }
    fail(ErrorCode::invalid_parameter, "unknown field kind '" + kind + "'");
}

json to_json(const FunctionFamily& family) {
    if (family.origin && family.origin->chart && family.origin->chart->builtin()) {
        const auto& o = *family.origin;
        return json{{"induced", {{"chart", to_json(o.chart->spec())}, {"Z", o.Z}, {"renormalize", o.renormalized}}}};
    }
    json members = json::array();
    for (const auto& f : family.members) members.push_back(to_json(f));
    return json{{"domain", to_json(family.domain)}, {"members", members}};
}

FunctionFamily family_from_json(const json& j) {
    if (j.contains("induced")) {
        const json& o = j["induced"];
        auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::builtin(chart_spec_from_json(o.at("chart"))));
        auto Z = o.at("Z").get<std::vector<std::vector<double>>>();
        return induced_projection_family(chart, Z, get_or(o, "renormalize", true));
    }
    Box dom = j.contains("domain") ? box_from_json(j["domain"]) : Box();
    std::vector<ScalarField> members;
    for (const auto& m : j.at("members")) {
        if (dom.dim == 0 && !m.contains("domain")) fail(ErrorCode::invalid_parameter, "family needs a domain");
        members.push_back(field_from_json(m, dom));
    }
    return make_family(std::move(members));
}

json to_json(const DyadicSet& set) {
    json cells = json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
        Cell c = set.cell(i);
        json row = json::array();
        for (int a = 0; a < set.dim(); ++a) row.push_back(c[a]);
        cells.push_back(row);
    }
    return json{{"k", set.dim()}, {"m", set.scale()}, {"cells", cells}};
}

DyadicSet set_from_json(const json& j) {
    const int k = j.at("k").get<int>();
    const int m = j.at("m").get<int>();
    if (k < 1 || k > kMaxCellDim) fail(ErrorCode::invalid_parameter, "set dimension must lie in [1, 4]");
    std::vector<Cell> cells;
    const std::uint64_t side = m >= 0 && m < 32 ? (std::uint64_t{1} << m) : 0;
    for (const auto& row : j.at("cells")) {
        if (static_cast<int>(row.size()) != k) fail(ErrorCode::invalid_parameter, "cell has the wrong dimension");
        Cell c{};
        for (int a = 0; a < k; ++a) {
            auto v = row[a].get<std::int64_t>();
            if (v < 0 || static_cast<std::uint64_t>(v) >= side) fail(ErrorCode::invalid_parameter, "cell index outside the grid");
            c[a] = static_cast<std::uint32_t>(v);
        }
        cells.push_back(c);
    }
    return DyadicSet::from_cells(k, m, cells);
}

DyadicSet read_set_file(const std::string& path) {
    if (fs::path(path).extension() == ".json") return set_from_json(read_json_file(path));
    return read_binary_file(path);
}

void write_set_file(const DyadicSet& set, const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) ensure_directory(p.parent_path().string());
    if (p.extension() == ".json") write_json_file(to_json(set), path);
    else write_binary_file(set, path);
}

json to_json(const ConfigParams& p) {
    return json{{"delta", p.delta}, {"s", p.s}, {"t", p.t}, {"epsilon", p.epsilon}};
}

ConfigParams params_from_json(const json& j) {
    ConfigParams p;
    p.delta = j.at("delta").get<double>();
    p.s = get_or(j, "s", p.s);
    p.t = get_or(j, "t", p.t);
    p.epsilon = get_or(j, "epsilon", p.epsilon);
    return p;
}

void save_configuration(const Configuration& cfg, const std::string& dir) {
    ensure_directory(dir);
    write_json_file(to_json(cfg.family), (fs::path(dir) / "family.json").string());
    json p = to_json(cfg.params);
    p["members"] = cfg.sets.size();
    write_json_file(p, (fs::path(dir) / "params.json").string());
    for (std::size_t i = 0; i < cfg.sets.size(); ++i)
        write_binary_file(cfg.sets[i], (fs::path(dir) / ("set_" + std::to_string(i) + ".bin")).string());
}

Configuration load_configuration(const std::string& dir, const BuildOptions& opts) {
    FunctionFamily fam = family_from_json(read_json_file((fs::path(dir) / "family.json").string()));
    json pj = read_json_file((fs::path(dir) / "params.json").string());
    ConfigParams p = params_from_json(pj);
    std::vector<DyadicSet> sets;
    for (std::size_t i = 0; i < fam.size(); ++i)
        sets.push_back(read_binary_file((fs::path(dir) / ("set_" + std::to_string(i) + ".bin")).string()));
    return build_configuration(fam, std::move(sets), p, opts);
}

json to_json(const PointSetSpec& s) {
    json j;
    j["kind"] = point_set_kind_name(s.kind);
    j["dim"] = s.dim;
    switch (s.kind) {
        case PointSetKind::cantor_product:
            j["ratio"] = s.ratio;
            j["branches"] = s.branches;
            j["depth"] = s.depth;
            j["axes"] = s.axes;
            j["scale"] = s.scale;
            break;
        case PointSetKind::segment:
            j["scale"] = s.scale;
            j["count"] = s.count;
            break;
        case PointSetKind::points:
        case PointSetKind::point: j["points"] = s.points; break;
    }
    return j;
}

PointSetSpec point_set_from_json(const json& j) {
    PointSetSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "cantor_product") s.kind = PointSetKind::cantor_product;
    else if (kind == "segment") s.kind = PointSetKind::segment;
    else if (kind == "points") s.kind = PointSetKind::points;
    else if (kind == "point") s.kind = PointSetKind::point;
    else fail(ErrorCode::invalid_parameter, "unknown point set kind '" + kind + "'");
    s.dim = get_or(j, "dim", s.dim);
    s.ratio = get_or(j, "ratio", s.ratio);
    s.branches = get_or(j, "branches", s.branches);
    s.depth = get_or(j, "depth", s.depth);
    s.axes = get_or(j, "axes", s.axes);
    s.scale = get_or(j, "scale", s.kind == PointSetKind::segment ? 1.0 : s.scale);
    s.count = get_or<std::size_t>(j, "count", 0);
    if (j.contains("points")) s.points = j["points"].get<std::vector<std::vector<double>>>();
    return s;
}

json to_json(const ExperimentSpec& s) {
    return json{{"chart", to_json(s.chart)}, {"z", to_json(s.z)},          {"m_min", s.m_min},
                {"m_max", s.m_max},          {"directions", s.directions}, {"seed", s.seed}};
}

ExperimentSpec experiment_spec_from_json(const json& j) {
    ExperimentSpec s;
    if (j.contains("chart")) s.chart = chart_spec_from_json(j["chart"]);
    if (j.contains("z")) s.z = point_set_from_json(j["z"]);
    s.m_min = get_or(j, "m_min", s.m_min);
    s.m_max = get_or(j, "m_max", s.m_max);
    s.directions = get_or(j, "directions", s.directions);
    s.seed = get_or(j, "seed", s.seed);
    return s;
}

json to_json(const CurvatureReport& r) {
    json j;
    j["param_dim"] = r.param_dim;
    j["samples"] = r.entries.size();
    j["all_same_sign"] = r.all_same_sign;
    j["min_abs_curvature"] = r.min_abs;
    j["max_abs_curvature"] = r.max_abs;
    j["curvature_bound"] = r.kappa_bound;
    j["on_sphere"] = r.on_sphere;
    j["min_sectional"] = double_or_null(r.min_sectional);
    j["sectional_gate"] = r.sectional_gate;
    j["passed"] = r.passed;
    j["note"] = r.note;
    return j;
}

json to_json(const CinematicReport& r) {
    json alpha = json::array();
    for (const auto& a : r.alpha) alpha.push_back(json{{"eta", a.eta}, {"alpha", a.alpha}});
    json j;
    j["K"] = r.K;
    j["diameter"] = r.diameter;
    j["doubling"] = r.D;
    j["alpha"] = alpha;
    j["pairs_tested"] = r.pairs_tested;
    j["worst_ratio"] = r.worst_ratio;
    j["witness"] = {r.witness_i, r.witness_j};
    j["clauses"] = {{"diameter", r.clause_diameter},
                    {"doubling", r.clause_doubling},
                    {"infimum", r.clause_infimum},
                    {"modulus", r.clause_modulus}};
    j["passed"] = r.passed;
    j["max_uncertainty"] = r.max_uncertainty;
    j["grid_nodes"] = r.grid_nodes;
    j["note"] = r.note;
    return j;
}

json to_json(const BoundTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row{{"pair_id", r.pair_id}, {"i", r.i},         {"j", r.j},
                 {"delta", r.delta},     {"t", r.t},         {"tangency", r.tangency},
                 {"class", r.cls},       {"measure", double_or_null(r.measure)},
                 {"ratio", double_or_null(r.ratio)}};
        if (r.skipped) row["note"] = r.note;
        rows.push_back(row);
    }
    return json{{"deltas", t.deltas}, {"max_ratio", vec_json(t.max_ratio)}, {"trend", double_or_null(t.trend)},
                {"skipped", t.skipped}, {"rows", rows}};
}

json to_json(const EnergyReport& r) {
    json ann = json::object();
    for (auto [b, c] : r.annulus) ann[std::to_string(b)] = c;
    json j;
    j["delta"] = r.delta;
    j["resolution"] = r.resolution;
    j["lhs"] = r.lhs;
    j["diagonal"] = r.diagonal;
    j["off_diagonal"] = r.off_diagonal;
    j["pairwise"] = r.pairwise;
    j["discrepancy"] = r.discrepancy;
    j["rhs"] = r.rhs;
    j["within_budget"] = r.within_budget;
    j["min_distance"] = double_or_null(r.min_distance);
    j["annulus"] = ann;
    j["annulus_ok"] = r.annulus_ok;
    return j;
}

json to_json(const SpreadReport& r) {
    return json{{"s", r.s},
                {"C", r.C},
                {"witness_center", r.witness_center},
                {"witness_radius", r.witness_radius},
                {"witness_count", r.witness_count},
                {"set_size", r.set_size}};
}

json to_json(const Configuration& cfg) {
    json spreads = json::array();
    for (const auto& s : cfg.set_spread) spreads.push_back(s.C);
    json j;
    j["params"] = to_json(cfg.params);
    j["n"] = cfg.n;
    j["members"] = cfg.family.size();
    j["M"] = cfg.M;
    j["min_distance"] = double_or_null(cfg.min_distance);
    j["separated"] = cfg.separated;
    j["family_spread"] = {{"C", cfg.family_spread.C},
                          {"witness", cfg.family_spread.witness},
                          {"radius", cfg.family_spread.witness_radius},
                          {"count", cfg.family_spread.witness_count}};
    j["set_spread"] = spreads;
    j["max_set_spread"] = cfg.max_set_spread;
    j["threshold"] = cfg.threshold;
    j["family_threshold"] = cfg.family_threshold;
    j["set_threshold"] = cfg.set_threshold;
    j["strict_valid"] = cfg.strict_valid;
    j["valid"] = cfg.valid;
    j["notes"] = cfg.notes;
    return j;
}

json to_json(const IncidenceReport& r) {
    json j;
    j["union_count"] = r.union_count;
    j["bound"] = r.bound;
    j["passed"] = r.passed;
    j["neighborhood_sum"] = r.neighborhood_sum;
    j["overlap_sum"] = r.overlap_sum;
    j["off_diagonal_sum"] = r.off_diagonal_sum;
    j["cs_bound"] = r.cs_bound;
    j["cs_degenerate"] = r.cs_degenerate;
    j["union_measure"] = r.union_measure;
    j["cs_consistent"] = r.cs_consistent;
    j["pair_budget"] = r.pair_budget;
    j["within_pair_budget"] = r.within_pair_budget;
    j["delta0_condition"] = r.delta0_condition;
    j["warnings"] = r.warnings;
    return j;
}

json to_json(const DimensionEstimate& e) {
    return json{{"scales", e.scales},       {"counts", e.counts},   {"slope", e.slope},    {"intercept", e.intercept},
                {"residual", e.residual},   {"band", {e.band_lo, e.band_hi}}};
}

json to_json(const ProjectionReport& r) {
    json dirs = json::array();
    for (const auto& d : r.directions)
        dirs.push_back(json{{"x", d.x}, {"z", d.z}, {"range", d.range}, {"estimate", to_json(d.estimate)}});
    json j;
    j["curvature"] = to_json(r.curvature);
    j["refused"] = r.refused;
    j["point_count"] = r.point_count;
    j["fit_scales"] = r.fit_scales;
    j["directions"] = dirs;
    return j;
}

json to_json(const std::vector<SweepRow>& rows) {
    json a = json::array();
    for (const auto& r : rows)
        a.push_back(json{{"s", r.s},
                         {"exceptional", r.exceptional},
                         {"fraction", r.fraction},
                         {"param_dimension", double_or_null(r.param_dimension)},
                         {"reference", r.reference}});
    return a;
}

}  // namespace cinelab::io
