#include "cinelab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cinelab/io.hpp"

namespace cinelab {

namespace fs = std::filesystem;
using io::json;

namespace {

double parse_scalar(const std::string& s) {
    std::string t = s;
    t.erase(std::remove_if(t.begin(), t.end(), ::isspace), t.end());
    if (t.rfind("2^", 0) == 0) return std::ldexp(1.0, std::stoi(t.substr(2)));
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("bad number '" + s + "'");
    return v;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_scalar(item));
    return out;
}

std::string output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("CINELAB_OUTPUT_DIR"); env && *env) return env;
    return "cinelab-output";
}

json load_json_arg(const std::string& arg) {
    std::size_t p = arg.find_first_not_of(" \t\n");
    if (p != std::string::npos && arg[p] == '{') {
        try {
            return json::parse(arg);
        } catch (const json::exception& e) {
            throw CLI::ValidationError("json", e.what());
        }
    }
    return io::read_json_file(arg);
}

std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (text == "all") return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto dash = item.find('-');
        if (dash == std::string::npos) throw CLI::ValidationError("pairs", "expected i-j, got '" + item + "'");
        out.emplace_back(std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1)));
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Context {
    std::string output;
    std::uint64_t seed = 0;
    int threads = 0;
    std::ostream* out = nullptr;

    std::string path(const std::string& rel) const { return (fs::path(output_root(output)) / rel).string(); }
};

}  // namespace

std::vector<double> parse_delta_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_scalar(item));
            continue;
        }
        double a = parse_scalar(item.substr(0, dots));
        double b = parse_scalar(item.substr(dots + 2));
        int ea = 0, eb = 0;
        if (std::frexp(a, &ea) != 0.5 || std::frexp(b, &eb) != 0.5)
            throw std::invalid_argument("ranges need powers of two at both ends");
        const int step = eb >= ea ? 1 : -1;
        for (int e = ea;; e += step) {
            out.push_back(std::ldexp(0.5, e));
            if (e == eb) break;
        }
    }
    if (out.empty()) throw std::invalid_argument("empty delta list");
    for (double d : out)
        if (!(d > 0.0)) throw std::invalid_argument("deltas must be positive");
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Discretized projection and incidence laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    Context ctx;
    ctx.out = &out;
    app.add_option("--output", ctx.output, "output directory");
    app.add_option("--seed", ctx.seed, "random seed")->capture_default_str();
    app.add_option_function<int>(
        "--threads",
        [&](const int& n) {
            ctx.threads = n;
            set_num_threads(n);
        },
        "worker threads (0: hardware)");

    int status = 0;

    // curvature
    auto* curv = app.add_subcommand("curvature", "principal and sectional curvature over the parameter lattice");
    std::string chart_arg;
    int points = 33;
    bool fd = false;
    curv->add_option("--chart", chart_arg, "chart JSON or path")->required();
    curv->add_option("--points", points, "lattice points per axis")->capture_default_str();
    curv->add_flag("--finite-difference", fd, "differentiate the frame numerically");
    curv->callback([&] {
        ManifoldChart chart = ManifoldChart::builtin(io::chart_spec_from_json(load_json_arg(chart_arg)));
        NondegeneracyOptions o;
        o.points_per_axis = points;
        o.seed = ctx.seed;
        o.method = fd ? CurvatureMethod::finite_difference : CurvatureMethod::closed_form;
        CurvatureReport r = verify_nondegenerate(chart, o);
        std::ostringstream csv;
        write_curvature_csv(r, csv);
        io::write_text_file(csv.str(), ctx.path("tables/curvature.csv"));
        io::write_json_file(json{{"command", "curvature"}, {"chart", chart.label()}, {"report", io::to_json(r)}},
                            ctx.path("report.json"));
        out << "curvature: " << (r.passed ? "passed" : "failed") << " (" << r.entries.size() << " samples)\n";
        status = r.passed ? 0 : 1;
    });

    // cinematic-check
    auto* cin = app.add_subcommand("cinematic-check", "estimate the cinematic constant of a family");
    std::string family_path;
    int grid = kDefaultGridNodes;
    std::size_t pair_budget = 400;
    cin->add_option("--family", family_path, "family JSON")->required();
    cin->add_option("--grid", grid, "evaluation nodes per axis")->capture_default_str();
    cin->add_option("--pair-budget", pair_budget, "pairs sampled")->capture_default_str();
    cin->callback([&] {
        FunctionFamily fam = io::family_from_json(io::read_json_file(family_path));
        CinematicOptions o;
        o.grid_nodes = grid;
        o.pair_budget = pair_budget;
        o.seed = ctx.seed;
        CinematicReport r = estimate_cinematic_constant(fam, o);
        io::write_json_file(json{{"command", "cinematic-check"}, {"members", fam.size()}, {"report", io::to_json(r)}},
                            ctx.path("report.json"));
        out << "cinematic-check: K = " << fmt(r.K) << (r.passed ? " passed" : " failed") << "\n";
        status = r.passed ? 0 : 1;
    });

    // intersect
    auto* inter = app.add_subcommand("intersect", "intersection measures of vertical neighborhoods");
    std::string pairs_arg = "all", delta_arg;
    double res_factor = 8.0, K_arg = 0.0;
    inter->add_option("--family", family_path, "family JSON")->required();
    inter->add_option("--pairs", pairs_arg, "'all' or i-j,...")->capture_default_str();
    inter->add_option("--delta", delta_arg, "e.g. 2^-6..2^-10")->required();
    inter->add_option("--resolution-factor", res_factor, "cell side is delta / factor (>= 8)")->capture_default_str();
    inter->add_option("--K", K_arg, "cinematic constant for classification (0: estimate)");
    inter->callback([&] {
        FunctionFamily fam = io::family_from_json(io::read_json_file(family_path));
        auto deltas = parse_delta_list(delta_arg);
        IntersectionOptions o;
        double K = K_arg;
        if (K <= 0.0) {
            CinematicOptions co;
            co.seed = ctx.seed;
            K = estimate_cinematic_constant(fam, co).K;
        }
        o.K = K;
        if (res_factor < 8.0) fail(ErrorCode::too_coarse, "resolution factor must be at least 8");
        BoundTable t;
        if (res_factor == 8.0) {
            t = verify_intersection_bound(fam, parse_pairs(pairs_arg), deltas, o);
        } else {
            // Run each delta separately with its own resolution and merge.
            for (double d : deltas) {
                o.resolution = d / res_factor;
                BoundTable one = verify_intersection_bound(fam, parse_pairs(pairs_arg), {d}, o);
                t.rows.insert(t.rows.end(), one.rows.begin(), one.rows.end());
                t.deltas.push_back(d);
                t.max_ratio.push_back(one.max_ratio.front());
                t.skipped += one.skipped;
            }
            t.trend = t.max_ratio.front() > 0.0 ? t.max_ratio.back() / t.max_ratio.front() : 0.0;
        }
        std::ostringstream csv;
        write_bound_csv(t, csv);
        io::write_text_file(csv.str(), ctx.path("tables/intersect.csv"));
        io::write_json_file(json{{"command", "intersect"}, {"K", K}, {"table", io::to_json(t)}}, ctx.path("report.json"));
        out << "intersect: " << t.rows.size() << " rows, trend " << fmt(t.trend) << "\n";
    });

    // l2-energy
    auto* energy = app.add_subcommand("l2-energy", "squared counting function of a family's neighborhoods");
    double eps = 0.05, t_exp = 0.5;
    bool no_pairwise = false;
    energy->add_option("--family", family_path, "family JSON")->required();
    energy->add_option("--delta", delta_arg, "scale")->required();
    energy->add_option("--epsilon", eps)->capture_default_str();
    energy->add_option("--t", t_exp, "spread exponent of the family")->capture_default_str();
    energy->add_flag("--no-pairwise", no_pairwise, "skip the pairwise cross-check");
    energy->callback([&] {
        FunctionFamily fam = io::family_from_json(io::read_json_file(family_path));
        EnergyOptions o;
        o.epsilon = eps;
        o.t = t_exp;
        o.pairwise = !no_pairwise;
        EnergyReport r = l2_energy(fam, parse_scalar(delta_arg), o);
        io::write_json_file(json{{"command", "l2-energy"}, {"members", fam.size()}, {"report", io::to_json(r)}},
                            ctx.path("report.json"));
        out << "l2-energy: lhs " << fmt(r.lhs) << " rhs " << fmt(r.rhs) << (r.within_budget ? " within" : " over")
            << " budget\n";
        status = r.within_budget ? 0 : 1;
    });

    // furstenberg
    auto* fur = app.add_subcommand("furstenberg", "configurations and the incidence lower bound");
    fur->require_subcommand(1);
    auto* check = fur->add_subcommand("check", "validate a configuration and test the union bound");
    std::string config_dir;
    check->add_option("--config", config_dir, "configuration directory")->required();
    check->add_option("--epsilon", eps)->capture_default_str();
    check->callback([&] {
        Configuration cfg = io::load_configuration(config_dir);
        IncidenceReport r = incidence_lower_bound_check(cfg, eps);
        io::write_json_file(
            json{{"command", "furstenberg check"}, {"configuration", io::to_json(cfg)}, {"incidence", io::to_json(r)}},
            ctx.path("report.json"));
        out << "furstenberg check: union " << r.union_count << " bound " << fmt(r.bound)
            << (r.passed ? " passed" : " failed") << (cfg.valid ? "" : " (configuration invalid)") << "\n";
        status = r.passed && cfg.valid ? 0 : 1;
    });
    auto* gen = fur->add_subcommand("generate", "generate a configuration on an induced family");
    GenerateOptions gopts;
    std::string gen_chart, gen_out = "config";
    bool sharp = false;
    int sharp_n = 3;
    gen->add_option("--chart", gen_chart, "chart JSON or path (default sphere_slice 0.5)");
    gen->add_option("--m", gopts.m, "scale exponent")->capture_default_str();
    gen->add_option("--s", gopts.s)->capture_default_str();
    gen->add_option("--t", gopts.t)->capture_default_str();
    gen->add_option("--epsilon", gopts.epsilon)->capture_default_str();
    gen->add_option("--dir", gen_out, "configuration directory, relative to the output directory")->capture_default_str();
    gen->add_flag("--sharpness", sharp, "parallel hyperplanes instead of an induced family");
    gen->add_option("--n", sharp_n, "dimension for --sharpness")->capture_default_str();
    gen->callback([&] {
        gopts.seed = ctx.seed;
        if (!gen_chart.empty()) gopts.chart = io::chart_spec_from_json(load_json_arg(gen_chart));
        Configuration cfg = sharp ? sharpness_configuration(sharp_n, gopts.m, gopts.s, gopts.t, gopts.epsilon, ctx.seed)
                                  : generate_configuration(gopts);
        io::save_configuration(cfg, ctx.path(gen_out));
        io::write_json_file(json{{"command", "furstenberg generate"}, {"configuration", io::to_json(cfg)}},
                            ctx.path("report.json"));
        out << "furstenberg generate: " << cfg.family.size() << " members, M = " << cfg.M
            << (cfg.valid ? ", valid" : ", invalid") << "\n";
        status = cfg.valid ? 0 : 1;
    });

    // project-dim and sweep
    auto* proj = app.add_subcommand("project-dim", "box dimension of projections onto sampled directions");
    std::string spec_path;
    proj->add_option("--spec", spec_path, "experiment spec JSON")->required();
    proj->callback([&] {
        ExperimentSpec spec = io::experiment_spec_from_json(load_json_arg(spec_path));
        spec.seed = ctx.seed;
        ProjectionReport r = project_dim_experiment(spec);
        std::ostringstream csv;
        csv << "direction,slope,band_lo,band_hi,residual\n";
        for (std::size_t i = 0; i < r.directions.size(); ++i) {
            const auto& e = r.directions[i].estimate;
            csv << i << "," << fmt(e.slope) << "," << fmt(e.band_lo) << "," << fmt(e.band_hi) << "," << fmt(e.residual)
                << "\n";
        }
        io::write_text_file(csv.str(), ctx.path("tables/slopes.csv"));
        io::write_json_file(json{{"command", "project-dim"}, {"spec", io::to_json(spec)}, {"report", io::to_json(r)}},
                            ctx.path("report.json"));
        if (r.refused) {
            err << "project-dim: chart failed the curvature gate: " << r.curvature.note << "\n";
            status = 1;
            return;
        }
        out << "project-dim: " << r.directions.size() << " directions\n";
    });
    auto* sweep = app.add_subcommand("sweep", "fraction of directions projecting below s");
    std::string s_grid = "0.1,0.2,0.3,0.4,0.45,0.5,0.6,0.8,1.0";
    sweep->add_option("--spec", spec_path, "experiment spec JSON")->required();
    sweep->add_option("--s-grid", s_grid, "comma-separated s values")->capture_default_str();
    sweep->callback([&] {
        ExperimentSpec spec = io::experiment_spec_from_json(load_json_arg(spec_path));
        spec.seed = ctx.seed;
        ProjectionReport r = project_dim_experiment(spec);
        if (r.refused) {
            err << "sweep: chart failed the curvature gate: " << r.curvature.note << "\n";
            status = 1;
            return;
        }
        auto rows = exceptional_sweep(r, ManifoldChart::builtin(spec.chart).n(), parse_number_list(s_grid));
        std::ostringstream csv;
        csv << "s,exceptional,fraction,param_dimension,reference\n";
        for (const auto& row : rows)
            csv << fmt(row.s) << "," << row.exceptional << "," << fmt(row.fraction) << ","
                << (std::isnan(row.param_dimension) ? std::string("nan") : fmt(row.param_dimension)) << ","
                << fmt(row.reference) << "\n";
        io::write_text_file(csv.str(), ctx.path("tables/sweep.csv"));
        io::write_json_file(json{{"command", "sweep"}, {"spec", io::to_json(spec)}, {"rows", io::to_json(rows)}},
                            ctx.path("report.json"));
        out << "sweep: " << rows.size() << " rows\n";
    });

    // generate-set
    auto* gset = app.add_subcommand("generate-set", "write a dyadic cell set");
    std::string kind = "cantor", set_out = "set.bin";
    double ratio = 0.25, s_dim = 0.5;
    int depth = 6, k_dim = 1, m_scale = 8;
    gset->add_option("--kind", kind, "cantor | uniform | random-spread")->capture_default_str();
    gset->add_option("--ratio", ratio, "Cantor contraction, a power of 1/2")->capture_default_str();
    gset->add_option("--depth", depth, "Cantor depth")->capture_default_str();
    gset->add_option("--k", k_dim, "dimension")->capture_default_str();
    gset->add_option("--m", m_scale, "scale exponent (uniform, random-spread)")->capture_default_str();
    gset->add_option("--s", s_dim, "spread exponent (random-spread)")->capture_default_str();
    gset->add_option("--file", set_out, "file name under the output directory; .json for JSON")->capture_default_str();
    gset->callback([&] {
        DyadicSet set;
        if (kind == "cantor") set = cantor_set(ratio, depth, k_dim);
        else if (kind == "uniform") set = uniform_set(m_scale, k_dim);
        else if (kind == "random-spread") set = random_spread_set(s_dim, m_scale, k_dim, ctx.seed);
        else throw CLI::ValidationError("--kind", "unknown set kind '" + kind + "'");
        io::write_set_file(set, ctx.path(set_out));
        io::write_json_file(json{{"command", "generate-set"},
                                 {"kind", kind},
                                 {"k", set.dim()},
                                 {"m", set.scale()},
                                 {"cells", set.size()}},
                            ctx.path("report.json"));
        out << "generate-set: " << set.size() << " cells at scale 2^-" << set.scale() << "\n";
    });

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return e.code() == ErrorCode::invalid_parameter ? 2 : 1;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "malformed input: " << e.what() << "\n";
        return 2;
    }
    return status;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace cinelab
