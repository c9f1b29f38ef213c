#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "cinelab/cli.hpp"
#include "cinelab/io.hpp"

using namespace cinelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("cinelab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::ostringstream out, err;
    int rc = run_cli(args, out, err);
    if (out_text) *out_text = out.str();
    return rc;
}

// The installed binary, so exit codes are checked through a real process.
int run_binary(const std::string& args) {
    const std::string cmd = std::string(CINELAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("chart specs round trip") {
    ChartSpec s;
    s.kind = ChartKind::quadratic_graph;
    s.L = Eigen::MatrixXd::Identity(2, 2);
    s.A = Eigen::MatrixXd(2, 2);
    s.A << 1.0, 0.2, 0.2, 3.0;
    ChartSpec t = io::chart_spec_from_json(io::to_json(s));
    CHECK(t.kind == s.kind);
    CHECK(t.A.isApprox(s.A));
    CHECK(t.L.isApprox(s.L));
    CHECK(io::to_json(t) == io::to_json(s));
}

TEST_CASE("field families round trip") {
    std::vector<double> c{0.4, 0.6};
    std::vector<ScalarField> m{ScalarField::constant(Box::unit(2), 0.25),
                               ScalarField::polynomial(Box::unit(2), {Monomial{0.5, {2, 1, 0}}}),
                               ScalarField::sphere_cap(Box::unit(2), c, 1.5, 0.1, -1.0)};
    FunctionFamily fam = make_family(std::move(m));
    FunctionFamily back = io::family_from_json(io::to_json(fam));
    REQUIRE(back.size() == fam.size());
    std::vector<double> x{0.3, 0.7};
    for (std::size_t i = 0; i < fam.size(); ++i) CHECK(back.members[i].value(x) == fam.members[i].value(x));

    auto chart = std::make_shared<const ManifoldChart>(ManifoldChart::sphere_slice(0.5, 3));
    FunctionFamily ind = induced_projection_family(chart, {{0.1, 0.2, 0.0, 0.3}, {0.0, -0.2, 0.1, 0.0}});
    io::json j = io::to_json(ind);
    CHECK(j.contains("induced"));
    FunctionFamily ind2 = io::family_from_json(j);
    for (std::size_t i = 0; i < ind.size(); ++i) CHECK(ind2.members[i].value(x) == ind.members[i].value(x));
}

TEST_CASE("cell sets round trip in both formats") {
    DyadicSet s = random_spread_set(1.2, 6, 2, 5);
    CHECK(io::set_from_json(io::to_json(s)) == s);
    fs::path dir = scratch("sets");
    io::write_set_file(s, (dir / "a.bin").string());
    io::write_set_file(s, (dir / "a.json").string());
    CHECK(io::read_set_file((dir / "a.bin").string()) == s);
    CHECK(io::read_set_file((dir / "a.json").string()) == s);
    CHECK_THROWS_AS(io::set_from_json(io::json{{"k", 5}, {"m", 3}, {"cells", io::json::array()}}), Error);
}

TEST_CASE("configurations round trip through a directory") {
    Configuration cfg = sharpness_configuration(3, 4, 0.5, 0.5, 0.05, 2);
    fs::path dir = scratch("config");
    io::save_configuration(cfg, dir.string());
    Configuration back = io::load_configuration(dir.string());
    REQUIRE(back.sets.size() == cfg.sets.size());
    for (std::size_t i = 0; i < cfg.sets.size(); ++i) CHECK(back.sets[i] == cfg.sets[i]);
    CHECK(back.params.delta == cfg.params.delta);
    CHECK(back.valid == cfg.valid);
}

TEST_CASE("delta lists") {
    auto r = parse_delta_list("2^-6..2^-8");
    REQUIRE(r.size() == 3u);
    CHECK(r[0] == 1.0 / 64);
    CHECK(r[2] == 1.0 / 256);
    CHECK(parse_delta_list("2^-8") == std::vector<double>{1.0 / 256});
    CHECK(parse_delta_list("0.5,2^-3") == std::vector<double>{0.5, 0.125});
    CHECK_THROWS(parse_delta_list(""));
    CHECK_THROWS(parse_delta_list("-1"));
    CHECK_THROWS(parse_delta_list("0.3..0.1"));
}

TEST_CASE("cli curvature of a sphere slice is constant") {
    fs::path out = scratch("curv");
    REQUIRE(run({"--output", out.string(), "curvature", "--chart", R"({"kind":"sphere_slice","c":0.6})", "--points",
                 "33"}) == 0);
    std::ifstream csv(out / "tables" / "curvature.csv");
    std::string line;
    std::getline(csv, line);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        CHECK(line.substr(line.rfind(',') + 1) == "1.5625");
    }
    CHECK(rows == 33u * 33u);
    CHECK(fs::exists(out / "report.json"));
}

TEST_CASE("cli generate-set and reruns are byte identical") {
    fs::path a = scratch("gen_a"), b = scratch("gen_b");
    std::string text;
    for (const fs::path& d : {a, b})
        REQUIRE(run({"--output", d.string(), "generate-set", "--kind", "cantor", "--ratio", "0.25", "--depth", "6",
                     "--file", "c.bin"},
                    &text) == 0);
    CHECK(io::read_set_file((a / "c.bin").string()).size() == 64u);
    CHECK(slurp(a / "c.bin") == slurp(b / "c.bin"));
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(text.find("64 cells") != std::string::npos);
}

TEST_CASE("cli exit codes through the binary") {
    fs::path out = scratch("codes");
    const std::string o = "--output " + out.string() + " ";
    CHECK(run_binary(o + "bogus") == 2);
    CHECK(run_binary(o + "curvature") == 2);
    CHECK(run_binary(o + "generate-set --kind cantor --ratio 0.25 --depth 4") == 0);
    CHECK(run_binary(o + "intersect --family /nonexistent.json --delta 2^-6") != 0);
    // An indefinite A is rejected as a bad parameter.
    CHECK(run_binary(o + R"(curvature --chart '{"kind":"quadratic_graph","L":[[1,0],[0,1]],"A":[[1,0],[0,-1]]}')") == 2);
    // Two members closer than delta fail validation.
    std::ofstream(out / "close.json")
        << R"({"domain":{"lo":[0,0],"hi":[1,1]},"members":[{"kind":"constant","value":0.5},{"kind":"constant","value":0.5001}]})";
    CHECK(run_binary(o + "l2-energy --family " + (out / "close.json").string() + " --delta 2^-5") == 1);
}

TEST_CASE("output directory falls back to the environment") {
    fs::path out = scratch("env");
    const std::string cmd = "CINELAB_OUTPUT_DIR=" + out.string() + " " + CINELAB_CLI_PATH +
                            " generate-set --kind uniform --m 3 --k 1 >/dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(out / "set.bin"));
}
