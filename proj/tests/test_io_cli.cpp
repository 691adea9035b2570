#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fixtures.hpp"
#include "jkpanel/cli.hpp"
#include "jkpanel/errors.hpp"
#include "jkpanel/io.hpp"

using namespace jkpanel;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = JKPANEL_CONFIG_DIR;

// Scratch directory removed at scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() / ("jkpanel_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(int (*cmd)(const cli::Options&, std::ostream&, std::ostream&), const cli::Options& o) {
    std::ostringstream out, err;
    const int code = cmd(o, out, err);
    return {code, out.str(), err.str()};
}

void write_dataset(const std::string& path, const PanelDataset& d) {
    std::ofstream f(path, std::ios::binary);
    write_panel_csv(f, d);
}

}  // namespace

TEST_CASE("design JSON round trip") {
    for (const Design& d : {fixtures::oneway_halves(), fixtures::twoway_halves(), fixtures::threeway_halves(), fixtures::variance_design(),
                            fixtures::thirds()}) {
        const Json j = design_to_json(d);
        const Design back = design_from_json(parse_json_text(j.dump()));
        CHECK(design_to_json(back).dump() == j.dump());
        CHECK(design_digest(back) == design_digest(d));
        const auto a1 = bias_loading_matrix(d), a2 = bias_loading_matrix(back);
        for (std::size_t i = 0; i < a1.rows(); ++i)
            for (std::size_t k = 0; k < a1.cols(); ++k) CHECK(a1(i, k) == a2(i, k));
    }
    CHECK(design_digest(fixtures::oneway_halves()) != design_digest(fixtures::twoway_halves()));
}

TEST_CASE("design JSON accepts the equivalent selection forms") {
    const Design ref = load_design(kConfigs + "/oneway_halves.json");
    const Json alt = parse_json_text(R"({
        "dims": [100, 10],
        "fixed_effects": [{"axes": [0], "order": 1}],
        "subsamples": [
            {"axes": [{"blocks": [[0, 100]]}, {"blocks": [[0, 10]]}]},
            {"axes": ["all", [[0, 5]]]},
            {"axes": ["all", {"prefix": [1, 2]}]}
        ]
    })");
    // [[0, 5]] and {"prefix": [1, 2]} both name the first half of the time axis.
    const Design d = design_from_json(alt);
    CHECK(d.m() == 3);
    CHECK(d.subsamples[1].axes[1].indices() == ref.subsamples[1].axes[1].indices());
    CHECK(d.subsamples[2].axes[1].indices() == ref.subsamples[1].axes[1].indices());

    const Json over = parse_json_text(R"({
        "dims": [100, 10],
        "fixed_effects": [{"axes": [1]}],
        "bias_terms_override": [["1/2", "-1/2"]],
        "subsamples": [["all", "all"], ["all", {"part": [0, 2]}], ["all", {"part": [1, 2]}]],
        "C_override": [[1, 1, 1], [1, 2, 0], [1, 0, 2]]
    })");
    const Design o = design_from_json(over);
    CHECK(o.num_bias_terms() == 1);
    CHECK(bias_loading_matrix(o)(1, 0) == doctest::Approx(2.0));
    REQUIRE(o.c_override.has_value());
    CHECK(covariance_matrix(o)(1, 2) == 0.0);

    CHECK_THROWS_AS(design_from_json(parse_json_text(R"({"dims": [4, 4], "subsamples": [["all", "all"]]})")), ParseError);
    CHECK_THROWS_AS(parse_json_text("{ not json"), ParseError);
    CHECK_THROWS_AS(load_design("/nonexistent/design.json"), ParseError);
    CHECK_THROWS_AS(design_from_json(parse_json_text(
                        R"({"dims": [4, 4], "fixed_effects": [{"axes": [0]}],
                            "subsamples": [["all", {"part": [0, 2]}], ["all", "all"]]})")),
                    InvalidDesign);
}

TEST_CASE("panel CSV round trip and shape errors") {
    Rng rng(11);
    const PanelDataset d = dgp_dynamic_binary_panel(PanelShape({7, 5}), 0.4, rng);
    std::stringstream ss;
    write_panel_csv(ss, d);
    const PanelDataset back = read_panel_csv(ss, 2);
    CHECK(back.shape().dims() == d.shape().dims());
    CHECK(back.get("y") == d.get("y"));
    CHECK(back.get("x") == d.get("x"));

    // Rows in any order are accepted.
    std::istringstream shuffled("i0,i1,y\n1,1,4\n0,0,1\n1,0,3\n0,1,2\n");
    const PanelDataset s = read_panel_csv(shuffled, 2);
    CHECK(s.get("y") == std::vector<double>{1, 2, 3, 4});

    std::istringstream hole("i0,i1,y\n0,0,1\n0,1,2\n1,0,3\n");
    CHECK_THROWS_AS(read_panel_csv(hole, 2), ShapeMismatch);
    std::istringstream dup("i0,i1,y\n0,0,1\n0,0,2\n");
    CHECK_THROWS_AS(read_panel_csv(dup, 2), ShapeMismatch);
    std::istringstream ok("i0,i1,y\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
    CHECK_THROWS_AS(read_panel_csv(ok, 2, PanelShape({3, 2})), ShapeMismatch);
    std::istringstream bad("i0,i1,y\n0,0,abc\n");
    CHECK_THROWS_AS(read_panel_csv(bad, 2), ParseError);
}

TEST_CASE("design command") {
    cli::Options o;
    o.design = kConfigs + "/oneway_halves.json";
    const Run r = run(cli::cmd_design, o);
    REQUIRE(r.code == cli::kExitOk);
    const Json j = parse_json_text(r.out);
    const auto v = j["weights"]["v_star"];
    REQUIRE(v.size() == 3);
    CHECK(v[0].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v[1].get<double>() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(v[2].get<double>() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(j["A_exact"][1][0] == "2");
    CHECK(j["C_exact"][1][2] == "0");
    CHECK(j["diagnostics"]["valid"] == true);

    o.format = "md";
    const Run md = run(cli::cmd_design, o);
    CHECK(md.code == cli::kExitOk);
    CHECK(md.out.find("v* = (2, -0.5, -0.5)") != std::string::npos);
    o.format = "xml";
    CHECK(run(cli::cmd_design, o).code == cli::kExitUsage);

    cli::Options bad;
    bad.design = kConfigs + "/two_bias_m2_invalid.json";
    const Run b = run(cli::cmd_design, bad);
    CHECK(b.code == cli::kExitInvalidDesign);
    CHECK(b.err.find("ι_m in col(A): add subsamples") != std::string::npos);
    CHECK(parse_json_text(b.out)["weights"].is_null());

    cli::Options missing;
    missing.design = "/nonexistent/design.json";
    CHECK(run(cli::cmd_design, missing).code == cli::kExitUsage);
    CHECK(run(cli::cmd_design, cli::Options{}).code == cli::kExitUsage);
}

TEST_CASE("weights command reproduces the design solution from exported A and C") {
    TempDir tmp;
    for (const char* name : {"twoway_halves.json", "threeway_halves.json",
                             "twoway_variance_design.json", "oneway_thirds.json"}) {
        cli::Options o;
        o.design = kConfigs + "/" + name;
        o.out = tmp.file("design.json");
        REQUIRE(run(cli::cmd_design, o).code == cli::kExitOk);
        const Json dj = parse_json_text(read_file(o.out));

        cli::Options w;
        w.design = o.out;
        const Run r = run(cli::cmd_weights, w);
        REQUIRE(r.code == cli::kExitOk);
        const Json wj = parse_json_text(r.out);
        CHECK(wj["max_condition_residual"].get<double>() < 1e-10);
        const auto& v1 = dj["weights"]["v_star"];
        const auto& v2 = wj["v_star"];
        REQUIRE(v1.size() == v2.size());
        for (std::size_t i = 0; i < v1.size(); ++i) CHECK(std::abs(v1[i].get<double>() - v2[i].get<double>()) < 1e-12);
        const auto& u1 = dj["weights"]["U_star"];
        const auto& u2 = wj["U_star"];
        REQUIRE(u1.size() == u2.size());
        for (std::size_t i = 0; i < u1.size(); ++i)
            for (std::size_t k = 0; k < u1[i].size(); ++k)
                CHECK(std::abs(u1[i][k].get<double>() - u2[i][k].get<double>()) < 1e-12);

        // The design file itself is accepted too.
        w.design = kConfigs + "/" + name;
        CHECK(parse_json_text(run(cli::cmd_weights, w).out)["v_star"] == v2);
    }
    cli::Options bad;
    bad.design = kConfigs + "/two_bias_m2_invalid.json";
    CHECK(run(cli::cmd_weights, bad).code == cli::kExitInvalidDesign);
    bad.design = kConfigs + "/oneway_halves.json";
    bad.dof = 5;
    CHECK(run(cli::cmd_weights, bad).code == cli::kExitInvalidDesign);
}

TEST_CASE("infer command matches the library") {
    TempDir tmp;
    Rng rng(7);
    const PanelDataset data = dgp_twoway_variance(PanelShape({30, 30}), 1.0, rng);
    write_dataset(tmp.file("panel.csv"), data);

    cli::Options o;
    o.design = kConfigs + "/twoway_variance_design.json";
    o.data = tmp.file("panel.csv");
    o.estimator = "var2";
    o.phi0 = 1.0;
    const Run r = run(cli::cmd_infer, o);
    REQUIRE(r.code == cli::kExitOk);

    const Design design = load_design(o.design);
    const PanelDataset reread = load_panel_csv(o.data, 2);
    JackknifeOptions jo;
    jo.phi0 = 1.0;
    Json expected = result_to_json(run_jackknife(reread, design, builtin_estimator("var2"), jo), design);
    expected["estimator"] = "var2";
    CHECK(r.out == expected.dump(2) + "\n");
    CHECK(r.err.find("SE = ") != std::string::npos);

    // Same answer from the in-memory dataset and with more workers.
    CHECK(result_to_json(run_jackknife(data, design, builtin_estimator("var2"), jo), design)["phi_tilde"] ==
          expected["phi_tilde"]);
    o.workers = 4;
    CHECK(run(cli::cmd_infer, o).out == r.out);

    cli::Options wrong = o;
    wrong.estimator = "within_ls";
    CHECK(run(cli::cmd_infer, wrong).code == cli::kExitEstimator);
    wrong.estimator = "nope";
    CHECK(run(cli::cmd_infer, wrong).code == cli::kExitUsage);
    wrong = o;
    wrong.data = tmp.file("missing.csv");
    CHECK(run(cli::cmd_infer, wrong).code == cli::kExitUsage);
    wrong = o;
    wrong.design = kConfigs + "/oneway_halves.json";
    CHECK(run(cli::cmd_infer, wrong).code == cli::kExitUsage);  // data shape differs from the design
    wrong.design = kConfigs + "/two_bias_m2_invalid.json";
    CHECK(run(cli::cmd_infer, wrong).code == cli::kExitInvalidDesign);
}

TEST_CASE("infer command on a noiseless panel warns about the degenerate interval") {
    TempDir tmp;
    Rng rng(1);
    const PanelDataset data = dgp_twoway_variance(PanelShape({30, 30}), 0.0, rng);
    write_dataset(tmp.file("flat.csv"), data);
    cli::Options o;
    o.design = kConfigs + "/twoway_variance_design.json";
    o.data = tmp.file("flat.csv");
    o.estimator = "var2";
    const Run r = run(cli::cmd_infer, o);
    CHECK(r.code == cli::kExitOk);
    CHECK(r.err.find("warning: jackknife standard error is zero") != std::string::npos);
    const Json j = parse_json_text(r.out);
    CHECK(j["degenerate"] == true);
    CHECK(j["J"].is_null());
    CHECK(j["p_two_sided"] == 1.0);
}

TEST_CASE("simulate command") {
    TempDir tmp;
    const std::string cfg = tmp.file("study.json");
    write_text(cfg, R"({"dgp": "dynamic_binary", "phi": 0.5, "dims": [100, 10], "designs": ["a", "b", "c"],
                        "replications": 40, "seed": 5, "workers": 2, "format": "csv"})");
    cli::Options o;
    o.config = cfg;
    const Run a = run(cli::cmd_simulate, o);
    REQUIRE(a.code == cli::kExitOk);
    CHECK(run(cli::cmd_simulate, o).out == a.out);
    const MetricsTable t = parse_table_csv(a.out);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[1].name == "JK(a)");
    CHECK(t.rows[3].replications == 40);

    o.seed = 6;
    CHECK(run(cli::cmd_simulate, o).out != a.out);
    o.seed.reset();
    o.format = "md";
    CHECK(run(cli::cmd_simulate, o).out.rfind("| design |", 0) == 0);

    o.format.clear();
    o.out = tmp.file("table.csv");
    CHECK(run(cli::cmd_simulate, o).code == cli::kExitOk);
    CHECK(read_file(o.out) == a.out);

    // A solved design in the config, with the degrees of freedom pinned.
    write_text(cfg, R"({"dgp": "twoway_variance", "phi": 1.0, "dims": [30, 30], "replications": 20, "seed": 3,
                        "designs": [{"name": "ex4", "design": )" +
                        read_file(kConfigs + "/twoway_variance_design.json") + R"(, "dof": 1}]})");
    cli::Options s;
    s.config = cfg;
    const Run solved = run(cli::cmd_simulate, s);
    CHECK(solved.code == cli::kExitOk);
    CHECK(solved.out.find("| MLE |") != std::string::npos);
    CHECK(solved.out.find("| ex4 |") != std::string::npos);

    write_text(cfg, R"({"dims": [100, 10], "designs": ["a"], "replications": 0})");
    CHECK(run(cli::cmd_simulate, s).code == cli::kExitUsage);
    write_text(cfg, R"({"dims": [100, 10], "designs": ["q"], "replications": 3})");
    CHECK(run(cli::cmd_simulate, s).code == cli::kExitUsage);
    write_text(cfg, R"({"dgp": "twoway_variance", "estimator": "within_ls", "dims": [100, 10], "designs": ["a"],
                        "replications": 3})");
    const Run fail = run(cli::cmd_simulate, s);
    CHECK(fail.code == cli::kExitEstimator);
    CHECK(fail.err.find("replication 0") != std::string::npos);
}

TEST_CASE("generate command") {
    cli::Options o;
    o.dims = "6,4";
    o.seed = 9;
    const Run a = run(cli::cmd_generate, o);
    REQUIRE(a.code == cli::kExitOk);
    CHECK(run(cli::cmd_generate, o).out == a.out);
    std::istringstream in(a.out);
    const PanelDataset d = read_panel_csv(in, 2);
    Rng rng(9);
    CHECK(d.get("y") == dgp_twoway_variance(PanelShape({6, 4}), 1.0, rng).get("y"));
    o.dims = "6,x";
    CHECK(run(cli::cmd_generate, o).code == cli::kExitUsage);
    o.dims = "6,4";
    o.dgp = "nope";
    CHECK(run(cli::cmd_generate, o).code == cli::kExitUsage);
}

TEST_CASE("study files") {
    const StudyFile f = study_from_json(parse_json_text(read_file(kConfigs + "/dynamic_binary_study.json")));
    CHECK(f.config.replications == 2000);
    CHECK(f.config.seed == 20240101);
    CHECK(f.config.designs.size() == 3);
    CHECK(f.config.designs[2].name == "JK(c)");
    CHECK(f.format == "md");
    const StudyFile g = study_from_json(parse_json_text(R"({"dims": [100, 10], "designs": ["a"],
                                                            "failure_policy": "drop"})"));
    CHECK(g.config.failure_policy == FailurePolicy::drop_and_count);
    CHECK_THROWS_AS(study_from_json(parse_json_text(R"({"dims": [100, 10], "failure_policy": "retry"})")),
                    ParseError);
}
