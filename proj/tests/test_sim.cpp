#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "jkpanel/errors.hpp"
#include "jkpanel/inference.hpp"
#include "jkpanel/sim.hpp"

using namespace jkpanel;

namespace {

// Reference xoshiro256** step on an explicit state.
std::uint64_t xoshiro_step(std::uint64_t s[4]) {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

StudyConfig small_study(std::size_t reps, std::size_t workers) {
    StudyConfig cfg;
    cfg.shape = PanelShape({100, 10});
    for (const char* s : {"a", "b", "c"}) cfg.designs.push_back(builtin_scheme(s, cfg.shape));
    cfg.replications = reps;
    cfg.workers = workers;
    cfg.seed = 99;
    return cfg;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("splitmix64 reference outputs") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64(state) == 0x6E789E6AA1B965F4ULL);
    CHECK(splitmix64(state) == 0x06C45D188009454FULL);
}

TEST_CASE("generator follows xoshiro256** seeded by splitmix64") {
    for (std::uint64_t seed : {0ULL, 1ULL, 20240101ULL, 0xFFFFFFFFFFFFFFFFULL}) {
        std::uint64_t st = seed;
        std::uint64_t s[4];
        for (auto& w : s) w = splitmix64(st);
        Rng rng(seed);
        for (int i = 0; i < 1000; ++i) CHECK(rng.next_u64() == xoshiro_step(s));
    }
    // Published first outputs for the state (1, 2, 3, 4).
    std::uint64_t s[4] = {1, 2, 3, 4};
    CHECK(xoshiro_step(s) == 11520ULL);
    CHECK(xoshiro_step(s) == 0ULL);
    CHECK(xoshiro_step(s) == 1509978240ULL);
}

TEST_CASE("uniform and normal draws") {
    Rng rng(5);
    double sum = 0, sum2 = 0, sum4 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
        sum4 += z * z * z * z;
    }
    CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sum2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(sum4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));

    // Polar method draw order: the first coordinate of each accepted pair,
    // then the cached second one.
    Rng a(17), b(17);
    for (int pair = 0; pair < 100; ++pair) {
        double u, v, s;
        do {
            u = 2.0 * b.uniform() - 1.0;
            v = 2.0 * b.uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        CHECK(a.normal() == u * f);
        CHECK(a.normal() == v * f);
    }
}

TEST_CASE("substreams are distinct and reproducible") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 10000; ++r) seen.insert(substream_seed(42, r));
    CHECK(seen.size() == 10000);
    CHECK(substream_seed(42, 7) == substream_seed(42, 7));
    CHECK(substream_seed(42, 7) != substream_seed(43, 7));
}

TEST_CASE("dynamic binary panel") {
    Rng rng(3);
    const PanelDataset d = dgp_dynamic_binary_panel(PanelShape({40, 12}), 0.8, rng);
    const auto& y = d.get("y");
    const auto& x = d.get("x");
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(x[i * 12] == 0.0);
        for (std::size_t t = 1; t < 12; ++t) CHECK(x[i * 12 + t] == (y[i * 12 + t - 1] > 0.0 ? 1.0 : 0.0));
    }
    Rng again(3);
    CHECK(dgp_dynamic_binary_panel(PanelShape({40, 12}), 0.8, again).get("y") == y);
    CHECK_THROWS_AS(dgp_dynamic_binary_panel(PanelShape({4, 4, 4}), 0.5, rng), InvalidDesign);
}

TEST_CASE("lagged indicator is balanced when the slope is zero") {
    // Pooled across replications, mean(x) over t ≥ 1 estimates P(λ + ε > 0) = 1/2.
    const std::size_t reps = 400;
    std::vector<double> means;
    for (std::size_t r = 0; r < reps; ++r) {
        Rng rng(substream_seed(8, r));
        const PanelDataset d = dgp_dynamic_binary_panel(PanelShape({50, 10}), 0.0, rng);
        const auto& x = d.get("x");
        double s = 0;
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t t = 1; t < 10; ++t) s += x[i * 10 + t];
        means.push_back(s / (50 * 9));
    }
    double m = 0, v = 0;
    for (double x : means) m += x / reps;
    for (double x : means) v += (x - m) * (x - m) / (reps - 1);
    CHECK(std::abs(m - 0.5) < 3.0 * std::sqrt(v / reps));
}

TEST_CASE("two-way variance panel") {
    Rng rng(4);
    const PanelDataset d = dgp_twoway_variance(PanelShape({8, 6}), 0.0, rng);
    CHECK(twoway_variance_mle(PanelView(d)) < 1e-25);
    CHECK_THROWS_AS(dgp_twoway_variance(PanelShape({8, 6}), -1.0, rng), DomainError);
    CHECK_THROWS_AS(generate("ar1", PanelShape({8, 6}), 1.0, rng), ParseError);
    CHECK(default_estimator_for("twoway_variance") == "var2");
    CHECK(default_estimator_for("dynamic_binary") == "within_ls");
}

TEST_CASE("builtin schemes") {
    const PanelShape s({100, 10});
    const auto c = builtin_scheme("c", s);
    CHECK(c.name == "JK(c)");
    CHECK(c.design.m() == 8);
    CHECK(c.u.cols() == 5);
    CHECK(builtin_scheme("b", s).design.m() == 5);
    CHECK_THROWS_AS(builtin_scheme("d", s), ParseError);
    CHECK_THROWS_AS(builtin_scheme("c", PanelShape({101, 10})), IndivisibleAxis);
    const auto solved = solved_scheme("mvuj", fixtures::oneway_halves());
    CHECK(solved.v.size() == 3);
    CHECK(solved.u.cols() == 1);
}

TEST_CASE("study tables do not depend on the worker count") {
    const std::string base = emit_table(run_study(small_study(120, 1)).table, TableFormat::csv);
    for (std::size_t w : {4u, 16u}) CHECK(emit_table(run_study(small_study(120, w)).table, TableFormat::csv) == base);
    const auto md = emit_table(run_study(small_study(120, 1)).table, TableFormat::markdown);
    CHECK(emit_table(run_study(small_study(120, 16)).table, TableFormat::markdown) == md);
}

TEST_CASE("a single replication reproduces the inference result") {
    StudyConfig cfg = small_study(1, 1);
    const StudyResult res = run_study(cfg);
    Rng rng(substream_seed(cfg.seed, 0));
    const PanelDataset data = dgp_dynamic_binary_panel(cfg.shape, cfg.phi, rng);
    const auto full = within_ls_oneway(PanelView(data));
    CHECK(res.table.row("LS").bias == doctest::Approx(full - cfg.phi).epsilon(1e-14));
    CHECK(std::isnan(res.table.row("LS").coverage));
    for (const auto& sd : cfg.designs) {
        const auto est = evaluate_subsamples(data, sd.design, builtin_estimator("within_ls"));
        const auto r = infer_from_estimates(est, sd.v, sd.u, cfg.phi, cfg.alpha);
        const auto& row = res.table.row(sd.name);
        CHECK(row.replications == 1);
        CHECK(row.bias == doctest::Approx(r.phi_tilde - cfg.phi).epsilon(1e-14));
        CHECK(row.coverage == ((r.ci_lower <= cfg.phi && cfg.phi <= r.ci_upper) ? 1.0 : 0.0));
        CHECK(row.length == doctest::Approx(r.ci_upper - r.ci_lower).epsilon(1e-14));
        CHECK(row.std_err == 0.0);
    }
}

TEST_CASE("ten-replication study matches the stored table") {
    const std::string table = emit_table(run_study(small_study(10, 1)).table, TableFormat::markdown);
    const std::string golden = read_text(JKPANEL_TEST_DATA_DIR "/golden_study10.md");
    CHECK(table == golden);
}

TEST_CASE("table formats") {
    const MetricsTable empty;
    const std::string header =
        "design,bias,std_err,coverage,length,bias_mcse,std_err_mcse,coverage_mcse,length_mcse,replications,failures\n";
    CHECK(emit_table(empty, TableFormat::csv) == header);
    const std::string md = emit_table(empty, TableFormat::markdown);
    CHECK(std::count(md.begin(), md.end(), '\n') == 2);
    CHECK(md.rfind("| design | bias | std_err | coverage | length |", 0) == 0);
    CHECK(emit_table(empty, TableFormat::json) == "[]\n");

    const MetricsTable t = run_study(small_study(30, 1)).table;
    const std::string csv = emit_table(t, TableFormat::csv);
    const MetricsTable back = parse_table_csv(csv);
    REQUIRE(back.rows.size() == t.rows.size());
    CHECK(emit_table(back, TableFormat::csv) == csv);
    CHECK(back.rows[0].name == "LS");
    CHECK(std::isnan(back.rows[0].coverage));

    const auto j = nlohmann::json::parse(emit_table(t, TableFormat::json));
    CHECK(j.size() == 4);
    CHECK(j[0]["coverage"].is_null());
    CHECK(j[1]["design"] == "JK(a)");
    CHECK(j[1]["replications"] == 30);
    CHECK(parse_table_format("md") == TableFormat::markdown);
    CHECK_THROWS_AS(parse_table_format("xlsx"), ParseError);
    CHECK_THROWS_AS(parse_table_csv("design,bias\nx,1\n"), ParseError);
}

TEST_CASE("study validation and failure policies") {
    StudyConfig cfg = small_study(0, 1);
    CHECK_THROWS_AS(run_study(cfg), InvalidDesign);
    cfg = small_study(5, 1);
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(run_study(cfg), InvalidDesign);
    cfg = small_study(5, 1);
    cfg.designs[0].v.pop_back();
    CHECK_THROWS_AS(run_study(cfg), InvalidDesign);

    // within_ls has no regressor in the variance DGP: every replication fails.
    cfg = small_study(6, 2);
    cfg.dgp = "twoway_variance";
    cfg.estimator = "within_ls";
    try {
        run_study(cfg);
        FAIL("expected the study to abort");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("replication 0, LS:", 0) == 0);
    }
    cfg.failure_policy = FailurePolicy::drop_and_count;
    const StudyResult res = run_study(cfg);
    for (const auto& row : res.table.rows) {
        CHECK(row.failures == 6);
        CHECK(row.replications == 0);
        CHECK(std::isnan(row.bias));
    }
}

TEST_CASE("jackknife coverage on the two-way variance panel") {
    StudyConfig cfg;
    cfg.dgp = "twoway_variance";
    cfg.phi = 1.0;
    cfg.shape = PanelShape({60, 60});
    cfg.designs.push_back(solved_scheme("mvuj", fixtures::variance_design(60, 60)));
    cfg.replications = 5000;
    cfg.seed = 606;
    cfg.workers = 0;
    const auto t = run_study(cfg).table;
    CHECK(std::abs(t.row("mvuj").coverage - 0.95) <= 0.02);
    CHECK(std::abs(t.row("mvuj").bias) < 3.0 * t.row("mvuj").bias_se + 1e-12);
    CHECK(t.row("MLE").bias < 0.0);
}
