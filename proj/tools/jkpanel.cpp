#include <CLI11.hpp>
#include <iostream>

#include "jkpanel/cli.hpp"

int main(int argc, char** argv) {
    using namespace jkpanel::cli;
    init_logging();

    CLI::App app{"Split-panel jackknife inference for fixed-effects panels"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "Write output to this file instead of stdout");
        sub->add_option("--format", o.format, "Output format (json | md | csv)");
    };

    auto* design = app.add_subcommand("design", "Print A, C, diagnostics and weights for a design file");
    design->add_option("--design", o.design, "Design JSON")->required();
    design->add_option("--dof", o.dof, "Number of variance-weight directions q");
    add_common(design);

    auto* weights = app.add_subcommand("weights", "Solve jackknife and variance weights");
    weights->add_option("--design", o.design, "Design JSON, or a JSON object with A and C")->required();
    weights->add_option("--dof", o.dof, "Number of variance-weight directions q");
    add_common(weights);

    auto* infer = app.add_subcommand("infer", "Run jackknife inference on a panel CSV");
    infer->add_option("--design", o.design, "Design JSON")->required();
    infer->add_option("--data", o.data, "Long-format panel CSV")->required();
    infer->add_option("--estimator", o.estimator, "within_ls | var2 | var3 | probit2")->capture_default_str();
    infer->add_option("--dof", o.dof, "Number of variance-weight directions q (default q_max)");
    infer->add_option("--alpha", o.alpha, "Significance level")->capture_default_str();
    infer->add_option("--null", o.phi0, "Null value for the t-statistic")->capture_default_str();
    infer->add_option("--workers", o.workers, "Worker threads for subsample evaluation");
    add_common(infer);

    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
    simulate->add_option("--config", o.config, "Study config JSON")->required();
    simulate->add_option("--seed", o.seed, "Override the study seed");
    simulate->add_option("--workers", o.workers, "Worker threads (0: all cores)");
    add_common(simulate);

    auto* gen = app.add_subcommand("generate", "Simulate a panel and write it as CSV");
    gen->add_option("--dgp", o.dgp, "twoway_variance | dynamic_binary")->capture_default_str();
    gen->add_option("--dims", o.dims, "Comma-separated panel dimensions, e.g. 30,30")->required();
    gen->add_option("--phi", o.phi, "Model parameter")->capture_default_str();
    gen->add_option("--seed", o.seed, "Random seed");
    gen->add_option("--out", o.out, "Write output to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (*design) return cmd_design(o, std::cout, std::cerr);
    if (*weights) return cmd_weights(o, std::cout, std::cerr);
    if (*infer) return cmd_infer(o, std::cout, std::cerr);
    if (*simulate) return cmd_simulate(o, std::cout, std::cerr);
    if (*gen) return cmd_generate(o, std::cout, std::cerr);
    return kExitUsage;
}
