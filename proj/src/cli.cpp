#include "jkpanel/cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "jkpanel/errors.hpp"
#include "jkpanel/io.hpp"

namespace jkpanel::cli {

void init_logging() {
    auto logger = spdlog::get("jkpanel");
    if (!logger) logger = spdlog::stderr_logger_mt("jkpanel");
    logger->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("JKPANEL_LOG")) level = spdlog::level::from_str(env);
    logger->set_level(level);
    spdlog::set_default_logger(logger);
}

namespace {

class OutputError : public Error {
public:
    using Error::Error;
};

void write_output(const Options& opts, std::ostream& out, const std::string& text) {
    if (opts.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(opts.out, std::ios::binary);
    if (!f) throw OutputError("cannot write '" + opts.out + "'");
    f << text;
    spdlog::info("wrote {}", opts.out);
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const EstimatorFailure& e) {
        err << "error: " << e.what() << '\n';
        return kExitEstimator;
    } catch (const InvalidDesign& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const IndivisibleAxis& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const UnsupportedOrder& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const RankDeficient& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const DegenerateVariance& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const InsufficientDirections& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const InfeasibleConstraints& e) {
        err << "invalid design: " << e.what() << '\n';
        return kExitInvalidDesign;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

std::string fmt_num(double x, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    return buf;
}

void matrix_table(std::ostream& os, const std::string& title, const linalg::Matrix& m) {
    os << title << " (" << m.rows() << " x " << m.cols() << ")\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << "  ";
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::string cell = fmt_num(m(i, j));
            if (cell.size() < 12) cell.insert(0, 12 - cell.size(), ' ');
            os << cell;
        }
        os << '\n';
    }
}

void vector_line(std::ostream& os, const std::string& title, const linalg::Vector& v) {
    os << title << " = (";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fmt_num(v[i], 10);
    os << ")\n";
}

Json exact_to_json(const std::vector<std::vector<Rational>>& m) {
    Json out = Json::array();
    for (const auto& row : m) {
        Json r = Json::array();
        for (const auto& x : row) r.push_back(to_string(x));
        out.push_back(std::move(r));
    }
    return out;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ParseError(std::string("missing required option ") + flag);
}

}  // namespace

int cmd_design(const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        require(opts.design, "--design");
        const Design design = load_design(opts.design);
        const linalg::Matrix a = bias_loading_matrix(design);
        const linalg::Matrix c = covariance_matrix(design);
        const DesignDiagnostics diag = diagnose(a, c);
        const std::string format = opts.format.empty() ? "json" : opts.format;

        std::optional<WeightSolution> w;
        if (diag.valid()) w = solve_weights(a, c, opts.dof);

        if (format == "json") {
            Json j;
            j["design_digest"] = design_digest(design);
            j["A"] = matrix_to_json(a);
            j["C"] = matrix_to_json(c);
            if (auto ex = bias_loading_exact(design)) j["A_exact"] = exact_to_json(*ex);
            if (!design.c_override) j["C_exact"] = exact_to_json(overlap_covariance_exact(design));
            j["C_eigenvalues"] = vector_to_json(linalg::symmetric_eigenvalues(c));
            j["diagnostics"] = diagnostics_to_json(diag);
            j["weights"] = w ? weights_to_json(*w) : Json(nullptr);
            write_output(opts, out, j.dump(2) + "\n");
        } else if (format == "md") {
            std::ostringstream os;
            matrix_table(os, "A", a);
            matrix_table(os, "C", c);
            vector_line(os, "eig(C)", linalg::symmetric_eigenvalues(c));
            os << "m = " << diag.m << ", R = " << diag.num_bias_terms << ", rank(A) = " << diag.rank_A
               << ", q_max = " << diag.q_max << '\n';
            if (w) {
                vector_line(os, "v*", w->v_star);
                matrix_table(os, "U*", w->U_star);
                os << "v*'Cv* = " << fmt_num(w->variance_factor, 12) << '\n';
            }
            write_output(opts, out, os.str());
        } else {
            throw ParseError("--format must be json or md for the design command");
        }

        if (!diag.valid()) {
            for (const auto& r : diag.reasons()) err << "invalid design: " << r << '\n';
            return kExitInvalidDesign;
        }
        return kExitOk;
    });
}

int cmd_weights(const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        require(opts.design, "--design");
        const Json j = parse_json_text(read_file(opts.design));
        linalg::Matrix a, c;
        if (j.is_object() && j.contains("A") && j.contains("C")) {
            a = matrix_from_json(j.at("A"));
            c = matrix_from_json(j.at("C"));
            if (c.rows() != a.rows() || c.cols() != a.rows()) throw ParseError("A and C disagree on m");
        } else {
            const Design d = design_from_json(j);
            a = bias_loading_matrix(d);
            c = covariance_matrix(d);
        }
        const DesignDiagnostics diag = diagnose(a, c);
        if (!diag.valid()) {
            for (const auto& r : diag.reasons()) err << "invalid design: " << r << '\n';
            return kExitInvalidDesign;
        }
        const WeightSolution w = solve_weights(a, c, opts.dof);
        Json outj = weights_to_json(w);
        const ConditionReport rep = verify_weight_conditions(a, c, w.v_star, w.U_star);
        outj["max_condition_residual"] = rep.max();
        write_output(opts, out, outj.dump(2) + "\n");
        return kExitOk;
    });
}

int cmd_infer(const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        require(opts.design, "--design");
        require(opts.data, "--data");
        const Design design = load_design(opts.design);
        const DesignDiagnostics diag = validate_design(design);
        if (!diag.valid()) {
            for (const auto& r : diag.reasons()) err << "invalid design: " << r << '\n';
            return kExitInvalidDesign;
        }
        const Estimator estimator = builtin_estimator(opts.estimator);
        const PanelDataset data = load_panel_csv(opts.data, design.shape.rank(), design.shape);

        JackknifeOptions jo;
        jo.q = opts.dof;
        jo.alpha = opts.alpha;
        jo.phi0 = opts.phi0;
        jo.workers = opts.workers.value_or(1);
        const InferenceResult r = run_jackknife(data, design, estimator, jo);
        spdlog::debug("estimates evaluated on {} subsamples", r.estimates.size());

        Json j = result_to_json(r, design);
        j["estimator"] = opts.estimator;
        write_output(opts, out, j.dump(2) + "\n");

        if (r.degenerate) err << "warning: jackknife standard error is zero; the interval is degenerate\n";
        char line[256];
        std::snprintf(line, sizeof line, "φ̃ = %.6g, SE = %.6g, %g%% CI = [%.6g, %.6g], p = %.4g\n", r.phi_tilde,
                      r.sigma_tilde, 100.0 * (1.0 - r.alpha), r.ci_lower, r.ci_upper, r.p.two_sided);
        err << line;
        return kExitOk;
    });
}

int cmd_simulate(const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        require(opts.config, "--config");
        StudyFile f;
        try {
            f = study_from_json(parse_json_text(read_file(opts.config)));
        } catch (const Error& e) {
            throw ParseError(std::string("study config: ") + e.what());
        }
        if (opts.seed) f.config.seed = *opts.seed;
        if (opts.workers) f.config.workers = *opts.workers;
        Options o = opts;
        if (o.out.empty()) o.out = f.out;
        const TableFormat fmt = parse_table_format(opts.format.empty() ? f.format : opts.format);

        StudyResult res;
        try {
            res = run_study(f.config);
        } catch (const InvalidDesign&) {
            throw ParseError("invalid study config");
        } catch (const EstimatorFailure&) {
            throw;
        } catch (const Error& e) {
            err << "error: " << e.what() << '\n';
            return kExitEstimator;
        }
        write_output(o, out, emit_table(res.table, fmt));
        for (const auto& row : res.table.rows)
            spdlog::info("{}: {} replications, {} failures", row.name, row.replications, row.failures);
        return kExitOk;
    });
}

int cmd_generate(const Options& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        require(opts.dims, "--dims");
        std::vector<std::size_t> dims;
        std::stringstream ss(opts.dims);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                dims.push_back(std::stoul(tok));
            } catch (const std::exception&) {
                throw ParseError("--dims must be a comma-separated list of sizes");
            }
        }
        Rng rng(opts.seed.value_or(0));
        const PanelDataset data = generate(opts.dgp, PanelShape(dims), opts.phi, rng);
        std::ostringstream os;
        write_panel_csv(os, data);
        write_output(opts, out, os.str());
        return kExitOk;
    });
}

}  // namespace jkpanel::cli
