#include "jkpanel/sim.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "jkpanel/errors.hpp"
#include "jkpanel/inference.hpp"
#include "jkpanel/parallel.hpp"
#include "jkpanel/weights.hpp"

namespace jkpanel {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t r) {
    std::uint64_t s = seed;
    const std::uint64_t base = splitmix64(s);
    std::uint64_t t = base ^ (r * 0xD1B54A32D192ED03ULL);
    return splitmix64(t);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t st = seed;
    for (auto& w : s_) w = splitmix64(st);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

// ---------------------------------------------------------------- DGPs

namespace {
void require_2d(const PanelShape& shape) {
    if (shape.rank() != 2) throw InvalidDesign("this data-generating process needs a two-axis panel");
}
}  // namespace

PanelDataset dgp_dynamic_binary_panel(const PanelShape& shape, double phi, Rng& rng) {
    require_2d(shape);
    if (!std::isfinite(phi)) throw DomainError("phi must be finite");
    const std::size_t n = shape.dim(0), t = shape.dim(1);
    std::vector<double> lambda(n);
    for (auto& l : lambda) l = rng.normal();
    std::vector<double> y(n * t), x(n * t);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < t; ++s) {
            const double xv = s == 0 ? 0.0 : (y[i * t + s - 1] > 0.0 ? 1.0 : 0.0);
            x[i * t + s] = xv;
            y[i * t + s] = phi * xv + lambda[i] + rng.normal();
        }
    }
    PanelDataset data(shape);
    data.set("y", std::move(y));
    data.set("x", std::move(x));
    return data;
}

PanelDataset dgp_twoway_variance(const PanelShape& shape, double phi, Rng& rng) {
    require_2d(shape);
    if (!(phi >= 0.0)) throw DomainError("the error variance must be non-negative");
    const std::size_t n = shape.dim(0), t = shape.dim(1);
    std::vector<double> lambda(n), gamma(t);
    for (auto& l : lambda) l = rng.normal();
    for (auto& g : gamma) g = rng.normal();
    const double sd = std::sqrt(phi);
    std::vector<double> y(n * t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) y[i * t + s] = lambda[i] + gamma[s] + sd * rng.normal();
    PanelDataset data(shape);
    data.set("y", std::move(y));
    return data;
}

PanelDataset generate(const std::string& dgp, const PanelShape& shape, double phi, Rng& rng) {
    if (dgp == "dynamic_binary") return dgp_dynamic_binary_panel(shape, phi, rng);
    if (dgp == "twoway_variance") return dgp_twoway_variance(shape, phi, rng);
    throw ParseError("unknown dgp '" + dgp + "'");
}

std::string default_estimator_for(const std::string& dgp) {
    if (dgp == "dynamic_binary") return "within_ls";
    if (dgp == "twoway_variance") return "var2";
    throw ParseError("unknown dgp '" + dgp + "'");
}

// ---------------------------------------------------------------- schemes

StudyDesign builtin_scheme(const std::string& name, const PanelShape& shape) {
    if (shape.rank() != 2) throw InvalidDesign("builtin schemes need a two-axis panel");
    const auto bias = expand_fixed_effects({FixedEffectGroup{{0}, 1}}, 2);
    std::vector<SubsampleSpec> subs{SubsampleSpec::full(shape)};
    for (auto& s : partition_design(shape, 1, 2)) subs.push_back(std::move(s));

    StudyDesign sd;
    sd.name = "JK(" + name + ")";
    if (name == "a") {
        sd.v = {2.0, -0.5, -0.5};
        sd.u = linalg::Matrix{{0.0}, {0.5}, {-0.5}};
    } else if (name == "b") {
        for (auto& s : partition_design(shape, 0, 2)) subs.push_back(std::move(s));
        sd.v = {2.0 / 3.0, -0.5, -0.5, 2.0 / 3.0, 2.0 / 3.0};
        sd.u = linalg::Matrix{{0.0, 0.0}, {0.5, 0.0}, {-0.5, 0.0}, {0.0, 0.5}, {0.0, -0.5}};
    } else if (name == "c") {
        for (auto& s : partition_design(shape, 0, 5)) subs.push_back(std::move(s));
        sd.v = {1.0, -0.5, -0.5, 0.2, 0.2, 0.2, 0.2, 0.2};
        const double r10 = 1.0 / std::sqrt(10.0), r30 = 1.0 / std::sqrt(30.0), r60 = 1.0 / std::sqrt(60.0);
        sd.u = linalg::Matrix(8, 5);
        sd.u(1, 0) = 0.5;
        sd.u(2, 0) = -0.5;
        sd.u(3, 1) = r10;
        sd.u(4, 1) = -r10;
        sd.u(3, 2) = r30;
        sd.u(4, 2) = r30;
        sd.u(5, 2) = -2.0 * r30;
        for (std::size_t j = 3; j < 6; ++j) sd.u(j, 3) = r60;
        sd.u(6, 3) = -3.0 * r60;
        for (std::size_t j = 3; j < 7; ++j) sd.u(j, 4) = 0.1;
        sd.u(7, 4) = -0.4;
    } else {
        throw ParseError("unknown builtin scheme '" + name + "' (expected a, b or c)");
    }
    sd.design = make_design(shape, bias, std::move(subs));
    return sd;
}

StudyDesign solved_scheme(const std::string& name, const Design& design, std::optional<std::size_t> q) {
    const WeightSolution w = solve_weights(design, q);
    return StudyDesign{name, design, w.v_star, w.U_star};
}

// ---------------------------------------------------------------- study

namespace {

void validate(const StudyConfig& cfg) {
    if (cfg.replications == 0) throw InvalidDesign("replications must be at least 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InvalidDesign("alpha must lie in (0, 1)");
    if (cfg.designs.empty() && !cfg.include_plugin_row) throw InvalidDesign("study has nothing to report");
    for (const auto& d : cfg.designs) {
        if (!(d.design.shape == cfg.shape)) throw InvalidDesign("design '" + d.name + "' has a different shape");
        if (d.v.size() != d.design.m() || d.u.rows() != d.design.m() || d.u.cols() == 0)
            throw InvalidDesign("design '" + d.name + "' has weights of the wrong size");
    }
}

struct EstimateCache {
    std::vector<std::pair<const SubsampleSpec*, double>> entries;
    const PanelDataset& data;
    const Estimator& est;

    double get(const SubsampleSpec& spec) {
        for (const auto& [s, v] : entries)
            if (*s == spec) return v;
        const double v = est(PanelView(data, spec));
        if (!std::isfinite(v)) throw DomainError("estimate is not finite");
        entries.emplace_back(&spec, v);
        return v;
    }
};

double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sd_of(const std::vector<double>& x, double mean) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

MetricsTable summarize(const std::vector<std::string>& names, const std::vector<std::vector<ReplicationRecord>>& records,
                       double phi, bool first_is_plugin) {
    const double nan = std::nan("");
    MetricsTable table;
    for (std::size_t d = 0; d < records.size(); ++d) {
        MetricsRow row;
        row.name = names.at(d);
        std::vector<double> est, len;
        std::size_t covered = 0;
        for (const auto& rec : records[d]) {
            if (!rec.ok) {
                ++row.failures;
                continue;
            }
            est.push_back(rec.estimate);
            len.push_back(rec.upper - rec.lower);
            if (rec.lower <= phi && phi <= rec.upper) ++covered;
        }
        row.replications = est.size();
        const double n = static_cast<double>(est.size());
        if (est.empty()) {
            row.bias = row.bias_se = row.std_err = row.std_err_se = nan;
            row.coverage = row.coverage_se = row.length = row.length_se = nan;
        } else {
            const double m = mean_of(est);
            row.bias = m - phi;
            row.std_err = sd_of(est, m);
            row.bias_se = row.std_err / std::sqrt(n);
            row.std_err_se = est.size() > 1 ? row.std_err / std::sqrt(2.0 * (n - 1.0)) : nan;
            if (first_is_plugin && d == 0) {
                row.coverage = row.coverage_se = row.length = row.length_se = nan;
            } else {
                row.coverage = static_cast<double>(covered) / n;
                row.coverage_se = std::sqrt(row.coverage * (1.0 - row.coverage) / n);
                const double ml = mean_of(len);
                row.length = ml;
                row.length_se = sd_of(len, ml) / std::sqrt(n);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

StudyResult run_study(const StudyConfig& cfg) {
    validate(cfg);
    const std::string est_name = cfg.estimator.empty() ? default_estimator_for(cfg.dgp) : cfg.estimator;
    const Estimator estimator = builtin_estimator(est_name);
    const std::size_t offset = cfg.include_plugin_row ? 1 : 0;
    const std::size_t cols = offset + cfg.designs.size();
    const SubsampleSpec full = SubsampleSpec::full(cfg.shape);

    std::vector<std::vector<ReplicationRecord>> records(cols, std::vector<ReplicationRecord>(cfg.replications));

    parallel_for(cfg.replications, cfg.workers, [&](std::size_t r) {
        Rng rng(substream_seed(cfg.seed, r));
        PanelDataset data;
        try {
            data = generate(cfg.dgp, cfg.shape, cfg.phi, rng);
        } catch (const std::exception& e) {
            for (std::size_t d = 0; d < cols; ++d) records[d][r].error = e.what();
            return;
        }
        EstimateCache cache{{}, data, estimator};
        if (cfg.include_plugin_row) {
            auto& rec = records[0][r];
            try {
                rec.estimate = cache.get(full);
                rec.lower = rec.upper = rec.estimate;
                rec.ok = true;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
        for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
            const auto& sd = cfg.designs[d];
            auto& rec = records[offset + d][r];
            try {
                linalg::Vector est(sd.design.m());
                for (std::size_t j = 0; j < est.size(); ++j) est[j] = cache.get(sd.design.subsamples[j]);
                const InferenceResult res = infer_from_estimates(est, sd.v, sd.u, cfg.phi, cfg.alpha);
                rec.estimate = res.phi_tilde;
                rec.lower = res.ci_lower;
                rec.upper = res.ci_upper;
                rec.ok = true;
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
    });

    std::vector<std::string> names;
    if (cfg.include_plugin_row) {
        std::string label = cfg.plugin_label;
        if (label.empty()) label = est_name == "within_ls" ? "LS" : "MLE";
        names.push_back(label);
    }
    for (const auto& d : cfg.designs) names.push_back(d.name);

    if (cfg.failure_policy == FailurePolicy::abort) {
        for (std::size_t r = 0; r < cfg.replications; ++r)
            for (std::size_t d = 0; d < cols; ++d)
                if (!records[d][r].ok)
                    throw Error("replication " + std::to_string(r) + ", " + names[d] + ": " + records[d][r].error);
    }

    StudyResult out;
    out.table = summarize(names, records, cfg.phi, cfg.include_plugin_row);
    out.records = std::move(records);
    return out;
}

const MetricsRow& MetricsTable::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    throw ParseError("no row named '" + name + "'");
}

// ---------------------------------------------------------------- tables

TableFormat parse_table_format(const std::string& name) {
    if (name == "md" || name == "markdown") return TableFormat::markdown;
    if (name == "csv") return TableFormat::csv;
    if (name == "json") return TableFormat::json;
    throw ParseError("unknown table format '" + name + "'");
}

namespace {

const char* const kColumns[] = {"design",      "bias",         "std_err",       "coverage",
                                "length",      "bias_mcse",    "std_err_mcse",  "coverage_mcse",
                                "length_mcse", "replications", "failures"};

std::string fixed4(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    // Avoid "-0.0000".
    if (std::string(buf) == "-0.0000") return "0.0000";
    return buf;
}

std::vector<std::string> cells(const MetricsRow& r) {
    return {r.name,
            fixed4(r.bias),
            fixed4(r.std_err),
            fixed4(r.coverage),
            fixed4(r.length),
            fixed4(r.bias_se),
            fixed4(r.std_err_se),
            fixed4(r.coverage_se),
            fixed4(r.length_se),
            std::to_string(r.replications),
            std::to_string(r.failures)};
}

nlohmann::json rounded(double x) {
    if (std::isnan(x)) return nullptr;
    return std::stod(fixed4(x));
}

}  // namespace

std::string emit_table(const MetricsTable& table, TableFormat format) {
    std::ostringstream os;
    switch (format) {
        case TableFormat::markdown: {
            os << '|';
            for (const char* c : kColumns) os << ' ' << c << " |";
            os << "\n|";
            for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i == 0 ? " :--- |" : " ---: |");
            os << '\n';
            for (const auto& r : table.rows) {
                os << '|';
                for (const auto& c : cells(r)) os << ' ' << c << " |";
                os << '\n';
            }
            break;
        }
        case TableFormat::csv: {
            for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i ? "," : "") << kColumns[i];
            os << '\n';
            for (const auto& r : table.rows) {
                const auto cs = cells(r);
                for (std::size_t i = 0; i < cs.size(); ++i) os << (i ? "," : "") << cs[i];
                os << '\n';
            }
            break;
        }
        case TableFormat::json: {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& r : table.rows) {
                nlohmann::ordered_json o;
                o["design"] = r.name;
                o["bias"] = rounded(r.bias);
                o["std_err"] = rounded(r.std_err);
                o["coverage"] = rounded(r.coverage);
                o["length"] = rounded(r.length);
                o["bias_mcse"] = rounded(r.bias_se);
                o["std_err_mcse"] = rounded(r.std_err_se);
                o["coverage_mcse"] = rounded(r.coverage_se);
                o["length_mcse"] = rounded(r.length_se);
                o["replications"] = r.replications;
                o["failures"] = r.failures;
                arr.push_back(std::move(o));
            }
            os << arr.dump(2) << '\n';
            break;
        }
    }
    return os.str();
}

MetricsTable parse_table_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty table");
    std::string expected;
    for (std::size_t i = 0; i < std::size(kColumns); ++i) expected += (i ? "," : "") + std::string(kColumns[i]);
    if (line != expected) throw ParseError("unexpected table header");

    auto num = [](const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); };
    MetricsTable t;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != std::size(kColumns)) throw ParseError("table row has the wrong number of fields");
        MetricsRow r;
        try {
            r.name = f[0];
            r.bias = num(f[1]);
            r.std_err = num(f[2]);
            r.coverage = num(f[3]);
            r.length = num(f[4]);
            r.bias_se = num(f[5]);
            r.std_err_se = num(f[6]);
            r.coverage_se = num(f[7]);
            r.length_se = num(f[8]);
            r.replications = std::stoul(f[9]);
            r.failures = std::stoul(f[10]);
        } catch (const std::logic_error&) {
            throw ParseError("malformed table row: " + line);
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace jkpanel
