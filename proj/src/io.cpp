#include "jkpanel/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "jkpanel/errors.hpp"

namespace jkpanel {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

namespace {

Rational rational_from_json(const Json& j) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_number()) {
        // Accept halves and other short binary fractions written as decimals.
        const double x = j.get<double>();
        for (std::int64_t den : {1, 2, 4, 8, 3, 6, 12}) {
            const double num = x * static_cast<double>(den);
            if (std::abs(num - std::round(num)) < 1e-12) return Rational(static_cast<std::int64_t>(std::round(num)), den);
        }
        throw ParseError("exponent " + j.dump() + " is not a simple fraction; write it as \"p/q\"");
    }
    throw ParseError("exponent must be a number or a \"p/q\" string");
}

std::size_t need_size(const Json& j, const char* what) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ParseError(std::string(what) + " must be a non-negative integer");
    return j.get<std::size_t>();
}

AxisSelection selection_from_json(const Json& j, std::size_t n) {
    if (j.is_string()) {
        if (j.get<std::string>() != "all") throw ParseError("axis selection string must be \"all\"");
        return AxisSelection::all(n);
    }
    if (j.is_object() && j.contains("blocks")) return selection_from_json(j.at("blocks"), n);
    if (j.is_object()) {
        const bool part = j.contains("part");
        const bool prefix = j.contains("prefix");
        if (part == prefix) throw ParseError("axis selection object needs exactly one of \"part\" or \"prefix\"");
        const Json& pair = part ? j.at("part") : j.at("prefix");
        if (!pair.is_array() || pair.size() != 2) throw ParseError("axis selection expects [k, p]");
        const std::size_t k = need_size(pair[0], "block index");
        const std::size_t p = need_size(pair[1], "block count");
        if (p == 0 || n % p != 0)
            throw IndivisibleAxis("axis of length " + std::to_string(n) + " cannot be split into " + std::to_string(p) +
                                  " equal blocks");
        const std::size_t w = n / p;
        if (part) {
            if (k >= p) throw ParseError("part index out of range");
            return AxisSelection::range(k * w, (k + 1) * w);
        }
        if (k == 0 || k > p) throw ParseError("prefix length out of range");
        return AxisSelection::range(0, k * w);
    }
    if (j.is_array()) {
        std::vector<Interval> blocks;
        for (const auto& b : j) {
            if (!b.is_array() || b.size() != 2) throw ParseError("interval must be [lo, hi]");
            blocks.push_back({need_size(b[0], "interval bound"), need_size(b[1], "interval bound")});
        }
        try {
            return AxisSelection(std::move(blocks));
        } catch (const InvalidDesign& e) {
            throw ParseError(e.what());
        }
    }
    throw ParseError("unrecognized axis selection " + j.dump());
}

}  // namespace

Json matrix_to_json(const linalg::Matrix& m) {
    Json out = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

linalg::Matrix matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("matrix must be a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ParseError("matrix rows must be non-empty arrays");
    linalg::Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ParseError("matrix rows have unequal lengths");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) throw ParseError("matrix entries must be numbers");
            m(i, c) = j[i][c].get<double>();
        }
    }
    return m;
}

Json vector_to_json(const linalg::Vector& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(x);
    return out;
}

Design design_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("design must be a JSON object");
    if (!j.contains("dims") || !j.at("dims").is_array()) throw ParseError("design needs \"dims\"");
    std::vector<std::size_t> dims;
    for (const auto& d : j.at("dims")) dims.push_back(need_size(d, "dimension"));
    PanelShape shape(dims);
    const std::size_t k = shape.rank();

    std::vector<BiasTerm> bias;
    const char* explicit_key = j.contains("bias_terms_override") ? "bias_terms_override"
                               : j.contains("bias_terms")        ? "bias_terms"
                                                                 : nullptr;
    if (explicit_key == nullptr && !j.contains("fixed_effects"))
        throw ParseError("design needs \"fixed_effects\" or \"bias_terms\"");
    if (explicit_key != nullptr) {
        for (const auto& row : j.at(explicit_key)) {
            if (!row.is_array() || row.size() != k) throw ParseError("each bias term needs one exponent per axis");
            BiasTerm t;
            for (const auto& e : row) t.exponents.push_back(rational_from_json(e));
            bias.push_back(std::move(t));
        }
    } else {
        std::vector<FixedEffectGroup> groups;
        for (const auto& g : j.at("fixed_effects")) {
            FixedEffectGroup fg;
            if (!g.is_object() || !g.contains("axes")) throw ParseError("fixed effect entries need \"axes\"");
            for (const auto& a : g.at("axes")) fg.axes.push_back(need_size(a, "axis"));
            if (g.contains("order")) fg.order = static_cast<unsigned>(need_size(g.at("order"), "order"));
            groups.push_back(std::move(fg));
        }
        bias = expand_fixed_effects(groups, k);
    }

    if (!j.contains("subsamples") || !j.at("subsamples").is_array()) throw ParseError("design needs \"subsamples\"");
    std::vector<SubsampleSpec> subs;
    for (const auto& entry : j.at("subsamples")) {
        const Json& s = entry.is_object() && entry.contains("axes") ? entry.at("axes") : entry;
        if (!s.is_array() || s.size() != k) throw ParseError("each subsample needs one selection per axis");
        SubsampleSpec spec;
        for (std::size_t a = 0; a < k; ++a) spec.axes.push_back(selection_from_json(s[a], shape.dim(a)));
        subs.push_back(std::move(spec));
    }

    std::optional<linalg::Matrix> c;
    if (j.contains("C_override")) c = matrix_from_json(j.at("C_override"));
    else if (j.contains("C")) c = matrix_from_json(j.at("C"));
    Design d = make_design(std::move(shape), std::move(bias), std::move(subs), std::move(c));
    if (j.contains("rate")) d.rate = j.at("rate").get<std::string>();
    return d;
}

Json design_to_json(const Design& d) {
    Json j;
    j["dims"] = d.shape.dims();
    Json bias = Json::array();
    for (const auto& t : d.bias_terms) {
        Json row = Json::array();
        for (const auto& e : t.exponents) row.push_back(to_string(e));
        bias.push_back(std::move(row));
    }
    j["bias_terms"] = std::move(bias);
    Json subs = Json::array();
    for (const auto& s : d.subsamples) {
        Json spec = Json::array();
        for (std::size_t a = 0; a < s.axes.size(); ++a) {
            const auto& sel = s.axes[a];
            if (sel == AxisSelection::all(d.shape.dim(a))) {
                spec.push_back("all");
                continue;
            }
            Json blocks = Json::array();
            for (const auto& b : sel.blocks()) blocks.push_back({b.lo, b.hi});
            spec.push_back(std::move(blocks));
        }
        subs.push_back(std::move(spec));
    }
    j["subsamples"] = std::move(subs);
    if (d.c_override) j["C"] = matrix_to_json(*d.c_override);
    j["rate"] = d.rate;
    return j;
}

Design load_design(const std::string& path) { return design_from_json(parse_json_text(read_file(path))); }

std::string design_digest(const Design& d) {
    const std::string text = design_to_json(d).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

PanelDataset read_panel_csv(std::istream& in, std::size_t num_axes, const std::optional<PanelShape>& expected) {
    if (num_axes == 0) throw ParseError("panel needs at least one axis");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV");
    const auto header = split_csv(line);
    if (header.size() <= num_axes) throw ParseError("CSV needs index columns followed by at least one variable");
    const std::size_t nvars = header.size() - num_axes;

    std::vector<std::vector<std::size_t>> idx;
    std::vector<std::vector<double>> vals;
    std::vector<std::size_t> maxi(num_axes, 0);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
        std::vector<std::size_t> ix(num_axes);
        for (std::size_t a = 0; a < num_axes; ++a) {
            const auto& s = f[a];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), ix[a]);
            if (ec != std::errc() || p != s.data() + s.size())
                throw ParseError("line " + std::to_string(lineno) + ": bad index '" + s + "'");
            maxi[a] = std::max(maxi[a], ix[a]);
        }
        std::vector<double> v(nvars);
        for (std::size_t c = 0; c < nvars; ++c) {
            const auto& s = f[num_axes + c];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v[c]);
            if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v[c]))
                throw ParseError("line " + std::to_string(lineno) + ": bad value '" + s + "'");
        }
        idx.push_back(std::move(ix));
        vals.push_back(std::move(v));
    }
    if (idx.empty()) throw ShapeMismatch("CSV has no data rows");

    std::vector<std::size_t> dims(num_axes);
    for (std::size_t a = 0; a < num_axes; ++a) dims[a] = maxi[a] + 1;
    if (expected) {
        if (expected->rank() != num_axes) throw ShapeMismatch("design rank differs from the CSV index columns");
        for (std::size_t a = 0; a < num_axes; ++a)
            if (expected->dim(a) != dims[a])
                throw ShapeMismatch("axis " + std::to_string(a) + " has " + std::to_string(dims[a]) +
                                    " levels in the CSV but " + std::to_string(expected->dim(a)) + " in the design");
    }
    PanelShape shape;
    try {
        shape = PanelShape(dims);
    } catch (const InvalidDesign& e) {
        throw ShapeMismatch(e.what());
    }
    if (idx.size() != shape.total())
        throw ShapeMismatch("CSV has " + std::to_string(idx.size()) + " rows but the grid has " +
                            std::to_string(shape.total()) + " cells");

    PanelDataset data(shape);
    std::vector<std::vector<double>> cols(nvars, std::vector<double>(shape.total()));
    std::vector<char> seen(shape.total(), 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t flat = data.flat_index(idx[r]);
        if (seen[flat]) throw ShapeMismatch("grid cell listed twice");
        seen[flat] = 1;
        for (std::size_t c = 0; c < nvars; ++c) cols[c][flat] = vals[r][c];
    }
    for (std::size_t c = 0; c < nvars; ++c) {
        if (header[num_axes + c].empty()) throw ParseError("variable column without a name");
        if (data.has(header[num_axes + c])) throw ParseError("duplicate variable '" + header[num_axes + c] + "'");
        data.set(header[num_axes + c], std::move(cols[c]));
    }
    return data;
}

PanelDataset load_panel_csv(const std::string& path, std::size_t num_axes, const std::optional<PanelShape>& expected) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_panel_csv(in, num_axes, expected);
}

void write_panel_csv(std::ostream& out, const PanelDataset& data) {
    const auto& dims = data.shape().dims();
    const std::size_t k = dims.size();
    for (std::size_t a = 0; a < k; ++a) out << (a ? "," : "") << 'i' << a;
    for (const auto& [name, _] : data.variables()) out << ',' << name;
    out << '\n';
    std::vector<std::size_t> pos(k, 0);
    char buf[64];
    for (std::size_t flat = 0; flat < data.shape().total(); ++flat) {
        for (std::size_t a = 0; a < k; ++a) out << (a ? "," : "") << pos[a];
        for (const auto& [name, values] : data.variables()) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, values[flat]);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
        }
        out << '\n';
        for (std::size_t a = k; a-- > 0;) {
            if (++pos[a] < dims[a]) break;
            pos[a] = 0;
        }
    }
}

// ---------------------------------------------------------------- results

namespace {
Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }
}  // namespace

Json weights_to_json(const WeightSolution& w) {
    Json j;
    j["v_star"] = vector_to_json(w.v_star);
    j["U_star"] = matrix_to_json(w.U_star);
    j["variance_factor"] = w.variance_factor;
    j["q"] = w.q;
    j["q_max"] = w.q_max;
    j["unique"] = w.unique;
    j["multipliers"] = vector_to_json(w.multipliers);
    j["feasibility_residual"] = w.feasibility_residual;
    j["stationarity_residual"] = w.stationarity_residual;
    return j;
}

Json diagnostics_to_json(const DesignDiagnostics& d) {
    Json j;
    j["m"] = d.m;
    j["num_bias_terms"] = d.num_bias_terms;
    j["rank_A"] = d.rank_A;
    j["iota_in_colA"] = d.iota_in_colA;
    j["nullDT_in_nullC"] = d.nullDT_in_nullC;
    j["min_variance_factor"] = number_or_null(d.min_variance_factor);
    j["q_max"] = d.q_max;
    j["psd_violation"] = d.psd_violation;
    j["valid"] = d.valid();
    j["reasons"] = d.reasons();
    return j;
}

Json result_to_json(const InferenceResult& r, const Design& design) {
    Json j;
    j["phi_tilde"] = r.phi_tilde;
    j["sigma_tilde"] = r.sigma_tilde;
    j["q"] = r.q;
    j["phi0"] = r.phi0;
    j["J"] = r.j ? Json(*r.j) : Json(nullptr);
    j["p_two_sided"] = r.p.two_sided;
    j["p_upper"] = r.p.upper;
    j["p_lower"] = r.p.lower;
    j["ci_lower"] = r.ci_lower;
    j["ci_upper"] = r.ci_upper;
    j["alpha"] = r.alpha;
    j["degenerate"] = r.degenerate;
    j["estimates"] = vector_to_json(r.estimates);
    j["v_star"] = vector_to_json(r.v);
    j["U_star"] = matrix_to_json(r.u);
    j["design_digest"] = design_digest(design);
    j["rate"] = design.rate;
    return j;
}

// ---------------------------------------------------------------- study files

StudyFile study_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("study config must be a JSON object");
    StudyFile f;
    StudyConfig& c = f.config;
    try {
        c.dgp = j.value("dgp", c.dgp);
        c.phi = j.value("phi", c.phi);
        if (j.contains("dims")) c.shape = PanelShape(j.at("dims").get<std::vector<std::size_t>>());
        c.estimator = j.value("estimator", std::string());
        if (j.contains("replications")) {
            const auto r = j.at("replications").get<std::int64_t>();
            if (r <= 0) throw InvalidDesign("replications must be at least 1");
            c.replications = static_cast<std::size_t>(r);
        }
        c.seed = j.value("seed", c.seed);
        c.alpha = j.value("alpha", c.alpha);
        c.workers = j.value("workers", c.workers);
        c.include_plugin_row = j.value("plugin_row", true);
        c.plugin_label = j.value("plugin_label", std::string());
        const std::string policy = j.value("failure_policy", std::string("abort"));
        if (policy == "abort") c.failure_policy = FailurePolicy::abort;
        else if (policy == "drop") c.failure_policy = FailurePolicy::drop_and_count;
        else throw ParseError("failure_policy must be \"abort\" or \"drop\"");
        f.format = j.value("format", f.format);
        f.out = j.value("out", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("study config: ") + e.what());
    }
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw InvalidDesign("alpha must lie in (0, 1)");
    default_estimator_for(c.dgp);  // rejects unknown DGPs early

    if (j.contains("designs")) {
        for (const auto& d : j.at("designs")) {
            if (d.is_string()) {
                c.designs.push_back(builtin_scheme(d.get<std::string>(), c.shape));
            } else if (d.is_object() && d.contains("design")) {
                std::optional<std::size_t> q;
                if (d.contains("dof")) q = need_size(d.at("dof"), "dof");
                const std::string name = d.value("name", "design" + std::to_string(c.designs.size()));
                c.designs.push_back(solved_scheme(name, design_from_json(d.at("design")), q));
            } else {
                throw ParseError("design entries must be a scheme name or {\"design\": ...}");
            }
        }
    }
    return f;
}

}  // namespace jkpanel
