#include "jkpanel/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jkpanel/errors.hpp"

namespace jkpanel {

using linalg::Matrix;
using linalg::Vector;

Rational parse_rational(const std::string& text) {
    auto parse_int = [&](const std::string& s) -> std::int64_t {
        std::size_t used = 0;
        std::int64_t v = 0;
        try {
            v = std::stoll(s, &used);
        } catch (const std::exception&) {
            throw ParseError("invalid rational '" + text + "'");
        }
        if (used != s.size()) throw ParseError("invalid rational '" + text + "'");
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return Rational(parse_int(text));
    const std::int64_t den = parse_int(text.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator in '" + text + "'");
    return Rational(parse_int(text.substr(0, slash)), den);
}

std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

Rational pow(const Rational& r, std::int64_t n) {
    Rational base = n >= 0 ? r : Rational(1) / r;
    std::int64_t e = n >= 0 ? n : -n;
    Rational out(1);
    while (e > 0) {
        if (e & 1) out *= base;
        base *= base;
        e >>= 1;
    }
    return out;
}

PanelShape::PanelShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw InvalidDesign("panel shape needs at least one axis");
    total_ = 1;
    for (std::size_t d : dims_) {
        if (d < 2) throw InvalidDesign("every panel dimension must be at least 2");
        total_ *= d;
    }
}

std::vector<BiasTerm> expand_fixed_effects(const std::vector<FixedEffectGroup>& groups, std::size_t num_axes) {
    if (groups.empty()) throw InvalidDesign("at least one fixed-effect group is required");
    std::vector<BiasTerm> terms;
    for (const auto& g : groups) {
        if (g.axes.empty()) throw InvalidDesign("fixed-effect group with no axes");
        std::vector<bool> in_group(num_axes, false);
        for (std::size_t a : g.axes) {
            if (a >= num_axes) throw InvalidDesign("fixed-effect axis " + std::to_string(a) + " out of range");
            if (in_group[a]) throw InvalidDesign("duplicate axis in fixed-effect group");
            in_group[a] = true;
        }
        if (g.order == 0) throw InvalidDesign("fixed-effect order must be positive");
        if (g.order > 1 && g.axes.size() > 1)
            throw UnsupportedOrder("higher-order bias series are only defined for single-axis groups");
        for (unsigned l = 1; l <= g.order; ++l) {
            BiasTerm t;
            t.exponents.resize(num_axes);
            for (std::size_t k = 0; k < num_axes; ++k) {
                t.exponents[k] = in_group[k] ? Rational(1, 2) : Rational(-1, 2) - Rational(l - 1, 2);
            }
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

AxisSelection::AxisSelection(std::vector<Interval> blocks) : blocks_(std::move(blocks)) {
    std::sort(blocks_.begin(), blocks_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    count_ = 0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].hi <= blocks_[i].lo) throw InvalidDesign("empty or reversed block");
        if (i > 0 && blocks_[i].lo < blocks_[i - 1].hi) throw InvalidDesign("overlapping blocks on one axis");
        count_ += blocks_[i].hi - blocks_[i].lo;
    }
    if (blocks_.empty()) throw InvalidDesign("axis selection needs at least one block");
}

std::size_t AxisSelection::overlap(const AxisSelection& other) const {
    std::size_t total = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    const auto& a = blocks_;
    const auto& b = other.blocks_;
    while (i < a.size() && j < b.size()) {
        const std::size_t lo = std::max(a[i].lo, b[j].lo);
        const std::size_t hi = std::min(a[i].hi, b[j].hi);
        if (hi > lo) total += hi - lo;
        if (a[i].hi < b[j].hi) ++i;
        else ++j;
    }
    return total;
}

std::vector<std::size_t> AxisSelection::indices() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (const auto& b : blocks_)
        for (std::size_t x = b.lo; x < b.hi; ++x) out.push_back(x);
    return out;
}

std::size_t SubsampleSpec::size() const {
    std::size_t s = 1;
    for (const auto& a : axes) s *= a.count();
    return s;
}

Rational SubsampleSpec::fraction(std::size_t axis, const PanelShape& shape) const {
    return Rational(static_cast<std::int64_t>(axes.at(axis).count()), static_cast<std::int64_t>(shape.dim(axis)));
}

bool SubsampleSpec::is_full(const PanelShape& shape) const {
    if (axes.size() != shape.rank()) return false;
    for (std::size_t k = 0; k < axes.size(); ++k)
        if (axes[k].count() != shape.dim(k)) return false;
    return true;
}

SubsampleSpec SubsampleSpec::full(const PanelShape& shape) {
    SubsampleSpec s;
    for (std::size_t d : shape.dims()) s.axes.push_back(AxisSelection::all(d));
    return s;
}

Design make_design(PanelShape shape, std::vector<BiasTerm> bias_terms, std::vector<SubsampleSpec> subsamples,
                   std::optional<Matrix> c_override) {
    const std::size_t k = shape.rank();
    if (k == 0) throw InvalidDesign("design needs a panel shape");
    if (bias_terms.empty()) throw InvalidDesign("design needs at least one bias term");
    for (const auto& t : bias_terms)
        if (t.exponents.size() != k) throw InvalidDesign("bias term exponent count does not match the panel rank");
    if (subsamples.empty()) throw InvalidDesign("design needs the full sample as its first subsample");
    for (std::size_t j = 0; j < subsamples.size(); ++j) {
        const auto& s = subsamples[j];
        if (s.axes.size() != k)
            throw InvalidDesign("subsample " + std::to_string(j) + " has the wrong number of axes");
        for (std::size_t a = 0; a < k; ++a)
            if (!s.axes[a].within(shape.dim(a)))
                throw InvalidDesign("subsample " + std::to_string(j) + " exceeds axis " + std::to_string(a));
    }
    if (!subsamples.front().is_full(shape)) throw InvalidDesign("first subsample must be the full sample");
    if (c_override) {
        const std::size_t m = subsamples.size();
        if (c_override->rows() != m || c_override->cols() != m)
            throw InvalidDesign("C override must be m x m");
        if (!c_override->all_finite()) throw InvalidDesign("C override has non-finite entries");
    }
    Design d;
    d.shape = std::move(shape);
    d.bias_terms = std::move(bias_terms);
    d.subsamples = std::move(subsamples);
    d.c_override = std::move(c_override);
    return d;
}

namespace {

// κ^(e − 1/2) split into an exact rational part and a residual real factor.
struct Loading {
    Rational exact{1};
    double inexact = 1.0;
    bool is_exact = true;
};

Loading loading(const Design& design, const SubsampleSpec& s, const BiasTerm& t) {
    Loading out;
    for (std::size_t k = 0; k < design.shape.rank(); ++k) {
        const Rational kappa = s.fraction(k, design.shape);
        const Rational e = t.exponents[k] - Rational(1, 2);
        if (kappa == Rational(1)) continue;
        if (e.denominator() == 1) {
            out.exact *= pow(kappa, e.numerator());
        } else {
            out.is_exact = false;
            out.inexact *= std::pow(to_double(kappa), to_double(e));
        }
    }
    return out;
}

}  // namespace

Matrix bias_loading_matrix(const Design& design) {
    Matrix a(design.m(), design.num_bias_terms());
    for (std::size_t j = 0; j < design.m(); ++j)
        for (std::size_t r = 0; r < design.num_bias_terms(); ++r) {
            const Loading l = loading(design, design.subsamples[j], design.bias_terms[r]);
            a(j, r) = to_double(l.exact) * l.inexact;
        }
    return a;
}

std::optional<std::vector<std::vector<Rational>>> bias_loading_exact(const Design& design) {
    std::vector<std::vector<Rational>> a(design.m(), std::vector<Rational>(design.num_bias_terms()));
    for (std::size_t j = 0; j < design.m(); ++j)
        for (std::size_t r = 0; r < design.num_bias_terms(); ++r) {
            const Loading l = loading(design, design.subsamples[j], design.bias_terms[r]);
            if (!l.is_exact) return std::nullopt;
            a[j][r] = l.exact;
        }
    return a;
}

std::vector<std::vector<Rational>> overlap_covariance_exact(const Design& design) {
    const std::size_t m = design.m();
    std::vector<std::vector<Rational>> c(m, std::vector<Rational>(m));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
            // factorizes over axes: Π_k N_k · |A_k ∩ B_k| / (|A_k| |B_k|)
            Rational v(1);
            for (std::size_t k = 0; k < design.shape.rank(); ++k) {
                const auto& sa = design.subsamples[a].axes[k];
                const auto& sb = design.subsamples[b].axes[k];
                v *= Rational(static_cast<std::int64_t>(design.shape.dim(k) * sa.overlap(sb)),
                              static_cast<std::int64_t>(sa.count() * sb.count()));
            }
            c[a][b] = v;
            c[b][a] = v;
        }
    return c;
}

Matrix overlap_covariance(const Design& design) {
    const auto exact = overlap_covariance_exact(design);
    Matrix c(design.m(), design.m());
    for (std::size_t a = 0; a < design.m(); ++a)
        for (std::size_t b = 0; b < design.m(); ++b) c(a, b) = to_double(exact[a][b]);
    return c;
}

Matrix covariance_matrix(const Design& design) {
    return design.c_override ? *design.c_override : overlap_covariance(design);
}

std::vector<SubsampleSpec> ladder_design(const PanelShape& shape, std::size_t axis, std::size_t order) {
    if (axis >= shape.rank()) throw InvalidDesign("ladder axis out of range");
    if (order == 0) throw InvalidDesign("ladder order must be positive");
    const std::size_t n = shape.dim(axis);
    if (n % (order + 1) != 0)
        throw IndivisibleAxis("axis " + std::to_string(axis) + " of length " + std::to_string(n) +
                              " is not divisible by " + std::to_string(order + 1));
    const std::size_t block = n / (order + 1);
    std::vector<SubsampleSpec> out;
    for (std::size_t j = 1; j <= order; ++j) {
        SubsampleSpec s = SubsampleSpec::full(shape);
        s.axes[axis] = AxisSelection::range(0, j * block);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SubsampleSpec> partition_design(const PanelShape& shape, std::size_t axis, std::size_t parts) {
    if (axis >= shape.rank()) throw InvalidDesign("partition axis out of range");
    if (parts < 2) throw InvalidDesign("partition needs at least two parts");
    const std::size_t n = shape.dim(axis);
    if (n % parts != 0)
        throw IndivisibleAxis("axis " + std::to_string(axis) + " of length " + std::to_string(n) +
                              " is not divisible by " + std::to_string(parts));
    const std::size_t block = n / parts;
    std::vector<SubsampleSpec> out;
    for (std::size_t g = 0; g < parts; ++g) {
        SubsampleSpec s = SubsampleSpec::full(shape);
        s.axes[axis] = AxisSelection::range(g * block, (g + 1) * block);
        out.push_back(std::move(s));
    }
    return out;
}

Matrix constraint_matrix(const Matrix& a) { return linalg::hcat(a, Matrix(a.rows(), 1, 1.0)); }

Vector constraint_rhs(std::size_t num_bias_terms) {
    Vector d(num_bias_terms + 1, 0.0);
    d.back() = 1.0;
    return d;
}

bool DesignDiagnostics::valid() const { return reasons().empty(); }

std::vector<std::string> DesignDiagnostics::reasons() const {
    std::vector<std::string> out;
    if (!enough_subsamples())
        out.push_back("m = " + std::to_string(m) + " < R + 2 = " + std::to_string(num_bias_terms + 2) +
                      ": add subsamples");
    if (rank_A != num_bias_terms)
        out.push_back("rank(A) = " + std::to_string(rank_A) + " < R = " + std::to_string(num_bias_terms) +
                      ": bias terms are not separately identified");
    if (iota_in_colA) out.push_back("ι_m in col(A): add subsamples");
    if (nullDT_in_nullC) out.push_back("null(Dᵀ) ⊆ null(C): no admissible variance weights");
    if (psd_violation < -1e-9) out.push_back("C is not positive semidefinite");
    if (!(min_variance_factor > 1e-10))
        out.push_back("v*ᵀCv* is not positive: the unbiased combination has degenerate variance");
    return out;
}

DesignDiagnostics diagnose(const Matrix& a, const Matrix& c) {
    const std::size_t m = a.rows();
    if (c.rows() != m || c.cols() != m) throw DimensionMismatch("A and C disagree on m");
    if (!a.all_finite() || !c.all_finite()) throw InvalidDesign("A or C has non-finite entries");

    DesignDiagnostics diag;
    diag.m = m;
    diag.num_bias_terms = a.cols();
    diag.rank_A = linalg::rank(a);

    const Vector iota(m, 1.0);
    {
        const auto w = linalg::nullspace_of_transpose(a);
        double resid = 0.0;
        for (std::size_t j = 0; j < w.dim(); ++j) resid += std::pow(linalg::dot(w.basis.column(j), iota), 2);
        diag.iota_in_colA = std::sqrt(resid) <= 1e-9 * std::sqrt(static_cast<double>(m));
    }

    const double c_scale = std::max(linalg::max_abs(c), 1.0);
    const auto c_eig = linalg::symmetric_eigenvalues(c);
    diag.psd_violation = std::min(0.0, c_eig.front() / c_scale);

    const Matrix d_mat = constraint_matrix(a);
    const auto w = linalg::nullspace_of_transpose(d_mat);
    if (w.dim() == 0) {
        diag.nullDT_in_nullC = true;
        diag.q_max = 0;
    } else {
        const Matrix g = w.basis.transpose() * c * w.basis;
        const auto g_eig = linalg::symmetric_eigenvalues(g);
        const double tol = 1e-10 * c_scale;
        diag.nullDT_in_nullC = g_eig.back() <= tol;
        diag.q_max = static_cast<std::size_t>(
            std::count_if(g_eig.begin(), g_eig.end(), [&](double l) { return l > tol; }));
    }

    diag.min_variance_factor = std::numeric_limits<double>::quiet_NaN();
    if (linalg::rank(d_mat) == a.cols() + 1) {
        try {
            const auto sol = linalg::solve_bordered_kkt(c, d_mat, constraint_rhs(a.cols()));
            diag.min_variance_factor = linalg::quad_form(sol.v, c, sol.v);
        } catch (const Error&) {
        }
    }
    return diag;
}

DesignDiagnostics validate_design(const Design& design) {
    return diagnose(bias_loading_matrix(design), covariance_matrix(design));
}

}  // namespace jkpanel
