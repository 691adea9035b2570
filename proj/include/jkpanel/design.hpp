#pragma once

#include <boost/rational.hpp>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jkpanel/linalg.hpp"

namespace jkpanel {

using Rational = boost::rational<std::int64_t>;

// Parses "1/2", "-1", "3" into an exact rational. Throws ParseError.
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& r);
double to_double(const Rational& r);
// r^n for integer n (negative allowed, r ≠ 0 then).
Rational pow(const Rational& r, std::int64_t n);

class PanelShape {
public:
    PanelShape() = default;
    explicit PanelShape(std::vector<std::size_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t k) const { return dims_.at(k); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t total() const noexcept { return total_; }

    friend bool operator==(const PanelShape&, const PanelShape&) = default;

private:
    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
};

// A bias term proportional to Π_k N_k^{e_k} (its unknown constant is never
// represented).
struct BiasTerm {
    std::vector<Rational> exponents;
    friend bool operator==(const BiasTerm&, const BiasTerm&) = default;
};

struct FixedEffectGroup {
    std::vector<std::size_t> axes;  // 0-based
    unsigned order = 1;
};

// Turns fixed-effect groups into bias monomials: a group G contributes
// dim(λ_G)/√N, i.e. e_k = +1/2 on axes in G and −1/2 elsewhere. For a
// single-axis group the order-l term is additionally divided by the square
// root of the remaining axes raised to l − 1. Multi-axis groups only support
// order 1 (UnsupportedOrder).
std::vector<BiasTerm> expand_fixed_effects(const std::vector<FixedEffectGroup>& groups, std::size_t num_axes);

struct Interval {
    std::size_t lo = 0;  // inclusive
    std::size_t hi = 0;  // exclusive
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Union of disjoint half-open intervals on one axis, kept sorted.
class AxisSelection {
public:
    AxisSelection() = default;
    explicit AxisSelection(std::vector<Interval> blocks);

    static AxisSelection all(std::size_t n) { return AxisSelection({{0, n}}); }
    static AxisSelection range(std::size_t lo, std::size_t hi) { return AxisSelection({{lo, hi}}); }

    const std::vector<Interval>& blocks() const noexcept { return blocks_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t overlap(const AxisSelection& other) const;
    std::vector<std::size_t> indices() const;
    bool within(std::size_t n) const { return blocks_.empty() || blocks_.back().hi <= n; }

    friend bool operator==(const AxisSelection&, const AxisSelection&) = default;

private:
    std::vector<Interval> blocks_;
    std::size_t count_ = 0;
};

// Cartesian product of per-axis selections.
struct SubsampleSpec {
    std::vector<AxisSelection> axes;

    std::size_t size() const;
    Rational fraction(std::size_t axis, const PanelShape& shape) const;
    bool is_full(const PanelShape& shape) const;
    static SubsampleSpec full(const PanelShape& shape);

    friend bool operator==(const SubsampleSpec&, const SubsampleSpec&) = default;
};

struct Design {
    PanelShape shape;
    std::vector<BiasTerm> bias_terms;
    std::vector<SubsampleSpec> subsamples;  // subsamples[0] is the full sample
    std::optional<linalg::Matrix> c_override;
    // Informational only; the estimator rate cancels in every statistic.
    std::string rate = "sqrt(N)";

    std::size_t m() const noexcept { return subsamples.size(); }
    std::size_t num_bias_terms() const noexcept { return bias_terms.size(); }
};

// Checks structural well-formedness (axis counts, bounds, first subsample is
// the full sample, override shape) and returns the design. Identification
// conditions are left to validate_design. Throws InvalidDesign.
Design make_design(PanelShape shape, std::vector<BiasTerm> bias_terms, std::vector<SubsampleSpec> subsamples,
                   std::optional<linalg::Matrix> c_override = std::nullopt);

// A[j, r] = Π_k κ_{j,k}^{e_{r,k} − 1/2}.
linalg::Matrix bias_loading_matrix(const Design& design);
// Exact entries, available when every exponent e − 1/2 is an integer.
std::optional<std::vector<std::vector<Rational>>> bias_loading_exact(const Design& design);

// C[a, b] = N |S_a ∩ S_b| / (|S_a| |S_b|), exact before conversion.
std::vector<std::vector<Rational>> overlap_covariance_exact(const Design& design);
linalg::Matrix overlap_covariance(const Design& design);
// The override when present, otherwise overlap_covariance.
linalg::Matrix covariance_matrix(const Design& design);

// ℓ nested prefix specs along `axis`: spec j keeps the first j of ℓ + 1 equal
// blocks. Throws IndivisibleAxis.
std::vector<SubsampleSpec> ladder_design(const PanelShape& shape, std::size_t axis, std::size_t order);

// p equal disjoint blocks along `axis`, each a separate spec.
std::vector<SubsampleSpec> partition_design(const PanelShape& shape, std::size_t axis, std::size_t parts);

struct DesignDiagnostics {
    std::size_t m = 0;
    std::size_t num_bias_terms = 0;
    std::size_t rank_A = 0;
    bool iota_in_colA = false;
    bool nullDT_in_nullC = false;
    double min_variance_factor = 0.0;  // v*ᵀCv*, NaN if the program could not be solved
    std::size_t q_max = 0;
    double psd_violation = 0.0;  // min(0, smallest eigenvalue of C)

    bool enough_subsamples() const noexcept { return m >= num_bias_terms + 2; }
    bool valid() const;
    std::vector<std::string> reasons() const;
};

// Identification diagnostics computed from raw (A, C).
DesignDiagnostics diagnose(const linalg::Matrix& a, const linalg::Matrix& c);
DesignDiagnostics validate_design(const Design& design);

// D = (A, ι_m) and d = (0_R, 1).
linalg::Matrix constraint_matrix(const linalg::Matrix& a);
linalg::Vector constraint_rhs(std::size_t num_bias_terms);

}  // namespace jkpanel
