#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jkpanel/design.hpp"

namespace jkpanel {

// Named real variables over the full index grid, stored row-major (last axis
// fastest).
class PanelDataset {
public:
    PanelDataset() = default;
    explicit PanelDataset(PanelShape shape) : shape_(std::move(shape)) {}

    const PanelShape& shape() const noexcept { return shape_; }

    // Throws ShapeMismatch on a wrong length and DomainError on non-finite values.
    void set(const std::string& name, std::vector<double> values);
    bool has(const std::string& name) const { return vars_.count(name) != 0; }
    // Throws ParseError if the variable is absent.
    const std::vector<double>& get(const std::string& name) const;
    std::vector<double>& mutable_values(const std::string& name);
    const std::map<std::string, std::vector<double>>& variables() const noexcept { return vars_; }

    std::size_t flat_index(const std::vector<std::size_t>& idx) const;

private:
    PanelShape shape_;
    std::map<std::string, std::vector<double>> vars_;
};

// Restriction of a dataset to the Cartesian product of per-axis index lists.
class PanelView {
public:
    PanelView(const PanelDataset& data, const SubsampleSpec& spec);
    explicit PanelView(const PanelDataset& data);

    const PanelDataset& dataset() const noexcept { return *data_; }
    std::size_t rank() const noexcept { return index_.size(); }
    std::size_t dim(std::size_t k) const { return index_.at(k).size(); }
    std::size_t size() const noexcept;
    const std::vector<std::size_t>& axis_indices(std::size_t k) const { return index_.at(k); }

    // Dense row-major copy of a variable over the view.
    std::vector<double> gather(const std::string& name) const;

private:
    const PanelDataset* data_;
    std::vector<std::vector<std::size_t>> index_;
};

using Estimator = std::function<double(const PanelView&)>;

// Within (unit-demeaned) least-squares slope of y on x over a (unit, time)
// view. Throws DegenerateRegressor when x has no within variation.
double within_ls_oneway(const PanelView& view, const std::string& y = "y", const std::string& x = "x");

// Mean squared residual of y after removing unit and time effects.
double twoway_variance_mle(const PanelView& view, const std::string& y = "y");

struct ProjectionOptions {
    double tol = 1e-10;  // relative to max |y|
    std::size_t max_iter = 10000;
};

// Mean squared residual of y on a three-axis view after projecting out the
// three pairwise-interaction effects (axes 01, 12, 20) by alternating
// centering. Throws NoConvergence.
double kway_interacted_variance_mle(const PanelView& view, const std::string& y = "y",
                                    const ProjectionOptions& opts = {});
// The residual array itself, row-major over the view.
std::vector<double> kway_interacted_residuals(const PanelView& view, const std::string& y = "y",
                                              const ProjectionOptions& opts = {});

// Two-way additive probit: P(y = 1) = Φ(λ_i + γ_t + φ d_it) with γ_0 = 0.
// Parameter layout θ = (φ, λ_0..λ_{N−1}, γ_1..γ_{T−1}).
struct ProbitProblem {
    std::size_t n = 0;
    std::size_t t = 0;
    std::vector<double> y;  // row-major n x t, 0/1
    std::vector<double> d;

    static ProbitProblem from_view(const PanelView& view, const std::string& y = "y", const std::string& d = "d");
    std::size_t num_params() const noexcept { return 1 + n + (t - 1); }
    double loglik(const std::vector<double>& theta) const;
    std::vector<double> gradient(const std::vector<double>& theta) const;
    linalg::Matrix hessian(const std::vector<double>& theta) const;
};

struct ProbitFit {
    std::vector<double> theta;
    double loglik = 0.0;
    std::size_t iterations = 0;
};

struct ProbitOptions {
    double grad_tol = 1e-8;
    std::size_t max_iter = 200;
    double effect_bound = 20.0;
};

// Throws Separation (a unit or period with constant outcome, or effects
// drifting past the bound) and NoConvergence.
ProbitFit fit_twoway_probit(const ProbitProblem& problem, const ProbitOptions& opts = {});
double twoway_probit_mle(const PanelView& view, const std::string& y = "y", const std::string& d = "d");

// log Φ(z), accurate in both tails.
double log_normal_cdf(double z);
// φ(z)/Φ(z).
double inverse_mills(double z);

// Builtin estimators by CLI name: within_ls, var2, var3, probit2. Throws
// ParseError for unknown names.
Estimator builtin_estimator(const std::string& name);
std::vector<std::string> builtin_estimator_names();

}  // namespace jkpanel
