#include "jkpanel/inference.hpp"

#include <cmath>
#include <string>

#include "jkpanel/errors.hpp"
#include "jkpanel/parallel.hpp"

namespace jkpanel {

Combination combine(const linalg::Vector& est, const linalg::Vector& v, const linalg::Matrix& u) {
    if (v.size() != est.size() || (u.cols() > 0 && u.rows() != est.size()))
        throw DimensionMismatch("estimate vector length does not match the weights");
    if (u.cols() == 0) throw InsufficientDirections("no variance-weight directions");
    Combination c;
    c.phi_tilde = linalg::dot(v, est);
    double ss = 0.0;
    for (std::size_t l = 0; l < u.cols(); ++l) {
        double s = 0.0;
        for (std::size_t j = 0; j < est.size(); ++j) s += u(j, l) * est[j];
        ss += s * s;
    }
    c.sigma_tilde = std::sqrt(ss / static_cast<double>(u.cols()));
    return c;
}

Combination combine(const linalg::Vector& est, const WeightSolution& w) { return combine(est, w.v_star, w.U_star); }

namespace {
bool sigma_is_zero(double phi_tilde, double sigma) {
    return !(sigma > kTolSigma * std::max(1.0, std::abs(phi_tilde)));
}
}  // namespace

double t_statistic(double phi_tilde, double sigma_tilde, double phi0) {
    if (sigma_is_zero(phi_tilde, sigma_tilde))
        throw ZeroVariance("jackknife standard error is zero: the variance contrasts vanish");
    return (phi_tilde - phi0) / sigma_tilde;
}

std::pair<double, double> confidence_interval(double phi_tilde, double sigma_tilde, unsigned q, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    const double half = t_quantile(q, 1.0 - alpha / 2.0) * sigma_tilde;
    return {phi_tilde - half, phi_tilde + half};
}

InferenceResult infer_from_estimates(const linalg::Vector& estimates, const linalg::Vector& v,
                                     const linalg::Matrix& u, double phi0, double alpha) {
    InferenceResult r;
    const Combination c = combine(estimates, v, u);
    r.phi_tilde = c.phi_tilde;
    r.sigma_tilde = c.sigma_tilde;
    r.q = u.cols();
    r.phi0 = phi0;
    r.alpha = alpha;
    r.estimates = estimates;
    r.v = v;
    r.u = u;
    const auto q = static_cast<unsigned>(r.q);
    if (sigma_is_zero(r.phi_tilde, r.sigma_tilde)) {
        r.degenerate = true;
        r.p = PValues{1.0, 1.0, 1.0};
        r.ci_lower = r.ci_upper = r.phi_tilde;
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
        return r;
    }
    r.j = t_statistic(r.phi_tilde, r.sigma_tilde, phi0);
    r.p = p_values(*r.j, q);
    std::tie(r.ci_lower, r.ci_upper) = confidence_interval(r.phi_tilde, r.sigma_tilde, q, alpha);
    return r;
}

linalg::Vector evaluate_subsamples(const PanelDataset& data, const Design& design, const Estimator& estimator,
                                   std::size_t workers) {
    if (!(data.shape() == design.shape)) throw ShapeMismatch("dataset shape differs from the design shape");
    const std::size_t m = design.m();
    linalg::Vector est(m, 0.0);
    const auto errors = parallel_for_collect(m, workers, [&](std::size_t j) {
        const PanelView view(data, design.subsamples[j]);
        const double value = estimator(view);
        if (!std::isfinite(value)) throw DomainError("estimate is not finite");
        est[j] = value;
    });
    for (std::size_t j = 0; j < m; ++j) {
        if (!errors[j]) continue;
        try {
            std::rethrow_exception(errors[j]);
        } catch (const std::exception& e) {
            throw EstimatorFailure(j, e.what());
        }
    }
    return est;
}

InferenceResult run_jackknife(const PanelDataset& data, const Design& design, const Estimator& estimator,
                              const JackknifeOptions& opts) {
    WeightSolution local;
    const WeightSolution* w = opts.weights;
    if (w == nullptr) {
        local = solve_weights(design, opts.q);
        w = &local;
    } else if (w->v_star.size() != design.m()) {
        throw DimensionMismatch("precomputed weights do not match the design");
    }
    const linalg::Vector est = evaluate_subsamples(data, design, estimator, opts.workers);
    linalg::Matrix u = w->U_star;
    if (opts.q && *opts.q != u.cols()) {
        if (*opts.q == 0 || *opts.q > u.cols())
            throw InsufficientDirections("requested q exceeds the available variance weights");
        linalg::Matrix cut(u.rows(), *opts.q);
        for (std::size_t i = 0; i < u.rows(); ++i)
            for (std::size_t l = 0; l < *opts.q; ++l) cut(i, l) = u(i, l);
        u = std::move(cut);
    }
    return infer_from_estimates(est, w->v_star, u, opts.phi0, opts.alpha);
}

}  // namespace jkpanel
