#include "jkpanel/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jkpanel/errors.hpp"

namespace jkpanel {

void PanelDataset::set(const std::string& name, std::vector<double> values) {
    if (values.size() != shape_.total())
        throw ShapeMismatch("variable '" + name + "' has " + std::to_string(values.size()) + " entries, expected " +
                            std::to_string(shape_.total()));
    for (double v : values)
        if (!std::isfinite(v)) throw DomainError("variable '" + name + "' has non-finite entries");
    vars_[name] = std::move(values);
}

const std::vector<double>& PanelDataset::get(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ParseError("dataset has no variable '" + name + "'");
    return it->second;
}

std::vector<double>& PanelDataset::mutable_values(const std::string& name) {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ParseError("dataset has no variable '" + name + "'");
    return it->second;
}

std::size_t PanelDataset::flat_index(const std::vector<std::size_t>& idx) const {
    if (idx.size() != shape_.rank()) throw DimensionMismatch("index rank differs from panel rank");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) flat = flat * shape_.dim(k) + idx[k];
    return flat;
}

PanelView::PanelView(const PanelDataset& data, const SubsampleSpec& spec) : data_(&data) {
    if (spec.axes.size() != data.shape().rank()) throw DimensionMismatch("subsample rank differs from panel rank");
    for (std::size_t k = 0; k < spec.axes.size(); ++k) {
        if (!spec.axes[k].within(data.shape().dim(k))) throw ShapeMismatch("subsample exceeds the panel");
        index_.push_back(spec.axes[k].indices());
    }
}

PanelView::PanelView(const PanelDataset& data) : PanelView(data, SubsampleSpec::full(data.shape())) {}

std::size_t PanelView::size() const noexcept {
    std::size_t n = 1;
    for (const auto& ix : index_) n *= ix.size();
    return n;
}

std::vector<double> PanelView::gather(const std::string& name) const {
    const auto& src = data_->get(name);
    const auto& dims = data_->shape().dims();
    const std::size_t k = index_.size();
    std::vector<double> out;
    out.reserve(size());
    if (size() == 0) return out;

    // Odometer over view coordinates.
    std::vector<std::size_t> pos(k, 0);
    while (true) {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < k; ++a) flat = flat * dims[a] + index_[a][pos[a]];
        out.push_back(src[flat]);
        std::size_t a = k;
        while (a-- > 0) {
            if (++pos[a] < index_[a].size()) break;
            pos[a] = 0;
        }
        if (a == static_cast<std::size_t>(-1)) break;
    }
    return out;
}

namespace {

void require_rank(const PanelView& view, std::size_t k, const char* who) {
    if (view.rank() != k) throw DimensionMismatch(std::string(who) + " needs a " + std::to_string(k) + "-axis panel");
}

}  // namespace

double within_ls_oneway(const PanelView& view, const std::string& y_name, const std::string& x_name) {
    require_rank(view, 2, "within_ls_oneway");
    const std::size_t n = view.dim(0);
    const std::size_t t = view.dim(1);
    if (t < 2) throw DegenerateRegressor("within_ls_oneway needs at least two periods per unit");
    const auto y = view.gather(y_name);
    const auto x = view.gather(x_name);

    double sxy = 0.0;
    double sxx = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y.data() + i * t;
        const double* xi = x.data() + i * t;
        double my = 0.0, mx = 0.0;
        for (std::size_t s = 0; s < t; ++s) {
            my += yi[s];
            mx += xi[s];
            scale = std::max(scale, std::abs(xi[s]));
        }
        my /= static_cast<double>(t);
        mx /= static_cast<double>(t);
        for (std::size_t s = 0; s < t; ++s) {
            const double dx = xi[s] - mx;
            sxy += dx * (yi[s] - my);
            sxx += dx * dx;
        }
    }
    if (!(sxx > 1e-12 * std::max(scale * scale, 1e-300) * static_cast<double>(n * t)))
        throw DegenerateRegressor("x has no within-unit variation");
    return sxy / sxx;
}

double twoway_variance_mle(const PanelView& view, const std::string& y_name) {
    require_rank(view, 2, "twoway_variance_mle");
    const std::size_t n = view.dim(0);
    const std::size_t t = view.dim(1);
    if (n < 2 || t < 2) throw DimensionMismatch("twoway_variance_mle needs at least a 2x2 view");
    const auto y = view.gather(y_name);

    std::vector<double> row(n, 0.0), col(t, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            const double v = y[i * t + s];
            row[i] += v;
            col[s] += v;
            grand += v;
        }
    for (auto& r : row) r /= static_cast<double>(t);
    for (auto& c : col) c /= static_cast<double>(n);
    grand /= static_cast<double>(n * t);

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            const double e = y[i * t + s] - row[i] - col[s] + grand;
            ss += e * e;
        }
    return ss / static_cast<double>(n * t);
}

std::vector<double> kway_interacted_residuals(const PanelView& view, const std::string& y_name,
                                              const ProjectionOptions& opts) {
    require_rank(view, 3, "kway_interacted_variance_mle");
    const std::size_t n0 = view.dim(0), n1 = view.dim(1), n2 = view.dim(2);
    if (n0 < 2 || n1 < 2 || n2 < 2) throw DimensionMismatch("kway_interacted_variance_mle needs every axis >= 2");
    std::vector<double> r = view.gather(y_name);
    double scale = 0.0;
    for (double v : r) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return r;

    auto at = [&](std::size_t a, std::size_t b, std::size_t c) -> double& { return r[(a * n1 + b) * n2 + c]; };
    std::vector<double> means;

    double last = 0.0;
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        double update = 0.0;

        // Effect on (0, 1): average over axis 2.
        means.assign(n0 * n1, 0.0);
        for (std::size_t a = 0; a < n0; ++a)
            for (std::size_t b = 0; b < n1; ++b)
                for (std::size_t c = 0; c < n2; ++c) means[a * n1 + b] += at(a, b, c);
        for (std::size_t a = 0; a < n0; ++a)
            for (std::size_t b = 0; b < n1; ++b) {
                const double mu = means[a * n1 + b] / static_cast<double>(n2);
                update = std::max(update, std::abs(mu));
                for (std::size_t c = 0; c < n2; ++c) at(a, b, c) -= mu;
            }

        // Effect on (1, 2): average over axis 0.
        means.assign(n1 * n2, 0.0);
        for (std::size_t a = 0; a < n0; ++a)
            for (std::size_t b = 0; b < n1; ++b)
                for (std::size_t c = 0; c < n2; ++c) means[b * n2 + c] += at(a, b, c);
        for (std::size_t b = 0; b < n1; ++b)
            for (std::size_t c = 0; c < n2; ++c) {
                const double mu = means[b * n2 + c] / static_cast<double>(n0);
                update = std::max(update, std::abs(mu));
                for (std::size_t a = 0; a < n0; ++a) at(a, b, c) -= mu;
            }

        // Effect on (2, 0): average over axis 1.
        means.assign(n2 * n0, 0.0);
        for (std::size_t a = 0; a < n0; ++a)
            for (std::size_t b = 0; b < n1; ++b)
                for (std::size_t c = 0; c < n2; ++c) means[c * n0 + a] += at(a, b, c);
        for (std::size_t c = 0; c < n2; ++c)
            for (std::size_t a = 0; a < n0; ++a) {
                const double mu = means[c * n0 + a] / static_cast<double>(n1);
                update = std::max(update, std::abs(mu));
                for (std::size_t b = 0; b < n1; ++b) at(a, b, c) -= mu;
            }

        last = update;
        if (update <= opts.tol * scale) return r;
    }
    throw NoConvergence("alternating centering stopped after " + std::to_string(opts.max_iter) +
                        " sweeps with update " + std::to_string(last));
}

double kway_interacted_variance_mle(const PanelView& view, const std::string& y_name, const ProjectionOptions& opts) {
    const auto r = kway_interacted_residuals(view, y_name, opts);
    double ss = 0.0;
    for (double v : r) ss += v * v;
    return ss / static_cast<double>(r.size());
}

// ---------------------------------------------------------------- probit

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kFarTail = -30.0;
}  // namespace

double log_normal_cdf(double z) {
    if (z >= 0.0) return std::log1p(-0.5 * std::erfc(z / M_SQRT2));
    if (z > kFarTail) return std::log(0.5 * std::erfc(-z / M_SQRT2));
    // Asymptotic series for the Mills ratio; the truncation error beyond
    // |z| = 30 is far below double precision.
    const double w = 1.0 / (z * z);
    const double series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
    return -0.5 * z * z - std::log(-z) - kLogSqrt2Pi + std::log(series);
}

double inverse_mills(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi - log_normal_cdf(z)); }

ProbitProblem ProbitProblem::from_view(const PanelView& view, const std::string& y, const std::string& d) {
    require_rank(view, 2, "twoway_probit_mle");
    ProbitProblem p;
    p.n = view.dim(0);
    p.t = view.dim(1);
    if (p.n < 1 || p.t < 2) throw DimensionMismatch("twoway_probit_mle needs at least two periods");
    p.y = view.gather(y);
    p.d = view.gather(d);
    for (double v : p.y)
        if (v != 0.0 && v != 1.0) throw DomainError("probit outcome must be 0 or 1");
    return p;
}

namespace {

double eta_of(const ProbitProblem& p, const std::vector<double>& th, std::size_t i, std::size_t s) {
    const double gamma = s == 0 ? 0.0 : th[1 + p.n + s - 1];
    return th[1 + i] + gamma + th[0] * p.d[i * p.t + s];
}

void check_theta(const ProbitProblem& p, const std::vector<double>& th) {
    if (th.size() != p.num_params()) throw DimensionMismatch("probit parameter vector has the wrong length");
}

}  // namespace

double ProbitProblem::loglik(const std::vector<double>& th) const {
    check_theta(*this, th);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            const double e = eta_of(*this, th, i, s);
            ll += y[i * t + s] == 1.0 ? log_normal_cdf(e) : log_normal_cdf(-e);
        }
    return ll;
}

std::vector<double> ProbitProblem::gradient(const std::vector<double>& th) const {
    check_theta(*this, th);
    std::vector<double> g(num_params(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            const double e = eta_of(*this, th, i, s);
            const double score = y[i * t + s] == 1.0 ? inverse_mills(e) : -inverse_mills(-e);
            g[0] += score * d[i * t + s];
            g[1 + i] += score;
            if (s > 0) g[1 + n + s - 1] += score;
        }
    return g;
}

linalg::Matrix ProbitProblem::hessian(const std::vector<double>& th) const {
    check_theta(*this, th);
    const std::size_t k = num_params();
    linalg::Matrix h(k, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            const double e = eta_of(*this, th, i, s);
            double w;
            if (y[i * t + s] == 1.0) {
                const double m = inverse_mills(e);
                w = -m * (e + m);
            } else {
                const double m = inverse_mills(-e);
                w = -m * (m - e);
            }
            const double dv = d[i * t + s];
            const std::size_t li = 1 + i;
            h(0, 0) += w * dv * dv;
            h(0, li) += w * dv;
            h(li, li) += w;
            if (s > 0) {
                const std::size_t gs = 1 + n + s - 1;
                h(0, gs) += w * dv;
                h(li, gs) += w;
                h(gs, gs) += w;
            }
        }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < a; ++b) h(a, b) = h(b, a);
    return h;
}

ProbitFit fit_twoway_probit(const ProbitProblem& p, const ProbitOptions& opts) {
    for (std::size_t i = 0; i < p.n; ++i) {
        double sum = 0.0;
        for (std::size_t s = 0; s < p.t; ++s) sum += p.y[i * p.t + s];
        if (sum == 0.0 || sum == static_cast<double>(p.t))
            throw Separation("unit " + std::to_string(i) + " has a constant outcome");
    }
    for (std::size_t s = 0; s < p.t; ++s) {
        double sum = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) sum += p.y[i * p.t + s];
        if (sum == 0.0 || sum == static_cast<double>(p.n))
            throw Separation("period " + std::to_string(s) + " has a constant outcome");
    }

    ProbitFit fit;
    fit.theta.assign(p.num_params(), 0.0);
    fit.loglik = p.loglik(fit.theta);
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        const auto g = p.gradient(fit.theta);
        if (linalg::norm_inf(g) <= opts.grad_tol) {
            fit.iterations = iter;
            return fit;
        }
        const linalg::Matrix neg_h = -1.0 * p.hessian(fit.theta);
        linalg::Vector step;
        try {
            step = linalg::solve_linear(neg_h, g);
        } catch (const SingularMatrix&) {
            throw DegenerateRegressor("probit Hessian is singular (regressor not identified)");
        }
        double scale = 1.0;
        std::vector<double> trial(fit.theta.size());
        double trial_ll = -INFINITY;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = fit.theta[j] + scale * step[j];
            trial_ll = p.loglik(trial);
            if (trial_ll >= fit.loglik - 1e-12 * std::abs(fit.loglik)) break;
            scale *= 0.5;
        }
        fit.theta = trial;
        fit.loglik = trial_ll;
        for (std::size_t j = 1; j < fit.theta.size(); ++j)
            if (std::abs(fit.theta[j]) > opts.effect_bound)
                throw Separation("fixed effect drifted past " + std::to_string(opts.effect_bound));
    }
    throw NoConvergence("probit Newton iterations did not reach the gradient tolerance");
}

double twoway_probit_mle(const PanelView& view, const std::string& y, const std::string& d) {
    return fit_twoway_probit(ProbitProblem::from_view(view, y, d)).theta[0];
}

Estimator builtin_estimator(const std::string& name) {
    if (name == "within_ls") return [](const PanelView& v) { return within_ls_oneway(v); };
    if (name == "var2") return [](const PanelView& v) { return twoway_variance_mle(v); };
    if (name == "var3") return [](const PanelView& v) { return kway_interacted_variance_mle(v); };
    if (name == "probit2") return [](const PanelView& v) { return twoway_probit_mle(v); };
    throw ParseError("unknown estimator '" + name + "'");
}

std::vector<std::string> builtin_estimator_names() { return {"within_ls", "var2", "var3", "probit2"}; }

}  // namespace jkpanel
