#include "jkpanel/weights.hpp"

#include <algorithm>
#include <cmath>

#include "jkpanel/errors.hpp"

namespace jkpanel {

using linalg::Matrix;
using linalg::Vector;

namespace {

constexpr double kTolPsd = 1e-12;
constexpr double kTolVariance = 1e-10;

void residuals(const Matrix& c, const Matrix& d_mat, const Vector& d, const Vector& v, const Vector& pi,
               double& feasibility, double& stationarity) {
    const Vector dtv = d_mat.transpose() * v;
    feasibility = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) feasibility = std::max(feasibility, std::abs(dtv[i] - d[i]));
    const Vector cv = c * v;
    const Vector dpi = d_mat * pi;
    stationarity = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) stationarity = std::max(stationarity, std::abs(2.0 * cv[i] + dpi[i]));
}

// Columns of m⁻¹B.
Matrix solve_columns(const Matrix& m, const Matrix& b) {
    Matrix x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
        const Vector col = linalg::solve_linear(m, b.column(j));
        for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = col[i];
    }
    return x;
}

}  // namespace

Vector min_norm_unbiased(const Matrix& a) {
    const Matrix d_mat = constraint_matrix(a);
    if (linalg::rank(d_mat) < d_mat.cols()) throw RankDeficient("(A, ι) does not have full column rank");
    const Matrix dtd = d_mat.transpose() * d_mat;
    Vector y;
    try {
        y = linalg::solve_linear(dtd, constraint_rhs(a.cols()));
    } catch (const SingularMatrix& e) {
        throw RankDeficient(std::string("DᵀD is singular: ") + e.what());
    }
    return d_mat * y;
}

Vector mvuj_closed_form(const Matrix& a, const Matrix& c) {
    const Matrix d_mat = constraint_matrix(a);
    const Matrix cinv_d = solve_columns(c, d_mat);
    const Matrix m = d_mat.transpose() * cinv_d;
    const Vector y = linalg::solve_linear(m, constraint_rhs(a.cols()));
    return cinv_d * y;
}

MvujSolution solve_mvuj(const Matrix& a, const Matrix& c) {
    const DesignDiagnostics diag = diagnose(a, c);
    {
        DesignDiagnostics structural = diag;
        structural.min_variance_factor = 1.0;  // judged separately below
        const auto reasons = structural.reasons();
        if (!reasons.empty()) {
            std::string msg = "invalid design:";
            for (const auto& r : reasons) msg += " " + r + ";";
            throw InvalidDesign(msg);
        }
    }

    const Matrix d_mat = constraint_matrix(a);
    const Vector d = constraint_rhs(a.cols());
    MvujSolution out;

    if (!linalg::try_cholesky(c, kTolPsd).empty()) {
        try {
            out.v_star = mvuj_closed_form(a, c);
            // C v = D y, so π = −2y solves 2Cv + Dπ = 0; recover y via least squares on D.
            const Vector cv = c * out.v_star;
            const Matrix dtd = d_mat.transpose() * d_mat;
            const Vector y = linalg::solve_linear(dtd, d_mat.transpose() * cv);
            out.multipliers.resize(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) out.multipliers[i] = -2.0 * y[i];
            out.closed_form = true;
        } catch (const SingularMatrix&) {
            out.closed_form = false;
        }
    }
    if (!out.closed_form) {
        // Reduce the bordered system to the feasible set v = v† + Wα with W an
        // orthonormal basis of null(Dᵀ); stationarity becomes WᵀCW α = −WᵀCv†.
        // The pseudo-inverse picks the minimizer of least Euclidean norm, and
        // the reduced system is homogeneous in C so positive rescaling of C
        // leaves v* untouched.
        const Vector v_dagger = min_norm_unbiased(a);
        const auto w = linalg::nullspace_of_transpose(d_mat);
        out.v_star = v_dagger;
        if (w.dim() > 0) {
            const Matrix g = w.basis.transpose() * c * w.basis;
            const Vector rhs = w.basis.transpose() * (c * v_dagger);
            const auto eig = linalg::symmetric_eigen(g);
            double lmax = 0.0;
            for (double l : eig.values) lmax = std::max(lmax, std::abs(l));
            const double cut = linalg::kTolRank * lmax;
            Vector alpha(w.dim(), 0.0);
            for (std::size_t j = 0; j < eig.values.size(); ++j) {
                if (std::abs(eig.values[j]) <= cut) {
                    out.unique = false;
                    continue;
                }
                const Vector qj = eig.vectors.column(j);
                const double coef = -linalg::dot(qj, rhs) / eig.values[j];
                for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] += coef * qj[i];
            }
            const Vector shift = w.basis * alpha;
            for (std::size_t i = 0; i < shift.size(); ++i) out.v_star[i] += shift[i];
        }
        // Multipliers from 2Cv + Dπ = 0 by least squares on D.
        const Vector cv = c * out.v_star;
        const Vector y = linalg::solve_linear(d_mat.transpose() * d_mat, d_mat.transpose() * cv);
        out.multipliers.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out.multipliers[i] = -2.0 * y[i];
    }

    residuals(c, d_mat, d, out.v_star, out.multipliers, out.feasibility_residual, out.stationarity_residual);
    const double scale = std::max(linalg::max_abs(c), 1.0) * std::max(linalg::norm_inf(out.v_star), 1.0);
    if (out.feasibility_residual > linalg::kTolSolve * std::max(linalg::norm_inf(out.v_star), 1.0) ||
        out.stationarity_residual > linalg::kTolSolve * scale)
        throw InfeasibleConstraints("MVUJ solution fails its KKT residual check");

    out.variance_factor = linalg::quad_form(out.v_star, c, out.v_star);
    if (!(out.variance_factor > kTolVariance * std::max(linalg::max_abs(c), 1.0)))
        throw DegenerateVariance("v*ᵀCv* = " + std::to_string(out.variance_factor) + " is not positive");
    return out;
}

Matrix variance_weight_basis(const Matrix& a, const Matrix& c, const Vector& v_star, std::size_t q) {
    if (q == 0) throw InsufficientDirections("at least one variance-weight direction is required");
    const double vf = linalg::quad_form(v_star, c, v_star);
    if (!(vf > 0.0)) throw DegenerateVariance("v*ᵀCv* is not positive");

    const auto w = linalg::nullspace_of_transpose(constraint_matrix(a));
    if (w.dim() == 0) throw InsufficientDirections("null(Dᵀ) is trivial");
    const Matrix g = w.basis.transpose() * c * w.basis;
    const auto eig = linalg::symmetric_eigen(g);
    const double tol = 1e-10 * std::max(linalg::max_abs(c), 1.0);

    std::vector<std::size_t> admissible;
    for (std::size_t j = eig.values.size(); j-- > 0;)
        if (eig.values[j] > tol) admissible.push_back(j);
    if (q > admissible.size())
        throw InsufficientDirections("requested q = " + std::to_string(q) + " but only " +
                                     std::to_string(admissible.size()) + " directions are admissible");

    const std::size_t m = a.rows();
    Matrix u(m, q);
    for (std::size_t l = 0; l < q; ++l) {
        const std::size_t j = admissible[l];
        const Vector dir = w.basis * eig.vectors.column(j);
        const double s = std::sqrt(vf / eig.values[j]);
        double sign = 1.0;
        for (double x : dir) {
            if (std::abs(x) > 1e-9) {
                sign = x > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        // Entries at rounding level are exact zeros in every closed-form design.
        const double cut = 1e-13 * linalg::norm_inf(dir);
        for (std::size_t i = 0; i < m; ++i) u(i, l) = std::abs(dir[i]) <= cut ? 0.0 : sign * s * dir[i];
    }
    return u;
}

WeightSolution solve_weights(const Matrix& a, const Matrix& c, std::optional<std::size_t> q) {
    const MvujSolution mv = solve_mvuj(a, c);
    const DesignDiagnostics diag = diagnose(a, c);
    WeightSolution out;
    out.v_star = mv.v_star;
    out.variance_factor = mv.variance_factor;
    out.multipliers = mv.multipliers;
    out.unique = mv.unique;
    out.feasibility_residual = mv.feasibility_residual;
    out.stationarity_residual = mv.stationarity_residual;
    out.q_max = diag.q_max;
    out.q = q.value_or(diag.q_max);
    if (out.q > diag.q_max)
        throw InsufficientDirections("requested q = " + std::to_string(out.q) + " exceeds q_max = " +
                                     std::to_string(diag.q_max));
    out.U_star = variance_weight_basis(a, c, out.v_star, out.q);
    return out;
}

WeightSolution solve_weights(const Design& design, std::optional<std::size_t> q) {
    return solve_weights(bias_loading_matrix(design), covariance_matrix(design), q);
}

double ConditionReport::max() const {
    return std::max({v_bias, v_sum, u_bias, u_sum, var_match, cross});
}

ConditionReport verify_weight_conditions(const Matrix& a, const Matrix& c, const Vector& v, const Matrix& u) {
    const std::size_t m = a.rows();
    if (v.size() != m || c.rows() != m || c.cols() != m || (!u.empty() && u.rows() != m))
        throw DimensionMismatch("verify_weight_conditions shape mismatch");
    ConditionReport r;
    r.v_bias = linalg::norm_inf(a.transpose() * v);
    double sum = 0.0;
    for (double x : v) sum += x;
    r.v_sum = std::abs(sum - 1.0);
    if (u.empty()) return r;

    const double vf = linalg::quad_form(v, c, v);
    r.u_bias = linalg::max_abs(u.transpose() * a);
    r.u_sum = linalg::norm_inf(u.transpose() * Vector(m, 1.0));
    Matrix gram = u.transpose() * c * u;
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= vf;
    r.var_match = linalg::max_abs(gram);
    r.cross = linalg::norm_inf(u.transpose() * (c * v));
    return r;
}

}  // namespace jkpanel
