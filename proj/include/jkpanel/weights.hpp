#pragma once

#include <cstddef>
#include <optional>

#include "jkpanel/design.hpp"
#include "jkpanel/linalg.hpp"

namespace jkpanel {

struct MvujSolution {
    linalg::Vector v_star;
    double variance_factor = 0.0;  // v*ᵀCv*
    linalg::Vector multipliers;    // π in 2Cv + Dπ = 0
    bool closed_form = false;      // C was positive definite
    bool unique = true;
    double feasibility_residual = 0.0;
    double stationarity_residual = 0.0;
};

struct WeightSolution {
    linalg::Vector v_star;
    linalg::Matrix U_star;  // m x q
    double variance_factor = 0.0;
    std::size_t q = 0;
    std::size_t q_max = 0;
    linalg::Vector multipliers;
    bool unique = true;
    double feasibility_residual = 0.0;
    double stationarity_residual = 0.0;
};

// v† = D(DᵀD)⁻¹d, the least-norm vector with vᵀA = 0 and vᵀι = 1.
// Throws RankDeficient when D = (A, ι) loses column rank.
linalg::Vector min_norm_unbiased(const linalg::Matrix& a);

// Minimum-variance unbiased weights. Uses the closed form C⁻¹D(DᵀC⁻¹D)⁻¹d
// when C factors as positive definite. Otherwise the KKT conditions are
// solved on the feasible set v† + null(Dᵀ), returning the minimizer of least
// Euclidean norm when it is not unique. Throws
// InvalidDesign when the identification conditions fail and
// DegenerateVariance when v*ᵀCv* is not positive.
MvujSolution solve_mvuj(const linalg::Matrix& a, const linalg::Matrix& c);

// Closed-form path only; the caller guarantees C ≻ 0. Exposed so the two
// routes can be checked against each other.
linalg::Vector mvuj_closed_form(const linalg::Matrix& a, const linalg::Matrix& c);

// q C-orthogonal variance-weight directions from the eigendecomposition of
// WᵀCW (W an orthonormal basis of null(Dᵀ)), largest eigenvalue first, each
// rescaled so uᵀCu = v*ᵀCv* and signed so its first non-negligible entry is
// positive. Throws InsufficientDirections when q exceeds the admissible count.
linalg::Matrix variance_weight_basis(const linalg::Matrix& a, const linalg::Matrix& c,
                                     const linalg::Vector& v_star, std::size_t q);

// solve_mvuj followed by variance_weight_basis; q defaults to q_max.
WeightSolution solve_weights(const linalg::Matrix& a, const linalg::Matrix& c,
                             std::optional<std::size_t> q = std::nullopt);
WeightSolution solve_weights(const Design& design, std::optional<std::size_t> q = std::nullopt);

// Max absolute residual of each unbiasedness / variance-weight condition.
struct ConditionReport {
    double v_bias = 0.0;      // ‖Aᵀv‖∞
    double v_sum = 0.0;       // |ιᵀv − 1|
    double u_bias = 0.0;      // ‖UᵀA‖∞
    double u_sum = 0.0;       // ‖Uᵀι‖∞
    double var_match = 0.0;   // ‖UᵀCU − (vᵀCv) I‖∞
    double cross = 0.0;       // ‖UᵀCv‖∞
    double max() const;
};

ConditionReport verify_weight_conditions(const linalg::Matrix& a, const linalg::Matrix& c,
                                         const linalg::Vector& v, const linalg::Matrix& u);

}  // namespace jkpanel
