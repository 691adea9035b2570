#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "jkpanel/design.hpp"
#include "jkpanel/estimators.hpp"
#include "jkpanel/tdist.hpp"
#include "jkpanel/weights.hpp"

namespace jkpanel {

struct Combination {
    double phi_tilde = 0.0;
    double sigma_tilde = 0.0;
};

// φ̃ = vᵀφ̂ and σ̃_q = sqrt((1/q) Σ_l (u_lᵀφ̂)²) with q = U.cols().
Combination combine(const linalg::Vector& estimates, const linalg::Vector& v, const linalg::Matrix& u);
Combination combine(const linalg::Vector& estimates, const WeightSolution& w);

// Threshold below which σ̃ counts as zero, relative to |φ̃|.
inline constexpr double kTolSigma = 1e-14;

// (φ̃ − φ₀)/σ̃. Throws ZeroVariance when σ̃ is numerically zero.
double t_statistic(double phi_tilde, double sigma_tilde, double phi0);

// φ̃ ∓ t_{q, 1−α/2} σ̃. Throws DomainError unless 0 < α < 1.
std::pair<double, double> confidence_interval(double phi_tilde, double sigma_tilde, unsigned q, double alpha);

struct InferenceResult {
    double phi_tilde = 0.0;
    double sigma_tilde = 0.0;
    std::size_t q = 0;
    double phi0 = 0.0;
    std::optional<double> j;  // absent when σ̃ = 0
    PValues p;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double alpha = 0.05;
    // σ̃ = 0: the interval collapses to a point and no test rejects (all
    // p-values are reported as 1).
    bool degenerate = false;
    linalg::Vector estimates;
    linalg::Vector v;
    linalg::Matrix u;
};

InferenceResult infer_from_estimates(const linalg::Vector& estimates, const linalg::Vector& v,
                                     const linalg::Matrix& u, double phi0 = 0.0, double alpha = 0.05);

struct JackknifeOptions {
    std::optional<std::size_t> q;           // defaults to q_max
    double phi0 = 0.0;
    double alpha = 0.05;
    std::size_t workers = 1;                // 0: hardware concurrency
    const WeightSolution* weights = nullptr;  // precomputed weights for the design
};

// Evaluates the estimator on every subsample (possibly concurrently); the
// result is ordered by subsample index. Throws EstimatorFailure for the
// lowest-index failing subsample.
linalg::Vector evaluate_subsamples(const PanelDataset& data, const Design& design, const Estimator& estimator,
                                   std::size_t workers = 1);

InferenceResult run_jackknife(const PanelDataset& data, const Design& design, const Estimator& estimator,
                              const JackknifeOptions& opts = {});

}  // namespace jkpanel
