#pragma once

// Simulation helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "jkpanel/inference.hpp"
#include "jkpanel/linalg.hpp"
#include "jkpanel/sim.hpp"
#include "jkpanel/tdist.hpp"
#include "jkpanel/weights.hpp"

namespace oracles {

// Symmetric square root through the eigendecomposition; tiny negative
// eigenvalues from rounding are clipped.
inline jkpanel::linalg::Matrix symmetric_sqrt(const jkpanel::linalg::Matrix& c) {
    const auto e = jkpanel::linalg::symmetric_eigen(c);
    const std::size_t m = c.rows();
    jkpanel::linalg::Matrix out(m, m);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = std::sqrt(std::max(e.values[k], 0.0));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) out(i, j) += s * e.vectors(i, k) * e.vectors(j, k);
    }
    return out;
}

// Draws the estimate vector φι + C^{1/2} z and returns J = (φ̃ − φ) / σ̃_q.
inline std::vector<double> simulate_t_statistics(const jkpanel::linalg::Matrix& c, const jkpanel::WeightSolution& w,
                                                 double phi, std::size_t draws, std::uint64_t seed) {
    const jkpanel::linalg::Matrix root = symmetric_sqrt(c);
    const std::size_t m = c.rows();
    jkpanel::Rng rng(seed);
    std::vector<double> out;
    out.reserve(draws);
    jkpanel::linalg::Vector z(m);
    while (out.size() < draws) {
        for (auto& x : z) x = rng.normal();
        jkpanel::linalg::Vector est = root * z;
        for (auto& x : est) x += phi;
        const auto comb = jkpanel::combine(est, w);
        if (!(comb.sigma_tilde > 0.0)) continue;
        out.push_back((comb.phi_tilde - phi) / comb.sigma_tilde);
    }
    return out;
}

// Kolmogorov-Smirnov distance between the sample and t_q.
inline double ks_distance_to_t(std::vector<double> sample, unsigned q) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = jkpanel::t_cdf(q, sample[i]);
        worst = std::max({worst, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return worst;
}

}  // namespace oracles
