#pragma once

namespace jkpanel {

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x ∈ [0, 1]. The
// complement 1 − x is passed separately so callers that know it in closed
// form avoid cancellation.
double incomplete_beta(double a, double b, double x, double one_minus_x);
double incomplete_beta(double a, double b, double x);

// Student-t with integer degrees of freedom q ≥ 1.
double t_pdf(unsigned q, double x);
double t_cdf(unsigned q, double x);
// Throws DomainError unless 0 < p < 1 and q ≥ 1.
double t_quantile(unsigned q, double p);

struct PValues {
    double two_sided = 1.0;
    double upper = 0.5;
    double lower = 0.5;
};

PValues p_values(double j, unsigned q);

}  // namespace jkpanel
