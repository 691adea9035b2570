#include "jkpanel/tdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jkpanel/errors.hpp"

namespace jkpanel {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Modified Lentz evaluation of the continued fraction for I_x(a, b); converges
// quickly when x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NoConvergence("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x, double one_minus_x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete_beta requires a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (one_minus_x == 0.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                             b * std::log(one_minus_x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

double t_pdf(unsigned q, double x) {
    if (q == 0) throw DomainError("degrees of freedom must be positive");
    const double n = static_cast<double>(q);
    const double log_c = std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0) - 0.5 * std::log(n * M_PI);
    return std::exp(log_c - (n + 1.0) / 2.0 * std::log1p(x * x / n));
}

double t_cdf(unsigned q, double x) {
    if (q == 0) throw DomainError("degrees of freedom must be positive");
    if (std::isnan(x)) return x;
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    const double n = static_cast<double>(q);
    const double x2 = x * x;
    const double y = n / (n + x2);
    const double one_minus_y = x2 / (n + x2);
    // Lower tail mass P(T ≤ −|x|) = I_y(q/2, 1/2) / 2, evaluated directly so
    // it keeps relative accuracy far out in the tail.
    const double tail = 0.5 * incomplete_beta(n / 2.0, 0.5, y, one_minus_y);
    return x < 0.0 ? tail : 1.0 - tail;
}

namespace {

// Solves F_q(x) = p for p ≤ 1/2, returning x ≤ 0.
double lower_quantile(unsigned q, double p) {
    if (p == 0.5) return 0.0;
    double hi = 0.0;
    double lo = -1.0;
    while (t_cdf(q, lo) > p) {
        hi = lo;
        lo *= 2.0;
        if (!std::isfinite(lo)) throw NoConvergence("t_quantile bracket overflow");
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
        const double f = t_cdf(q, x) - p;
        if (f == 0.0) return x;
        if (f > 0.0) hi = x; else lo = x;
        const double dens = t_pdf(q, x);
        double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 4e-16 * std::max(1.0, std::abs(x)) || hi - lo <= 4e-16 * std::abs(lo)) return next;
        x = next;
    }
    return x;
}

}  // namespace

double t_quantile(unsigned q, double p) {
    if (q == 0) throw DomainError("degrees of freedom must be positive");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("t_quantile requires p in (0, 1), got " + std::to_string(p));
    if (p > 0.5) return -lower_quantile(q, 1.0 - p);
    return lower_quantile(q, p);
}

PValues p_values(double j, unsigned q) {
    PValues out;
    out.lower = t_cdf(q, j);
    out.upper = t_cdf(q, -j);
    out.two_sided = std::min(1.0, 2.0 * t_cdf(q, -std::abs(j)));
    return out;
}

}  // namespace jkpanel
