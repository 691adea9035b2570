#include "jkpanel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jkpanel/errors.hpp"

namespace jkpanel::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_columns(const std::vector<Vector>& columns) {
    if (columns.empty()) return {};
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != m.rows()) throw DimensionMismatch("column length mismatch");
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = columns[j][i];
    }
    return m;
}

Vector Matrix::column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matrix product shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matrix-vector shape mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix b = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) b(i, j) *= s;
    return b;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix difference shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix sum shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot product length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

double norm_inf(const Matrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double x : a.row(i)) s += std::abs(x);
        m = std::max(m, s);
    }
    return m;
}

double max_abs(const Matrix& a) { return norm_inf(std::span<const double>(a.data())); }

double frobenius(const Matrix& a) { return norm2(a.data()); }

double quad_form(std::span<const double> x, const Matrix& m, std::span<const double> y) {
    return dot(x, m * y);
}

Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("hcat row mismatch");
    Matrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
    }
    return c;
}

Vector solve_linear(const Matrix& m, std::span<const double> b) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionMismatch("solve_linear needs a square matrix");
    if (b.size() != n) throw DimensionMismatch("solve_linear right-hand side length mismatch");

    Matrix a = m;
    Vector x(b.begin(), b.end());
    Vector scale(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        scale[i] = norm_inf(a.row(i));
        if (scale[i] == 0.0) throw SingularMatrix("zero row in linear system");
    }

    for (std::size_t k = 0; k < n; ++k) {
        // scaled partial pivoting, lowest index on ties
        std::size_t piv = k;
        double best = -1.0;
        for (std::size_t i = k; i < n; ++i) {
            const double r = std::abs(a(i, k)) / scale[i];
            if (r > best) {
                best = r;
                piv = i;
            }
        }
        if (best < kTolPivot) throw SingularMatrix("pivot below tolerance in column " + std::to_string(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(x[k], x[piv]);
            std::swap(scale[k], scale[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            a(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
            x[i] -= f * x[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double s = x[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
        x[k] = s / a(k, k);
    }
    return x;
}

namespace {

struct PivotedQr {
    std::size_t rank = 0;
    Matrix q;  // m x m orthogonal
};

PivotedQr pivoted_qr(const Matrix& input, double tol_rank) {
    const std::size_t m = input.rows();
    const std::size_t k = input.cols();
    Matrix r = input;
    Matrix q = Matrix::identity(m);

    double max_norm = 0.0;
    for (std::size_t j = 0; j < k; ++j) max_norm = std::max(max_norm, norm2(r.column(j)));
    const double tol = tol_rank * std::max(max_norm, 1.0);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::size_t rank = 0;

    for (std::size_t step = 0; step < std::min(m, k); ++step) {
        // remaining column norms below the current row
        std::size_t best_pos = step;
        double best = -1.0;
        std::vector<double> norms(k, 0.0);
        for (std::size_t pos = step; pos < k; ++pos) {
            const std::size_t j = order[pos];
            double s = 0.0;
            for (std::size_t i = step; i < m; ++i) s += r(i, j) * r(i, j);
            norms[pos] = std::sqrt(s);
            best = std::max(best, norms[pos]);
        }
        if (best <= tol) break;
        // lowest original column index among candidates within tol of the best
        std::size_t best_index = k;
        for (std::size_t pos = step; pos < k; ++pos) {
            if (norms[pos] >= best - tol && order[pos] < best_index) {
                best_index = order[pos];
                best_pos = pos;
            }
        }
        std::swap(order[step], order[best_pos]);
        const std::size_t col = order[step];

        // Householder reflector zeroing r(step+1.., col)
        Vector h(m, 0.0);
        const double alpha = norms[best_pos];
        const double x0 = r(step, col);
        const double sign = x0 >= 0.0 ? 1.0 : -1.0;
        for (std::size_t i = step; i < m; ++i) h[i] = r(i, col);
        h[step] += sign * alpha;
        const double hh = dot(h, h);
        if (hh > 0.0) {
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t i = step; i < m; ++i) s += h[i] * r(i, j);
                const double f = 2.0 * s / hh;
                for (std::size_t i = step; i < m; ++i) r(i, j) -= f * h[i];
            }
            // q <- q H, so that input = q r up to column permutation
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::size_t l = step; l < m; ++l) s += q(i, l) * h[l];
                const double f = 2.0 * s / hh;
                for (std::size_t l = step; l < m; ++l) q(i, l) -= f * h[l];
            }
        }
        ++rank;
    }
    return {rank, std::move(q)};
}

}  // namespace

NullspaceBasis nullspace_of_transpose(const Matrix& m, double tol_rank) {
    if (m.empty()) throw DimensionMismatch("nullspace_of_transpose needs a non-empty matrix");
    auto [r, q] = pivoted_qr(m, tol_rank);
    const std::size_t rows = m.rows();
    NullspaceBasis out;
    out.rank = r;
    out.basis = Matrix(rows, rows - r);
    for (std::size_t c = r; c < rows; ++c) {
        double sign = 1.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (std::abs(q(i, c)) > 1e-12) {
                sign = q(i, c) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < rows; ++i) out.basis(i, c - r) = sign * q(i, c);
    }
    return out;
}

std::size_t rank(const Matrix& m, double tol_rank) { return pivoted_qr(m, tol_rank).rank; }

SymmetricEigen symmetric_eigen(const Matrix& s) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw DimensionMismatch("symmetric_eigen needs a square matrix");
    const double scale = std::max(max_abs(s), 1.0);
    if (max_abs(s - s.transpose()) > kTolSym * scale) throw NotSymmetric("matrix is not symmetric");

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
    Matrix v = Matrix::identity(n);
    const double tol = kTolEig * std::max(frobenius(a), 1e-300);

    auto off_norm = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) acc += a(i, j) * a(i, j);
        return std::sqrt(acc);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(idx[j], idx[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, idx[j]);
    }
    return out;
}

Vector symmetric_eigenvalues(const Matrix& s) { return symmetric_eigen(s).values; }

Matrix try_cholesky(const Matrix& s, double tol) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw DimensionMismatch("try_cholesky needs a square matrix");
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(s(i, i)));
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = s(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > tol * dmax)) return {};
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double x = s(i, j);
            for (std::size_t k = 0; k < j; ++k) x -= l(i, k) * l(j, k);
            l(i, j) = x / l(j, j);
        }
    }
    return l;
}

KktSolution solve_bordered_kkt(const Matrix& c, const Matrix& d_mat, std::span<const double> d) {
    const std::size_t m = c.rows();
    const std::size_t p = d_mat.cols();
    if (c.cols() != m || d_mat.rows() != m || d.size() != p)
        throw DimensionMismatch("solve_bordered_kkt shape mismatch");

    const std::size_t n = m + p;
    Matrix k(n, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) k(i, j) = 2.0 * c(i, j);
        for (std::size_t j = 0; j < p; ++j) {
            k(i, m + j) = d_mat(i, j);
            k(m + j, i) = d_mat(i, j);
        }
    }
    Vector rhs(n, 0.0);
    for (std::size_t j = 0; j < p; ++j) rhs[m + j] = d[j];

    KktSolution out;
    Vector x;
    try {
        x = solve_linear(k, rhs);
    } catch (const SingularMatrix&) {
        // Minimum-norm solution through the pseudo-inverse of the symmetric
        // bordered matrix.
        out.unique = false;
        const SymmetricEigen eig = symmetric_eigen(k);
        double lmax = 0.0;
        for (double l : eig.values) lmax = std::max(lmax, std::abs(l));
        const double cut = kTolRank * std::max(lmax, 1.0);
        x.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(eig.values[j]) <= cut) continue;
            const Vector qj = eig.vectors.column(j);
            const double coef = dot(qj, rhs) / eig.values[j];
            for (std::size_t i = 0; i < n; ++i) x[i] += coef * qj[i];
        }
    }

    const Vector kx = k * x;
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(kx[i] - rhs[i]));
    const double scale = norm_inf(k) * norm_inf(x) + norm_inf(rhs);
    if (!(resid <= kTolSolve * std::max(scale, 1.0)))
        throw InfeasibleConstraints("bordered KKT system has no solution (residual " + std::to_string(resid) + ")");

    out.v.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
    out.multipliers.assign(x.begin() + static_cast<std::ptrdiff_t>(m), x.end());
    return out;
}

}  // namespace jkpanel::linalg
