#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace jkpanel::linalg {

using Vector = std::vector<double>;

// Dense row-major matrix. Sized for the handful-of-subsamples problems this
// library solves, so there is no blocking or expression templating.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix from_columns(const std::vector<Vector>& columns);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    Vector column(std::size_t j) const;
    const std::vector<double>& data() const noexcept { return data_; }

    Matrix transpose() const;
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix operator*(double s, const Matrix& a);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double norm_inf(const Matrix& a);  // max absolute row sum
double max_abs(const Matrix& a);
double frobenius(const Matrix& a);
// xᵀ M y
double quad_form(std::span<const double> x, const Matrix& m, std::span<const double> y);

// Appends the columns of b to a (same row count).
Matrix hcat(const Matrix& a, const Matrix& b);

// Default relative tolerances for the tiny, near-integer matrices in this library.
inline constexpr double kTolRank = 1e-10;   // x max column norm
inline constexpr double kTolSolve = 1e-9;   // relative residual
inline constexpr double kTolEig = 1e-12;    // x Frobenius norm
inline constexpr double kTolPivot = 1e-13;  // x row max
inline constexpr double kTolSym = 1e-12;    // x max |entry|

// Row-pivoted Gaussian elimination. Throws SingularMatrix when a pivot is
// smaller than kTolPivot times the scale of its row.
Vector solve_linear(const Matrix& m, std::span<const double> b);

struct NullspaceBasis {
    std::size_t rank = 0;
    Matrix basis;  // m x (m - rank); zero columns when the input has full row rank
    std::size_t dim() const noexcept { return basis.cols(); }
};

// Orthonormal basis of {w : wᵀM = 0} via Householder QR with column
// pivoting. Pivot ties within the rank tolerance go to the lowest column
// index, and each basis column is signed so its first non-negligible entry is
// positive; the output is a deterministic function of the input.
NullspaceBasis nullspace_of_transpose(const Matrix& m, double tol_rank = kTolRank);

// Numerical rank via the same pivoted QR.
std::size_t rank(const Matrix& m, double tol_rank = kTolRank);

struct SymmetricEigen {
    Vector values;   // ascending
    Matrix vectors;  // column j pairs with values[j]
};

// Cyclic Jacobi. Throws NotSymmetric if ‖S − Sᵀ‖∞ exceeds kTolSym·max|S|.
SymmetricEigen symmetric_eigen(const Matrix& s);
Vector symmetric_eigenvalues(const Matrix& s);

// Lower Cholesky factor, or empty when some pivot is below tol·max diag
// (the matrix is not numerically positive definite).
Matrix try_cholesky(const Matrix& s, double tol = 1e-12);

struct KktSolution {
    Vector v;
    Vector multipliers;
    bool unique = true;  // false when the bordered matrix was singular
};

// Solves [[2C, D], [Dᵀ, 0]] (v, π) = (0, d). A singular bordered matrix is
// resolved to the minimum-norm solution through its eigendecomposition.
// Throws InfeasibleConstraints when no solution exists.
KktSolution solve_bordered_kkt(const Matrix& c, const Matrix& d_mat, std::span<const double> d);

}  // namespace jkpanel::linalg
