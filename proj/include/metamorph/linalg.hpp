#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace metamorph {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    double& operator[](int i) { return i == 0 ? x : y; }
    double operator[](int i) const { return i == 0 ? x : y; }

    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Row-major 2x2 matrix; (i, j) is row i, column j.
struct Mat2 {
    std::array<std::array<double, 2>, 2> m{};

    double& operator()(int i, int j) { return m[i][j]; }
    double operator()(int i, int j) const { return m[i][j]; }

    static Mat2 identity() { return Mat2{{{{1.0, 0.0}, {0.0, 1.0}}}}; }
    static Mat2 zero() { return Mat2{}; }

    Mat2& operator+=(const Mat2& o) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m[i][j] += o.m[i][j];
        return *this;
    }
    Mat2& operator-=(const Mat2& o) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m[i][j] -= o.m[i][j];
        return *this;
    }
    Mat2& operator*=(double s) {
        for (auto& row : m)
            for (auto& v : row) v *= s;
        return *this;
    }
};

inline Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
inline Mat2 operator-(Mat2 a, const Mat2& b) { return a -= b; }
inline Mat2 operator*(double s, Mat2 a) { return a *= s; }

inline Mat2 operator*(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j);
    return r;
}

inline Vec2 operator*(const Mat2& a, const Vec2& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y, a(1, 0) * v.x + a(1, 1) * v.y};
}

inline Mat2 transpose(const Mat2& a) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r(i, j) = a(j, i);
    return r;
}

/// Frobenius product A : B.
inline double contract(const Mat2& a, const Mat2& b) {
    return a(0, 0) * b(0, 0) + a(0, 1) * b(0, 1) + a(1, 0) * b(1, 0) + a(1, 1) * b(1, 1);
}

inline double frobenius_sq(const Mat2& a) { return contract(a, a); }

/// Threshold below which inv2 reports a singular matrix.
inline constexpr double kSingularDeterminant = 1e-12;

double det2(const Mat2& m);
/// Throws SingularMatrixError when |det| <= 1e-12.
Mat2 inv2(const Mat2& m);
/// Cofactor matrix, cof A = det(A) A^{-T}; defined for singular A as well.
Mat2 cof2(const Mat2& m);

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Symmetric matrix in compressed sparse row layout with the full pattern stored.
class SparseSymmetricMatrix {
public:
    SparseSymmetricMatrix() = default;

    /// Duplicates are summed in input order, so the result does not depend on
    /// how the triplets were produced as long as their order is fixed.
    static SparseSymmetricMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets);

    std::size_t size() const { return n_; }
    std::size_t nonzeros() const { return values_.size(); }

    std::vector<double> multiply(std::span<const double> x) const;
    double at(std::size_t i, std::size_t j) const;
    std::vector<double> diagonal() const;

    /// max |A_ij - A_ji| over stored entries.
    double max_asymmetry() const;
    /// Largest |i - j| over stored entries.
    std::size_t bandwidth() const;

    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::size_t> cols() const { return cols_; }
    std::span<const double> values() const { return values_; }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> values_;
};

/// Envelope (skyline) Cholesky factor of an SPD matrix in natural ordering.
/// The tensor-grid matrices assembled here have a bandwidth of a few grid rows,
/// so the envelope is compact and the factor is reused across right-hand sides.
class CholeskyFactor {
public:
    /// Throws SolverError carrying the row of the first nonpositive pivot.
    explicit CholeskyFactor(const SparseSymmetricMatrix& a);

    std::vector<double> solve(std::span<const double> b) const;
    std::size_t size() const { return first_.size(); }

private:
    std::vector<std::size_t> first_;   // first stored column of each row
    std::vector<std::size_t> offset_;  // start of row i in data_
    std::vector<double> data_;
};

struct CgOptions {
    double relative_tolerance = 1e-12;
    std::size_t max_iterations = 0;  // 0 means 10 * n
};

struct CgReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients; throws SolverError on breakdown.
std::vector<double> conjugate_gradient(const SparseSymmetricMatrix& a, std::span<const double> b,
                                       std::span<const double> x0 = {}, const CgOptions& opt = {},
                                       CgReport* report = nullptr);

/// Envelope size (stored doubles) above which solve_spd switches to CG.
inline constexpr std::size_t kDirectSolveEnvelopeLimit = 40'000'000;

/// Solves A x = b for SPD A with ||Ax - b|| / ||b|| < 1e-10, or throws SolverError.
std::vector<double> solve_spd(const SparseSymmetricMatrix& a, std::span<const double> b);

double relative_residual(const SparseSymmetricMatrix& a, std::span<const double> x,
                         std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

}  // namespace metamorph
