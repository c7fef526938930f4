#include "metamorph/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metamorph/errors.hpp"

namespace metamorph {

double det2(const Mat2& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

Mat2 inv2(const Mat2& m) {
    const double d = det2(m);
    if (!(std::abs(d) > kSingularDeterminant)) {
        throw SingularMatrixError("singular 2x2 matrix (det = " + std::to_string(d) + ")");
    }
    const double s = 1.0 / d;
    Mat2 r;
    r(0, 0) = s * m(1, 1);
    r(0, 1) = -s * m(0, 1);
    r(1, 0) = -s * m(1, 0);
    r(1, 1) = s * m(0, 0);
    return r;
}

Mat2 cof2(const Mat2& m) {
    Mat2 r;
    r(0, 0) = m(1, 1);
    r(0, 1) = -m(1, 0);
    r(1, 0) = -m(0, 1);
    r(1, 1) = m(0, 0);
    return r;
}

SparseSymmetricMatrix SparseSymmetricMatrix::from_triplets(std::size_t n, std::vector<Triplet> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseSymmetricMatrix a;
    a.n_ = n;
    a.row_ptr_.assign(n + 1, 0);
    a.cols_.reserve(triplets.size() / 2);
    a.values_.reserve(triplets.size() / 2);
    std::size_t row = 0;
    for (std::size_t k = 0; k < triplets.size();) {
        const Triplet t = triplets[k];
        if (t.row >= n || t.col >= n) throw SolverError("triplet outside matrix", std::max(t.row, t.col));
        double v = 0.0;
        std::size_t e = k;
        while (e < triplets.size() && triplets[e].row == t.row && triplets[e].col == t.col) {
            v += triplets[e].value;
            ++e;
        }
        while (row < t.row) a.row_ptr_[++row] = a.cols_.size();
        a.cols_.push_back(t.col);
        a.values_.push_back(v);
        k = e;
    }
    while (row < n) a.row_ptr_[++row] = a.cols_.size();
    return a;
}

std::vector<double> SparseSymmetricMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
        y[i] = s;
    }
    return y;
}

double SparseSymmetricMatrix::at(std::size_t i, std::size_t j) const {
    const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseSymmetricMatrix::diagonal() const {
    std::vector<double> d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
    return d;
}

double SparseSymmetricMatrix::max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            worst = std::max(worst, std::abs(values_[k] - at(cols_[k], i)));
    return worst;
}

std::size_t SparseSymmetricMatrix::bandwidth() const {
    std::size_t b = 0;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            b = std::max(b, cols_[k] > i ? cols_[k] - i : i - cols_[k]);
    return b;
}

CholeskyFactor::CholeskyFactor(const SparseSymmetricMatrix& a) {
    const std::size_t n = a.size();
    const auto rp = a.row_ptr();
    const auto cols = a.cols();
    const auto vals = a.values();
    first_.resize(n);
    offset_.resize(n + 1);
    offset_[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t f = i;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) f = std::min(f, cols[k]);
        first_[i] = f;
        offset_[i + 1] = offset_[i] + (i - f + 1);
    }
    data_.assign(offset_[n], 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
            if (cols[k] <= i) data_[offset_[i] + cols[k] - first_[i]] = vals[k];

    for (std::size_t i = 0; i < n; ++i) {
        double* li = data_.data() + offset_[i];
        const std::size_t fi = first_[i];
        for (std::size_t j = fi; j <= i; ++j) {
            const double* lj = data_.data() + offset_[j];
            const std::size_t fj = first_[j];
            const std::size_t k0 = std::max(fi, fj);
            double s = li[j - fi];
            for (std::size_t k = k0; k < j; ++k) s -= li[k - fi] * lj[k - fj];
            if (j < i) {
                li[j - fi] = s / lj[j - fj];
            } else {
                if (!(s > 0.0)) throw SolverError("nonpositive Cholesky pivot", i);
                li[i - fi] = std::sqrt(s);
            }
        }
    }
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
    const std::size_t n = size();
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double* li = data_.data() + offset_[i];
        double s = y[i];
        for (std::size_t k = first_[i]; k < i; ++k) s -= li[k - first_[i]] * y[k];
        y[i] = s / li[i - first_[i]];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        const double* li = data_.data() + offset_[ii];
        y[ii] /= li[ii - first_[ii]];
        const double xi = y[ii];
        for (std::size_t k = first_[ii]; k < ii; ++k) y[k] -= li[k - first_[ii]] * xi;
    }
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double relative_residual(const SparseSymmetricMatrix& a, std::span<const double> x,
                         std::span<const double> b) {
    const auto ax = a.multiply(x);
    double r = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) r += (ax[i] - b[i]) * (ax[i] - b[i]);
    const double nb = norm2(b);
    return nb > 0.0 ? std::sqrt(r) / nb : std::sqrt(r);
}

std::vector<double> conjugate_gradient(const SparseSymmetricMatrix& a, std::span<const double> b,
                                       std::span<const double> x0, const CgOptions& opt,
                                       CgReport* report) {
    const std::size_t n = a.size();
    std::vector<double> x(n, 0.0);
    if (!x0.empty()) std::copy(x0.begin(), x0.end(), x.begin());
    const double nb = norm2(b);
    if (nb == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        if (report) *report = {};
        return x;
    }
    auto inv_diag = a.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(inv_diag[i] > 0.0)) throw SolverError("nonpositive diagonal in CG preconditioner", i);
        inv_diag[i] = 1.0 / inv_diag[i];
    }
    std::vector<double> r = a.multiply(x);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    std::vector<double> z(n), p(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    const std::size_t cap = opt.max_iterations ? opt.max_iterations : 10 * n;
    std::size_t it = 0;
    double rel = norm2(r) / nb;
    while (rel > opt.relative_tolerance && it < cap) {
        const auto ap = a.multiply(p);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) throw SolverError("CG breakdown: nonpositive curvature", it);
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++it;
        rel = norm2(r) / nb;
    }
    if (report) *report = {it, relative_residual(a, x, b)};
    return x;
}

namespace {

std::size_t envelope_size(const SparseSymmetricMatrix& a) {
    const auto rp = a.row_ptr();
    const auto cols = a.cols();
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::size_t f = i;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) f = std::min(f, cols[k]);
        total += i - f + 1;
    }
    return total;
}

}  // namespace

std::vector<double> solve_spd(const SparseSymmetricMatrix& a, std::span<const double> b) {
    if (b.size() != a.size()) throw SolverError("right-hand side has wrong length", b.size());
    std::vector<double> x;
    if (envelope_size(a) <= kDirectSolveEnvelopeLimit) {
        x = CholeskyFactor(a).solve(b);
    } else {
        x = conjugate_gradient(a, b);
    }
    const double rel = relative_residual(a, x, b);
    if (!(rel < 1e-10)) throw SolverError("residual contract violated: " + std::to_string(rel), 0);
    return x;
}

}  // namespace metamorph
