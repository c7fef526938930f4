#include <doctest.h>

#include "metamorph/errors.hpp"
#include "metamorph/linalg.hpp"
#include "test_support.hpp"

using namespace metamorph;

namespace {

SparseSymmetricMatrix dense_to_sparse(const std::vector<std::vector<double>>& a) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if (a[i][j] != 0.0) t.push_back({i, j, a[i][j]});
    return SparseSymmetricMatrix::from_triplets(a.size(), t);
}

// A^T A + I with A having i.i.d. entries.
std::vector<std::vector<double>> random_spd(std::size_t n, std::mt19937_64& g) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n)), s(n, std::vector<double>(n, 0.0));
    for (auto& row : a)
        for (double& v : row) v = testing::uniform(g, -1, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) s[i][j] += a[k][i] * a[k][j];
            if (i == j) s[i][j] += 1.0;
        }
    return s;
}

SparseSymmetricMatrix laplacian_1d(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        t.push_back({i, i, 2.0});
        if (i > 0) t.push_back({i, i - 1, -1.0});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0});
    }
    return SparseSymmetricMatrix::from_triplets(n, t);
}

}  // namespace

TEST_CASE("identity solve returns the right-hand side") {
    auto g = testing::rng(1);
    const std::size_t n = 17;
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    const auto a = SparseSymmetricMatrix::from_triplets(n, t);
    const auto b = testing::random_vector(n, g);
    const auto x = solve_spd(a, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(b[i]).epsilon(1e-15));
}

TEST_CASE("diagonal two halves a vector of ones") {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < 9; ++i) t.push_back({i, i, 2.0});
    const auto x = solve_spd(SparseSymmetricMatrix::from_triplets(9, t), std::vector<double>(9, 1.0));
    for (double v : x) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("duplicate triplets are summed") {
    const auto a = SparseSymmetricMatrix::from_triplets(2, {{0, 0, 1.0}, {1, 1, 2.0}, {0, 0, 3.0}, {0, 1, 0.5},
                                                           {1, 0, 0.5}, {0, 1, 0.25}, {1, 0, 0.25}});
    CHECK(a.at(0, 0) == 4.0);
    CHECK(a.at(0, 1) == 0.75);
    CHECK(a.nonzeros() == 4);
    CHECK(a.max_asymmetry() == 0.0);
    CHECK(a.bandwidth() == 1);
}

TEST_CASE("random dense SPD systems meet the residual contract") {
    auto g = testing::rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = trial == 0 ? 50 : 5 + trial % 40;
        const auto a = dense_to_sparse(random_spd(n, g));
        const auto b = testing::random_vector(n, g);
        const auto x = solve_spd(a, b);
        CHECK(relative_residual(a, x, b) < 1e-10);
    }
}

TEST_CASE("conjugate gradients agree with the Cholesky factor") {
    auto g = testing::rng(8);
    const auto a = laplacian_1d(200);
    const auto b = testing::random_vector(200, g);
    const auto xd = CholeskyFactor(a).solve(b);
    CgReport rep;
    const auto xi = conjugate_gradient(a, b, {}, {}, &rep);
    CHECK(rep.relative_residual < 1e-10);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(xi[i] == doctest::Approx(xd[i]).epsilon(1e-8));
}

TEST_CASE("indefinite matrix is reported with the failing pivot") {
    // Leading 2x2 block is SPD, third pivot is negative.
    const auto a = SparseSymmetricMatrix::from_triplets(
        3, {{0, 0, 2.0}, {1, 1, 2.0}, {2, 2, -1.0}, {0, 1, 1.0}, {1, 0, 1.0}});
    try {
        CholeskyFactor f(a);
        FAIL("expected a solver error");
    } catch (const SolverError& e) {
        CHECK(e.index() == 2);
    }
    CHECK_THROWS_AS(solve_spd(a, std::vector<double>{1, 1, 1}), SolverError);
}

TEST_CASE("CG breakdown on an indefinite matrix carries an index") {
    const auto a = SparseSymmetricMatrix::from_triplets(2, {{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 3.0}, {1, 0, 3.0}});
    CHECK_THROWS_AS(conjugate_gradient(a, std::vector<double>{1.0, -1.0}), SolverError);
}

TEST_CASE("2x2 closed forms") {
    const Mat2 id = Mat2::identity();
    CHECK(det2(id) == 1.0);
    CHECK(inv2(id)(0, 0) == 1.0);
    CHECK(inv2(id)(0, 1) == 0.0);
    CHECK(cof2(id)(1, 1) == 1.0);

    Mat2 d;
    d(0, 0) = 2.0;
    d(1, 1) = 3.0;
    CHECK(det2(d) == 6.0);
    CHECK(inv2(d)(0, 0) == 0.5);
    CHECK(inv2(d)(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-16));

    CHECK_THROWS_AS(inv2(Mat2::zero()), SingularMatrixError);
    Mat2 tiny;
    tiny(0, 0) = 1e-7;
    tiny(1, 1) = 1e-7;
    CHECK_THROWS_AS(inv2(tiny), SingularMatrixError);
}

TEST_CASE("cofactor equals det times inverse transpose on random matrices") {
    auto g = testing::rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Mat2 m;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m(i, j) = testing::uniform(g, -1, 1) + (i == j ? 2.0 : 0.0);
        const Mat2 c = cof2(m);
        const Mat2 r = det2(m) * transpose(inv2(m));
        const Mat2 p = inv2(m) * m;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CHECK(std::abs(c(i, j) - r(i, j)) < 1e-12);
                CHECK(std::abs(p(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
    }
}
