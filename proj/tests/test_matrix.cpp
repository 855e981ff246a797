#include <doctest.h>

#include <cmath>
#include <random>

#include "kivi/matrix.hpp"

using namespace kivi;

namespace {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, float scale = 1.0f) {
    std::uniform_real_distribution<float> dist(-scale, scale);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace

TEST_CASE("matmul basics") {
    std::mt19937_64 rng(1);
    Matrix m = random_matrix(2, 3, rng);
    CHECK(matmul(Matrix::Identity(2, 2), m) == m);

    Matrix a(2, 2);
    a << 1, 2, 3, 4;
    Matrix b(2, 1);
    b << 0, 1;
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 2.0f);
    CHECK(c(1, 0) == 4.0f);

    // Empty inner dimension yields a zero matrix.
    Matrix z = matmul(Matrix(1, 0), Matrix(0, 1));
    CHECK(z.rows() == 1);
    CHECK(z.cols() == 1);
    CHECK(z(0, 0) == 0.0f);

    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(4, 6, rng);
        Matrix b = random_matrix(6, 3, rng);
        Matrix c = random_matrix(3, 5, rng);
        Matrix lhs = matmul(matmul(a, b), c);
        Matrix rhs = matmul(a, matmul(b, c));
        CHECK((lhs - rhs).norm() <= 1e-4f * std::max(1.0f, rhs.norm()));
    }
}

TEST_CASE("softmax_rows") {
    Matrix one(1, 1);
    one << 42.0f;
    CHECK(softmax_rows(one)(0, 0) == 1.0f);

    Matrix sym(1, 2);
    sym << 0.0f, 0.0f;
    Matrix s = softmax_rows(sym);
    CHECK(s(0, 0) == doctest::Approx(0.5));
    CHECK(s(0, 1) == doctest::Approx(0.5));

    Matrix row(1, 2);
    row << 0.0f, std::log(3.0f);
    s = softmax_rows(row);
    CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax_rows rows sum to one, including huge logits") {
    std::mt19937_64 rng(3);
    for (float scale : {1.0f, 100.0f, 1e4f}) {
        Matrix m = random_matrix(8, 16, rng, scale);
        Matrix s = softmax_rows(m);
        CHECK((s.array() >= 0.0f).all());
        for (Index i = 0; i < s.rows(); ++i) {
            CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("frobenius") {
    CHECK(frobenius(Matrix::Zero(3, 4)) == 0.0f);
    Matrix m(1, 2);
    m << 3.0f, 4.0f;
    CHECK(frobenius(m) == doctest::Approx(5.0));

    // Brute-force oracle and homogeneity.
    std::mt19937_64 rng(4);
    Matrix r = random_matrix(7, 5, rng);
    double sum = 0.0;
    for (Index i = 0; i < r.rows(); ++i)
        for (Index j = 0; j < r.cols(); ++j) sum += double(r(i, j)) * double(r(i, j));
    CHECK(frobenius(r) == doctest::Approx(std::sqrt(sum)).epsilon(1e-6));
    CHECK(frobenius(2.5f * r) == doctest::Approx(2.5 * frobenius(r)).epsilon(1e-6));
}

TEST_CASE("concat_rows with empty operands") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    CHECK(concat_rows(Matrix(0, 3), m) == m);
    CHECK(concat_rows(m, Matrix(0, 3)) == m);
    Matrix both = concat_rows(m, m);
    CHECK(both.rows() == 4);
    CHECK(both.bottomRows(2) == m);
}
