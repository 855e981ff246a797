#include <doctest.h>

#include <random>

#include "kivi/attention.hpp"

using namespace kivi;

namespace {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, float scale = 1.0f) {
    std::uniform_real_distribution<float> dist(-scale, scale);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

float rel_l2(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("reference_attention basics") {
    std::mt19937_64 rng(31);
    {
        Matrix v = random_matrix(1, 4, rng);
        Matrix q = random_matrix(1, 4, rng);
        CHECK(reference_attention(q, v, v) == v);
    }
    {
        // Query aligned with key 0 at a large logit gap saturates the softmax.
        Matrix k(2, 2);
        k << 1, 0, 0, 1;
        Matrix v = random_matrix(2, 2, rng);
        Matrix q(1, 2);
        q << 40.0f, 0.0f;  // logit gap 40/sqrt(2) > 20
        Matrix out = reference_attention(q, k, v);
        CHECK((out - v.row(0)).cwiseAbs().maxCoeff() < 1e-3f);
    }
    {
        // Uniform logits average the value rows.
        Matrix k = Matrix::Zero(5, 3);
        Matrix v = random_matrix(5, 3, rng);
        Matrix q = random_matrix(1, 3, rng);
        Matrix out = reference_attention(q, k, v);
        Matrix mean = v.colwise().mean();
        CHECK((out - mean).cwiseAbs().maxCoeff() < 1e-6f);
    }
    CHECK_THROWS_AS(reference_attention(Matrix(1, 2), Matrix(3, 2), Matrix(4, 2)), ShapeError);
}

TEST_CASE("single cached token returns its value row exactly") {
    std::mt19937_64 rng(32);
    const CacheConfig cfg{2, 4, 8, 4};
    KeyCacheState key;
    ValueCacheState value;
    Matrix tq = random_matrix(1, 4, rng);
    Matrix tk = random_matrix(1, 4, rng);
    Matrix tv = random_matrix(1, 4, rng);
    DecodeOutput out = decode_attention(tq, tk, tv, key, value, cfg);
    CHECK(out.output == tv);
    CHECK(out.weights(0, 0) == 1.0f);
}

TEST_CASE("hybrid equals reference over materialized K/V") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 25; ++trial) {
        const CacheConfig cfg{2, 8, 16, 32};
        std::uniform_int_distribution<Index> len(1, 120);
        const Index l = len(rng);
        PrefillResult pre = prefill(random_matrix(l, 32, rng), random_matrix(l, 32, rng), cfg);
        Matrix tq = random_matrix(1, 32, rng);
        Matrix tk = random_matrix(1, 32, rng);
        Matrix tv = random_matrix(1, 32, rng);
        DecodeOutput out = decode_attention(tq, tk, tv, pre.key, pre.value, cfg);
        // Same states after the append: compare against dequantize-then-compute.
        Matrix ref = reference_attention(tq, materialize_keys(pre.key),
                                         materialize_values(pre.value));
        REQUIRE(rel_l2(out.output, ref) <= 1e-5f);
        CHECK(out.weights.sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("passthrough (all tokens in residual) is bit-exact") {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 30; ++trial) {
        for (Index d : {Index(32), Index(64)}) {
            const CacheConfig cfg{2, 32, 512, d};  // R >= l keeps everything full precision
            std::uniform_int_distribution<Index> len(1, 300);
            const Index l = len(rng);
            Matrix keys = random_matrix(l, d, rng);
            Matrix values = random_matrix(l, d, rng);
            PrefillResult pre = prefill(keys, values, cfg);
            Matrix tq = random_matrix(1, d, rng);
            Matrix tk = random_matrix(1, d, rng);
            Matrix tv = random_matrix(1, d, rng);
            DecodeOutput out = decode_attention(tq, tk, tv, pre.key, pre.value, cfg);
            Matrix ref =
                reference_attention(tq, concat_rows(keys, tk), concat_rows(values, tv));
            REQUIRE(out.output == ref);
        }
    }
}

TEST_CASE("output error non-increasing in bit width") {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 10; ++trial) {
        const Index l = 200, d = 32;
        Matrix keys = random_matrix(l, d, rng);
        Matrix values = random_matrix(l, d, rng);
        Matrix tq = random_matrix(1, d, rng);
        Matrix tk = random_matrix(1, d, rng);
        Matrix tv = random_matrix(1, d, rng);
        Matrix exact =
            reference_attention(tq, concat_rows(keys, tk), concat_rows(values, tv));
        float prev = 1e30f;
        for (int bits : {2, 4, 8}) {
            const CacheConfig cfg{bits, 8, 16, d};
            PrefillResult pre = prefill(keys, values, cfg);
            DecodeOutput out = decode_attention(tq, tk, tv, pre.key, pre.value, cfg);
            const float err = rel_l2(out.output, exact);
            CHECK(err <= prev);
            prev = err;
        }
        // B=8 is already close to the exact result.
        CHECK(prev < 1e-2f);
    }
}
