#include "kivi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kivi {

float relative_error(const Matrix& x, const Matrix& x_hat, ErrorMode mode) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
        throw ShapeError("relative_error: shapes differ");
    }
    if (x.size() == 0) return 0.0f;
    if (mode == ErrorMode::norm_ratio) {
        const float denom = x.norm();
        if (denom == 0.0f) return (x - x_hat).norm() == 0.0f ? 0.0f : INFINITY;
        return (x - x_hat).norm() / denom;
    }
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const float denom = std::max(std::abs(x(i, j)), kRatioEps);
            const double r = static_cast<double>(x(i, j) - x_hat(i, j)) / denom;
            sum += r * r;
        }
    }
    return static_cast<float>(std::sqrt(sum));
}

float value_output_error(const Matrix& A, const Matrix& V, const Matrix& V_hat, ErrorMode mode) {
    if (V.rows() != V_hat.rows() || V.cols() != V_hat.cols()) {
        throw ShapeError("value_output_error: V shapes differ");
    }
    return relative_error(matmul(A, V), matmul(A, V_hat), mode);
}

float attention_sparsity(const Matrix& A, float threshold) {
    if (A.size() == 0) return 0.0f;
    const Index below = (A.array() < threshold).count();
    return static_cast<float>(below) / static_cast<float>(A.size());
}

ChannelProfile channel_profile(const Matrix& x, Index k) {
    ChannelProfile p;
    p.mean_abs.resize(static_cast<std::size_t>(x.cols()));
    for (Index c = 0; c < x.cols(); ++c) {
        p.mean_abs[static_cast<std::size_t>(c)] =
            x.rows() == 0 ? 0.0f : x.col(c).cwiseAbs().mean();
    }
    std::vector<Index> order(static_cast<std::size_t>(x.cols()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return p.mean_abs[static_cast<std::size_t>(a)] > p.mean_abs[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(std::min(k, x.cols())));
    p.top_channels = std::move(order);
    return p;
}

std::vector<ErrorReport> quadrant_sweep(const Matrix& keys, const Matrix& values,
                                        const Matrix& queries, int bits, Index group_size,
                                        float sparsity_threshold) {
    if (keys.cols() != queries.cols()) {
        throw ShapeError("quadrant_sweep: key/query channel counts differ");
    }
    if (keys.rows() != values.rows()) {
        throw ShapeError("quadrant_sweep: key/value token counts differ");
    }
    const Matrix scores = softmax_rows(matmul(queries, keys.transpose()));
    const float sparsity = attention_sparsity(scores, sparsity_threshold);

    std::vector<ErrorReport> reports;
    for (Axis k_axis : {Axis::per_token, Axis::per_channel}) {
        const Matrix keys_q = fake_quantize(keys, {bits, group_size, k_axis});
        const Matrix scores_q = softmax_rows(matmul(queries, keys_q.transpose()));
        for (Axis v_axis : {Axis::per_token, Axis::per_channel}) {
            const Matrix values_q = fake_quantize(values, {bits, group_size, v_axis});
            ErrorReport r;
            r.key_axis = k_axis;
            r.value_axis = v_axis;
            r.bits = bits;
            r.label = std::string("K - ") + (k_axis == Axis::per_channel ? "C" : "T") +
                      ", V - " + (v_axis == Axis::per_channel ? "C" : "T");
            r.key_recon_err = relative_error(keys, keys_q, ErrorMode::norm_ratio);
            r.attn_score_err = relative_error(scores, scores_q, ErrorMode::norm_ratio);
            r.attn_score_err_ratio = relative_error(scores, scores_q, ErrorMode::ratio_norm);
            r.value_recon_err = relative_error(values, values_q, ErrorMode::norm_ratio);
            r.value_output_err = value_output_error(scores, values, values_q);
            r.value_output_err_ratio =
                value_output_error(scores, values, values_q, ErrorMode::ratio_norm);
            r.attention_sparsity = sparsity;
            reports.push_back(std::move(r));
        }
    }
    std::stable_sort(reports.begin(), reports.end(), [](const ErrorReport& a, const ErrorReport& b) {
        return a.value_output_err < b.value_output_err;
    });
    return reports;
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng, float stddev) {
    std::normal_distribution<float> dist(0.0f, stddev);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

Matrix synthetic_outlier_keys(Index tokens, Index dim, std::mt19937_64& rng) {
    Matrix m = gaussian_matrix(tokens, dim, rng);
    for (Index c : kOutlierChannels) {
        if (c < dim) m.col(c) *= kOutlierScale;
    }
    return m;
}

Matrix synthetic_values(Index tokens, Index dim, std::mt19937_64& rng) {
    Matrix m = gaussian_matrix(tokens, dim, rng);
    std::normal_distribution<float> log_scale(0.0f, 1.0f);
    for (Index t = 0; t < tokens; ++t) {
        m.row(t) *= std::exp(log_scale(rng));
    }
    return m;
}

Matrix peaked_queries(Index count, Index dim, std::mt19937_64& rng, float sharpness) {
    return gaussian_matrix(count, dim, rng, sharpness / std::sqrt(static_cast<float>(dim)));
}

Matrix synthetic_sparse_attention(Index rows, Index tokens, Index active, std::mt19937_64& rng,
                                  float boost) {
    Matrix logits = gaussian_matrix(rows, tokens, rng);
    std::vector<Index> order(static_cast<std::size_t>(tokens));
    std::iota(order.begin(), order.end(), Index{0});
    for (Index r = 0; r < rows; ++r) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Index i = 0; i < std::min(active, tokens); ++i) {
            logits(r, order[static_cast<std::size_t>(i)]) += boost;
        }
    }
    return softmax_rows(logits);
}

}  // namespace kivi
