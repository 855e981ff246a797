#pragma once

#include <random>
#include <string>
#include <vector>

#include "kivi/quantize.hpp"

namespace kivi {

enum class ErrorMode {
    ratio_norm,  // || (x - x_hat) / x ||_F, elementwise, denominator clamped at eps
    norm_ratio,  // || x - x_hat ||_F / || x ||_F
};

inline constexpr float kRatioEps = 1e-6f;

float relative_error(const Matrix& x, const Matrix& x_hat, ErrorMode mode);

// Relative error of the attention output A*V under value quantization.
float value_output_error(const Matrix& A, const Matrix& V, const Matrix& V_hat,
                         ErrorMode mode = ErrorMode::norm_ratio);

// Fraction of softmax weights below threshold.
float attention_sparsity(const Matrix& A, float threshold = 1e-3f);

struct ChannelProfile {
    std::vector<float> mean_abs;       // mean |x| per channel
    std::vector<Index> top_channels;   // indices of the k largest, descending
};

ChannelProfile channel_profile(const Matrix& x, Index k);

struct ErrorReport {
    std::string label;          // e.g. "K - C, V - T"
    Axis key_axis;
    Axis value_axis;
    int bits;
    float key_recon_err;        // norm_ratio over keys
    float attn_score_err;       // norm_ratio over softmax scores
    float value_recon_err;      // norm_ratio over values
    float value_output_err;     // delta, norm_ratio over A*V
    float attn_score_err_ratio; // ratio_norm variants, reported alongside
    float value_output_err_ratio;
    float attention_sparsity;
};

// Fake-quantizes keys and values along each axis combination in {T,C}^2 and
// measures score error against A = softmax(queries * keys^T) plus the value
// output error delta (exact A, quantized V). Sorted ascending by delta.
std::vector<ErrorReport> quadrant_sweep(const Matrix& keys, const Matrix& values,
                                        const Matrix& queries, int bits, Index group_size,
                                        float sparsity_threshold = 1e-3f);

// Synthetic data generators for the quadrant studies.
Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng, float stddev = 1.0f);

// Gaussian keys with a few fixed large-magnitude channels.
inline constexpr Index kOutlierChannels[3] = {1, 17, 40};
inline constexpr float kOutlierScale = 50.0f;
Matrix synthetic_outlier_keys(Index tokens, Index dim, std::mt19937_64& rng);

// Gaussian values with lognormal per-token magnitudes, mimicking the uneven
// row scales of real value caches.
Matrix synthetic_values(Index tokens, Index dim, std::mt19937_64& rng);

// Sharp queries whose softmax against gaussian keys is highly sparse.
Matrix peaked_queries(Index count, Index dim, std::mt19937_64& rng, float sharpness = 8.0f);

// Softmax attention whose mass spreads over `active` random tokens per row
// while the rest fall below a 1e-3 threshold: boosted logits sit ~`boost`
// above the background, so sparsity lands near 1 - active / tokens.
Matrix synthetic_sparse_attention(Index rows, Index tokens, Index active, std::mt19937_64& rng,
                                  float boost = 10.0f);

}  // namespace kivi
