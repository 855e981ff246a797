#include "kivi/attention.hpp"

#include <cmath>
#include <vector>

namespace kivi {

namespace {

float logit_scale(Index d, const AttentionOptions& opts) {
    return opts.scale_logits ? 1.0f / std::sqrt(static_cast<float>(d)) : 1.0f;
}

}  // namespace

Matrix reference_attention(const Matrix& t_Q, const Matrix& K, const Matrix& V,
                           const AttentionOptions& opts) {
    if (K.rows() != V.rows()) {
        throw ShapeError("reference_attention: K/V token counts differ");
    }
    Matrix logits = matmul(t_Q, K.transpose());
    logits *= logit_scale(t_Q.cols(), opts);
    return matmul(softmax_rows(logits), V);
}

DecodeOutput decode_attention(const Matrix& t_Q, const Matrix& t_K, const Matrix& t_V,
                              KeyCacheState& key_state, ValueCacheState& value_state,
                              const CacheConfig& cfg, const AttentionOptions& opts) {
    if (t_Q.rows() != 1 || t_Q.cols() != cfg.head_dim) {
        throw ShapeError("decode_attention: query must be 1x" + std::to_string(cfg.head_dim));
    }
    append_token(key_state, value_state, t_K, t_V, cfg);

    const Index d = cfg.head_dim;
    const Index G = cfg.group_size;
    const Index l = key_state.total_tokens;

    // Grouped key logits: one per-channel group (G tokens, one channel) per
    // tile, zero-point and scale loaded once per group.
    const QuantizedTensor& kg = key_state.grouped;
    const Index kg_tokens = kg.rows();
    std::vector<double> grouped_logits(static_cast<std::size_t>(kg_tokens), 0.0);
    {
        std::uint64_t pos = 0;
        Index group = 0;
        for (Index tg = 0; tg < kg_tokens / G; ++tg) {
            for (Index c = 0; c < d; ++c, ++group) {
                const double z = kg.zero_points()[static_cast<std::size_t>(group)];
                const double s = kg.scales()[static_cast<std::size_t>(group)];
                const double q = t_Q(0, c);
                for (Index i = 0; i < G; ++i, ++pos) {
                    grouped_logits[static_cast<std::size_t>(tg * G + i)] +=
                        q * (static_cast<double>(kg.code_at(pos)) * s + z);
                }
            }
        }
    }

    Matrix logits(1, l);
    for (Index t = 0; t < kg_tokens; ++t) {
        logits(0, t) = static_cast<float>(grouped_logits[static_cast<std::size_t>(t)]);
    }
    if (key_state.residual.rows() > 0) {
        logits.rightCols(key_state.residual.rows()) =
            matmul(t_Q, key_state.residual.transpose());
    }
    logits *= logit_scale(d, opts);

    DecodeOutput out;
    out.weights = softmax_rows(logits);

    // Output: fused dequant over grouped values + exact product over residual.
    const QuantizedTensor& vg = value_state.grouped;
    const Index vg_tokens = vg.rows();
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
    {
        std::uint64_t pos = 0;
        Index group = 0;
        for (Index t = 0; t < vg_tokens; ++t) {
            const double w = out.weights(0, t);
            for (Index cg = 0; cg < d / G; ++cg, ++group) {
                const double z = vg.zero_points()[static_cast<std::size_t>(group)];
                const double s = vg.scales()[static_cast<std::size_t>(group)];
                for (Index i = 0; i < G; ++i, ++pos) {
                    acc[static_cast<std::size_t>(cg * G + i)] +=
                        w * (static_cast<double>(vg.code_at(pos)) * s + z);
                }
            }
        }
    }
    Matrix residual_part =
        matmul(out.weights.rightCols(value_state.residual.rows()), value_state.residual);
    out.output = residual_part;
    if (vg_tokens > 0) {
        for (Index c = 0; c < d; ++c) {
            out.output(0, c) += static_cast<float>(acc[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

}  // namespace kivi
