#pragma once

#include "kivi/kv_cache.hpp"

namespace kivi {

struct AttentionOptions {
    // Standard 1/sqrt(d) logit scaling. Off reproduces the raw logit form.
    bool scale_logits = true;
};

struct DecodeOutput {
    Matrix output;   // 1 x d
    Matrix weights;  // 1 x l softmax weights over all cached tokens
};

// Full-precision softmax(t_Q K^T) V, the oracle for decode_attention.
Matrix reference_attention(const Matrix& t_Q, const Matrix& K, const Matrix& V,
                           const AttentionOptions& opts = {});

// Appends (t_K, t_V) to the cache, then attends over grouped + residual parts.
// Grouped logits and outputs fuse dequantization into the product one
// quantization group at a time; residual parts are exact matrix products.
// Softmax runs once over the concatenated logit row.
DecodeOutput decode_attention(const Matrix& t_Q, const Matrix& t_K, const Matrix& t_V,
                              KeyCacheState& key_state, ValueCacheState& value_state,
                              const CacheConfig& cfg, const AttentionOptions& opts = {});

}  // namespace kivi
