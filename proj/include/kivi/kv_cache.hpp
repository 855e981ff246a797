#pragma once

#include <cstdint>

#include "kivi/quantize.hpp"

namespace kivi {

struct CacheConfig {
    int bits = 2;
    Index group_size = 32;       // G
    Index residual_length = 128; // R, must be divisible by G
    Index head_dim = 128;        // d, must be divisible by G (per-token value groups)

    void validate() const;
    QuantParams key_params() const { return {bits, group_size, Axis::per_channel}; }
    QuantParams value_params() const { return {bits, group_size, Axis::per_token}; }
};

// Grouped quantized keys plus a full-precision residual that flushes as one
// R-token block whenever it fills.
struct KeyCacheState {
    QuantizedTensor grouped;  // per-channel, token count always a multiple of R
    Matrix residual;          // up to R-1 rows after a completed step
    Index total_tokens = 0;
    Index residual_capacity = 0;  // high-water residual rows, for byte accounting
};

// Grouped quantized values plus a FIFO window of the R most recent tokens.
struct ValueCacheState {
    QuantizedTensor grouped;  // per-token
    Matrix residual;          // min(total_tokens, R) most recent rows
    Index total_tokens = 0;
    Index residual_capacity = 0;
};

struct PrefillResult {
    KeyCacheState key;
    ValueCacheState value;
    // Exact prompt projections, passed unmodified to the next layer.
    Matrix passthrough_keys;
    Matrix passthrough_values;
};

PrefillResult prefill(const Matrix& keys, const Matrix& values, const CacheConfig& cfg);

void append_token(KeyCacheState& key_state, ValueCacheState& value_state, const Matrix& t_K,
                  const Matrix& t_V, const CacheConfig& cfg);

// Dequantized grouped part concatenated with the residual, in generation order.
Matrix materialize_keys(const KeyCacheState& state);
Matrix materialize_values(const ValueCacheState& state);

// Packed code bytes + 2 bytes each for zero-point and scale per group +
// 2 bytes per residual element. The residual is charged at its high-water
// capacity, so the count never decreases across appends.
std::uint64_t memory_bytes(const KeyCacheState& state);
std::uint64_t memory_bytes(const ValueCacheState& state);

}  // namespace kivi
