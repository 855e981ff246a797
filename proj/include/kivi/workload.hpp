#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kivi/kv_cache.hpp"

namespace kivi {

struct WorkloadSpec {
    Index batch = 1;
    Index prompt_len = 161;  // ShareGPT mean prompt length
    Index gen_len = 338;     // ShareGPT mean output length
    Index layers = 2;
    Index kv_heads = 2;
    Index head_dim = 64;

    Index hidden() const { return kv_heads * head_dim; }
    Index total_len() const { return prompt_len + gen_len; }
    void validate() const;
};

// Named shapes: "opt175b" (96 layers, d=12288, b=512, 512+32 tokens) and
// "llama2-7b" (32 layers, 32 kv heads, head_dim 128, b=16, 4096 tokens).
WorkloadSpec preset_spec(const std::string& name);
std::vector<std::string> preset_names();

struct MemoryEstimate {
    std::uint64_t fp_bytes = 0;     // 16-bit K+V baseline
    std::uint64_t kivi_bytes = 0;   // == code + scale_zero + residual bytes
    std::uint64_t code_bytes = 0;
    std::uint64_t scale_zero_bytes = 0;
    std::uint64_t residual_bytes = 0;
    double compression_ratio = 0.0;  // fp_bytes / kivi_bytes
};

// Closed-form peak cache byte accounting for a full prefill + decode run.
// Kept independent of kvcache::memory_bytes; the benchmark cross-checks the
// two paths against each other.
MemoryEstimate estimate_memory(const WorkloadSpec& spec, const CacheConfig& cfg);
std::uint64_t fp_cache_bytes(const WorkloadSpec& spec);

enum class BenchMode { fp, kivi };

// Largest batch size whose estimated peak cache fits in budget_bytes.
Index max_batch_at_budget(const WorkloadSpec& spec, std::uint64_t budget_bytes, BenchMode mode,
                          const CacheConfig& cfg);

// Seeded random per-layer projection weights, X_K = X W_K etc.
struct SyntheticLayer {
    Matrix w_q, w_k, w_v;  // hidden x hidden
    SyntheticLayer(Index hidden, std::uint64_t seed);
};

struct BenchReport {
    BenchMode mode = BenchMode::kivi;
    Index decode_steps = 0;
    double tokens_per_sec = 0.0;
    double p50_ms = 0.0;
    double p90_ms = 0.0;
    double p99_ms = 0.0;
    std::uint64_t peak_cache_bytes = 0;
    // Sum over every attention output; bit-identical across runs of one seed.
    double output_checksum = 0.0;
};

// Prefill + gen_len decode steps over seeded synthetic projections, one cache
// per (batch element, layer, head). Counted bytes come from the live cache
// states, not from estimate_memory.
BenchReport run_decode_benchmark(const WorkloadSpec& spec, const CacheConfig& cfg,
                                 std::uint64_t seed, BenchMode mode,
                                 std::optional<std::uint64_t> budget_bytes = std::nullopt);

}  // namespace kivi
