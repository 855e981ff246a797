#include "kivi/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "kivi/analysis.hpp"
#include "kivi/attention.hpp"

namespace kivi {

void WorkloadSpec::validate() const {
    if (batch < 1 || prompt_len < 1 || layers < 1 || kv_heads < 1 || head_dim < 1) {
        throw ConfigError("workload counts must be >= 1");
    }
    if (gen_len < 0) throw ConfigError("gen_len must be >= 0");
}

WorkloadSpec preset_spec(const std::string& name) {
    if (name == "opt175b") {
        // 96 layers, d = 12288, b = 512, 512 prompt + 32 generated tokens.
        return {.batch = 512, .prompt_len = 512, .gen_len = 32, .layers = 96,
                .kv_heads = 96, .head_dim = 128};
    }
    if (name == "llama2-7b") {
        // 32 layers, 32 kv heads, head_dim 128, b = 16, 4096 total tokens.
        return {.batch = 16, .prompt_len = 3968, .gen_len = 128, .layers = 32,
                .kv_heads = 32, .head_dim = 128};
    }
    if (name == "sharegpt-tiny") {
        return {};  // defaults: ShareGPT mean lengths on a small synthetic model
    }
    throw UsageError("unknown preset \"" + name + "\"");
}

std::vector<std::string> preset_names() { return {"opt175b", "llama2-7b", "sharegpt-tiny"}; }

std::uint64_t fp_cache_bytes(const WorkloadSpec& spec) {
    spec.validate();
    // 2 caches (K and V) x b x l x d x layers x 2 bytes.
    return 2ull * static_cast<std::uint64_t>(spec.batch) *
           static_cast<std::uint64_t>(spec.total_len()) *
           static_cast<std::uint64_t>(spec.hidden()) * static_cast<std::uint64_t>(spec.layers) *
           2ull;
}

MemoryEstimate estimate_memory(const WorkloadSpec& spec, const CacheConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (cfg.head_dim != spec.head_dim) {
        throw ConfigError("estimate_memory: cfg.head_dim must match spec.head_dim");
    }
    const std::uint64_t l = static_cast<std::uint64_t>(spec.total_len());
    const std::uint64_t lp = static_cast<std::uint64_t>(spec.prompt_len);
    const std::uint64_t d = static_cast<std::uint64_t>(spec.head_dim);
    const std::uint64_t G = static_cast<std::uint64_t>(cfg.group_size);
    const std::uint64_t R = static_cast<std::uint64_t>(cfg.residual_length);
    const std::uint64_t B = static_cast<std::uint64_t>(cfg.bits);

    // Key cache at end of generation: grouped part holds l - l mod R tokens.
    // The residual buffer's high-water mark is R rows if any decode-time flush
    // happened, else the final residual length.
    const std::uint64_t key_grouped = l - l % R;
    const bool key_flushed = (l / R) > (lp / R);
    const std::uint64_t key_res_rows = key_flushed ? R : l % R;

    // Value cache: all but the most recent min(l, R) tokens are grouped.
    const std::uint64_t value_res_rows = std::min(l, R);
    const std::uint64_t value_grouped = l - value_res_rows;

    MemoryEstimate e;
    e.code_bytes = (key_grouped * d * B + 7) / 8 + (value_grouped * d * B + 7) / 8;
    e.scale_zero_bytes = 4 * (key_grouped * d / G + value_grouped * d / G);
    e.residual_bytes = 2 * (key_res_rows + value_res_rows) * d;
    const std::uint64_t instances = static_cast<std::uint64_t>(spec.batch) *
                                    static_cast<std::uint64_t>(spec.layers) *
                                    static_cast<std::uint64_t>(spec.kv_heads);
    e.code_bytes *= instances;
    e.scale_zero_bytes *= instances;
    e.residual_bytes *= instances;
    e.kivi_bytes = e.code_bytes + e.scale_zero_bytes + e.residual_bytes;
    e.fp_bytes = fp_cache_bytes(spec);
    e.compression_ratio =
        e.kivi_bytes == 0 ? 0.0 : static_cast<double>(e.fp_bytes) / static_cast<double>(e.kivi_bytes);
    return e;
}

Index max_batch_at_budget(const WorkloadSpec& spec, std::uint64_t budget_bytes, BenchMode mode,
                          const CacheConfig& cfg) {
    WorkloadSpec one = spec;
    one.batch = 1;
    auto bytes_at = [&](Index b) {
        WorkloadSpec s = spec;
        s.batch = b;
        return mode == BenchMode::fp ? fp_cache_bytes(s) : estimate_memory(s, cfg).kivi_bytes;
    };
    const std::uint64_t per_request = bytes_at(1);
    if (per_request > budget_bytes) {
        throw BudgetError("budget " + std::to_string(budget_bytes) +
                          " bytes below single-request footprint of " +
                          std::to_string(per_request) + " bytes");
    }
    Index lo = 1;
    Index hi = static_cast<Index>(budget_bytes / per_request) + 1;
    while (lo < hi) {
        const Index mid = lo + (hi - lo + 1) / 2;
        if (bytes_at(mid) <= budget_bytes) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

SyntheticLayer::SyntheticLayer(Index hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const float scale = 1.0f / std::sqrt(static_cast<float>(hidden));
    w_q = gaussian_matrix(hidden, hidden, rng, scale);
    w_k = gaussian_matrix(hidden, hidden, rng, scale);
    w_v = gaussian_matrix(hidden, hidden, rng, scale);
}

namespace {

struct FpCache {
    Matrix keys;
    Matrix values;
};

std::uint64_t fp_state_bytes(const FpCache& c) {
    return 2ull * static_cast<std::uint64_t>(c.keys.size() + c.values.size());
}

double percentile(std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(sorted.size()))) -
        1;
    return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

BenchReport run_decode_benchmark(const WorkloadSpec& spec, const CacheConfig& cfg,
                                 std::uint64_t seed, BenchMode mode,
                                 std::optional<std::uint64_t> budget_bytes) {
    spec.validate();
    cfg.validate();
    if (cfg.head_dim != spec.head_dim) {
        throw ConfigError("run_decode_benchmark: cfg.head_dim must match spec.head_dim");
    }
    const Index d = spec.head_dim;
    const Index hidden = spec.hidden();

    std::vector<SyntheticLayer> layers;
    layers.reserve(static_cast<std::size_t>(spec.layers));
    for (Index ly = 0; ly < spec.layers; ++ly) {
        layers.emplace_back(hidden, seed + 1000003ull * static_cast<std::uint64_t>(ly));
    }

    // One cache per (batch element, layer, head).
    const std::size_t n_caches = static_cast<std::size_t>(spec.batch) *
                                 static_cast<std::size_t>(spec.layers) *
                                 static_cast<std::size_t>(spec.kv_heads);
    std::vector<KeyCacheState> key_states(mode == BenchMode::kivi ? n_caches : 0);
    std::vector<ValueCacheState> value_states(mode == BenchMode::kivi ? n_caches : 0);
    std::vector<FpCache> fp_states(mode == BenchMode::fp ? n_caches : 0);
    auto cache_index = [&](Index b, Index ly, Index h) {
        return (static_cast<std::size_t>(b) * static_cast<std::size_t>(spec.layers) +
                static_cast<std::size_t>(ly)) *
                   static_cast<std::size_t>(spec.kv_heads) +
               static_cast<std::size_t>(h);
    };
    auto counted_bytes = [&]() {
        std::uint64_t total = 0;
        if (mode == BenchMode::kivi) {
            for (const auto& s : key_states) total += memory_bytes(s);
            for (const auto& s : value_states) total += memory_bytes(s);
        } else {
            for (const auto& s : fp_states) total += fp_state_bytes(s);
        }
        return total;
    };
    auto check_budget = [&](const std::string& step) {
        if (!budget_bytes) return;
        const std::uint64_t used = counted_bytes();
        if (used > *budget_bytes) {
            throw BudgetError("memory budget exceeded at " + step + ": " + std::to_string(used) +
                              " > " + std::to_string(*budget_bytes) + " bytes");
        }
    };

    BenchReport report;
    report.mode = mode;
    report.decode_steps = spec.gen_len;

    std::mt19937_64 data_rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (Index b = 0; b < spec.batch; ++b) {
        const Matrix x = gaussian_matrix(spec.prompt_len, hidden, data_rng);
        for (Index ly = 0; ly < spec.layers; ++ly) {
            const Matrix xk = matmul(x, layers[static_cast<std::size_t>(ly)].w_k);
            const Matrix xv = matmul(x, layers[static_cast<std::size_t>(ly)].w_v);
            for (Index h = 0; h < spec.kv_heads; ++h) {
                const Matrix k_head = xk.middleCols(h * d, d);
                const Matrix v_head = xv.middleCols(h * d, d);
                const std::size_t idx = cache_index(b, ly, h);
                if (mode == BenchMode::kivi) {
                    PrefillResult pr = prefill(k_head, v_head, cfg);
                    key_states[idx] = std::move(pr.key);
                    value_states[idx] = std::move(pr.value);
                } else {
                    fp_states[idx] = FpCache{k_head, v_head};
                }
            }
        }
    }
    check_budget("prefill");

    std::vector<double> latencies_ms;
    latencies_ms.reserve(static_cast<std::size_t>(spec.batch * spec.gen_len));
    double total_seconds = 0.0;
    double checksum = 0.0;
    for (Index step = 0; step < spec.gen_len; ++step) {
        for (Index b = 0; b < spec.batch; ++b) {
            const Matrix t = gaussian_matrix(1, hidden, data_rng);
            const auto start = std::chrono::steady_clock::now();
            for (Index ly = 0; ly < spec.layers; ++ly) {
                const SyntheticLayer& layer = layers[static_cast<std::size_t>(ly)];
                const Matrix tq = matmul(t, layer.w_q);
                const Matrix tk = matmul(t, layer.w_k);
                const Matrix tv = matmul(t, layer.w_v);
                for (Index h = 0; h < spec.kv_heads; ++h) {
                    const std::size_t idx = cache_index(b, ly, h);
                    const Matrix q_head = tq.middleCols(h * d, d);
                    const Matrix k_head = tk.middleCols(h * d, d);
                    const Matrix v_head = tv.middleCols(h * d, d);
                    if (mode == BenchMode::kivi) {
                        DecodeOutput out = decode_attention(q_head, k_head, v_head,
                                                            key_states[idx], value_states[idx],
                                                            cfg);
                        checksum += static_cast<double>(out.output.sum());
                    } else {
                        FpCache& c = fp_states[idx];
                        c.keys = concat_rows(c.keys, k_head);
                        c.values = concat_rows(c.values, v_head);
                        const Matrix out = reference_attention(q_head, c.keys, c.values);
                        checksum += static_cast<double>(out.sum());
                    }
                }
            }
            const auto stop = std::chrono::steady_clock::now();
            const double sec = std::chrono::duration<double>(stop - start).count();
            total_seconds += sec;
            latencies_ms.push_back(sec * 1e3);
        }
        check_budget("decode step " + std::to_string(step + 1));
    }

    report.peak_cache_bytes = counted_bytes();
    report.output_checksum = checksum;
    if (spec.gen_len > 0 && total_seconds > 0.0) {
        report.tokens_per_sec =
            static_cast<double>(spec.batch * spec.gen_len) / total_seconds;
    }
    std::sort(latencies_ms.begin(), latencies_ms.end());
    report.p50_ms = percentile(latencies_ms, 0.50);
    report.p90_ms = percentile(latencies_ms, 0.90);
    report.p99_ms = percentile(latencies_ms, 0.99);
    return report;
}

}  // namespace kivi
