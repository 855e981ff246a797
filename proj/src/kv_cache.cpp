#include "kivi/kv_cache.hpp"

#include <algorithm>

namespace kivi {

void CacheConfig::validate() const {
    key_params().validate();
    if (residual_length < 1) {
        throw ConfigError("residual_length must be >= 1");
    }
    if (residual_length % group_size != 0) {
        throw ConfigError("residual_length " + std::to_string(residual_length) +
                          " must be divisible by group_size " + std::to_string(group_size));
    }
    if (head_dim < 1 || head_dim % group_size != 0) {
        throw ConfigError("head_dim " + std::to_string(head_dim) +
                          " must be a positive multiple of group_size " +
                          std::to_string(group_size));
    }
}

PrefillResult prefill(const Matrix& keys, const Matrix& values, const CacheConfig& cfg) {
    cfg.validate();
    if (keys.rows() == 0) throw UsageError("prefill: empty prompt");
    if (keys.rows() != values.rows()) {
        throw ShapeError("prefill: key/value token counts differ");
    }
    if (keys.cols() != cfg.head_dim || values.cols() != cfg.head_dim) {
        throw ShapeError("prefill: head_dim mismatch");
    }
    const Index l = keys.rows();
    const Index R = cfg.residual_length;

    PrefillResult out;
    // Key split: r = l mod R tokens stay full precision.
    const Index key_res = l % R;
    out.key.grouped = QuantizedTensor::quantize(keys.topRows(l - key_res), cfg.key_params());
    out.key.residual = keys.bottomRows(key_res);
    out.key.total_tokens = l;
    out.key.residual_capacity = key_res;

    // Value split: the R most recent tokens stay full precision (all of them
    // when l <= R).
    const Index value_res = std::min(l, R);
    out.value.grouped =
        QuantizedTensor::quantize(values.topRows(l - value_res), cfg.value_params());
    out.value.residual = values.bottomRows(value_res);
    out.value.total_tokens = l;
    out.value.residual_capacity = value_res;

    out.passthrough_keys = keys;
    out.passthrough_values = values;
    return out;
}

namespace {

void push_row(Matrix& m, const Matrix& row) {
    m.conservativeResize(m.rows() + 1, row.cols());
    m.row(m.rows() - 1) = row.row(0);
}

}  // namespace

void append_token(KeyCacheState& key_state, ValueCacheState& value_state, const Matrix& t_K,
                  const Matrix& t_V, const CacheConfig& cfg) {
    if (t_K.rows() != 1 || t_V.rows() != 1 || t_K.cols() != cfg.head_dim ||
        t_V.cols() != cfg.head_dim) {
        throw ShapeError("append_token: expected 1x" + std::to_string(cfg.head_dim) +
                         " key/value rows");
    }
    const Index R = cfg.residual_length;

    // Key: accumulate, flush the whole residual as one R-token block.
    if (key_state.residual.rows() == 0) key_state.residual.resize(0, cfg.head_dim);
    push_row(key_state.residual, t_K);
    key_state.residual_capacity = std::max(key_state.residual_capacity, key_state.residual.rows());
    if (key_state.residual.rows() == R) {
        key_state.grouped.concat_tokens(
            QuantizedTensor::quantize(key_state.residual, cfg.key_params()));
        key_state.residual.resize(0, cfg.head_dim);
    }
    key_state.total_tokens += 1;

    // Value: FIFO window; the most outdated token is quantized out when full.
    if (value_state.residual.rows() == 0) value_state.residual.resize(0, cfg.head_dim);
    if (value_state.residual.rows() == R) {
        value_state.grouped.concat_tokens(
            QuantizedTensor::quantize(value_state.residual.topRows(1), cfg.value_params()));
        Matrix kept = value_state.residual.bottomRows(R - 1);
        value_state.residual = kept;
    }
    push_row(value_state.residual, t_V);
    value_state.residual_capacity =
        std::max(value_state.residual_capacity, value_state.residual.rows());
    value_state.total_tokens += 1;
}

Matrix materialize_keys(const KeyCacheState& state) {
    return concat_rows(state.grouped.dequantize(), state.residual);
}

Matrix materialize_values(const ValueCacheState& state) {
    return concat_rows(state.grouped.dequantize(), state.residual);
}

namespace {

std::uint64_t grouped_bytes(const QuantizedTensor& t) {
    return static_cast<std::uint64_t>(t.packed().size()) +
           4u * static_cast<std::uint64_t>(t.group_count());
}

}  // namespace

std::uint64_t memory_bytes(const KeyCacheState& state) {
    return grouped_bytes(state.grouped) +
           2u * static_cast<std::uint64_t>(state.residual_capacity) *
               static_cast<std::uint64_t>(state.residual.cols());
}

std::uint64_t memory_bytes(const ValueCacheState& state) {
    return grouped_bytes(state.grouped) +
           2u * static_cast<std::uint64_t>(state.residual_capacity) *
               static_cast<std::uint64_t>(state.residual.cols());
}

}  // namespace kivi
