#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kivi/matrix.hpp"

namespace kivi {

// Which dimension a quantization group runs along.
//   per_token:   G consecutive channels within one token (row).
//   per_channel: G consecutive tokens within one channel (column).
enum class Axis { per_token, per_channel };

const char* axis_name(Axis axis);

struct QuantParams {
    int bits = 2;           // B, in [1, 8]; packed storage needs B in {1,2,4,8}
    Index group_size = 32;  // G, elements sharing one zero-point/scale pair
    Axis axis = Axis::per_token;

    void validate() const;
    bool packable() const { return bits == 1 || bits == 2 || bits == 4 || bits == 8; }
    int max_code() const { return (1 << bits) - 1; }
};

struct GroupQuant {
    std::vector<std::uint8_t> codes;  // unpacked, one code per element
    double zero_point = 0.0;          // z = min of the group
    double scale = 1.0;               // s = (max - min) / (2^B - 1), or 1 if max == min
};

// Round-to-nearest (ties to even) asymmetric quantization of one group.
GroupQuant quantize_group(std::span<const float> values, int bits);

// v' = code * s + z, accumulated in double and rounded once to float.
std::vector<float> dequantize_group(std::span<const std::uint8_t> codes, double zero_point,
                                    double scale);

// Packs B-bit codes into bytes, first code in the lowest-order bits of byte 0.
// Only B in {1,2,4,8}, so codes never straddle byte boundaries.
std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits);
std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int bits);

// Packed group-quantized matrix. Groups are stored contiguously in a fixed
// order so that appending tokens only ever appends groups:
//   per_channel: group g = token_group * cols + channel, codes in token order
//   per_token:   group g = row * (cols / G) + channel_group, codes in channel order
class QuantizedTensor {
public:
    QuantizedTensor() = default;
    explicit QuantizedTensor(const QuantParams& params) : params_(params) {}

    // Strict mode: the grouped axis extent must be divisible by G.
    static QuantizedTensor quantize(const Matrix& m, const QuantParams& params);

    Matrix dequantize() const;

    // Appends other's tokens after this tensor's. Both layouts keep groups in
    // token-major order, so this is a pure group append (repacked once).
    void concat_tokens(const QuantizedTensor& other);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index group_count() const { return static_cast<Index>(scales_.size()); }
    std::uint64_t code_count() const {
        return static_cast<std::uint64_t>(rows_) * static_cast<std::uint64_t>(cols_);
    }
    bool empty() const { return rows_ == 0; }

    const std::vector<std::uint8_t>& packed() const { return packed_; }
    const std::vector<double>& zero_points() const { return zero_points_; }
    const std::vector<double>& scales() const { return scales_; }
    const QuantParams& params() const { return params_; }

    // Code at flat position i of the group-ordered code stream.
    std::uint8_t code_at(std::uint64_t i) const {
        const int bits = params_.bits;
        const std::uint64_t bit = i * static_cast<std::uint64_t>(bits);
        return static_cast<std::uint8_t>((packed_[bit >> 3] >> (bit & 7)) & params_.max_code());
    }

private:
    std::vector<std::uint8_t> packed_;
    std::vector<double> zero_points_;
    std::vector<double> scales_;
    Index rows_ = 0;
    Index cols_ = 0;
    QuantParams params_{};
};

// Quantize-dequantize simulation. Zero-pads the grouped axis to a multiple of
// G, so any shape (and any B in [1,8]) is accepted; output has the input shape.
Matrix fake_quantize(const Matrix& m, const QuantParams& params);

}  // namespace kivi
