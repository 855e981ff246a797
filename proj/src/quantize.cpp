#include "kivi/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kivi {

const char* axis_name(Axis axis) {
    return axis == Axis::per_token ? "per_token" : "per_channel";
}

void QuantParams::validate() const {
    if (bits < 1 || bits > 8) {
        throw ConfigError("bits must be in [1, 8], got " + std::to_string(bits));
    }
    if (group_size < 1) {
        throw ConfigError("group_size must be >= 1, got " + std::to_string(group_size));
    }
}

GroupQuant quantize_group(std::span<const float> values, int bits) {
    if (values.empty()) throw UsageError("quantize_group: empty group");
    if (bits < 1 || bits > 8) throw UsageError("quantize_group: bits out of range");

    const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *min_it;
    const double hi = *max_it;
    const int max_code = (1 << bits) - 1;

    GroupQuant g;
    g.zero_point = lo;
    g.codes.resize(values.size());
    if (hi == lo) {
        // Degenerate group: scale 1, all codes 0, exact reconstruction.
        g.scale = 1.0;
        std::fill(g.codes.begin(), g.codes.end(), std::uint8_t{0});
        return g;
    }
    g.scale = (hi - lo) / static_cast<double>(max_code);
    for (std::size_t i = 0; i < values.size(); ++i) {
        // nearbyint under the default FP environment rounds ties to even.
        double q = std::nearbyint((static_cast<double>(values[i]) - lo) / g.scale);
        q = std::clamp(q, 0.0, static_cast<double>(max_code));
        g.codes[i] = static_cast<std::uint8_t>(q);
    }
    return g;
}

std::vector<float> dequantize_group(std::span<const std::uint8_t> codes, double zero_point,
                                    double scale) {
    std::vector<float> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(codes[i]) * scale + zero_point);
    }
    return out;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits) {
    if (bits != 1 && bits != 2 && bits != 4 && bits != 8) {
        throw UsageError("pack_codes: bits must be one of {1,2,4,8}, got " +
                         std::to_string(bits));
    }
    const int max_code = (1 << bits) - 1;
    std::vector<std::uint8_t> bytes((codes.size() * bits + 7) / 8, 0);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] > max_code) {
            throw UsageError("pack_codes: code " + std::to_string(codes[i]) +
                             " exceeds 2^" + std::to_string(bits) + "-1");
        }
        const std::size_t bit = i * static_cast<std::size_t>(bits);
        bytes[bit >> 3] |= static_cast<std::uint8_t>(codes[i] << (bit & 7));
    }
    return bytes;
}

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int bits) {
    if (bits != 1 && bits != 2 && bits != 4 && bits != 8) {
        throw UsageError("unpack_codes: bits must be one of {1,2,4,8}");
    }
    if ((count * bits + 7) / 8 > bytes.size()) {
        throw UsageError("unpack_codes: byte buffer too short for " + std::to_string(count) +
                         " codes");
    }
    const std::uint8_t mask = static_cast<std::uint8_t>((1 << bits) - 1);
    std::vector<std::uint8_t> codes(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t bit = i * static_cast<std::size_t>(bits);
        codes[i] = static_cast<std::uint8_t>((bytes[bit >> 3] >> (bit & 7)) & mask);
    }
    return codes;
}

namespace {

// Group-ordered quantization shared by packed and fake-quant paths.
// Requires the grouped axis extent to be divisible by G.
struct GroupedCodes {
    std::vector<std::uint8_t> codes;
    std::vector<double> zero_points;
    std::vector<double> scales;
};

GroupedCodes quantize_grouped(const Matrix& m, const QuantParams& params) {
    params.validate();
    const Index G = params.group_size;
    const Index grouped_extent = (params.axis == Axis::per_channel) ? m.rows() : m.cols();
    if (grouped_extent % G != 0) {
        throw ShapeError(std::string("quantize: ") + axis_name(params.axis) +
                         " grouped axis extent " + std::to_string(grouped_extent) +
                         " not divisible by group size " + std::to_string(G) + " (matrix " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")");
    }
    GroupedCodes out;
    out.codes.reserve(static_cast<std::size_t>(m.size()));
    std::vector<float> buf(static_cast<std::size_t>(G));
    if (params.axis == Axis::per_channel) {
        for (Index tg = 0; tg < m.rows() / G; ++tg) {
            for (Index c = 0; c < m.cols(); ++c) {
                for (Index i = 0; i < G; ++i) buf[static_cast<std::size_t>(i)] = m(tg * G + i, c);
                GroupQuant g = quantize_group(buf, params.bits);
                out.codes.insert(out.codes.end(), g.codes.begin(), g.codes.end());
                out.zero_points.push_back(g.zero_point);
                out.scales.push_back(g.scale);
            }
        }
    } else {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index cg = 0; cg < m.cols() / G; ++cg) {
                for (Index i = 0; i < G; ++i) buf[static_cast<std::size_t>(i)] = m(r, cg * G + i);
                GroupQuant g = quantize_group(buf, params.bits);
                out.codes.insert(out.codes.end(), g.codes.begin(), g.codes.end());
                out.zero_points.push_back(g.zero_point);
                out.scales.push_back(g.scale);
            }
        }
    }
    return out;
}

Matrix dequantize_grouped(const std::vector<std::uint8_t>& codes,
                          const std::vector<double>& zero_points,
                          const std::vector<double>& scales, Index rows, Index cols,
                          const QuantParams& params) {
    const Index G = params.group_size;
    Matrix m(rows, cols);
    std::size_t pos = 0;
    std::size_t group = 0;
    auto value = [&](std::size_t i, std::size_t g) {
        return static_cast<float>(static_cast<double>(codes[i]) * scales[g] + zero_points[g]);
    };
    if (params.axis == Axis::per_channel) {
        for (Index tg = 0; tg < rows / G; ++tg) {
            for (Index c = 0; c < cols; ++c, ++group) {
                for (Index i = 0; i < G; ++i, ++pos) m(tg * G + i, c) = value(pos, group);
            }
        }
    } else {
        for (Index r = 0; r < rows; ++r) {
            for (Index cg = 0; cg < cols / G; ++cg, ++group) {
                for (Index i = 0; i < G; ++i, ++pos) m(r, cg * G + i) = value(pos, group);
            }
        }
    }
    return m;
}

}  // namespace

QuantizedTensor QuantizedTensor::quantize(const Matrix& m, const QuantParams& params) {
    params.validate();
    if (!params.packable()) {
        throw ConfigError("packed storage requires bits in {1,2,4,8}; B=" +
                          std::to_string(params.bits) + " is fake-quant only");
    }
    GroupedCodes g = quantize_grouped(m, params);
    QuantizedTensor t(params);
    t.rows_ = m.rows();
    t.cols_ = m.cols();
    t.packed_ = pack_codes(g.codes, params.bits);
    t.zero_points_ = std::move(g.zero_points);
    t.scales_ = std::move(g.scales);
    return t;
}

Matrix QuantizedTensor::dequantize() const {
    if (rows_ == 0) return Matrix(0, cols_);
    std::vector<std::uint8_t> codes =
        unpack_codes(packed_, static_cast<std::size_t>(code_count()), params_.bits);
    return dequantize_grouped(codes, zero_points_, scales_, rows_, cols_, params_);
}

void QuantizedTensor::concat_tokens(const QuantizedTensor& other) {
    if (other.rows_ == 0) return;
    if (rows_ == 0) {
        *this = other;
        return;
    }
    if (cols_ != other.cols_) {
        throw ShapeError("concat_tokens: column counts differ (" + std::to_string(cols_) +
                         " vs " + std::to_string(other.cols_) + ")");
    }
    if (params_.bits != other.params_.bits || params_.group_size != other.params_.group_size ||
        params_.axis != other.params_.axis) {
        throw ConfigError("concat_tokens: quantization parameters differ");
    }
    std::vector<std::uint8_t> codes =
        unpack_codes(packed_, static_cast<std::size_t>(code_count()), params_.bits);
    std::vector<std::uint8_t> more =
        unpack_codes(other.packed_, static_cast<std::size_t>(other.code_count()), params_.bits);
    codes.insert(codes.end(), more.begin(), more.end());
    packed_ = pack_codes(codes, params_.bits);
    zero_points_.insert(zero_points_.end(), other.zero_points_.begin(), other.zero_points_.end());
    scales_.insert(scales_.end(), other.scales_.begin(), other.scales_.end());
    rows_ += other.rows_;
}

Matrix fake_quantize(const Matrix& m, const QuantParams& params) {
    params.validate();
    if (m.size() == 0) return m;
    const Index G = params.group_size;
    const Index grouped_extent = (params.axis == Axis::per_channel) ? m.rows() : m.cols();
    const Index padded_extent = ((grouped_extent + G - 1) / G) * G;

    Matrix padded;
    if (padded_extent == grouped_extent) {
        padded = m;
    } else if (params.axis == Axis::per_channel) {
        padded = Matrix::Zero(padded_extent, m.cols());
        padded.topRows(m.rows()) = m;
    } else {
        padded = Matrix::Zero(m.rows(), padded_extent);
        padded.leftCols(m.cols()) = m;
    }
    GroupedCodes g = quantize_grouped(padded, params);
    Matrix deq = dequantize_grouped(g.codes, g.zero_points, g.scales, padded.rows(),
                                    padded.cols(), params);
    return deq.block(0, 0, m.rows(), m.cols());
}

}  // namespace kivi
