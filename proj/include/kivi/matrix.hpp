#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "kivi/errors.hpp"

namespace kivi {

// Row-major so that one row == one token, matching the cache layouts.
using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw UsageError(what + ": non-finite value in " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
    }
    return a * b;
}

// Numerically stable row softmax (per-row max subtraction).
inline Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        const float row_max = m.row(i).maxCoeff();
        out.row(i) = (m.row(i).array() - row_max).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

inline float frobenius(const Matrix& m) { return m.norm(); }

// Stacks b below a. Empty operands (0 rows) act as identities.
inline Matrix concat_rows(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) {
        throw ShapeError("concat_rows: column counts differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
    }
    Matrix out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
}

}  // namespace kivi
