#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace symflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when operands disagree on ambient dimension or shape.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised on malformed or inconsistent run configurations.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void check_dims(bool ok, const std::string& what) {
    if (!ok) throw dimension_error(what);
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
    return (a.array() * b.array()).sum();
}

/// Spectral norm of a small dense matrix via SVD.
inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    check_dims(v.size() == rows * cols, "unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Full-precision scientific rendering (17 significant digits) used by the
/// CSV writer; round-trips doubles exactly.
inline std::string format_full(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.16e", x);
    return buf;
}

}  // namespace symflow
