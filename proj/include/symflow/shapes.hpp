#pragma once

#include <vector>

#include "symflow/core.hpp"

namespace symflow {

/// Packing of a factor pair (X, Y) with X m x r and Y r x n into a single
/// column-major vector [vec X; vec Y].
struct FactorizationShape {
    Eigen::Index m = 0, n = 0, r = 0;

    Eigen::Index dim() const { return (m + n) * r; }

    Matrix unpack_x(const Vector& z) const {
        check_dims(z.size() == dim(), "FactorizationShape: bad vector length");
        return unvec(z.head(m * r), m, r);
    }

    Matrix unpack_y(const Vector& z) const {
        check_dims(z.size() == dim(), "FactorizationShape: bad vector length");
        return unvec(z.tail(r * n), r, n);
    }

    Vector pack(const Matrix& x, const Matrix& y) const {
        check_dims(x.rows() == m && x.cols() == r, "FactorizationShape: X shape");
        check_dims(y.rows() == r && y.cols() == n, "FactorizationShape: Y shape");
        Vector z(dim());
        z << vec(x), vec(y);
        return z;
    }
};

/// Layer widths n_0 .. n_l of a fully connected net and the column-major
/// packing [vec W_1, ..., vec W_l, b_1, ..., b_l].
struct NetShape {
    std::vector<Eigen::Index> widths;  // n_0 .. n_l

    Eigen::Index layers() const { return static_cast<Eigen::Index>(widths.size()) - 1; }

    Eigen::Index weight_offset(Eigen::Index i) const {  // i in 1..l
        Eigen::Index off = 0;
        for (Eigen::Index k = 1; k < i; ++k) off += widths[k] * widths[k - 1];
        return off;
    }

    Eigen::Index bias_offset(Eigen::Index i) const {
        Eigen::Index off = weight_offset(layers() + 1);
        for (Eigen::Index k = 1; k < i; ++k) off += widths[k];
        return off;
    }

    Eigen::Index dim() const { return bias_offset(layers()) + widths[layers()]; }

    Matrix weight(const Vector& z, Eigen::Index i) const {
        return unvec(z.segment(weight_offset(i), widths[i] * widths[i - 1]), widths[i], widths[i - 1]);
    }

    Vector bias(const Vector& z, Eigen::Index i) const {
        return z.segment(bias_offset(i), widths[i]);
    }

    Vector pack(const std::vector<Matrix>& w, const std::vector<Vector>& b) const {
        const Eigen::Index l = layers();
        check_dims(static_cast<Eigen::Index>(w.size()) == l && static_cast<Eigen::Index>(b.size()) == l,
                   "NetShape: expected one weight and bias per layer");
        Vector z(dim());
        for (Eigen::Index i = 1; i <= l; ++i) {
            check_dims(w[i - 1].rows() == widths[i] && w[i - 1].cols() == widths[i - 1], "NetShape: weight shape");
            check_dims(b[i - 1].size() == widths[i], "NetShape: bias shape");
            z.segment(weight_offset(i), widths[i] * widths[i - 1]) = vec(w[i - 1]);
            z.segment(bias_offset(i), widths[i]) = b[i - 1];
        }
        return z;
    }
};

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace symflow
