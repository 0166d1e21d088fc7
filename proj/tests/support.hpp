#pragma once

// Helpers shared by the unit and acceptance suites. These stay independent of
// the library code paths they are used to check.

#include <vector>

#include "symflow/core.hpp"
#include "symflow/rng.hpp"

namespace testsupport {

using symflow::Matrix;
using symflow::Vector;

inline Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

// Orthonormal-row matrix of shape r x n (n >= r).
inline Matrix orthonormal_rows(symflow::Rng& rng, Eigen::Index r, Eigen::Index n) {
    Matrix tall = rng.normal_matrix(n, r);
    Eigen::HouseholderQR<Matrix> qr(tall);
    Matrix q = qr.householderQ() * Matrix::Identity(n, r);
    return q.transpose();
}

inline Matrix psd_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

// Least-squares fit of coords ~ L q over the given samples.
inline Matrix fit_linear_map(const std::vector<Vector>& qs, const std::vector<Vector>& cs) {
    Matrix q(qs.front().size(), static_cast<Eigen::Index>(qs.size()));
    Matrix c(cs.front().size(), static_cast<Eigen::Index>(cs.size()));
    for (std::size_t i = 0; i < qs.size(); ++i) {
        q.col(static_cast<Eigen::Index>(i)) = qs[i];
        c.col(static_cast<Eigen::Index>(i)) = cs[i];
    }
    return q.transpose().colPivHouseholderQr().solve(c.transpose()).transpose();
}

inline Vector upper_triangle(const Matrix& m) {
    Eigen::Index r = m.rows();
    Vector out(r * (r + 1) / 2);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = i; j < r; ++j) out(at++) = m(i, j);
    return out;
}

// Residual of the uniform-average certificate that v is a convex combination
// of the given points. The l1 selection equals the average of its sign-pattern
// completions, so a small residual certifies hull membership constructively.
inline double convex_combination_residual(const std::vector<Vector>& extremes, const Vector& v) {
    Vector mean = Vector::Zero(v.size());
    for (const Vector& e : extremes) mean += e;
    mean /= static_cast<double>(extremes.size());
    return (mean - v).norm();
}

}  // namespace testsupport
