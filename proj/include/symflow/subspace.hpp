#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "symflow/core.hpp"

namespace symflow {

/// A linear subspace of R^n stored as an orthonormal basis (n x k, k may be 0).
class Subspace {
  public:
    /// Zero-dimensional subspace of R^n.
    static Subspace zero(Eigen::Index ambient_dim) {
        return Subspace(Matrix(ambient_dim, 0));
    }

    /// Wraps a matrix whose columns are already orthonormal (checked to 1e-12).
    static Subspace from_orthonormal(Matrix basis) {
        if (basis.cols() > 0) {
            Matrix gram = basis.transpose() * basis;
            double err = (gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
            check_dims(basis.cols() <= basis.rows(), "Subspace: more columns than ambient dimension");
            if (err > 1e-12) throw std::invalid_argument("Subspace: basis columns not orthonormal");
        }
        return Subspace(std::move(basis));
    }

    Eigen::Index ambient_dim() const { return basis_.rows(); }
    Eigen::Index dim() const { return basis_.cols(); }
    const Matrix& basis() const { return basis_; }

    /// Orthogonal projector P = B B^T as a dense matrix.
    Matrix projector() const { return basis_ * basis_.transpose(); }

  private:
    explicit Subspace(Matrix basis) : basis_(std::move(basis)) {}
    Matrix basis_;

    friend Subspace orthonormalize(const std::vector<Vector>&, double);
};

/// Builds an orthonormal basis of span(vectors) by modified Gram-Schmidt with
/// one re-orthogonalization pass. A candidate is dropped when its residual
/// after projection onto previously accepted columns is
/// <= rank_tol * (1 + max input norm).
inline Subspace orthonormalize(const std::vector<Vector>& vectors, double rank_tol = 1e-10) {
    if (rank_tol <= 0.0) throw std::invalid_argument("orthonormalize: rank_tol must be positive");
    if (vectors.empty()) return Subspace(Matrix(0, 0));
    const Eigen::Index n = vectors.front().size();
    double max_norm = 0.0;
    for (const Vector& v : vectors) {
        check_dims(v.size() == n, "orthonormalize: mismatched ambient dimensions");
        max_norm = std::max(max_norm, v.norm());
    }
    Matrix q(n, static_cast<Eigen::Index>(vectors.size()));
    Eigen::Index k = 0;
    const double drop = rank_tol * (1.0 + max_norm);
    for (const Vector& v : vectors) {
        Vector r = v;
        for (int pass = 0; pass < 2; ++pass)
            if (k > 0) r -= q.leftCols(k) * (q.leftCols(k).transpose() * r);
        double nrm = r.norm();
        if (nrm <= drop) continue;
        q.col(k++) = r / nrm;
    }
    return Subspace(Matrix(q.leftCols(k)));
}

inline Subspace orthonormalize(const Matrix& columns, double rank_tol = 1e-10) {
    std::vector<Vector> cols;
    cols.reserve(columns.cols());
    for (Eigen::Index j = 0; j < columns.cols(); ++j) cols.push_back(columns.col(j));
    if (cols.empty()) return Subspace::zero(columns.rows());
    return orthonormalize(cols, rank_tol);
}

/// Orthogonal projection of x onto S. A 0-dimensional S maps everything to 0.
inline Vector project(const Subspace& s, const Vector& x) {
    check_dims(x.size() == s.ambient_dim(), "project: dimension mismatch");
    if (s.dim() == 0) return Vector::Zero(s.ambient_dim());
    return s.basis() * (s.basis().transpose() * x);
}

/// d(V, W) = sup { d(v, W) : v in V, |v| = 1 }, with d(V, W) = 0 for V = {0}.
/// Computed as the largest singular value of (I - P_W) restricted to V.
inline double subspace_distance(const Subspace& v, const Subspace& w) {
    check_dims(v.ambient_dim() == w.ambient_dim(), "subspace_distance: dimension mismatch");
    if (v.dim() == 0) return 0.0;
    Matrix residual = v.basis() - w.basis() * (w.basis().transpose() * v.basis());
    return std::min(1.0, spectral_norm(residual));
}

/// Spectral norm of P_V - P_W; equals subspace_distance when dim V = dim W.
inline double projector_gap(const Subspace& v, const Subspace& w) {
    check_dims(v.ambient_dim() == w.ambient_dim(), "projector_gap: dimension mismatch");
    return spectral_norm(v.projector() - w.projector());
}

/// Orthonormal basis of the orthogonal complement of S.
inline Subspace orthogonal_complement(const Subspace& s) {
    const Eigen::Index n = s.ambient_dim();
    if (s.dim() == 0) return Subspace::from_orthonormal(Matrix::Identity(n, n));
    Eigen::JacobiSVD<Matrix> svd(s.basis(), Eigen::ComputeFullU);
    return Subspace::from_orthonormal(svd.matrixU().rightCols(n - s.dim()));
}

}  // namespace symflow
