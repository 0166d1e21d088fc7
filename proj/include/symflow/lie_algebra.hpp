#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "symflow/core.hpp"
#include "symflow/shapes.hpp"
#include "symflow/subspace.hpp"

namespace symflow {

/// Generator basis B_1..B_k of a Lie subalgebra of gl(n, R). Construction
/// verifies linear independence of the generators and closure of the span
/// under the commutator; the symmetric part s(g) = g intersected with Sym(n)
/// is precomputed as an orthonormal (Frobenius) basis.
class LieAlgebraBasis {
  public:
    LieAlgebraBasis(Eigen::Index n, std::vector<Matrix> generators, std::string name)
        : n_(n), generators_(std::move(generators)), name_(std::move(name)),
          span_(Subspace::zero(n * n)), symmetric_(Subspace::zero(n * n)) {
        if (generators_.empty()) throw std::invalid_argument(name_ + ": generator list is empty");
        Matrix stacked(n_ * n_, static_cast<Eigen::Index>(generators_.size()));
        for (std::size_t i = 0; i < generators_.size(); ++i) {
            check_dims(generators_[i].rows() == n_ && generators_[i].cols() == n_,
                       name_ + ": generator is not n x n");
            stacked.col(static_cast<Eigen::Index>(i)) = vec(generators_[i]);
        }
        Eigen::JacobiSVD<Matrix> svd(stacked);
        const auto& sv = svd.singularValues();
        if (sv.size() < stacked.cols() || sv.minCoeff() <= 1e-10 * std::max(1.0, sv.maxCoeff()))
            throw std::invalid_argument(name_ + ": generators are not linearly independent");

        span_ = orthonormalize(stacked);
        verify_commutator_closure();
        compute_symmetric_part();
    }

    Eigen::Index n() const { return n_; }
    const std::string& name() const { return name_; }
    const std::vector<Matrix>& generators() const { return generators_; }
    Eigen::Index generator_count() const { return static_cast<Eigen::Index>(generators_.size()); }

    /// Orthonormal basis of span(g) inside R^{n^2} (vectorized).
    const Subspace& span() const { return span_; }

    /// Orthonormal basis of s(g) = { B in g : B = B^T }, vectorized.
    const Subspace& symmetric_part() const { return symmetric_; }

    /// Same basis as n x n matrices.
    const std::vector<Matrix>& symmetric_basis() const { return symmetric_basis_; }

    Eigen::Index symmetric_dim() const { return symmetric_.dim(); }

    /// Linear combination sum_i coeffs_i B_i of the generators.
    Matrix combine(const Vector& coeffs) const {
        check_dims(coeffs.size() == generator_count(), "combine: coefficient count");
        Matrix out = Matrix::Zero(n_, n_);
        for (Eigen::Index i = 0; i < coeffs.size(); ++i) out += coeffs(i) * generators_[static_cast<std::size_t>(i)];
        return out;
    }

    bool generator_is_diagonal(Eigen::Index i) const {
        const Matrix& b = generators_[static_cast<std::size_t>(i)];
        return (b - Matrix(b.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    }

    /// Exact group element for a diagonal generator B: diag(d^{B_jj}) with
    /// d > 0. This is a genuine element of the one-parameter subgroup, so
    /// invariance and equivariance hold to machine precision.
    Matrix exact_diagonal_element(Eigen::Index i, double d) const {
        if (!generator_is_diagonal(i))
            throw std::invalid_argument(name_ + ": generator has no exact diagonal element");
        if (d <= 0.0) throw std::invalid_argument("exact_diagonal_element: d must be positive");
        Vector diag(n_);
        const Matrix& b = generators_[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_; ++j) {
            double beta = b(j, j);
            if (beta == 1.0) diag(j) = d;
            else if (beta == -1.0) diag(j) = 1.0 / d;
            else if (beta == 0.0) diag(j) = 1.0;
            else diag(j) = std::pow(d, beta);
        }
        return Matrix(diag.asDiagonal());
    }

    /// Inverse of exact_diagonal_element(i, d), built from the same d so that
    /// the pair is exact up to one rounding of 1/d.
    Matrix exact_diagonal_inverse(Eigen::Index i, double d) const {
        if (!generator_is_diagonal(i))
            throw std::invalid_argument(name_ + ": generator has no exact diagonal element");
        Vector diag(n_);
        const Matrix& b = generators_[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_; ++j) {
            double beta = b(j, j);
            if (beta == 1.0) diag(j) = 1.0 / d;
            else if (beta == -1.0) diag(j) = d;
            else if (beta == 0.0) diag(j) = 1.0;
            else diag(j) = std::pow(d, -beta);
        }
        return Matrix(diag.asDiagonal());
    }

  private:
    void verify_commutator_closure() {
        for (std::size_t i = 0; i < generators_.size(); ++i) {
            for (std::size_t j = i + 1; j < generators_.size(); ++j) {
                const Matrix& a = generators_[i];
                const Matrix& b = generators_[j];
                Matrix comm = a * b - b * a;
                Vector c = vec(comm);
                double residual = (c - project(span_, c)).norm();
                if (residual > 1e-8 * (1.0 + a.norm() * b.norm()))
                    throw std::invalid_argument(name_ + ": span is not closed under the commutator");
            }
        }
    }

    void compute_symmetric_part() {
        // Null space of the skew map c -> vec(M - M^T), M = mat(Q c), over the
        // orthonormal span coordinates. The kernel is exactly g intersected
        // with the symmetric matrices.
        const Eigen::Index k = span_.dim();
        Matrix skew(n_ * n_, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            Matrix m = unvec(span_.basis().col(j), n_, n_);
            skew.col(j) = vec(Matrix(m - m.transpose()));
        }
        Eigen::JacobiSVD<Matrix> svd(skew, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        double cutoff = 1e-8 * std::max(1.0, sv.size() > 0 ? sv.maxCoeff() : 0.0);
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > cutoff) ++rank;
        Matrix null_coeffs = svd.matrixV().rightCols(k - rank);
        symmetric_ = Subspace::from_orthonormal(span_.basis() * null_coeffs);
        symmetric_basis_.clear();
        for (Eigen::Index j = 0; j < symmetric_.dim(); ++j) {
            Matrix m = unvec(symmetric_.basis().col(j), n_, n_);
            symmetric_basis_.push_back(0.5 * (m + m.transpose()));  // scrub rounding skew
        }
    }

    Eigen::Index n_;
    std::vector<Matrix> generators_;
    std::string name_;
    Subspace span_;
    Subspace symmetric_;
    std::vector<Matrix> symmetric_basis_;
};

/// Conserved quantity C(x): the Frobenius projection of x x^T onto s(g),
/// stored both as the n x n matrix and as coordinates over the orthonormal
/// s(g) basis.
struct ConservedQuantity {
    Matrix value;
    Vector coords;
};

/// Projection coordinates of an arbitrary n x n matrix onto s(g).
inline Vector symmetric_projection_coords(const LieAlgebraBasis& g, const Matrix& m) {
    Vector coords(g.symmetric_dim());
    for (Eigen::Index j = 0; j < coords.size(); ++j)
        coords(j) = frobenius_dot(m, g.symmetric_basis()[static_cast<std::size_t>(j)]);
    return coords;
}

inline Matrix symmetric_combination(const LieAlgebraBasis& g, const Vector& coords) {
    Matrix out = Matrix::Zero(g.n(), g.n());
    for (Eigen::Index j = 0; j < coords.size(); ++j)
        out += coords(j) * g.symmetric_basis()[static_cast<std::size_t>(j)];
    return out;
}

inline ConservedQuantity conserved_quantity(const LieAlgebraBasis& g, const Vector& x) {
    check_dims(x.size() == g.n(), "conserved_quantity: dimension mismatch");
    Vector coords = symmetric_projection_coords(g, x * x.transpose());
    return {symmetric_combination(g, coords), coords};
}

/// Tangent space of the orbit Gx under the natural action: span{B_i x}.
inline Subspace orbit_tangent(const LieAlgebraBasis& g, const Vector& x, double rank_tol = 1e-10) {
    check_dims(x.size() == g.n(), "orbit_tangent: dimension mismatch");
    std::vector<Vector> images;
    images.reserve(static_cast<std::size_t>(g.generator_count()));
    for (const Matrix& b : g.generators()) images.push_back(b * x);
    return orthonormalize(images, rank_tol);
}

/// Adjoint form of the conserved quantity: coefficients c over the generators
/// solving G c = r with G_ij = <B_i, B_j>_F and r_i = <B_i x, x>. The
/// reconstructed matrix combine(c) is symmetric and proportional to C(x) for
/// the built-in algebras (which are closed under transposition).
inline Vector adjoint_conserved(const LieAlgebraBasis& g, const Vector& x) {
    check_dims(x.size() == g.n(), "adjoint_conserved: dimension mismatch");
    const Eigen::Index k = g.generator_count();
    Matrix gram(k, k);
    Vector rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j)
            gram(i, j) = frobenius_dot(g.generators()[static_cast<std::size_t>(i)],
                                       g.generators()[static_cast<std::size_t>(j)]);
        rhs(i) = (g.generators()[static_cast<std::size_t>(i)] * x).dot(x);
    }
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible())
        throw std::runtime_error(g.name() + ": singular Gram matrix, generator independence violated");
    return lu.solve(rhs);
}

// ---------------------------------------------------------------------------
// Built-in algebras
// ---------------------------------------------------------------------------

/// so(n-1, 1): matrices with B^T D + D B = 0 for D = diag(1, .., 1, -1).
/// Block form [[A, b], [b^T, 0]] with A skew; n(n-1)/2 generators.
inline LieAlgebraBasis lorentz_algebra(Eigen::Index n) {
    if (n < 2) throw std::invalid_argument("lorentz_algebra: n must be at least 2");
    std::vector<Matrix> gens;
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        for (Eigen::Index j = i + 1; j < n - 1; ++j) {
            Matrix b = Matrix::Zero(n, n);
            b(i, j) = 1.0;
            b(j, i) = -1.0;
            gens.push_back(b);
        }
    }
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        Matrix b = Matrix::Zero(n, n);
        b(i, n - 1) = 1.0;
        b(n - 1, i) = 1.0;
        gens.push_back(b);
    }
    return LieAlgebraBasis(n, std::move(gens), "lorentz(" + std::to_string(n) + ")");
}

/// Algebra of the GL(r) action A(X, Y) = (XA, A^{-1}Y) on packed (X, Y):
/// generators (B^T kron I_m, -I_n kron B) over the standard basis of r x r
/// matrices; r^2 generators on R^{(m+n)r}.
inline LieAlgebraBasis factorization_algebra(Eigen::Index m, Eigen::Index n, Eigen::Index r) {
    if (m < 1 || n < 1 || r < 1) throw std::invalid_argument("factorization_algebra: sizes must be positive");
    const Eigen::Index mr = m * r, rn = r * n, dim = mr + rn;
    std::vector<Matrix> gens;
    for (Eigen::Index p = 0; p < r; ++p) {
        for (Eigen::Index q = 0; q < r; ++q) {
            Matrix e = Matrix::Zero(r, r);
            e(p, q) = 1.0;
            Matrix gen = Matrix::Zero(dim, dim);
            gen.topLeftCorner(mr, mr) = kron(e.transpose(), Matrix::Identity(m, m));
            gen.bottomRightCorner(rn, rn) = -kron(Matrix::Identity(n, n), e);
            gens.push_back(gen);
        }
    }
    return LieAlgebraBasis(dim, std::move(gens),
                           "factorization(" + std::to_string(m) + "," + std::to_string(n) + "," +
                               std::to_string(r) + ")");
}

/// Same action restricted to positive diagonal A; r generators.
inline LieAlgebraBasis diagonal_rescaling_algebra(Eigen::Index m, Eigen::Index n, Eigen::Index r) {
    if (m < 1 || n < 1 || r < 1)
        throw std::invalid_argument("diagonal_rescaling_algebra: sizes must be positive");
    const Eigen::Index mr = m * r, rn = r * n, dim = mr + rn;
    std::vector<Matrix> gens;
    for (Eigen::Index p = 0; p < r; ++p) {
        Matrix e = Matrix::Zero(r, r);
        e(p, p) = 1.0;
        Matrix gen = Matrix::Zero(dim, dim);
        gen.topLeftCorner(mr, mr) = kron(e, Matrix::Identity(m, m));
        gen.bottomRightCorner(rn, rn) = -kron(Matrix::Identity(n, n), e);
        gens.push_back(gen);
    }
    return LieAlgebraBasis(dim, std::move(gens),
                           "diagonal_rescaling(" + std::to_string(m) + "," + std::to_string(n) + "," +
                               std::to_string(r) + ")");
}

/// Per-layer positive rescaling of a fully connected net,
/// D(W, b) = (D_1 W_1, D_2 W_2 D_1^{-1}, ..., D_1 b_1, ..., b_l): one diagonal
/// generator per hidden unit, n_1 + .. + n_{l-1} in total.
inline LieAlgebraBasis nn_rescaling_algebra(const NetShape& shape) {
    const Eigen::Index l = shape.layers();
    if (l < 2) throw std::invalid_argument("nn_rescaling_algebra: need at least two layers");
    for (Eigen::Index w : shape.widths)
        if (w < 1) throw std::invalid_argument("nn_rescaling_algebra: widths must be positive");
    const Eigen::Index dim = shape.dim();
    std::vector<Matrix> gens;
    for (Eigen::Index layer = 1; layer < l; ++layer) {
        const Eigen::Index rows = shape.widths[layer];
        const Eigen::Index prev = shape.widths[layer - 1];
        const Eigen::Index next = shape.widths[layer + 1];
        for (Eigen::Index unit = 0; unit < rows; ++unit) {
            Matrix gen = Matrix::Zero(dim, dim);
            for (Eigen::Index c = 0; c < prev; ++c) {
                Eigen::Index idx = shape.weight_offset(layer) + c * rows + unit;
                gen(idx, idx) = 1.0;
            }
            for (Eigen::Index rr = 0; rr < next; ++rr) {
                Eigen::Index idx = shape.weight_offset(layer + 1) + unit * next + rr;
                gen(idx, idx) = -1.0;
            }
            Eigen::Index bidx = shape.bias_offset(layer) + unit;
            gen(bidx, bidx) = 1.0;
            gens.push_back(gen);
        }
    }
    std::string label = "nn_rescaling(";
    for (std::size_t i = 0; i < shape.widths.size(); ++i)
        label += (i ? "-" : "") + std::to_string(shape.widths[i]);
    return LieAlgebraBasis(dim, std::move(gens), label + ")");
}

/// One-parameter group of paired plane rotations at speeds 1 and a on R^4;
/// orbits are immersed but not embedded for irrational a.
inline LieAlgebraBasis rotation_pair_algebra(double a) {
    Matrix gen = Matrix::Zero(4, 4);
    gen(0, 1) = -1.0;
    gen(1, 0) = 1.0;
    gen(2, 3) = -a;
    gen(3, 2) = a;
    return LieAlgebraBasis(4, {gen}, "rotation_pair");
}

// ---------------------------------------------------------------------------
// Closed-form readouts for the built-in conserved quantities
// ---------------------------------------------------------------------------

/// X^T X - Y Y^T for a packed factor pair.
inline Matrix balance_matrix(const FactorizationShape& shape, const Vector& z) {
    Matrix x = shape.unpack_x(z);
    Matrix y = shape.unpack_y(z);
    return x.transpose() * x - y * y.transpose();
}

/// Stacked diag(W_i W_i^T + b_i b_i^T - W_{i+1}^T W_{i+1}), i = 1 .. l-1.
inline Vector nn_balance_diagonals(const NetShape& shape, const Vector& z) {
    const Eigen::Index l = shape.layers();
    Eigen::Index total = 0;
    for (Eigen::Index i = 1; i < l; ++i) total += shape.widths[i];
    Vector out(total);
    Eigen::Index at = 0;
    for (Eigen::Index i = 1; i < l; ++i) {
        Matrix wi = shape.weight(z, i);
        Matrix wn = shape.weight(z, i + 1);
        Vector bi = shape.bias(z, i);
        Matrix q = wi * wi.transpose() + bi * bi.transpose() - wn.transpose() * wn;
        out.segment(at, shape.widths[i]) = q.diagonal();
        at += shape.widths[i];
    }
    return out;
}

}  // namespace symflow
