#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symflow/lie_algebra.hpp"
#include "symflow/rng.hpp"
#include "symflow/shapes.hpp"

namespace symflow {

/// An invariant objective with evaluation and subgradient-selection oracles.
/// enumerate_extreme (when present) returns the extreme points of the Clarke
/// subdifferential at tiny scale, or nullopt where the enumeration is too
/// large. feasible_projection is set only for constrained problems.
struct Objective {
    std::string name;
    Eigen::Index dim = 0;
    std::shared_ptr<const LieAlgebraBasis> algebra;
    std::function<double(const Vector&)> eval;
    std::function<Vector(const Vector&)> subgrad;
    std::function<std::optional<std::vector<Vector>>(const Vector&)> enumerate_extreme;
    std::function<Vector(const Vector&)> feasible_projection;
};

/// f(X, Y) = |XY - M|_1 on packed (X, Y), invariant under the GL(r) action.
/// Selection rule: S_ij = sign(residual_ij) with sign(0) := 0, subgradient
/// (S Y^T, X^T S). The enumerator flips every exactly-zero residual entry to
/// +-1 and is available while at most 16 entries are zero.
inline Objective l1_matrix_factorization(const Matrix& target, Eigen::Index r) {
    if (r < 1) throw std::invalid_argument("l1_matrix_factorization: r must be at least 1");
    FactorizationShape shape{target.rows(), target.cols(), r};
    Objective obj;
    obj.name = "l1_mf";
    obj.dim = shape.dim();
    obj.algebra = std::make_shared<LieAlgebraBasis>(factorization_algebra(shape.m, shape.n, shape.r));
    obj.eval = [shape, target](const Vector& z) {
        return (shape.unpack_x(z) * shape.unpack_y(z) - target).cwiseAbs().sum();
    };
    auto subgrad_for = [shape](const Vector& z, const Matrix& s) {
        Matrix x = shape.unpack_x(z);
        Matrix y = shape.unpack_y(z);
        return shape.pack(s * y.transpose(), x.transpose() * s);
    };
    obj.subgrad = [shape, target, subgrad_for](const Vector& z) {
        Matrix residual = shape.unpack_x(z) * shape.unpack_y(z) - target;
        Matrix s = residual.array().sign();
        return subgrad_for(z, s);
    };
    obj.enumerate_extreme = [shape, target, subgrad_for](const Vector& z) -> std::optional<std::vector<Vector>> {
        Matrix residual = shape.unpack_x(z) * shape.unpack_y(z) - target;
        std::vector<std::pair<Eigen::Index, Eigen::Index>> zeros;
        for (Eigen::Index j = 0; j < residual.cols(); ++j)
            for (Eigen::Index i = 0; i < residual.rows(); ++i)
                if (residual(i, j) == 0.0) zeros.emplace_back(i, j);
        if (zeros.size() > 16) return std::nullopt;
        Matrix base = residual.array().sign();
        std::vector<Vector> out;
        out.reserve(std::size_t{1} << zeros.size());
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << zeros.size()); ++mask) {
            Matrix s = base;
            for (std::size_t b = 0; b < zeros.size(); ++b)
                s(zeros[b].first, zeros[b].second) = (mask >> b) & 1 ? 1.0 : -1.0;
            out.push_back(subgrad_for(z, s));
        }
        return out;
    };
    return obj;
}

/// f(X, Y) = |XY - M|_F^2, optionally plus the indicator of the nonnegative
/// orthant. The constrained variant projects onto the orthant and refuses
/// subgradients at boundary points.
inline Objective frobenius_mf(const Matrix& target, Eigen::Index r, bool nonnegative = false) {
    if (r < 1) throw std::invalid_argument("frobenius_mf: r must be at least 1");
    FactorizationShape shape{target.rows(), target.cols(), r};
    Objective obj;
    obj.name = nonnegative ? "nmf" : "frobenius_mf";
    obj.dim = shape.dim();
    obj.algebra = std::make_shared<LieAlgebraBasis>(
        nonnegative ? diagonal_rescaling_algebra(shape.m, shape.n, shape.r)
                    : factorization_algebra(shape.m, shape.n, shape.r));
    obj.eval = [shape, target, nonnegative](const Vector& z) {
        if (nonnegative && z.minCoeff() < 0.0) return std::numeric_limits<double>::infinity();
        return (shape.unpack_x(z) * shape.unpack_y(z) - target).squaredNorm();
    };
    obj.subgrad = [shape, target, nonnegative](const Vector& z) {
        if (nonnegative && z.minCoeff() <= 0.0)
            throw std::domain_error("frobenius_mf: subgradient requested at a boundary point");
        Matrix x = shape.unpack_x(z);
        Matrix y = shape.unpack_y(z);
        Matrix residual = x * y - target;
        return shape.pack(2.0 * residual * y.transpose(), 2.0 * x.transpose() * residual);
    };
    if (nonnegative)
        obj.feasible_projection = [](const Vector& z) { return z.cwiseMax(0.0).eval(); };
    return obj;
}

/// f(x) = (<x, Dx> - 1)^2 with D = diag(1, .., 1, -1), Lorentz-invariant.
inline Objective lorentz_quartic(Eigen::Index n) {
    if (n < 2) throw std::invalid_argument("lorentz_quartic: n must be at least 2");
    Vector d = Vector::Ones(n);
    d(n - 1) = -1.0;
    Objective obj;
    obj.name = "lorentz";
    obj.dim = n;
    obj.algebra = std::make_shared<LieAlgebraBasis>(lorentz_algebra(n));
    obj.eval = [d](const Vector& x) {
        double q = x.dot(d.asDiagonal() * x) - 1.0;
        return q * q;
    };
    obj.subgrad = [d](const Vector& x) {
        double q = x.dot(d.asDiagonal() * x) - 1.0;
        return (4.0 * q * (d.asDiagonal() * x)).eval();
    };
    return obj;
}

/// Mean squared loss of a fully connected net with leaky-ReLU activation
/// sigma(t) = max{a t, t}, a in [0, 1). The subgradient is the reverse-mode
/// chain-rule selection with sigma'(0) := zero_slope, a conservative-field
/// element. Invariant under per-layer positive rescaling.
inline Objective relu_network(const Matrix& inputs, const Matrix& targets,
                              const std::vector<Eigen::Index>& widths, double leak = 0.0,
                              double zero_slope = 0.0) {
    NetShape shape{widths};
    const Eigen::Index l = shape.layers();
    if (l < 2) throw std::invalid_argument("relu_network: need at least two layers");
    if (leak < 0.0 || leak >= 1.0) throw std::invalid_argument("relu_network: leak must lie in [0, 1)");
    if (zero_slope < 0.0 || zero_slope > 1.0)
        throw std::invalid_argument("relu_network: zero slope must lie in [0, 1]");
    check_dims(inputs.rows() == shape.widths.front(), "relu_network: input rows must match first width");
    check_dims(targets.rows() == shape.widths.back(), "relu_network: target rows must match last width");
    check_dims(inputs.cols() == targets.cols() && inputs.cols() >= 1, "relu_network: sample count mismatch");

    const double samples = static_cast<double>(inputs.cols());
    auto forward = [shape, inputs, leak, l](const Vector& z, std::vector<Matrix>* pre,
                                            std::vector<Matrix>* act) {
        Matrix a = inputs;
        if (act) act->push_back(a);
        for (Eigen::Index i = 1; i <= l; ++i) {
            Matrix zi = (shape.weight(z, i) * a).colwise() + shape.bias(z, i);
            if (pre) pre->push_back(zi);
            if (i < l) {
                a = zi.cwiseMax(leak * zi);
                if (act) act->push_back(a);
            } else {
                a = zi;
            }
        }
        return a;
    };

    Objective obj;
    obj.name = "relu_net";
    obj.dim = shape.dim();
    obj.algebra = std::make_shared<LieAlgebraBasis>(nn_rescaling_algebra(shape));
    obj.eval = [forward, targets, samples](const Vector& z) {
        return (forward(z, nullptr, nullptr) - targets).squaredNorm() / samples;
    };
    obj.subgrad = [shape, forward, targets, samples, leak, zero_slope, l](const Vector& z) {
        std::vector<Matrix> pre, act;
        Matrix out = forward(z, &pre, &act);
        std::vector<Matrix> gw(static_cast<std::size_t>(l));
        std::vector<Vector> gb(static_cast<std::size_t>(l));
        Matrix g = 2.0 * (out - targets) / samples;
        for (Eigen::Index i = l; i >= 1; --i) {
            gw[static_cast<std::size_t>(i - 1)] = g * act[static_cast<std::size_t>(i - 1)].transpose();
            gb[static_cast<std::size_t>(i - 1)] = g.rowwise().sum();
            if (i > 1) {
                Matrix back = shape.weight(z, i).transpose() * g;
                const Matrix& zi = pre[static_cast<std::size_t>(i - 2)];
                g = back.binaryExpr(zi, [leak, zero_slope](double gv, double t) {
                    return gv * (t > 0.0 ? 1.0 : (t < 0.0 ? leak : zero_slope));
                });
            }
        }
        return shape.pack(gw, gb);
    };
    return obj;
}

// ---------------------------------------------------------------------------
// Invariance and equivariance checks
// ---------------------------------------------------------------------------

/// Second-order group-element surrogate g2(t) = I + tB + t^2 B^2 / 2. For an
/// invariant objective, eval(g2(t) x) - eval(x) = O(t^3).
inline double invariance_residual(const Objective& obj, const Vector& x, double t) {
    double fx = obj.eval(x);
    double worst = 0.0;
    const Eigen::Index n = obj.algebra->n();
    for (const Matrix& b : obj.algebra->generators()) {
        Matrix g2 = Matrix::Identity(n, n) + t * b + 0.5 * t * t * (b * b);
        worst = std::max(worst, std::abs(obj.eval(g2 * x) - fx));
    }
    return worst;
}

struct EquivarianceReport {
    int samples = 0;
    int skipped = 0;
    double max_rel_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Checks the conservative-field equivariance D(g^{-1} x) = g^T D(x) on the
/// subgradient selection. Diagonal generators are tested with exact group
/// elements at the given scales; other generators with first-order surrogates
/// I + tB (skipped when singular), whose residual carries an O(t^2) error.
inline EquivarianceReport conservative_field_equivariance_check(
    const Objective& obj, int trials, double tol, std::uint64_t seed,
    const std::vector<double>& exact_scales = {0.5, 2.0}, double surrogate_t = 1e-3,
    bool exact_only = false) {
    const LieAlgebraBasis& g = *obj.algebra;
    const Eigen::Index n = g.n();
    Rng rng(derive_seed(seed, "equivariance"));
    EquivarianceReport report;
    report.tolerance = tol;
    for (int trial = 0; trial < trials; ++trial) {
        Vector x = rng.normal_vector(n);
        if (obj.feasible_projection) x = x.cwiseAbs() + Vector::Constant(n, 0.1);
        Vector base = obj.subgrad(x);
        for (Eigen::Index i = 0; i < g.generator_count(); ++i) {
            if (g.generator_is_diagonal(i)) {
                for (double d : exact_scales) {
                    Matrix el = g.exact_diagonal_element(i, d);
                    Matrix inv = g.exact_diagonal_inverse(i, d);
                    Vector lhs = obj.subgrad(inv * x);
                    Vector rhs = el.transpose() * base;
                    report.max_rel_residual =
                        std::max(report.max_rel_residual, (lhs - rhs).norm() / (1.0 + rhs.norm()));
                    ++report.samples;
                }
            } else if (!exact_only) {
                const Matrix& b = g.generators()[static_cast<std::size_t>(i)];
                Matrix el = Matrix::Identity(n, n) + surrogate_t * b;
                Eigen::FullPivLU<Matrix> lu(el);
                if (!lu.isInvertible()) {
                    ++report.skipped;
                    continue;
                }
                Vector lhs = obj.subgrad(lu.solve(x));
                Vector rhs = el.transpose() * base;
                report.max_rel_residual =
                    std::max(report.max_rel_residual, (lhs - rhs).norm() / (1.0 + rhs.norm()));
                ++report.samples;
            }
        }
    }
    report.pass = report.samples > 0 && report.max_rel_residual <= tol;
    return report;
}

}  // namespace symflow
