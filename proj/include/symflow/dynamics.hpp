#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "symflow/objectives.hpp"

namespace symflow {

/// Iterate record of a constant-step subgradient run, with per-step conserved
/// coordinates and the residual of the exact step identity
/// C(x + alpha v) = C(x) + alpha^2 C(v).
struct Trajectory {
    std::vector<Vector> points;             // x_0 .. x_K
    std::vector<double> values;             // f(x_k)
    std::vector<Vector> steps;              // v_k, one per step
    double alpha = 0.0;
    std::vector<Vector> conserved;          // C(x_k) coordinates over s(g)
    std::vector<double> identity_residual;  // |C(x_{k+1}) - C(x_k) - a^2 C(v_k)|_F
    bool diverged = false;
    std::string truncation_reason;          // "nonfinite" or "boundary" when truncated

    Eigen::Index step_count() const { return static_cast<Eigen::Index>(steps.size()); }

    double max_identity_residual() const {
        double worst = 0.0;
        for (double r : identity_residual) worst = std::max(worst, r);
        return worst;
    }

    /// |C(x_K) - C(x_0)| in Frobenius norm (coordinates are orthonormal).
    double total_drift() const {
        if (conserved.empty()) return 0.0;
        return (conserved.back() - conserved.front()).norm();
    }

    /// Frobenius drift of C(x_k) from C(x_0).
    double drift_at(Eigen::Index k) const { return (conserved[static_cast<std::size_t>(k)] - conserved.front()).norm(); }
};

/// x_{k+1} = x_k - alpha v_k with v_k = subgrad(x_k), plus the feasible
/// projection when the objective carries one. Deterministic given the seed;
/// the seed is threaded for forward compatibility with randomized selections.
inline Trajectory subgradient_descent(const Objective& obj, const Vector& x0, double alpha,
                                      Eigen::Index max_steps, std::uint64_t /*seed*/ = 0) {
    if (alpha <= 0.0) throw std::invalid_argument("subgradient_descent: alpha must be positive");
    check_dims(x0.size() == obj.dim, "subgradient_descent: x0 dimension mismatch");
    const LieAlgebraBasis& g = *obj.algebra;
    Trajectory traj;
    traj.alpha = alpha;
    traj.points.reserve(static_cast<std::size_t>(max_steps) + 1);

    Vector x = x0;
    traj.points.push_back(x);
    traj.values.push_back(obj.eval(x));
    ConservedQuantity c = conserved_quantity(g, x);
    traj.conserved.push_back(c.coords);
    Matrix c_value = c.value;

    for (Eigen::Index k = 0; k < max_steps; ++k) {
        Vector v;
        try {
            v = obj.subgrad(x);
        } catch (const std::domain_error&) {
            traj.diverged = true;
            traj.truncation_reason = "boundary";
            break;
        }
        if (!v.allFinite()) {
            traj.diverged = true;
            traj.truncation_reason = "nonfinite";
            break;
        }
        Vector next = x - alpha * v;
        if (obj.feasible_projection) next = obj.feasible_projection(next);
        double fnext = obj.eval(next);
        if (!next.allFinite() || !std::isfinite(fnext)) {
            traj.diverged = true;
            traj.truncation_reason = "nonfinite";
            break;
        }
        ConservedQuantity cv = conserved_quantity(g, v);
        ConservedQuantity cnext = conserved_quantity(g, next);
        traj.steps.push_back(v);
        traj.identity_residual.push_back((cnext.value - c_value - alpha * alpha * cv.value).norm());
        traj.points.push_back(next);
        traj.values.push_back(fnext);
        traj.conserved.push_back(cnext.coords);
        x = next;
        c_value = cnext.value;
    }
    return traj;
}

/// Explicit Euler discretization of the subgradient flow over a fixed
/// horizon: ceil(T / alpha) steps of the subgradient method.
inline Trajectory flow_integrate(const Objective& obj, const Vector& x0, double horizon, double alpha,
                                 std::uint64_t seed = 0) {
    if (horizon <= 0.0) throw std::invalid_argument("flow_integrate: horizon must be positive");
    if (alpha <= 0.0) throw std::invalid_argument("flow_integrate: alpha must be positive");
    double steps = std::ceil(horizon / alpha);
    if (steps > 1e7) throw std::invalid_argument("flow_integrate: more than 1e7 steps requested");
    return subgradient_descent(obj, x0, alpha, static_cast<Eigen::Index>(steps), seed);
}

struct ChetaevMonitor {
    std::vector<double> values;      // <C(x_k), w> per iterate
    std::vector<double> increments;  // consecutive differences
    double max_identity_gap = 0.0;   // worst |increment - a^2 <C(v_k), w>|
    bool identity_ok = false;        // gap <= 1e-10
    bool monotone = false;           // every increment >= -1e-12 (1 + |C(x_k)|)
};

/// Evaluates the Chetaev function <C(x_k), w> along a trajectory produced
/// with the same algebra, for a unit-Frobenius direction w in s(g).
inline ChetaevMonitor chetaev_monitor(const Trajectory& traj, const LieAlgebraBasis& g, const Matrix& w) {
    check_dims(w.rows() == g.n() && w.cols() == g.n(), "chetaev_monitor: direction shape mismatch");
    if (std::abs(w.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("chetaev_monitor: direction must have unit Frobenius norm");
    Vector w_coords = symmetric_projection_coords(g, w);
    if ((w - symmetric_combination(g, w_coords)).norm() > 1e-8 * (1.0 + w.norm()))
        throw std::invalid_argument("chetaev_monitor: direction does not lie in s(g)");

    ChetaevMonitor mon;
    mon.values.reserve(traj.points.size());
    for (const Vector& coords : traj.conserved) {
        check_dims(coords.size() == w_coords.size(), "chetaev_monitor: algebra mismatch with trajectory");
        mon.values.push_back(coords.dot(w_coords));
    }
    const double a2 = traj.alpha * traj.alpha;
    mon.monotone = true;
    for (std::size_t k = 0; k + 1 < mon.values.size(); ++k) {
        double inc = mon.values[k + 1] - mon.values[k];
        mon.increments.push_back(inc);
        double predicted = a2 * conserved_quantity(g, traj.steps[k]).coords.dot(w_coords);
        mon.max_identity_gap = std::max(mon.max_identity_gap, std::abs(inc - predicted));
        if (inc < -1e-12 * (1.0 + traj.conserved[k].norm())) mon.monotone = false;
    }
    mon.identity_ok = mon.max_identity_gap <= 1e-10;
    return mon;
}

/// Probe rule for the Chetaev direction: take a subgradient v at a sampled
/// off-orbit point, start from w = -C(v)/|C(v)| and flip the sign so the
/// first increment is nonnegative.
inline std::optional<Matrix> default_chetaev_direction(const Objective& obj, const Vector& center,
                                                       double radius, std::uint64_t seed,
                                                       int attempts = 50) {
    const LieAlgebraBasis& g = *obj.algebra;
    if (g.symmetric_dim() == 0) return std::nullopt;
    Rng rng(derive_seed(seed, "chetaev_probe"));
    for (int i = 0; i < attempts; ++i) {
        Vector x = rng.ball(center, radius);
        if (obj.feasible_projection) x = x.cwiseAbs() + Vector::Constant(center.size(), 1e-3);
        Vector v;
        try {
            v = obj.subgrad(x);
        } catch (const std::domain_error&) {
            continue;
        }
        ConservedQuantity cv = conserved_quantity(g, v);
        double nrm = cv.value.norm();
        if (nrm <= 1e-12) continue;
        Matrix w = -cv.value / nrm;
        if (frobenius_dot(cv.value, w) < 0.0) w = -w;
        return w;
    }
    return std::nullopt;
}

struct ScanTrial {
    std::uint64_t seed = 0;
    bool escaped = false;
    std::optional<Eigen::Index> escape_step;
};

struct ScanResult {
    double escape_fraction = 0.0;
    std::vector<ScanTrial> trials;
};

/// Samples initial points uniformly from B_sample_radius(center) (defaulting
/// to the escape ball itself) and runs the subgradient method until an
/// iterate leaves B_epsilon(center) or k_max steps elapse. Trials are
/// independent, each seeded from (seed, trial index), so the result does not
/// depend on the number of jobs.
inline ScanResult instability_scan(const Objective& obj, const Vector& center, double epsilon,
                                   double alpha, Eigen::Index k_max, int trials, std::uint64_t seed,
                                   int jobs = 1, std::optional<double> sample_radius = std::nullopt) {
    if (epsilon <= 0.0) throw std::invalid_argument("instability_scan: epsilon must be positive");
    if (trials < 1) throw std::invalid_argument("instability_scan: need at least one trial");
    check_dims(center.size() == obj.dim, "instability_scan: center dimension mismatch");
    const double radius = sample_radius.value_or(epsilon);

    ScanResult result;
    result.trials.resize(static_cast<std::size_t>(trials));
    auto run_trial = [&](int index) {
        ScanTrial trial;
        trial.seed = derive_seed(seed, "scan_trial", static_cast<std::uint64_t>(index));
        Rng rng(trial.seed);
        Vector x = rng.ball(center, radius);
        if (obj.feasible_projection) x = obj.feasible_projection(x);
        for (Eigen::Index k = 1; k <= k_max; ++k) {
            Vector v;
            try {
                v = obj.subgrad(x);
            } catch (const std::domain_error&) {
                break;
            }
            if (!v.allFinite()) break;
            x -= alpha * v;
            if (obj.feasible_projection) x = obj.feasible_projection(x);
            if (!x.allFinite()) break;
            if ((x - center).norm() > epsilon) {
                trial.escaped = true;
                trial.escape_step = k;
                break;
            }
        }
        result.trials[static_cast<std::size_t>(index)] = trial;
    };

    if (jobs <= 1) {
        for (int i = 0; i < trials; ++i) run_trial(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                for (int i = w; i < trials; i += jobs) run_trial(i);
            });
        for (std::thread& t : pool) t.join();
    }

    int escaped = 0;
    for (const ScanTrial& t : result.trials) escaped += t.escaped ? 1 : 0;
    result.escape_fraction = static_cast<double>(escaped) / static_cast<double>(trials);
    return result;
}

}  // namespace symflow
