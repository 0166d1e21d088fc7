#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"
#include "symflow/dynamics.hpp"

using namespace symflow;
using testsupport::v2;

namespace {

Matrix scalar(double v) {
    Matrix m(1, 1);
    m << v;
    return m;
}

Objective absxy() { return l1_matrix_factorization(scalar(0.0), 1); }

Matrix chetaev_w_absxy() {
    Matrix w(2, 2);
    w << -1, 0, 0, 1;
    return w / std::sqrt(2.0);
}

}  // namespace

TEST_CASE("a gradient-zero start yields a constant trajectory") {
    Objective obj = lorentz_quartic(2);
    Trajectory traj = subgradient_descent(obj, v2(1.0, 0.0), 0.05, 50);
    REQUIRE(traj.step_count() == 50);
    for (const Vector& x : traj.points) REQUIRE((x - v2(1.0, 0.0)).norm() == 0.0);
    REQUIRE(traj.max_identity_residual() == 0.0);
    REQUIRE(traj.total_drift() == 0.0);
}

TEST_CASE("step identity is exact along |xy| descent") {
    Trajectory traj = subgradient_descent(absxy(), v2(1.0, 0.05), 0.01, 2000);
    REQUIRE(traj.step_count() == 2000);
    REQUIRE(traj.max_identity_residual() <= 1e-12);
}

TEST_CASE("trajectory bookkeeping stays consistent") {
    Trajectory traj = subgradient_descent(absxy(), v2(0.8, 0.3), 0.02, 100);
    REQUIRE(traj.points.size() == traj.steps.size() + 1);
    REQUIRE(traj.values.size() == traj.points.size());
    REQUIRE(traj.conserved.size() == traj.points.size());
    REQUIRE(traj.identity_residual.size() == traj.steps.size());
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        Vector reconstructed = traj.points[k] - traj.alpha * traj.steps[k];
        REQUIRE((reconstructed - traj.points[k + 1]).norm() == 0.0);
    }
}

TEST_CASE("step identity holds for every unconstrained builtin at several step sizes") {
    Rng rng(79);
    std::vector<Objective> objs;
    objs.push_back(l1_matrix_factorization(rng.normal_matrix(2, 2), 1));
    objs.push_back(frobenius_mf(rng.normal_matrix(2, 2), 1));
    objs.push_back(lorentz_quartic(3));
    objs.push_back(relu_network(rng.normal_matrix(2, 4), rng.normal_matrix(1, 4), {2, 3, 1}, 0.1, 0.0));
    for (const Objective& obj : objs) {
        for (double alpha : {0.01, 0.15}) {
            Vector x0 = 0.7 * rng.normal_vector(obj.dim);
            Trajectory traj = subgradient_descent(obj, x0, alpha, 200);
            for (std::size_t k = 0; k < traj.identity_residual.size(); ++k)
                REQUIRE(traj.identity_residual[k] <= 1e-10 * (1.0 + traj.points[k].squaredNorm()));
        }
    }
}

TEST_CASE("projected steps that reach the orthant boundary truncate the run") {
    Objective obj = frobenius_mf(Matrix::Zero(1, 1), 1, true);
    Vector x0(2);
    x0 << 1.0, 1.0;
    // the huge step clamps both coordinates to zero, where the constrained
    // oracle refuses a subgradient
    Trajectory traj = subgradient_descent(obj, x0, 100.0, 10);
    REQUIRE(traj.diverged);
    REQUIRE(traj.truncation_reason == "boundary");
    REQUIRE(traj.step_count() == 1);
    Vector clamped = obj.feasible_projection(traj.points[0] - traj.alpha * traj.steps[0]);
    REQUIRE((traj.points[1] - clamped).norm() == 0.0);
}

TEST_CASE("descent from near the axis leaves the 0.1 ball around (1,0)") {
    Trajectory traj = subgradient_descent(absxy(), v2(1.0, 0.05), 0.01, 100000);
    double worst = 0.0;
    for (const Vector& x : traj.points) worst = std::max(worst, (x - v2(1.0, 0.0)).norm());
    REQUIRE(worst > 0.1);
}

TEST_CASE("identical runs are bitwise identical") {
    Trajectory a = subgradient_descent(absxy(), v2(1.0, 0.05), 0.01, 500, 42);
    Trajectory b = subgradient_descent(absxy(), v2(1.0, 0.05), 0.01, 500, 42);
    for (std::size_t k = 0; k < a.points.size(); ++k) {
        REQUIRE(a.points[k] == b.points[k]);
        REQUIRE(a.values[k] == b.values[k]);
    }
}

TEST_CASE("flow drift halves with the step size on a smooth factorization") {
    Rng rng(61);
    Matrix target = rng.normal_matrix(2, 2);
    Objective obj = frobenius_mf(target, 1);
    FactorizationShape shape{2, 2, 1};
    Vector x0 = shape.pack(1.5 * rng.normal_matrix(2, 1), 0.3 * rng.normal_matrix(1, 2));
    double prev = -1.0;
    for (double alpha : {1e-3, 5e-4, 2.5e-4}) {
        double drift = flow_integrate(obj, x0, 1.0, alpha).total_drift();
        if (prev > 0.0) {
            double ratio = prev / drift;
            REQUIRE(ratio >= 1.7);
            REQUIRE(ratio <= 2.3);
        }
        prev = drift;
    }
}

TEST_CASE("flow from a critical point has zero drift") {
    Matrix x(2, 1), y(1, 2);
    x << 1.0, -0.5;
    y << 0.7, 1.1;
    FactorizationShape shape{2, 2, 1};
    Objective obj = frobenius_mf(x * y, 1);
    Trajectory traj = flow_integrate(obj, shape.pack(x, y), 0.5, 1e-3);
    REQUIRE(traj.total_drift() == 0.0);
}

TEST_CASE("lorentz flow drift scales linearly in alpha") {
    Objective obj = lorentz_quartic(2);
    Vector x0 = v2(1.1, 0.1);
    double prev = -1.0;
    for (double alpha : {1e-3, 5e-4, 2.5e-4}) {
        double drift = flow_integrate(obj, x0, 1.0, alpha).total_drift();
        if (prev > 0.0) {
            double ratio = prev / drift;
            REQUIRE(ratio >= 1.7);
            REQUIRE(ratio <= 2.3);
        }
        prev = drift;
    }
}

TEST_CASE("flow_integrate validates its budget") {
    REQUIRE_THROWS_AS(flow_integrate(absxy(), v2(1, 0), 10.0, 1e-8), std::invalid_argument);
    REQUIRE_THROWS_AS(flow_integrate(absxy(), v2(1, 0), -1.0, 1e-3), std::invalid_argument);
}

TEST_CASE("chetaev monitor of a constant trajectory is constant") {
    Objective obj = absxy();
    Trajectory traj = subgradient_descent(obj, v2(1.0, 0.0), 0.01, 20);  // axis start freezes
    ChetaevMonitor mon = chetaev_monitor(traj, *obj.algebra, chetaev_w_absxy());
    for (double inc : mon.increments) REQUIRE(inc == 0.0);
    REQUIRE(mon.monotone);
    REQUIRE(mon.identity_ok);
}

TEST_CASE("chetaev increments along |xy| descent are nonnegative and exact") {
    Objective obj = absxy();
    Trajectory traj = subgradient_descent(obj, v2(0.97, 0.04), 0.01, 3000);
    ChetaevMonitor mon = chetaev_monitor(traj, *obj.algebra, chetaev_w_absxy());
    REQUIRE(mon.monotone);
    for (double inc : mon.increments) REQUIRE(inc >= 0.0);
    REQUIRE(mon.max_identity_gap <= 1e-12);
}

TEST_CASE("chetaev monitor validates the direction") {
    Objective obj = absxy();
    Trajectory traj = subgradient_descent(obj, v2(1.0, 0.05), 0.01, 5);
    REQUIRE_THROWS_AS(chetaev_monitor(traj, *obj.algebra, 2.0 * chetaev_w_absxy()), std::invalid_argument);
    Matrix off(2, 2);
    off << 0, -1, 1, 0;  // skew, not in s(g)
    REQUIRE_THROWS_AS(chetaev_monitor(traj, *obj.algebra, off / off.norm()), std::invalid_argument);
}

TEST_CASE("probe rule recovers the balanced direction for |xy|") {
    Objective obj = absxy();
    auto w = default_chetaev_direction(obj, v2(1.0, 0.0), 0.1, 99);
    REQUIRE(w.has_value());
    REQUIRE((*w - chetaev_w_absxy()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("probe rule declines when s(g) is trivial") {
    // rotation-invariant smooth objective: |x|^2 - 1 squared has s(g) = 0
    Matrix j(2, 2);
    j << 0, -1, 1, 0;
    Objective obj;
    obj.name = "radial";
    obj.dim = 2;
    obj.algebra = std::make_shared<LieAlgebraBasis>(LieAlgebraBasis(2, {j}, "so(2)"));
    obj.eval = [](const Vector& x) { return (x.squaredNorm() - 1.0) * (x.squaredNorm() - 1.0); };
    obj.subgrad = [](const Vector& x) { return (4.0 * (x.squaredNorm() - 1.0) * x).eval(); };
    REQUIRE_FALSE(default_chetaev_direction(obj, v2(1.0, 0.0), 0.1, 99).has_value());
}

TEST_CASE("instability scan: off-axis starts escape, axis starts stall") {
    Objective obj = absxy();
    ScanResult result = instability_scan(obj, v2(1.0, 0.0), 0.1, 0.01, 100000, 20, 12345);
    REQUIRE(result.escape_fraction >= 0.9);
    for (const ScanTrial& t : result.trials)
        if (t.escaped) REQUIRE(t.escape_step.has_value());

    // exact axis start: selection is (0,0), nothing moves
    ScanResult frozen = instability_scan(obj, v2(1.0, 0.0), 0.1, 0.01, 1000, 1, 7, 1, 0.0);
    REQUIRE(frozen.escape_fraction == 0.0);
    REQUIRE_FALSE(frozen.trials[0].escape_step.has_value());
}

TEST_CASE("instability scan with a zero step budget reports no escapes") {
    ScanResult result = instability_scan(absxy(), v2(1.0, 0.0), 0.1, 0.01, 0, 5, 3);
    REQUIRE(result.escape_fraction == 0.0);
    for (const ScanTrial& t : result.trials) REQUIRE_FALSE(t.escape_step.has_value());
}

TEST_CASE("instability scan is independent of the job count") {
    Objective obj = absxy();
    ScanResult serial = instability_scan(obj, v2(1.0, 0.0), 0.1, 0.01, 20000, 16, 555, 1);
    ScanResult parallel = instability_scan(obj, v2(1.0, 0.0), 0.1, 0.01, 20000, 16, 555, 4);
    REQUIRE(serial.escape_fraction == parallel.escape_fraction);
    for (std::size_t i = 0; i < serial.trials.size(); ++i) {
        REQUIRE(serial.trials[i].seed == parallel.trials[i].seed);
        REQUIRE(serial.trials[i].escaped == parallel.trials[i].escaped);
        REQUIRE(serial.trials[i].escape_step == parallel.trials[i].escape_step);
    }
}

TEST_CASE("nonfinite subgradients truncate with a divergence flag") {
    Objective obj;
    obj.name = "blowup";
    obj.dim = 1;
    Matrix b = scalar(1.0);
    obj.algebra = std::make_shared<LieAlgebraBasis>(LieAlgebraBasis(1, {b}, "scaling"));
    obj.eval = [](const Vector& x) { return x(0) * x(0); };
    obj.subgrad = [](const Vector& x) {
        Vector v(1);
        v(0) = x(0) > 2.0 ? std::numeric_limits<double>::quiet_NaN() : -x(0);
        return v;
    };
    Vector x0(1);
    x0 << 1.0;
    Trajectory traj = subgradient_descent(obj, x0, 1.0, 100);  // doubles each step
    REQUIRE(traj.diverged);
    REQUIRE(traj.truncation_reason == "nonfinite");
    REQUIRE(traj.step_count() < 100);
}
