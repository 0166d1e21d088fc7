#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symflow/dynamics.hpp"
#include "symflow/objectives.hpp"

namespace symflow {

using json = nlohmann::ordered_json;

struct Offender {
    std::string description;
    double value = 0.0;
};

/// Outcome of one numeric check. For residual checks the verdict is exactly
/// (max_residual <= tolerance); slope checks compare consecutive sup ratios;
/// the Chetaev check requires a strictly negative violation margin.
struct DiagnosticsReport {
    std::string check;
    json params;
    int samples = 0;
    std::optional<double> max_residual;
    std::vector<double> slopes;
    double tolerance = 0.0;
    std::string verdict;  // pass | fail | inconclusive | info
    std::string note;
    std::vector<Offender> offenders;
    json extra;
};

inline json report_to_json(const DiagnosticsReport& r) {
    json j;
    j["check"] = r.check;
    j["params"] = r.params.is_null() ? json::object() : r.params;
    j["samples"] = r.samples;
    if (r.max_residual) j["max_residual"] = *r.max_residual;
    if (!r.slopes.empty()) j["slopes"] = r.slopes;
    j["tolerance"] = r.tolerance;
    j["verdict"] = r.verdict;
    if (!r.note.empty()) j["note"] = r.note;
    json offs = json::array();
    for (const Offender& o : r.offenders) offs.push_back({{"sample", o.description}, {"value", o.value}});
    j["offenders"] = offs;
    if (!r.extra.is_null()) j["extra"] = r.extra;
    return j;
}

namespace detail {

inline void push_offender(std::vector<Offender>& offenders, std::string description, double value) {
    offenders.push_back({std::move(description), value});
    std::sort(offenders.begin(), offenders.end(),
              [](const Offender& a, const Offender& b) { return a.value > b.value; });
    if (offenders.size() > 10) offenders.resize(10);
}

inline std::string point_label(const Vector& x) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (i) s += ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", x(i));
        s += buf;
    }
    return s + ")";
}

}  // namespace detail

/// Sampler hook used by the slope checks; defaults to uniform ball sampling
/// around the anchor point.
using PointSampler = std::function<Vector(Rng&, double radius)>;

/// Residual of the orbital projection formula at each supplied point:
/// |P_{T_x Gx}(subgrad(x))| / (1 + |subgrad(x)|), also evaluated over the
/// enumerated extreme subgradients where available.
inline DiagnosticsReport orbital_projection_check(const Objective& obj, const LieAlgebraBasis& g,
                                                  const std::vector<Vector>& points, double tol) {
    DiagnosticsReport report;
    report.check = "orbital_projection";
    report.tolerance = tol;
    double worst = 0.0;
    for (const Vector& x : points) {
        Subspace tangent = orbit_tangent(g, x);
        auto residual_of = [&](const Vector& v) { return project(tangent, v).norm() / (1.0 + v.norm()); };
        double r = residual_of(obj.subgrad(x));
        if (obj.enumerate_extreme) {
            auto extremes = obj.enumerate_extreme(x);
            if (extremes)
                for (const Vector& v : *extremes) r = std::max(r, residual_of(v));
        }
        ++report.samples;
        if (r > worst) worst = r;
        if (r > tol) detail::push_offender(report.offenders, detail::point_label(x), r);
    }
    report.max_residual = worst;
    report.verdict = worst <= tol ? "pass" : "fail";
    return report;
}

/// Sup of |P_{T_x Gx}(v)| / (|x - y| |v|) with v = subgrad(y) over sampled
/// pairs, per radius. Stable sup ratios under radius halving (factor <= 2)
/// count as a pass; pairs with |x - y| <= 1e-9 or v = 0 are skipped.
inline DiagnosticsReport perturbed_projection_slope(const Objective& obj, const LieAlgebraBasis& g,
                                                    const Vector& center, std::vector<double> radii,
                                                    int samples_per_radius, std::uint64_t seed,
                                                    PointSampler x_sampler = nullptr) {
    DiagnosticsReport report;
    report.check = "perturbed_projection_slope";
    report.tolerance = 2.0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        Rng rng(derive_seed(seed, "perturbed_projection", i));
        double sup = 0.0;
        int used = 0;
        for (int s = 0; s < samples_per_radius; ++s) {
            Vector x = x_sampler ? x_sampler(rng, radii[i]) : rng.ball(center, radii[i]);
            Vector y = rng.ball(center, radii[i]);
            double gap = (x - y).norm();
            if (gap <= 1e-9) continue;
            Vector v = obj.subgrad(y);
            if (v.norm() == 0.0) continue;
            double ratio = project(orbit_tangent(g, x), v).norm() / (gap * v.norm());
            sup = std::max(sup, ratio);
            ++used;
            ++report.samples;
        }
        if (used == 0) {
            report.verdict = "inconclusive";
            report.note = "all samples skipped";
            return report;
        }
        report.slopes.push_back(sup);
    }
    report.verdict = "pass";
    for (std::size_t i = 0; i + 1 < report.slopes.size(); ++i)
        if (report.slopes[i + 1] > 2.0 * report.slopes[i]) report.verdict = "fail";
    return report;
}

/// Sup of d(T_x Gx, T_y Gy) / |x - y| over sampled pairs, per radius; fails
/// outright when the orbit dimension is not constant across the samples.
inline DiagnosticsReport tangent_lipschitz_check(const LieAlgebraBasis& g, const Vector& center,
                                                 std::vector<double> radii, int samples_per_radius,
                                                 std::uint64_t seed) {
    DiagnosticsReport report;
    report.check = "tangent_lipschitz";
    report.tolerance = 2.0;
    const Eigen::Index base_dim = orbit_tangent(g, center).dim();
    for (std::size_t i = 0; i < radii.size(); ++i) {
        Rng rng(derive_seed(seed, "tangent_lipschitz", i));
        double sup = 0.0;
        for (int s = 0; s < samples_per_radius; ++s) {
            Vector x = rng.ball(center, radii[i]);
            Vector y = rng.ball(center, radii[i]);
            if ((x - y).norm() <= 1e-9) continue;
            Subspace tx = orbit_tangent(g, x);
            Subspace ty = orbit_tangent(g, y);
            if (tx.dim() != base_dim || ty.dim() != base_dim) {
                report.verdict = "fail";
                report.note = "orbit dimension not locally constant";
                detail::push_offender(report.offenders, detail::point_label(tx.dim() != base_dim ? x : y),
                                      static_cast<double>(tx.dim() != base_dim ? tx.dim() : ty.dim()));
                return report;
            }
            sup = std::max(sup, subspace_distance(tx, ty) / (x - y).norm());
            ++report.samples;
        }
        report.slopes.push_back(sup);
    }
    report.verdict = "pass";
    for (std::size_t i = 0; i + 1 < report.slopes.size(); ++i)
        if (report.slopes[i + 1] > 2.0 * report.slopes[i]) report.verdict = "fail";
    return report;
}

/// Verifies d(Im A, Im B) <= 2 |A - B| / sigma_min(Abar) for random
/// perturbations A, B of an injective matrix, |A - Abar|, |B - Abar| bounded
/// by perturbation_scale <= sigma_min / 2.
inline DiagnosticsReport image_distance_check(const Matrix& abar, double perturbation_scale, int trials,
                                              std::uint64_t seed) {
    const double sigma_min = Eigen::JacobiSVD<Matrix>(abar).singularValues().minCoeff();
    if (sigma_min <= 0.0 || abar.cols() > abar.rows())
        throw std::invalid_argument("image_distance_check: matrix is not injective");
    if (perturbation_scale > sigma_min / 2.0)
        throw std::invalid_argument("image_distance_check: perturbation scale exceeds sigma_min / 2");
    DiagnosticsReport report;
    report.check = "image_distance";
    report.tolerance = 1.0;
    Rng rng(derive_seed(seed, "image_distance"));
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Matrix e1 = rng.normal_matrix(abar.rows(), abar.cols());
        Matrix e2 = rng.normal_matrix(abar.rows(), abar.cols());
        e1 *= perturbation_scale * rng.uniform() / spectral_norm(e1);
        e2 *= perturbation_scale * rng.uniform() / spectral_norm(e2);
        Matrix a = abar + e1;
        Matrix b = abar + e2;
        double gap = spectral_norm(a - b);
        double dist = subspace_distance(orthonormalize(a), orthonormalize(b));
        if (gap <= 1e-15) continue;
        double ratio = dist / (2.0 * gap / sigma_min);
        ++report.samples;
        if (ratio > worst) worst = ratio;
        if (ratio > 1.0) detail::push_offender(report.offenders, "trial " + std::to_string(t), ratio);
    }
    report.max_residual = worst;
    report.verdict = worst <= 1.0 ? "pass" : "fail";
    return report;
}

/// Least-squares fit of log d(x, G xbar) ~ log kappa + eta log |subgrad(x)|
/// over samples near the anchor. Informational: reports (kappa, eta) and the
/// fit residual without a pass verdict. |subgrad| stands in for d(0, del f),
/// exact when the subdifferential is a singleton.
inline DiagnosticsReport subregularity_fit(const Objective& obj, const Vector& center,
                                           std::vector<double> radii, int samples_per_radius,
                                           std::uint64_t seed,
                                           const std::function<double(const Vector&)>& orbit_distance) {
    DiagnosticsReport report;
    report.check = "subregularity";
    report.verdict = "info";
    std::vector<double> log_a, log_b;
    double min_b = std::numeric_limits<double>::infinity(), max_b = 0.0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        Rng rng(derive_seed(seed, "subregularity", i));
        for (int s = 0; s < samples_per_radius; ++s) {
            Vector x = rng.ball(center, radii[i]);
            double a = orbit_distance(x);
            if (a <= 1e-7) continue;  // off-orbit rejection of near-orbit points
            double b = obj.subgrad(x).norm();
            if (b <= 1e-12) continue;
            log_a.push_back(std::log(a));
            log_b.push_back(std::log(b));
            min_b = std::min(min_b, b);
            max_b = std::max(max_b, b);
            ++report.samples;
        }
    }
    if (report.samples < 2) {
        report.verdict = "inconclusive";
        report.note = "degenerate samples";
        return report;
    }
    // least squares for log a = log kappa + eta log b
    const Eigen::Index n = static_cast<Eigen::Index>(log_a.size());
    Matrix design(n, 2);
    Vector target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = log_b[static_cast<std::size_t>(i)];
        target(i) = log_a[static_cast<std::size_t>(i)];
    }
    Vector fit = design.colPivHouseholderQr().solve(target);
    double residual = (design * fit - target).norm() / std::sqrt(static_cast<double>(n));
    report.extra["kappa"] = std::exp(fit(0));
    report.extra["eta"] = fit(1);
    report.extra["fit_rms_residual"] = residual;
    if (min_b > 0.1 * max_b) report.note = "b not vanishing; eta poorly identified";
    return report;
}

// ---------------------------------------------------------------------------
// Preset orbit geometry (closed-form local descriptions)
// ---------------------------------------------------------------------------

/// Distance to the positive-axis orbit {(d, 0) : d > 0} of the scalar factor
/// pair, valid locally around points with positive first coordinate.
inline double axis_orbit_distance(const Vector& x) { return std::abs(x(1)); }

/// Distance to the hyperbola branch {(cosh t, sinh t)}, the Lorentz orbit of
/// (1, 0) in the plane. Grid search over t with local refinement.
inline double hyperbola_orbit_distance(const Vector& x) {
    check_dims(x.size() == 2, "hyperbola_orbit_distance: expects a plane point");
    auto gap = [&x](double t) {
        double dx = x(0) - std::cosh(t);
        double dy = x(1) - std::sinh(t);
        return dx * dx + dy * dy;
    };
    double best_t = 0.0, best = gap(0.0);
    for (int i = -300; i <= 300; ++i) {
        double t = i * 0.01;
        double v = gap(t);
        if (v < best) {
            best = v;
            best_t = t;
        }
    }
    double h = 0.01;
    for (int level = 0; level < 40; ++level) {
        h *= 0.5;
        for (double t : {best_t - h, best_t + h}) {
            double v = gap(t);
            if (v < best) {
                best = v;
                best_t = t;
            }
        }
    }
    return std::sqrt(best);
}

/// On-orbit sampler for the positive-axis orbit: points (c + u, 0), u uniform
/// in [-radius, radius], staying on the positive axis.
inline PointSampler axis_orbit_sampler(double center_x) {
    return [center_x](Rng& rng, double radius) {
        Vector x(2);
        x << std::max(center_x + rng.uniform(-radius, radius), 1e-3), 0.0;
        return x;
    };
}

/// Sign condition of the instability criterion: over sampled off-orbit pairs
/// x, y with u = subgrad(x), v = subgrad(y), every normalized inner product
/// <C(u), C(v)> / (|C(u)| |C(v)|) must strictly exceed tol. The reported
/// residual is the worst violation margin tol - min(normalized inner), so the
/// verdict is pass exactly when it is strictly negative.
inline DiagnosticsReport chetaev_condition_check(const Objective& obj, const LieAlgebraBasis& g,
                                                 const Vector& center, double radius, int pairs,
                                                 double tol, std::uint64_t seed,
                                                 const std::function<double(const Vector&)>& orbit_distance) {
    DiagnosticsReport report;
    report.check = "chetaev_condition";
    report.tolerance = 0.0;
    Rng rng(derive_seed(seed, "chetaev_condition"));
    double min_inner = std::numeric_limits<double>::infinity();
    int attempts = 0;
    while (report.samples < pairs && attempts < 100 * pairs) {
        ++attempts;
        Vector x = rng.ball(center, radius);
        Vector y = rng.ball(center, radius);
        if (orbit_distance && (orbit_distance(x) <= 1e-7 || orbit_distance(y) <= 1e-7)) continue;
        Matrix cu = conserved_quantity(g, obj.subgrad(x)).value;
        Matrix cv = conserved_quantity(g, obj.subgrad(y)).value;
        double nu = cu.norm(), nv = cv.norm();
        if (nu <= 1e-14 || nv <= 1e-14) continue;
        double inner = frobenius_dot(cu, cv) / (nu * nv);
        ++report.samples;
        if (inner < min_inner) min_inner = inner;
        if (inner <= tol)
            detail::push_offender(report.offenders, detail::point_label(x) + " vs " + detail::point_label(y),
                                  tol - inner);
    }
    if (report.samples == 0) {
        report.verdict = "inconclusive";
        report.note = "condition vacuous: all conserved values of sampled subgradients are zero";
        return report;
    }
    report.max_residual = tol - min_inner;
    report.verdict = (min_inner > tol) ? "pass" : "fail";
    report.extra["min_normalized_inner"] = min_inner;
    return report;
}

}  // namespace symflow
