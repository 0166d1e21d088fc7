#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "symflow/config.hpp"
#include "symflow/diagnostics.hpp"
#include "symflow/dynamics.hpp"

namespace symflow {

// Command implementations behind the CLI. Exit codes: 0 done/pass, 1 check
// failure, 2 numeric divergence, 3 inconclusive verdicts, 64 usage or config
// error. All files are written once, at the end of a command.

struct CliOverrides {
    std::optional<std::string> output_dir;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
};

namespace detail {

inline const std::set<std::string> kTopLevelKeys = {
    "problem", "group", "x0",   "alpha",      "steps", "horizon",
    "chetaev_w", "checks", "scan", "seed", "output_dir"};

struct LoadedConfig {
    json root;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
};

inline LoadedConfig load_common(const std::string& path, const CliOverrides& overrides) {
    LoadedConfig cfg;
    cfg.root = load_config_file(path);
    require_keys(cfg.root, kTopLevelKeys, "config");
    cfg.seed = overrides.seed.value_or(cfg.root.value("seed", std::uint64_t{0}));
    cfg.output_dir = overrides.output_dir.value_or(cfg.root.value("output_dir", std::string{"out"}));
    return cfg;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline json dump_points(const std::vector<Vector>& points) {
    json arr = json::array();
    for (const Vector& p : points) arr.push_back(vector_to_json(p));
    return arr;
}

// Sample a point of the oracle's selection domain (positive interior for
// constrained problems).
inline Vector domain_point(const Objective& obj, Rng& rng, double scale) {
    Vector x = scale * rng.normal_vector(obj.dim);
    if (obj.feasible_projection) x = x.cwiseAbs() + Vector::Constant(obj.dim, 0.1);
    return x;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const CliOverrides& overrides = {},
                   std::ostream& err = std::cerr) {
    try {
        detail::LoadedConfig cfg = detail::load_common(config_path, overrides);
        const json& root = cfg.root;
        require_present(root, "problem", "config");
        require_present(root, "x0", "config");
        require_present(root, "alpha", "config");
        if (root.contains("steps") == root.contains("horizon"))
            throw config_error("config: provide exactly one of 'steps' or 'horizon'");

        ProblemSpec problem = make_problem(root.at("problem"), cfg.seed);
        const Objective& obj = problem.objective;
        Vector x0 = make_x0(root.at("x0"), obj.dim, cfg.seed);
        const double alpha = root.at("alpha").get<double>();

        Trajectory traj;
        if (root.contains("steps"))
            traj = subgradient_descent(obj, x0, alpha, root.at("steps").get<Eigen::Index>(), cfg.seed);
        else
            traj = flow_integrate(obj, x0, root.at("horizon").get<double>(), alpha, cfg.seed);

        // Chetaev direction: explicit matrix, or the probe rule by default.
        std::optional<Matrix> w;
        if (root.contains("chetaev_w") && root.at("chetaev_w").is_array())
            w = parse_matrix(root.at("chetaev_w"), "chetaev_w");
        else
            w = default_chetaev_direction(obj, x0, 0.1 * (1.0 + x0.norm()), cfg.seed);
        std::optional<ChetaevMonitor> monitor;
        if (w) monitor = chetaev_monitor(traj, *obj.algebra, *w);

        std::string csv = "k,f,identity_residual,drift_from_start,chetaev\n";
        for (std::size_t k = 0; k < traj.points.size(); ++k) {
            csv += std::to_string(k);
            csv += "," + format_full(traj.values[k]);
            csv += "," + format_full(k == 0 ? 0.0 : traj.identity_residual[k - 1]);
            csv += "," + format_full(traj.drift_at(static_cast<Eigen::Index>(k)));
            csv += "," + format_full(monitor ? monitor->values[k] : 0.0);
            csv += "\n";
        }

        json summary;
        summary["command"] = "run";
        summary["problem"] = problem.type;
        summary["algebra"] = obj.algebra->name();
        summary["alpha"] = alpha;
        summary["steps"] = traj.step_count();
        summary["seed"] = cfg.seed;
        summary["diverged"] = traj.diverged;
        summary["truncation_reason"] = traj.truncation_reason;
        summary["final_value"] = traj.values.back();
        summary["max_identity_residual"] = traj.max_identity_residual();
        summary["total_drift"] = traj.total_drift();
        summary["chetaev_available"] = w.has_value();
        summary["chetaev_w"] = w ? matrix_to_json(*w) : json(nullptr);
        if (monitor) {
            summary["chetaev_monotone"] = monitor->monotone;
            summary["chetaev_identity_gap"] = monitor->max_identity_gap;
        }
        summary["points"] = detail::dump_points(traj.points);
        summary["step_vectors"] = detail::dump_points(traj.steps);

        detail::write_text(cfg.output_dir / "trajectory.csv", csv);
        detail::write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
        return traj.diverged ? 2 : 0;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 64;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return 64;
    }
}

namespace detail {

inline DiagnosticsReport run_named_check(const json& spec, const std::optional<ProblemSpec>& problem,
                                         const std::optional<LieAlgebraBasis>& group,
                                         std::uint64_t seed, std::size_t index) {
    if (!spec.is_object()) throw config_error("checks: entries must be objects");
    require_present(spec, "name", "checks[]");
    const std::string name = spec.at("name").get<std::string>();
    const std::uint64_t check_seed = derive_seed(seed, "check", index);

    auto need_objective = [&]() -> const ProblemSpec& {
        if (!problem) throw config_error("checks: '" + name + "' requires a problem");
        return *problem;
    };
    auto algebra = [&]() -> const LieAlgebraBasis& {
        if (group) return *group;
        if (problem) return *problem->objective.algebra;
        throw config_error("checks: '" + name + "' requires a problem or group");
    };
    auto center_or_preset = [&](const json& j) -> Vector {
        if (j.contains("center")) return parse_vector(j.at("center"), "checks.center");
        if (problem) {
            auto c = preset_center(*problem);
            if (c) return *c;
        }
        throw config_error("checks: '" + name + "' needs a center (no preset available)");
    };
    auto radii_of = [&](const json& j) {
        std::vector<double> radii;
        if (j.contains("radii"))
            for (const json& r : j.at("radii")) radii.push_back(r.get<double>());
        else
            radii = {0.1, 0.05, 0.025};
        return radii;
    };

    if (name == "orbital_projection") {
        require_keys(spec, {"name", "points", "tol", "scale"}, "checks.orbital_projection");
        const ProblemSpec& p = need_objective();
        Rng rng(check_seed);
        std::vector<Vector> points;
        const int count = spec.value("points", 100);
        const double scale = spec.value("scale", 1.0);
        for (int i = 0; i < count; ++i) points.push_back(domain_point(p.objective, rng, scale));
        return orbital_projection_check(p.objective, algebra(), points, spec.value("tol", 1e-8));
    }
    if (name == "perturbed_projection_slope") {
        require_keys(spec, {"name", "center", "radii", "samples", "on_orbit"},
                     "checks.perturbed_projection_slope");
        const ProblemSpec& p = need_objective();
        Vector center = center_or_preset(spec);
        PointSampler sampler;
        bool default_on_orbit = static_cast<bool>(preset_orbit_sampler(p, center));
        if (spec.value("on_orbit", default_on_orbit)) {
            sampler = preset_orbit_sampler(p, center);
            if (!sampler) throw config_error("checks: no on-orbit sampler preset for this problem");
        }
        return perturbed_projection_slope(p.objective, algebra(), center, radii_of(spec),
                                          spec.value("samples", 80), check_seed, sampler);
    }
    if (name == "tangent_lipschitz") {
        require_keys(spec, {"name", "center", "radii", "samples"}, "checks.tangent_lipschitz");
        Vector center = center_or_preset(spec);
        return tangent_lipschitz_check(algebra(), center, radii_of(spec), spec.value("samples", 60),
                                       check_seed);
    }
    if (name == "image_distance") {
        require_keys(spec, {"name", "A", "scale", "trials"}, "checks.image_distance");
        require_present(spec, "A", "checks.image_distance");
        Matrix abar = parse_matrix(spec.at("A"), "checks.image_distance.A");
        double sigma_min = Eigen::JacobiSVD<Matrix>(abar).singularValues().minCoeff();
        return image_distance_check(abar, spec.value("scale", sigma_min / 2.0),
                                    spec.value("trials", 100), check_seed);
    }
    if (name == "subregularity") {
        require_keys(spec, {"name", "center", "radii", "samples"}, "checks.subregularity");
        const ProblemSpec& p = need_objective();
        auto distance = preset_orbit_distance(p);
        if (!distance) throw config_error("checks: no orbit-distance preset for this problem");
        return subregularity_fit(p.objective, center_or_preset(spec), radii_of(spec),
                                 spec.value("samples", 100), check_seed, distance);
    }
    if (name == "chetaev_condition") {
        require_keys(spec, {"name", "center", "radius", "pairs", "tol"}, "checks.chetaev_condition");
        const ProblemSpec& p = need_objective();
        return chetaev_condition_check(p.objective, algebra(), center_or_preset(spec),
                                       spec.value("radius", 0.1), spec.value("pairs", 200),
                                       spec.value("tol", 0.0), check_seed, preset_orbit_distance(p));
    }
    if (name == "equivariance") {
        require_keys(spec, {"name", "trials", "tol", "scales", "exact_only", "surrogate_t"},
                     "checks.equivariance");
        const ProblemSpec& p = need_objective();
        std::vector<double> scales{0.5, 2.0};
        if (spec.contains("scales")) {
            scales.clear();
            for (const json& s : spec.at("scales")) scales.push_back(s.get<double>());
        }
        EquivarianceReport eq = conservative_field_equivariance_check(
            p.objective, spec.value("trials", 50), spec.value("tol", 1e-10), check_seed, scales,
            spec.value("surrogate_t", 1e-3), spec.value("exact_only", true));
        DiagnosticsReport report;
        report.check = "equivariance";
        report.samples = eq.samples;
        report.max_residual = eq.max_rel_residual;
        report.tolerance = eq.tolerance;
        report.verdict = eq.samples == 0 ? "inconclusive" : (eq.pass ? "pass" : "fail");
        report.extra["skipped"] = eq.skipped;
        return report;
    }
    throw config_error("checks: unknown check name '" + name + "'");
}

}  // namespace detail

inline int cmd_check(const std::string& config_path, const CliOverrides& overrides = {},
                     std::ostream& err = std::cerr) {
    try {
        detail::LoadedConfig cfg = detail::load_common(config_path, overrides);
        const json& root = cfg.root;
        require_present(root, "checks", "config");
        if (!root.at("checks").is_array()) throw config_error("config: 'checks' must be an array");

        std::optional<ProblemSpec> problem;
        if (root.contains("problem")) problem = make_problem(root.at("problem"), cfg.seed);
        std::optional<LieAlgebraBasis> group;
        if (root.contains("group")) group = make_group(root.at("group"));

        json reports = json::array();
        bool any_fail = false, any_inconclusive = false;
        std::size_t index = 0;
        for (const json& spec : root.at("checks")) {
            DiagnosticsReport report = detail::run_named_check(spec, problem, group, cfg.seed, index++);
            report.params = spec;
            any_fail = any_fail || report.verdict == "fail";
            any_inconclusive = any_inconclusive || report.verdict == "inconclusive";
            reports.push_back(report_to_json(report));
        }
        detail::write_text(cfg.output_dir / "report.json", reports.dump(2) + "\n");
        return any_fail ? 1 : (any_inconclusive ? 3 : 0);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 64;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return 64;
    }
}

inline int cmd_scan(const std::string& config_path, const CliOverrides& overrides = {},
                    std::ostream& err = std::cerr) {
    try {
        detail::LoadedConfig cfg = detail::load_common(config_path, overrides);
        const json& root = cfg.root;
        require_present(root, "problem", "config");
        require_present(root, "alpha", "config");
        require_present(root, "scan", "config");
        const json& scan = root.at("scan");
        require_keys(scan, {"center", "epsilon", "trials", "k_max", "sample_radius"}, "scan");
        for (const char* key : {"center", "epsilon", "trials", "k_max"}) require_present(scan, key, "scan");

        ProblemSpec problem = make_problem(root.at("problem"), cfg.seed);
        Vector center = parse_vector(scan.at("center"), "scan.center");
        check_dims(center.size() == problem.objective.dim, "scan: center dimension mismatch");
        std::optional<double> sample_radius;
        if (scan.contains("sample_radius")) sample_radius = scan.at("sample_radius").get<double>();

        ScanResult result = instability_scan(
            problem.objective, center, scan.at("epsilon").get<double>(), root.at("alpha").get<double>(),
            scan.at("k_max").get<Eigen::Index>(), scan.at("trials").get<int>(), cfg.seed,
            overrides.jobs.value_or(1), sample_radius);

        json out;
        out["escape_fraction"] = result.escape_fraction;
        json per_trial = json::array();
        for (const ScanTrial& t : result.trials) {
            json entry;
            entry["seed"] = t.seed;
            entry["escaped"] = t.escaped;
            entry["escape_step"] =
                t.escape_step ? json(static_cast<std::int64_t>(*t.escape_step)) : json(nullptr);
            per_trial.push_back(entry);
        }
        out["per_trial"] = per_trial;
        detail::write_text(cfg.output_dir / "scan.json", out.dump(2) + "\n");
        return 0;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 64;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return 64;
    }
}

}  // namespace symflow
