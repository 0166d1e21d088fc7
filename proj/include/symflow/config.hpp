#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "symflow/diagnostics.hpp"
#include "symflow/objectives.hpp"

namespace symflow {

// Strict config ingestion: every object level rejects unknown keys, so typos
// fail loudly instead of silently using defaults.

inline void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw config_error(where + ": unknown key '" + it.key() + "'");
}

inline void require_present(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw config_error(where + ": missing required key '" + key + "'");
}

inline Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw config_error(where + ": expected an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw config_error(where + ": ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

inline Vector parse_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw config_error(where + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

inline json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

/// Parses a JSON document and reports syntax errors with a line number.
inline json parse_config_text(const std::string& text, const std::string& filename) {
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw config_error(filename + ":" + std::to_string(line) + ": parse error: " + e.what());
    }
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

// ---------------------------------------------------------------------------
// Problem and group construction
// ---------------------------------------------------------------------------

struct ProblemSpec {
    Objective objective;
    FactorizationShape factor_shape;  // valid for factorization problems
    NetShape net_shape;               // valid for relu_net
    std::string type;
};

inline Matrix seeded_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                            std::string_view label) {
    Rng rng(derive_seed(seed, label));
    return rng.normal_matrix(rows, cols);
}

inline ProblemSpec make_problem(const json& j, std::uint64_t root_seed) {
    require_present(j, "type", "problem");
    const std::string type = j.at("type").get<std::string>();
    ProblemSpec spec;
    spec.type = type;
    if (type == "l1_mf" || type == "frobenius_mf") {
        require_keys(j, {"type", "M", "m", "n", "r", "nonnegative", "data_seed"}, "problem");
        require_present(j, "r", "problem");
        Matrix target;
        if (j.contains("M")) {
            if (j.contains("m") || j.contains("n") || j.contains("data_seed"))
                throw config_error("problem: give either an explicit M or generation sizes, not both");
            target = parse_matrix(j.at("M"), "problem.M");
        } else {
            require_present(j, "m", "problem");
            require_present(j, "n", "problem");
            std::uint64_t seed = j.value("data_seed", root_seed);
            target = seeded_matrix(j.at("m").get<Eigen::Index>(), j.at("n").get<Eigen::Index>(), seed,
                                   "problem_target");
        }
        const Eigen::Index r = j.at("r").get<Eigen::Index>();
        bool nonneg = j.value("nonnegative", false);
        if (nonneg && type == "l1_mf") throw config_error("problem: l1_mf has no nonnegative variant");
        if (nonneg) target = target.cwiseAbs();
        spec.factor_shape = FactorizationShape{target.rows(), target.cols(), r};
        spec.objective = (type == "l1_mf") ? l1_matrix_factorization(target, r)
                                           : frobenius_mf(target, r, nonneg);
    } else if (type == "lorentz") {
        require_keys(j, {"type", "n"}, "problem");
        require_present(j, "n", "problem");
        spec.objective = lorentz_quartic(j.at("n").get<Eigen::Index>());
    } else if (type == "relu_net") {
        require_keys(j, {"type", "widths", "leak", "zero_slope", "inputs", "targets", "samples", "data_seed"},
                     "problem");
        require_present(j, "widths", "problem");
        std::vector<Eigen::Index> widths;
        for (const json& w : j.at("widths")) widths.push_back(w.get<Eigen::Index>());
        if (widths.size() < 3) throw config_error("problem: relu_net needs at least two layers");
        Matrix inputs, targets;
        if (j.contains("inputs") || j.contains("targets")) {
            if (j.contains("samples") || j.contains("data_seed"))
                throw config_error("problem: give either explicit data or generation sizes, not both");
            require_present(j, "inputs", "problem");
            require_present(j, "targets", "problem");
            inputs = parse_matrix(j.at("inputs"), "problem.inputs");
            targets = parse_matrix(j.at("targets"), "problem.targets");
        } else {
            Eigen::Index samples = j.value("samples", Eigen::Index{5});
            std::uint64_t seed = j.value("data_seed", root_seed);
            inputs = seeded_matrix(widths.front(), samples, seed, "net_inputs");
            targets = seeded_matrix(widths.back(), samples, seed, "net_targets");
        }
        spec.net_shape = NetShape{widths};
        spec.objective =
            relu_network(inputs, targets, widths, j.value("leak", 0.0), j.value("zero_slope", 0.0));
    } else {
        throw config_error("problem: unknown type '" + type + "'");
    }
    return spec;
}

inline LieAlgebraBasis make_group(const json& j) {
    require_present(j, "type", "group");
    const std::string type = j.at("type").get<std::string>();
    if (type == "lorentz") {
        require_keys(j, {"type", "n"}, "group");
        require_present(j, "n", "group");
        return lorentz_algebra(j.at("n").get<Eigen::Index>());
    }
    if (type == "factorization" || type == "diagonal_rescaling") {
        require_keys(j, {"type", "m", "n", "r"}, "group");
        for (const char* key : {"m", "n", "r"}) require_present(j, key, "group");
        Eigen::Index m = j.at("m").get<Eigen::Index>();
        Eigen::Index n = j.at("n").get<Eigen::Index>();
        Eigen::Index r = j.at("r").get<Eigen::Index>();
        return type == "factorization" ? factorization_algebra(m, n, r)
                                       : diagonal_rescaling_algebra(m, n, r);
    }
    if (type == "nn_rescaling") {
        require_keys(j, {"type", "widths"}, "group");
        require_present(j, "widths", "group");
        std::vector<Eigen::Index> widths;
        for (const json& w : j.at("widths")) widths.push_back(w.get<Eigen::Index>());
        return nn_rescaling_algebra(NetShape{widths});
    }
    if (type == "rotation_pair") {
        require_keys(j, {"type", "a"}, "group");
        require_present(j, "a", "group");
        return rotation_pair_algebra(j.at("a").get<double>());
    }
    throw config_error("group: unknown type '" + type + "'");
}

/// Initial point: an explicit vector or a seeded ball sample.
inline Vector make_x0(const json& j, Eigen::Index dim, std::uint64_t root_seed) {
    if (j.contains("values")) {
        require_keys(j, {"values"}, "x0");
        Vector x = parse_vector(j.at("values"), "x0.values");
        check_dims(x.size() == dim, "x0: dimension does not match the problem");
        return x;
    }
    require_keys(j, {"center", "radius", "seed"}, "x0");
    require_present(j, "center", "x0");
    require_present(j, "radius", "x0");
    Vector center = parse_vector(j.at("center"), "x0.center");
    check_dims(center.size() == dim, "x0: center dimension does not match the problem");
    Rng rng(j.contains("seed") ? j.at("seed").get<std::uint64_t>() : derive_seed(root_seed, "x0"));
    return rng.ball(center, j.at("radius").get<double>());
}

// ---------------------------------------------------------------------------
// Preset geometry for the built-in problems
// ---------------------------------------------------------------------------

/// Default anchor point for diagnostics on a problem, where one exists.
inline std::optional<Vector> preset_center(const ProblemSpec& spec) {
    if (spec.type == "lorentz") {
        Vector c = Vector::Zero(spec.objective.dim);
        c(0) = 1.0;  // on the unit hyperboloid
        return c;
    }
    if ((spec.type == "l1_mf" || spec.type == "frobenius_mf") && spec.objective.dim == 2) {
        Vector c(2);
        c << 1.0, 0.0;
        return c;
    }
    return std::nullopt;
}

/// Closed-form local orbit distance, available for the scalar factor pair
/// (positive axis) and the plane Lorentz problem (hyperbola branch).
inline std::function<double(const Vector&)> preset_orbit_distance(const ProblemSpec& spec) {
    if ((spec.type == "l1_mf" || spec.type == "frobenius_mf") && spec.objective.dim == 2)
        return axis_orbit_distance;
    if (spec.type == "lorentz" && spec.objective.dim == 2) return hyperbola_orbit_distance;
    return nullptr;
}

inline PointSampler preset_orbit_sampler(const ProblemSpec& spec, const Vector& center) {
    if ((spec.type == "l1_mf" || spec.type == "frobenius_mf") && spec.objective.dim == 2)
        return axis_orbit_sampler(center(0));
    return nullptr;
}

}  // namespace symflow
