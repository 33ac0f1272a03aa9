#pragma once

// JSON problem files. A file either spells out every section or starts from a
// builtin preset and overrides parts of it:
//
//   { "preset": "mobile_platform", "scale": "desk",
//     "optimizer": { "population_size": 50 } }
//
// serialize_problem always writes the expanded form, which parses back to the
// same ProblemSpec.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "continuum/problem.hpp"

namespace continuum {

/// Invalid problem file. `location` is "line:column" for syntax errors and a
/// JSON pointer such as "/optimizer/population_size" for field errors.
class ConfigError : public ConfigurationError {
public:
    ConfigError(const std::string& location, const std::string& message)
        : ConfigurationError(location.empty() ? message : location + ": " + message), location_(location) {}

    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

inline Scale parse_scale(std::string_view text) {
    if (text == "desk") return Scale::Desk;
    if (text == "paper") return Scale::Paper;
    throw ConfigError("", "scale must be 'desk' or 'paper', got '" + std::string(text) + "'");
}

inline const char* scale_name(Scale s) { return s == Scale::Desk ? "desk" : "paper"; }

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& parent, const std::string& key) { return parent + "/" + key; }

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail("expected an object");
    }

    void only(std::initializer_list<const char*> keys) const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            bool known = false;
            for (const char* k : keys) known = known || it.key() == k;
            if (!known) throw ConfigError(join_path(path_, it.key()), "unknown field");
        }
    }

    bool has(const char* key) const { return node_.contains(key); }
    const json& raw(const char* key) const { return node_.at(key); }
    std::string path(const char* key) const { return join_path(path_, key); }

    Reader object(const char* key) const { return Reader(node_.at(key), path(key)); }

    double number(const char* key) const { return as_number(node_.at(key), path(key)); }

    std::size_t count(const char* key) const {
        const auto& v = node_.at(key);
        const double d = v.is_number() ? v.get<double>() : -1.0;
        if (!v.is_number() || d < 0 || d != std::floor(d) || d > 9.0e15) {
            throw ConfigError(path(key), "expected a non-negative integer");
        }
        return v.is_number_unsigned() ? v.get<std::size_t>() : static_cast<std::size_t>(d);
    }

    bool boolean(const char* key) const {
        const auto& v = node_.at(key);
        if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const char* key) const {
        const auto& v = node_.at(key);
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
        return v.get<std::string>();
    }

    Vec3 vec3(const char* key) const {
        const auto& v = node_.at(key);
        if (!v.is_array() || v.size() != 3) throw ConfigError(path(key), "expected an array of 3 numbers");
        return {as_number(v[0], path(key) + "/0"), as_number(v[1], path(key) + "/1"),
                as_number(v[2], path(key) + "/2")};
    }

    [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }

    static double as_number(const json& v, const std::string& where) {
        if (!v.is_number()) throw ConfigError(where, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(where, "expected a finite number");
        return d;
    }

private:
    const json& node_;
    std::string path_;
};

inline LengthSpec read_length(const json& v, const std::string& where) {
    if (v.is_number()) return LengthSpec::fixed(Reader::as_number(v, where));
    Reader r(v, where);
    r.only({"lb", "ub"});
    if (!r.has("lb") || !r.has("ub")) r.fail("expected a number or {\"lb\": ..., \"ub\": ...}");
    return LengthSpec::variable(r.number("lb"), r.number("ub"));
}

inline json write_length(const LengthSpec& s) {
    if (!s.is_variable()) return s.value;
    return json{{"lb", (*s.bounds)[0]}, {"ub", (*s.bounds)[1]}};
}

inline json write_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline void read_robot(const Reader& r, RobotTemplate& robot) {
    r.only({"base", "joints"});
    if (r.has("base")) {
        const auto base = r.object("base");
        base.only({"position", "tangent", "normal"});
        if (base.has("position")) robot.base_position = base.vec3("position");
        if (base.has("tangent")) robot.base_tangent = base.vec3("tangent");
        if (base.has("normal")) robot.base_normal = base.vec3("normal");
    }
    if (r.has("joints")) {
        const auto& arr = r.raw("joints");
        if (!arr.is_array() || arr.empty()) throw ConfigError(r.path("joints"), "expected a non-empty array");
        robot.joints.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = r.path("joints") + "/" + std::to_string(i);
            Reader jr(arr[i], where);
            jr.only({"base_len", "spine_len", "top_len", "min_bend_radius"});
            for (const char* key : {"base_len", "spine_len", "top_len", "min_bend_radius"}) {
                if (!jr.has(key)) throw ConfigError(jr.path(key), "missing field");
            }
            JointTemplate j;
            j.base_len = read_length(jr.raw("base_len"), jr.path("base_len"));
            j.spine_len = read_length(jr.raw("spine_len"), jr.path("spine_len"));
            j.top_len = read_length(jr.raw("top_len"), jr.path("top_len"));
            j.min_bend_radius = jr.number("min_bend_radius");
            robot.joints.push_back(j);
        }
    }
}

inline void read_workspace(const Reader& r, WorkspaceSource& ws) {
    r.only({"builtin", "stl", "csv", "voxel_size"});
    const int kinds = int(r.has("builtin")) + int(r.has("stl")) + int(r.has("csv"));
    if (kinds > 1) r.fail("give exactly one of builtin, stl, csv");
    if (r.has("builtin")) {
        ws.kind = WorkspaceSource::Kind::Builtin;
        ws.builtin = r.string("builtin");
        ws.path.clear();
    } else if (r.has("stl")) {
        ws.kind = WorkspaceSource::Kind::Stl;
        ws.path = r.string("stl");
        ws.builtin.clear();
    } else if (r.has("csv")) {
        ws.kind = WorkspaceSource::Kind::Csv;
        ws.path = r.string("csv");
        ws.builtin.clear();
    }
    if (r.has("voxel_size")) ws.voxel_size = r.number("voxel_size");
}

inline std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

} // namespace detail

/// Parses a problem file. Syntax errors carry "line:column", field errors the
/// JSON pointer of the offending field. The result is validated except for the
/// existence of workspace files, which load_problem checks.
inline ProblemSpec parse_problem(std::string_view text) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // byte is one past the offending character
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        std::string what = e.what();
        if (const auto p = what.find("; "); p != std::string::npos) what = what.substr(p + 2);
        throw ConfigError(detail::line_column(text, at), "invalid JSON: " + what);
    }

    const detail::Reader r(doc, "");
    r.only({"name", "preset", "scale", "robot", "workspace", "alpha", "epsilon", "objective", "load", "sampling",
            "ik", "optimizer"});

    ProblemSpec spec;
    if (r.has("preset")) {
        const Scale scale = r.has("scale") ? [&] {
            try {
                return parse_scale(r.string("scale"));
            } catch (const ConfigError& e) {
                throw ConfigError(r.path("scale"), e.what());
            }
        }() : Scale::Desk;
        try {
            spec = builtin_problem(r.string("preset"), scale);
        } catch (const ConfigurationError& e) {
            throw ConfigError(r.path("preset"), e.what());
        }
    } else {
        if (r.has("scale")) throw ConfigError(r.path("scale"), "scale only applies together with a preset");
        for (const char* key : {"robot", "workspace"}) {
            if (!r.has(key)) throw ConfigError(r.path(key), "missing field (required without a preset)");
        }
        spec.load.joint_masses.clear();
    }

    if (r.has("name")) spec.name = r.string("name");
    if (r.has("robot")) detail::read_robot(r.object("robot"), spec.robot);
    if (r.has("workspace")) detail::read_workspace(r.object("workspace"), spec.workspace);
    if (r.has("alpha")) {
        spec.alpha = r.number("alpha");
        spec.sampling.window_hi = spec.alpha;
    }
    if (r.has("epsilon")) spec.epsilon = r.number("epsilon");
    if (r.has("objective")) {
        const auto o = r.string("objective");
        if (o == "total_length") {
            spec.objective = Objective::TotalLength;
        } else if (o == "total_torque") {
            spec.objective = Objective::TotalTorque;
        } else {
            throw ConfigError(r.path("objective"), "expected 'total_length' or 'total_torque'");
        }
    }
    if (!r.has("preset") && spec.load.joint_masses.empty()) spec.load.joint_masses.assign(spec.robot.joints.size(), 0.0);
    if (r.has("load")) {
        const auto l = r.object("load");
        l.only({"payload_mass", "joint_masses", "gravity"});
        if (l.has("payload_mass")) spec.load.payload_mass = l.number("payload_mass");
        if (l.has("gravity")) spec.load.gravity = l.vec3("gravity");
        if (l.has("joint_masses")) {
            const auto& arr = l.raw("joint_masses");
            if (!arr.is_array()) throw ConfigError(l.path("joint_masses"), "expected an array of numbers");
            spec.load.joint_masses.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                spec.load.joint_masses.push_back(
                    detail::Reader::as_number(arr[i], l.path("joint_masses") + "/" + std::to_string(i)));
            }
        }
    }
    if (r.has("sampling")) {
        const auto s = r.object("sampling");
        s.only({"fk_samples", "window"});
        if (s.has("fk_samples")) spec.sampling.fk_samples = s.count("fk_samples");
        if (s.has("window")) {
            const auto& w = s.raw("window");
            if (!w.is_array() || w.size() != 2) throw ConfigError(s.path("window"), "expected [lo, hi]");
            spec.sampling.window_lo = detail::Reader::as_number(w[0], s.path("window") + "/0");
            spec.sampling.window_hi = detail::Reader::as_number(w[1], s.path("window") + "/1");
        }
    }
    if (r.has("ik")) {
        const auto s = r.object("ik");
        s.only({"damping", "max_iterations", "restarts", "step_limit"});
        if (s.has("damping")) spec.ik.damping = s.number("damping");
        if (s.has("max_iterations")) spec.ik.max_iterations = static_cast<int>(s.count("max_iterations"));
        if (s.has("restarts")) spec.ik.restarts = static_cast<int>(s.count("restarts"));
        if (s.has("step_limit")) spec.ik.step_limit = s.number("step_limit");
    }
    if (r.has("optimizer")) {
        const auto s = r.object("optimizer");
        s.only({"population_size", "truncation_rate", "max_iterations", "penalty", "select_generation",
                "select_max_trials", "crossover_rate", "mutation_rate"});
        auto& o = spec.optimizer;
        if (s.has("population_size")) o.population_size = s.count("population_size");
        if (s.has("truncation_rate")) o.truncation_rate = s.number("truncation_rate");
        if (s.has("max_iterations")) o.max_iterations = s.count("max_iterations");
        if (s.has("penalty")) o.penalty = s.number("penalty");
        if (s.has("select_generation")) o.select_generation = s.boolean("select_generation");
        if (s.has("select_max_trials")) o.select_max_trials = s.count("select_max_trials");
        if (s.has("crossover_rate")) o.crossover_rate = s.number("crossover_rate");
        if (s.has("mutation_rate")) o.mutation_rate = s.number("mutation_rate");
    }
    spec.ik.tolerance = spec.epsilon;

    try {
        spec.validate({}, /*check_files=*/false);
    } catch (const Error& e) {
        throw ConfigError("", e.what());
    }
    return spec;
}

inline std::string serialize_problem(const ProblemSpec& spec) {
    using detail::json;
    json robot;
    robot["base"] = {{"position", detail::write_vec3(spec.robot.base_position)},
                     {"tangent", detail::write_vec3(spec.robot.base_tangent)},
                     {"normal", detail::write_vec3(spec.robot.base_normal)}};
    robot["joints"] = json::array();
    for (const auto& j : spec.robot.joints) {
        robot["joints"].push_back({{"base_len", detail::write_length(j.base_len)},
                                   {"spine_len", detail::write_length(j.spine_len)},
                                   {"top_len", detail::write_length(j.top_len)},
                                   {"min_bend_radius", j.min_bend_radius}});
    }
    json ws;
    switch (spec.workspace.kind) {
        case WorkspaceSource::Kind::Builtin: ws["builtin"] = spec.workspace.builtin; break;
        case WorkspaceSource::Kind::Stl: ws["stl"] = spec.workspace.path.generic_string(); break;
        case WorkspaceSource::Kind::Csv: ws["csv"] = spec.workspace.path.generic_string(); break;
    }
    ws["voxel_size"] = spec.workspace.voxel_size;
    const auto& o = spec.optimizer;
    json doc = {
        {"name", spec.name},
        {"robot", robot},
        {"workspace", ws},
        {"alpha", spec.alpha},
        {"epsilon", spec.epsilon},
        {"objective", objective_name(spec.objective)},
        {"load",
         {{"payload_mass", spec.load.payload_mass},
          {"joint_masses", spec.load.joint_masses},
          {"gravity", detail::write_vec3(spec.load.gravity)}}},
        {"sampling",
         {{"fk_samples", spec.sampling.fk_samples},
          {"window", json::array({spec.sampling.window_lo, spec.sampling.window_hi})}}},
        {"ik",
         {{"damping", spec.ik.damping},
          {"max_iterations", spec.ik.max_iterations},
          {"restarts", spec.ik.restarts},
          {"step_limit", spec.ik.step_limit}}},
        {"optimizer",
         {{"population_size", o.population_size},
          {"truncation_rate", o.truncation_rate},
          {"max_iterations", o.max_iterations},
          {"penalty", o.penalty},
          {"select_generation", o.select_generation},
          {"select_max_trials", o.select_max_trials},
          {"crossover_rate", o.crossover_rate},
          {"mutation_rate", o.mutation_rate}}},
    };
    return doc.dump(2) + "\n";
}

/// Reads and validates a problem file; relative workspace paths resolve
/// against the file's directory.
inline ProblemSpec load_problem(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    ProblemSpec spec;
    try {
        spec = parse_problem(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + (e.location().empty() ? "" : ":" + e.location()),
                          std::string(e.what()).substr(e.location().empty() ? 0 : e.location().size() + 2));
    }
    try {
        spec.validate(path.parent_path());
    } catch (const Error& e) {
        throw ConfigError(path.string() + ":/workspace", e.what());
    }
    return spec;
}

} // namespace continuum
