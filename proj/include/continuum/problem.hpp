#pragma once

// Design problems: a robot template whose segment lengths are fixed or free
// design variables, a workspace source, and the settings needed to score a
// candidate. Includes parametric stand-ins for three application workspaces.

#include <array>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "continuum/kinematics.hpp"
#include "continuum/optimizer.hpp"
#include "continuum/reachability.hpp"
#include "continuum/workspace_io.hpp"

namespace continuum {

/// One segment length: fixed, or a design variable within [lb, ub].
struct LengthSpec {
    double value = 0.0; // used when fixed
    std::optional<std::array<double, 2>> bounds;

    static LengthSpec fixed(double v) { return {v, std::nullopt}; }
    static LengthSpec variable(double lb, double ub) { return {0.0, std::array<double, 2>{lb, ub}}; }
    bool is_variable() const { return bounds.has_value(); }
};

struct JointTemplate {
    LengthSpec base_len, spine_len, top_len;
    double min_bend_radius = 1.0;
};

struct DesignVariable {
    std::string name;
    double lower = 0.0, upper = 0.0;
};

/// Robot whose free segment lengths form the design vector x, ordered joint by
/// joint and base, spine, top within a joint.
struct RobotTemplate {
    Vec3 base_position = Vec3::Zero();
    Vec3 base_tangent = Vec3::UnitZ();
    Vec3 base_normal = Vec3::UnitX();
    std::vector<JointTemplate> joints;

    std::vector<DesignVariable> variables() const {
        std::vector<DesignVariable> vars;
        static constexpr const char* kSegment[3] = {"l_b", "l_s", "l_t"};
        for (std::size_t i = 0; i < joints.size(); ++i) {
            const LengthSpec* segs[3] = {&joints[i].base_len, &joints[i].spine_len, &joints[i].top_len};
            for (int s = 0; s < 3; ++s) {
                if (segs[s]->is_variable()) {
                    vars.push_back({std::string(kSegment[s]) + std::to_string(i + 1), (*segs[s]->bounds)[0],
                                    (*segs[s]->bounds)[1]});
                }
            }
        }
        return vars;
    }

    std::vector<double> lower_bounds() const {
        std::vector<double> lb;
        for (const auto& v : variables()) lb.push_back(v.lower);
        return lb;
    }
    std::vector<double> upper_bounds() const {
        std::vector<double> ub;
        for (const auto& v : variables()) ub.push_back(v.upper);
        return ub;
    }

    RobotDesign instantiate(const std::vector<double>& x) const {
        RobotDesign design;
        design.base_position = base_position;
        design.base_tangent = base_tangent;
        design.base_normal = base_normal;
        std::size_t k = 0;
        auto take = [&](const LengthSpec& spec) {
            if (!spec.is_variable()) return spec.value;
            if (k >= x.size()) throw ParameterError("design vector is shorter than the variable count");
            return x[k++];
        };
        for (const auto& j : joints) {
            JointDesign jd;
            jd.base_len = take(j.base_len);
            jd.spine_len = take(j.spine_len);
            jd.top_len = take(j.top_len);
            jd.min_bend_radius = j.min_bend_radius;
            design.joints.push_back(jd);
        }
        if (k != x.size()) throw ParameterError("design vector is longer than the variable count");
        return design;
    }

    void validate() const {
        if (joints.empty()) throw ConfigurationError("robot needs at least one joint");
        for (std::size_t i = 0; i < joints.size(); ++i) {
            const auto& j = joints[i];
            const std::string where = "joint " + std::to_string(i + 1);
            if (!(j.min_bend_radius > 0)) throw ConfigurationError(where + ": min_bend_radius must be positive");
            for (const LengthSpec* s : {&j.base_len, &j.spine_len, &j.top_len}) {
                if (s->is_variable()) {
                    const auto [lb, ub] = *s->bounds;
                    if (!(lb <= ub)) throw ConfigurationError(where + ": lower bound exceeds upper bound");
                    if (!(lb >= 0)) throw ConfigurationError(where + ": lengths must be non-negative");
                } else if (!(s->value >= 0)) {
                    throw ConfigurationError(where + ": lengths must be non-negative");
                }
            }
            const double spine_min = j.spine_len.is_variable() ? (*j.spine_len.bounds)[0] : j.spine_len.value;
            if (!(spine_min > 0)) throw ConfigurationError(where + ": spine length must be positive");
        }
        // Frame checks of the kinematics layer.
        std::vector<double> x = lower_bounds();
        instantiate(x).validate();
    }
};

enum class Objective { TotalLength, TotalTorque };

inline const char* objective_name(Objective o) { return o == Objective::TotalLength ? "total_length" : "total_torque"; }

struct WorkspaceSource {
    enum class Kind { Builtin, Stl, Csv };
    Kind kind = Kind::Builtin;
    std::string builtin;          // builtin workspace name
    std::filesystem::path path;   // stl or csv file
    double voxel_size = 3.0;      // cm, stl and voxel builtins
};

struct ProblemSpec {
    std::string name;
    RobotTemplate robot;
    WorkspaceSource workspace;
    double alpha = 0.95;
    double epsilon = 1.0;
    Objective objective = Objective::TotalLength;
    LoadModel load;
    SamplingBudget sampling;
    IkOptions ik;
    OptimizerParams optimizer;

    /// Relative workspace paths are checked against `base_dir`.
    void validate(const std::filesystem::path& base_dir = {}, bool check_files = true) const {
        robot.validate();
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigurationError("alpha must be in (0, 1]");
        if (!(epsilon > 0.0)) throw ConfigurationError("epsilon must be positive");
        if (!(workspace.voxel_size > 0.0)) throw ConfigurationError("voxel_size must be positive");
        sampling.validate();
        ik.validate();
        optimizer.validate();
        if (load.payload_mass < 0) throw ConfigurationError("payload mass must be non-negative");
        if (load.joint_masses.size() != robot.joints.size()) {
            throw ConfigurationError("load needs one joint mass per joint");
        }
        for (double m : load.joint_masses) {
            if (m < 0) throw ConfigurationError("joint masses must be non-negative");
        }
        if (!load.gravity.allFinite()) throw ConfigurationError("gravity must be finite");
        using Kind = WorkspaceSource::Kind;
        if (workspace.kind == Kind::Builtin && workspace.builtin != "mobile_platform" &&
            workspace.builtin != "deep_sea" && workspace.builtin != "spot_welding") {
            throw ConfigurationError("unknown builtin workspace '" + workspace.builtin + "'");
        }
        const auto file = workspace.path.is_absolute() || base_dir.empty() ? workspace.path : base_dir / workspace.path;
        if (check_files && workspace.kind != Kind::Builtin && !std::filesystem::exists(file)) {
            throw ConfigurationError("workspace file not found: " + workspace.path.string());
        }
        const bool point_list = workspace.kind == Kind::Csv ||
                                (workspace.kind == Kind::Builtin && workspace.builtin == "spot_welding");
        if (objective == Objective::TotalTorque && !point_list) {
            throw ConfigurationError("total_torque needs a point-list workspace (csv or spot_welding)");
        }
        if (objective == Objective::TotalTorque && optimizer.select_generation) {
            throw ConfigurationError("select generation is not available for the total_torque objective");
        }
    }
};

// ---------------------------------------------------------------------------
// Builtin stand-in workspaces

/// Mobile platform: a box of 80 x 24 x 51 cm in front of the base; with the
/// base at the origin the envelope is 80 x 32 x 51 cm.
inline TriangleMesh mobile_platform_mesh() { return make_box_mesh(Vec3(-40, 8, -25.5), Vec3(40, 32, 25.5)); }

/// Deep sea: a wide short cylinder (r 25.5, z 45..61) above the floor and a
/// thin long collector cylinder (r 4, along y from 30.5 to 60.5 at z 20).
/// With the base at the origin the envelope is 51 x 86 x 61 cm.
inline TriangleMesh deep_sea_mesh() {
    return merge_meshes(make_cylinder_mesh(Vec3(0, 0, 45), Vec3::UnitZ(), 25.5, 16.0, 96),
                        make_cylinder_mesh(Vec3(0, 30.5, 20), Vec3::UnitY(), 4.0, 30.0, 48));
}

/// Spot welding: 32 points evenly spaced by arc length along a rounded
/// rectangle spanning y 10.9..70.3 and z -120.8..0, tilted so x runs linearly
/// from 13.7 (z = -120.8) to 37.7 (z = 0).
inline std::vector<Vec3> spot_welding_points() {
    constexpr double y0 = 10.9, y1 = 70.3, z0 = -120.8, z1 = 0.0, x_lo = 13.7, x_hi = 37.7;
    constexpr double radius = 10.0;
    const double w = (y1 - y0) - 2 * radius, h = (z1 - z0) - 2 * radius;
    const double arc = 0.5 * kPi * radius;
    const double perimeter = 2 * (w + h) + 4 * arc;
    // Walk counter-clockwise in (y, z) starting at the middle of the bottom edge.
    auto at = [&](double s) -> Eigen::Vector2d {
        const std::array<double, 8> pieces{w, arc, h, arc, w, arc, h, arc};
        double start_offset = 0.5 * w;
        s = std::fmod(s + start_offset, perimeter);
        const Eigen::Vector2d corner[4] = {{y1 - radius, z0 + radius}, {y1 - radius, z1 - radius},
                                           {y0 + radius, z1 - radius}, {y0 + radius, z0 + radius}};
        for (int p = 0; p < 8; ++p) {
            if (s <= pieces[p] || p == 7) {
                const int c = p / 2;
                if (p % 2 == 0) {
                    const Eigen::Vector2d dir[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
                    const Eigen::Vector2d start[4] = {{y0 + radius, z0}, {y1, z0 + radius}, {y1 - radius, z1},
                                                      {y0, z1 - radius}};
                    return start[c] + s * dir[c];
                }
                const double a = -0.5 * kPi + 0.5 * kPi * c + s / radius;
                return corner[c] + radius * Eigen::Vector2d(std::cos(a), std::sin(a));
            }
            s -= pieces[p];
        }
        return {y0, z0};
    };
    std::vector<Vec3> points;
    for (int k = 0; k < 32; ++k) {
        const auto yz = at(perimeter * k / 32.0);
        const double x = x_lo + (x_hi - x_lo) * (yz.y() - z0) / (z1 - z0);
        points.emplace_back(x, yz.x(), yz.y());
    }
    return points;
}

/// The three-joint template shared by the builtin problems: seven variables
/// (l_b1, l_s1, l_b2, l_s2, l_b3, l_s3, l_t3), no top links on joints 1-2.
inline RobotTemplate three_joint_template(const Vec3& base, const Vec3& tangent, const Vec3& normal) {
    RobotTemplate t;
    t.base_position = base;
    t.base_tangent = tangent;
    t.base_normal = normal;
    t.joints = {
        {LengthSpec::variable(4, 30), LengthSpec::variable(2.675, 32.1), LengthSpec::fixed(0), 10.22},
        {LengthSpec::variable(4, 30), LengthSpec::variable(2.173, 26.076), LengthSpec::fixed(0), 8.3},
        {LengthSpec::variable(4, 30), LengthSpec::variable(2.173, 26.076), LengthSpec::variable(36, 60), 8.3},
    };
    return t;
}

enum class Scale { Desk, Paper };

/// Builtin problem with the protocol defaults at the requested scale.
inline ProblemSpec builtin_problem(const std::string& name, Scale scale = Scale::Desk) {
    ProblemSpec spec;
    spec.name = name;
    spec.workspace.kind = WorkspaceSource::Kind::Builtin;
    spec.workspace.builtin = name;
    spec.workspace.voxel_size = 3.0;
    spec.epsilon = 1.0;
    spec.load.payload_mass = 1.0;
    spec.load.joint_masses.assign(3, 1.0);
    spec.optimizer.population_size = 100;
    spec.optimizer.truncation_rate = 0.5;
    spec.optimizer.penalty = 0.33;
    spec.optimizer.crossover_rate = 0.9;
    spec.optimizer.mutation_rate = 0.1;
    spec.optimizer.select_max_trials = 10000;
    spec.sampling.fk_samples = scale == Scale::Desk ? 100000 : 3000000;
    if (name == "mobile_platform") {
        spec.robot = three_joint_template(Vec3::Zero(), Vec3::UnitY(), Vec3::UnitZ());
        spec.alpha = 0.95;
        spec.objective = Objective::TotalLength;
        spec.optimizer.max_iterations = 20;
    } else if (name == "deep_sea") {
        spec.robot = three_joint_template(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitX());
        spec.alpha = 0.95;
        spec.objective = Objective::TotalLength;
        spec.optimizer.max_iterations = 20;
    } else if (name == "spot_welding") {
        spec.robot = three_joint_template(Vec3(75.0, 45.0, -70.0), -Vec3::UnitX(), Vec3::UnitZ());
        spec.alpha = 1.0;
        spec.objective = Objective::TotalTorque;
        spec.optimizer.max_iterations = 30;
        if (scale == Scale::Desk) {
            spec.optimizer.population_size = 20;
            spec.optimizer.max_iterations = 10;
            spec.ik.restarts = 3;
        }
    } else {
        throw ConfigurationError("unknown builtin problem '" + name + "'");
    }
    spec.sampling.window_lo = 0.9;
    spec.sampling.window_hi = spec.alpha;
    return spec;
}

/// Targets of a problem. Relative file paths resolve against `base_dir`.
inline TargetSet build_targets(const ProblemSpec& spec, const std::filesystem::path& base_dir = {}) {
    const auto& ws = spec.workspace;
    auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; };
    switch (ws.kind) {
        case WorkspaceSource::Kind::Builtin:
            if (ws.builtin == "mobile_platform") {
                return grid_to_targets(voxelize_mesh(mobile_platform_mesh(), ws.voxel_size), spec.epsilon, spec.alpha);
            }
            if (ws.builtin == "deep_sea") {
                return grid_to_targets(voxelize_mesh(deep_sea_mesh(), ws.voxel_size), spec.epsilon, spec.alpha);
            }
            if (ws.builtin == "spot_welding") return points_to_targets(spot_welding_points(), spec.epsilon, spec.alpha);
            throw ConfigurationError("unknown builtin workspace '" + ws.builtin + "'");
        case WorkspaceSource::Kind::Stl:
            return grid_to_targets(voxelize_mesh(load_stl(resolve(ws.path)), ws.voxel_size), spec.epsilon, spec.alpha);
        case WorkspaceSource::Kind::Csv:
            return points_to_targets(load_points_csv(resolve(ws.path)), spec.epsilon, spec.alpha);
    }
    throw ConfigurationError("unknown workspace kind");
}

/// Score of one design vector: objective and reachability fraction.
inline Evaluation evaluate_design(const ProblemSpec& spec, const TargetSet& targets, const std::vector<double>& x,
                                  std::uint64_t seed) {
    const RobotDesign design = spec.robot.instantiate(x);
    IkOptions ik = spec.ik;
    ik.seed = derive_seed(seed, 0x696b);
    if (spec.objective == Objective::TotalTorque) {
        const auto report = min_torque_reachability(design, targets, spec.load, ik);
        return {report.total_torque, report.theta};
    }
    SamplingBudget budget = spec.sampling;
    budget.seed = derive_seed(seed, 0x666b);
    const auto report = hybrid_reachability(design, targets, budget, ik);
    return {std::accumulate(x.begin(), x.end(), 0.0), report.theta};
}

/// Optimizer view of a problem. Length objectives expose the sum of x as the
/// cheap objective used by select generation.
inline OptimizationProblem make_optimization_problem(const ProblemSpec& spec, const TargetSet& targets) {
    OptimizationProblem p;
    p.lower = spec.robot.lower_bounds();
    p.upper = spec.robot.upper_bounds();
    p.alpha = spec.alpha;
    p.evaluate = [&spec, &targets](const std::vector<double>& x, std::uint64_t seed) {
        return evaluate_design(spec, targets, x, seed);
    };
    if (spec.objective == Objective::TotalLength) {
        p.cheap_objective = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0); };
    }
    return p;
}

} // namespace continuum
