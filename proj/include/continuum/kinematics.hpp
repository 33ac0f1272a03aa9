#pragma once

// Constant-curvature forward kinematics for serial continuum robots.
//
// Every joint is a rigid base link, a bendable spine that deforms as a
// circular arc, and a rigid top link. A joint state is (curvature, rotation):
// curvature 1/R with 0 meaning straight, rotation turning the bending plane
// about the joint's base tangent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "continuum/core.hpp"

namespace continuum {

struct JointDesign {
    double base_len = 0.0;        // cm
    double spine_len = 1.0;       // cm
    double top_len = 0.0;         // cm
    double min_bend_radius = 1.0; // cm

    double total_length() const { return base_len + spine_len + top_len; }
    double max_curvature() const { return 1.0 / min_bend_radius; }
};

struct JointState {
    double curvature = 0.0; // 1/cm
    double rotation = 0.0;  // rad
};

/// One state per joint. Flattened as (kappa_1, theta_1, kappa_2, theta_2, ...).
struct Configuration {
    std::vector<JointState> states;

    std::size_t size() const { return states.size(); }

    Eigen::VectorXd flat() const {
        Eigen::VectorXd q(2 * states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            q[2 * i] = states[i].curvature;
            q[2 * i + 1] = states[i].rotation;
        }
        return q;
    }

    static Configuration from_flat(const Eigen::VectorXd& q) {
        Configuration config;
        config.states.resize(static_cast<std::size_t>(q.size()) / 2);
        for (std::size_t i = 0; i < config.states.size(); ++i) {
            config.states[i] = {q[2 * i], q[2 * i + 1]};
        }
        return config;
    }
};

/// Origin plus right-handed orthonormal triad with binormal = tangent x normal.
struct Frame {
    Vec3 origin = Vec3::Zero();
    Vec3 tangent = Vec3::UnitZ();
    Vec3 normal = Vec3::UnitX();
    Vec3 binormal = Vec3::UnitY();

    static Frame from_tangent_normal(const Vec3& origin, const Vec3& tangent, const Vec3& normal) {
        return {origin, tangent, normal, tangent.cross(normal)};
    }

    bool is_orthonormal(double tol = 1e-9) const {
        return std::abs(tangent.norm() - 1.0) < tol && std::abs(normal.norm() - 1.0) < tol &&
               std::abs(binormal.norm() - 1.0) < tol && std::abs(tangent.dot(normal)) < tol &&
               std::abs(tangent.dot(binormal)) < tol && std::abs(normal.dot(binormal)) < tol &&
               (tangent.cross(normal) - binormal).norm() < tol;
    }
};

struct RobotDesign {
    Vec3 base_position = Vec3::Zero();
    Vec3 base_tangent = Vec3::UnitZ();
    Vec3 base_normal = Vec3::UnitX();
    std::vector<JointDesign> joints;

    Frame base_frame() const {
        return Frame::from_tangent_normal(base_position, base_tangent, base_normal);
    }

    double total_length() const {
        double sum = 0.0;
        for (const auto& j : joints) sum += j.total_length();
        return sum;
    }

    void validate() const {
        if (joints.empty()) throw ConfigurationError("robot design has no joints");
        if (!base_frame().is_orthonormal()) {
            throw ConfigurationError("base tangent and normal must be orthogonal unit vectors");
        }
        for (std::size_t i = 0; i < joints.size(); ++i) {
            const auto& j = joints[i];
            if (!(j.spine_len > 0.0) || !(j.base_len >= 0.0) || !(j.top_len >= 0.0)) {
                throw ConfigurationError("joint " + std::to_string(i + 1) +
                                         ": lengths must satisfy base >= 0, spine > 0, top >= 0");
            }
            if (!(j.min_bend_radius > 0.0)) {
                throw ConfigurationError("joint " + std::to_string(i + 1) +
                                         ": minimum bend radius must be positive");
            }
        }
    }
};

struct FrameChain {
    /// Frame at the base of each joint, normal already turned into that
    /// joint's bending plane.
    std::vector<Frame> joint_frames;
    Frame end_effector;
};

/// Point masses loading the robot. Gravity is in m/s^2, masses in kg.
struct LoadModel {
    double payload_mass = 0.0;
    std::vector<double> joint_masses;
    Vec3 gravity{0.0, 0.0, -9.81};

    static LoadModel zero_gravity(std::size_t joints) {
        LoadModel load;
        load.joint_masses.assign(joints, 0.0);
        load.gravity = Vec3::Zero();
        return load;
    }
};

namespace detail {

/// sin(phi)/kappa and (1 - cos(phi))/kappa for phi = spine * kappa, with a
/// series branch near straightness.
struct ArcTerms {
    double sin_over_k;
    double one_minus_cos_over_k;
    double cos_phi;
    double sin_phi;
};

inline ArcTerms arc_terms(double spine, double curvature) {
    const double phi = spine * curvature;
    if (curvature == 0.0) return {spine, 0.0, 1.0, 0.0};
    if (std::abs(phi) < 1e-6) {
        const double phi2 = phi * phi;
        return {spine * (1.0 - phi2 / 6.0), spine * phi * (0.5 - phi2 / 24.0), std::cos(phi),
                std::sin(phi)};
    }
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {s / curvature, (1.0 - c) / curvature, c, s};
}

} // namespace detail

/// Turn the incoming normal about the tangent by the joint rotation.
inline Frame orient_joint(const Frame& frame_in, double rotation) {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    Frame out = frame_in;
    out.normal = frame_in.normal * c + frame_in.binormal * s;
    out.binormal = frame_in.binormal * c - frame_in.normal * s;
    return out;
}

/// Bend an oriented frame through one joint. The returned normal is the
/// un-rotated normal of the next joint.
inline Frame bend_joint(const Frame& oriented, const JointDesign& joint, double curvature) {
    const auto arc = detail::arc_terms(joint.spine_len, curvature);
    Frame out;
    out.origin = oriented.origin +
                 (joint.base_len + arc.sin_over_k + joint.top_len * arc.cos_phi) * oriented.tangent +
                 (arc.one_minus_cos_over_k + joint.top_len * arc.sin_phi) * oriented.normal;
    out.tangent = oriented.tangent * arc.cos_phi + oriented.normal * arc.sin_phi;
    out.normal = oriented.normal * arc.cos_phi - oriented.tangent * arc.sin_phi;
    out.binormal = oriented.binormal;
    return out;
}

/// Frame at the base of the next joint.
inline Frame propagate_joint(const Frame& frame_in, const JointDesign& joint, const JointState& state) {
    if (!frame_in.is_orthonormal()) throw InvalidFrameError("input frame is not orthonormal");
    return bend_joint(orient_joint(frame_in, state.rotation), joint, state.curvature);
}

inline FrameChain forward_kinematics(const RobotDesign& design, const Configuration& config) {
    if (config.size() != design.joints.size()) {
        throw ConfigurationError("configuration has " + std::to_string(config.size()) +
                                 " joint states for a " + std::to_string(design.joints.size()) +
                                 "-joint design");
    }
    FrameChain chain;
    chain.joint_frames.reserve(design.joints.size());
    Frame frame = design.base_frame();
    if (!frame.is_orthonormal()) throw InvalidFrameError("base frame is not orthonormal");
    for (std::size_t i = 0; i < design.joints.size(); ++i) {
        const Frame oriented = orient_joint(frame, config.states[i].rotation);
        chain.joint_frames.push_back(oriented);
        frame = bend_joint(oriented, design.joints[i], config.states[i].curvature);
    }
    chain.end_effector = frame;
    return chain;
}

/// End-effector position only; no validation, no allocation. Hot path for
/// Monte-Carlo sampling and finite differences. `q` is the flat state vector.
inline Vec3 end_effector_position(const RobotDesign& design, std::span<const double> q) {
    Frame frame = design.base_frame();
    for (std::size_t i = 0; i < design.joints.size(); ++i) {
        frame = bend_joint(orient_joint(frame, q[2 * i + 1]), design.joints[i], q[2 * i]);
    }
    return frame.origin;
}

inline Vec3 end_effector_position(const RobotDesign& design, const Eigen::VectorXd& q) {
    return end_effector_position(design, std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

/// Point at path length `s` along a joint whose oriented base frame is given.
inline Vec3 point_along_joint(const Frame& oriented, const JointDesign& joint, double curvature, double s) {
    if (s <= joint.base_len) return oriented.origin + s * oriented.tangent;
    const Vec3 spine_start = oriented.origin + joint.base_len * oriented.tangent;
    const double along = std::min(s - joint.base_len, joint.spine_len);
    const auto arc = detail::arc_terms(along, curvature);
    const Vec3 on_arc = spine_start + arc.sin_over_k * oriented.tangent + arc.one_minus_cos_over_k * oriented.normal;
    if (s <= joint.base_len + joint.spine_len) return on_arc;
    const Vec3 tip_tangent = oriented.tangent * arc.cos_phi + oriented.normal * arc.sin_phi;
    return on_arc + (s - joint.base_len - joint.spine_len) * tip_tangent;
}

/// Half-path-length point of joint i, where its lumped mass sits.
inline Vec3 joint_centroid(const FrameChain& chain, const RobotDesign& design, const Configuration& config,
                           std::size_t i) {
    if (i >= design.joints.size()) throw ConfigurationError("joint index out of range");
    const auto& joint = design.joints[i];
    return point_along_joint(chain.joint_frames[i], joint, config.states[i].curvature,
                             0.5 * joint.total_length());
}

/// Static torque at each joint base (N m) holding the payload and the joint
/// masses against gravity. Positions are converted from cm to m.
inline std::vector<Vec3> static_torques(const FrameChain& chain, const RobotDesign& design,
                                        const Configuration& config, const LoadModel& load) {
    const std::size_t m = design.joints.size();
    if (!load.joint_masses.empty() && load.joint_masses.size() != m) {
        throw ConfigurationError("load model needs one mass per joint");
    }
    constexpr double cm_to_m = 0.01;
    // Accumulate from the tip so each joint sees only distal masses:
    // tau_i = sum_k (r_k - r_i) x m_k g = M_i (first moment) - r_i x (W_i g).
    Vec3 first_moment = load.payload_mass * chain.end_effector.origin;
    double mass = load.payload_mass;
    std::vector<Vec3> torques(m, Vec3::Zero());
    for (std::size_t idx = m; idx-- > 0;) {
        const double joint_mass = load.joint_masses.empty() ? 0.0 : load.joint_masses[idx];
        if (joint_mass != 0.0) {
            first_moment += joint_mass * joint_centroid(chain, design, config, idx);
            mass += joint_mass;
        }
        const Vec3 lever_sum = first_moment - mass * chain.joint_frames[idx].origin;
        torques[idx] = (cm_to_m * lever_sum).cross(load.gravity);
    }
    return torques;
}

inline std::vector<Vec3> static_torques(const RobotDesign& design, const Configuration& config,
                                        const LoadModel& load) {
    return static_torques(forward_kinematics(design, config), design, config, load);
}

/// 1/2 sum |tau_i|^2, the min-torque IK objective.
inline double torque_objective(const std::vector<Vec3>& torques) {
    double sum = 0.0;
    for (const auto& t : torques) sum += t.squaredNorm();
    return 0.5 * sum;
}

/// sum |tau_i|, the total torque reported per target.
inline double torque_total(const std::vector<Vec3>& torques) {
    double sum = 0.0;
    for (const auto& t : torques) sum += t.norm();
    return sum;
}

} // namespace continuum
