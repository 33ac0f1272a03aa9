#pragma once

// Position inverse kinematics (damped least squares) and torque-minimizing
// inverse kinematics (augmented Lagrangian over the position constraint,
// projected BFGS inside).
//
// Internally the curvature of joint i is scaled to kappa_i / kappa_max,i so
// both state coordinates live on comparable ranges: the scaled curvature in
// [0, 1] and the rotation in radians.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "continuum/core.hpp"
#include "continuum/kinematics.hpp"
#include "continuum/rng.hpp"

namespace continuum {

struct IkOptions {
    double tolerance = 1.0;      // cm, position residual accepted as reached
    double damping = 0.1;        // lambda of the damped least-squares step
    int max_iterations = 200;    // per attempt
    int restarts = 10;           // attempts from independent random starts
    double step_limit = 0.5;     // max per-iteration change of a scaled state coordinate
    std::uint64_t seed = 0;

    void validate() const {
        if (!(tolerance > 0.0)) throw ParameterError("IK tolerance must be positive");
        if (!(damping > 0.0)) throw ParameterError("IK damping must be positive");
        if (restarts < 1) throw ParameterError("IK restarts must be at least 1");
        if (max_iterations < 1) throw ParameterError("IK max_iterations must be at least 1");
        if (!(step_limit > 0.0)) throw ParameterError("IK step_limit must be positive");
    }
};

struct IkSolution {
    Configuration config;
    double residual = std::numeric_limits<double>::infinity(); // cm
    double torque_total = 0.0;                                 // N m, sum |tau_i|
    double objective = 0.0;                                    // (N m)^2, 1/2 sum |tau_i|^2
    bool converged = false;
};

/// Central-difference Jacobian of the end-effector position, columns ordered
/// (kappa_1, theta_1, kappa_2, theta_2, ...).
inline Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const RobotDesign& design,
                                                                  const Configuration& config) {
    constexpr double h_curvature = 1e-7;
    constexpr double h_rotation = 1e-7;
    Eigen::VectorXd q = config.flat();
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, q.size());
    for (Eigen::Index c = 0; c < q.size(); ++c) {
        const double h = (c % 2 == 0) ? h_curvature : h_rotation;
        const double saved = q[c];
        q[c] = saved + h;
        const Vec3 plus = end_effector_position(design, q);
        q[c] = saved - h;
        const Vec3 minus = end_effector_position(design, q);
        q[c] = saved;
        jac.col(c) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

/// Draw kappa_i ~ U[0, 1/R_min,i], theta_i ~ U[0, 2pi].
inline Configuration sample_configuration(const RobotDesign& design, Rng& rng) {
    Configuration config;
    config.states.resize(design.joints.size());
    for (std::size_t i = 0; i < design.joints.size(); ++i) {
        config.states[i].curvature = rng.uniform(0.0, design.joints[i].max_curvature());
        config.states[i].rotation = rng.uniform(0.0, kTwoPi);
    }
    return config;
}

/// Sum |tau_i| and 1/2 sum |tau_i|^2 for a configuration.
inline void fill_torques(IkSolution& solution, const RobotDesign& design, const LoadModel& load) {
    const auto torques = static_torques(design, solution.config, load);
    solution.torque_total = torque_total(torques);
    solution.objective = torque_objective(torques);
}

/// Central-difference gradient of 1/2 sum |tau_i|^2 with respect to the flat
/// state vector (raw, unscaled coordinates).
inline Eigen::VectorXd torque_objective_gradient(const RobotDesign& design, const Configuration& config,
                                                 const LoadModel& load, double step = 1e-6) {
    Eigen::VectorXd q = config.flat();
    Eigen::VectorXd grad(q.size());
    for (Eigen::Index c = 0; c < q.size(); ++c) {
        const double saved = q[c];
        q[c] = saved + step;
        const double plus = torque_objective(static_torques(design, Configuration::from_flat(q), load));
        q[c] = saved - step;
        const double minus = torque_objective(static_torques(design, Configuration::from_flat(q), load));
        q[c] = saved;
        grad[c] = (plus - minus) / (2.0 * step);
    }
    return grad;
}

namespace detail {

/// Maps between the flat state vector and scaled coordinates.
class StateScaling {
public:
    explicit StateScaling(const RobotDesign& design) {
        const auto n = static_cast<Eigen::Index>(2 * design.joints.size());
        scale_ = Eigen::VectorXd::Ones(n);
        for (std::size_t i = 0; i < design.joints.size(); ++i) {
            scale_[static_cast<Eigen::Index>(2 * i)] = design.joints[i].max_curvature();
        }
    }

    Eigen::VectorXd to_state(const Eigen::VectorXd& u) const { return u.cwiseProduct(scale_); }
    Eigen::VectorXd to_scaled(const Eigen::VectorXd& q) const { return q.cwiseQuotient(scale_); }
    const Eigen::VectorXd& scale() const { return scale_; }

    /// Clamp scaled curvatures into [0, 1] and wrap rotations into [0, 2pi).
    static void project(Eigen::VectorXd& u) {
        for (Eigen::Index c = 0; c < u.size(); ++c) {
            u[c] = (c % 2 == 0) ? std::clamp(u[c], 0.0, 1.0) : wrap_angle(u[c]);
        }
    }

private:
    Eigen::VectorXd scale_;
};

inline Eigen::VectorXd random_scaled_start(std::size_t joints, Rng& rng) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(2 * joints));
    for (std::size_t i = 0; i < joints; ++i) {
        u[static_cast<Eigen::Index>(2 * i)] = rng.uniform();
        u[static_cast<Eigen::Index>(2 * i + 1)] = rng.uniform(0.0, kTwoPi);
    }
    return u;
}

struct AttemptResult {
    Eigen::VectorXd u;
    double residual;
};

/// One damped least-squares descent from scaled start `u`. Stops once the
/// residual is within `tolerance` or when no backtracked step improves it.
inline AttemptResult dls_attempt(const RobotDesign& design, const StateScaling& scaling, const Vec3& target,
                                 Eigen::VectorXd u, const IkOptions& opts, double tolerance) {
    StateScaling::project(u);
    Eigen::VectorXd q = scaling.to_state(u);
    double residual = (target - end_effector_position(design, q)).norm();
    const double lambda2 = opts.damping * opts.damping;
    for (int iter = 0; iter < opts.max_iterations && residual > tolerance; ++iter) {
        const Vec3 error = target - end_effector_position(design, q);
        Eigen::Matrix<double, 3, Eigen::Dynamic> jac =
            position_jacobian(design, Configuration::from_flat(q));
        for (Eigen::Index c = 0; c < jac.cols(); ++c) jac.col(c) *= scaling.scale()[c];
        const Eigen::Matrix3d jjt = jac * jac.transpose() + lambda2 * Eigen::Matrix3d::Identity();
        Eigen::VectorXd step = jac.transpose() * jjt.ldlt().solve(error);
        const double largest = step.cwiseAbs().maxCoeff();
        if (largest > opts.step_limit) step *= opts.step_limit / largest;

        bool improved = false;
        for (int halving = 0; halving < 6; ++halving) {
            Eigen::VectorXd trial = u + step;
            StateScaling::project(trial);
            const Eigen::VectorXd trial_q = scaling.to_state(trial);
            const double trial_residual = (target - end_effector_position(design, trial_q)).norm();
            if (trial_residual < residual) {
                u = trial;
                q = trial_q;
                residual = trial_residual;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    return {u, residual};
}

inline void check_bounds(const RobotDesign& design) {
    for (std::size_t i = 0; i < design.joints.size(); ++i) {
        const double kmax = design.joints[i].max_curvature();
        if (!(kmax > 0.0) || !std::isfinite(kmax)) {
            throw ConfigurationError("joint " + std::to_string(i + 1) + " has invalid curvature bounds");
        }
    }
}

} // namespace detail

/// Damped least-squares position IK with random restarts. An unreachable
/// target is a normal result with converged = false and the best residual.
inline IkSolution solve_position_ik(const RobotDesign& design, const Vec3& target, const IkOptions& opts) {
    opts.validate();
    detail::check_bounds(design);
    if (!target.allFinite()) throw ParameterError("IK target must be finite");
    const detail::StateScaling scaling(design);
    IkSolution best;
    for (int attempt = 0; attempt < opts.restarts; ++attempt) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(attempt)));
        const auto start = detail::random_scaled_start(design.joints.size(), rng);
        const auto result = detail::dls_attempt(design, scaling, target, start, opts, opts.tolerance);
        if (result.residual < best.residual) {
            best.residual = result.residual;
            best.config = Configuration::from_flat(scaling.to_state(result.u));
        }
        if (best.residual <= opts.tolerance) break;
    }
    best.converged = best.residual <= opts.tolerance;
    return best;
}

namespace detail {

/// Objective and constraint of the min-torque problem in scaled coordinates.
class TorqueProblem {
public:
    TorqueProblem(const RobotDesign& design, const StateScaling& scaling, const Vec3& target,
                  const LoadModel& load)
        : design_(design), scaling_(scaling), target_(target), load_(load) {}

    struct Value {
        double objective;
        Vec3 constraint;
    };

    Value evaluate(const Eigen::VectorXd& u) const {
        const Configuration config = Configuration::from_flat(scaling_.to_state(u));
        const FrameChain chain = forward_kinematics(design_, config);
        return {torque_objective(static_torques(chain, design_, config, load_)),
                chain.end_effector.origin - target_};
    }

private:
    const RobotDesign& design_;
    const StateScaling& scaling_;
    Vec3 target_;
    const LoadModel& load_;
};

/// Augmented Lagrangian L(u) = f(u)/f_scale + nu . c(u) + rho/2 |c(u)|^2.
struct AugmentedLagrangian {
    const TorqueProblem& problem;
    double objective_scale;
    Vec3 multipliers;
    double penalty;

    double operator()(const Eigen::VectorXd& u) const {
        const auto v = problem.evaluate(u);
        return v.objective / objective_scale + multipliers.dot(v.constraint) +
               0.5 * penalty * v.constraint.squaredNorm();
    }
};

template <class Fn>
Eigen::VectorXd central_gradient(const Fn& fn, Eigen::VectorXd u, double h) {
    Eigen::VectorXd grad(u.size());
    for (Eigen::Index c = 0; c < u.size(); ++c) {
        const double saved = u[c];
        u[c] = saved + h;
        const double plus = fn(u);
        u[c] = saved - h;
        const double minus = fn(u);
        u[c] = saved;
        grad[c] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

/// Components of the gradient that push a curvature against its bound are
/// frozen; rotations are periodic and never frozen.
inline Eigen::VectorXd projected_gradient(const Eigen::VectorXd& u, const Eigen::VectorXd& grad) {
    Eigen::VectorXd g = grad;
    for (Eigen::Index c = 0; c < u.size(); c += 2) {
        if ((u[c] <= 0.0 && g[c] > 0.0) || (u[c] >= 1.0 && g[c] < 0.0)) g[c] = 0.0;
    }
    return g;
}

/// Projected BFGS minimization of a smooth function over the scaled box.
template <class Fn>
Eigen::VectorXd minimize_projected_bfgs(const Fn& fn, Eigen::VectorXd u, int max_iterations, double step_limit) {
    constexpr double fd_step = 1e-6;
    const Eigen::Index n = u.size();
    Eigen::MatrixXd inverse_hessian = Eigen::MatrixXd::Identity(n, n);
    double value = fn(u);
    Eigen::VectorXd grad = central_gradient(fn, u, fd_step);
    for (int iter = 0; iter < max_iterations; ++iter) {
        const Eigen::VectorXd pg = projected_gradient(u, grad);
        if (pg.lpNorm<Eigen::Infinity>() < 1e-9) break;
        Eigen::VectorXd direction = -(inverse_hessian * pg);
        for (Eigen::Index c = 0; c < n; ++c) {
            if (pg[c] == 0.0 && grad[c] != 0.0) direction[c] = 0.0;
        }
        if (direction.dot(pg) >= 0.0) {
            inverse_hessian.setIdentity();
            direction = -pg;
        }
        const double largest = direction.cwiseAbs().maxCoeff();
        if (largest > step_limit) direction *= step_limit / largest;

        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial;
        double trial_value = value;
        for (int ls = 0; ls < 30; ++ls) {
            trial = u + alpha * direction;
            StateScaling::project(trial);
            // Curvature moves are measured after clamping; rotations unwrapped.
            Eigen::VectorXd moved = alpha * direction;
            for (Eigen::Index c = 0; c < n; c += 2) moved[c] = trial[c] - u[c];
            trial_value = fn(trial);
            if (trial_value <= value + 1e-4 * pg.dot(moved)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd s = alpha * direction;
        for (Eigen::Index c = 0; c < n; c += 2) s[c] = trial[c] - u[c];
        const Eigen::VectorXd trial_grad = central_gradient(fn, trial, fd_step);
        const Eigen::VectorXd y = trial_grad - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            inverse_hessian = (eye - rho * s * y.transpose()) * inverse_hessian * (eye - rho * y * s.transpose()) +
                              rho * s * s.transpose();
        }
        const double decrease = value - trial_value;
        u = trial;
        value = trial_value;
        grad = trial_grad;
        if (decrease < 1e-12 * (1.0 + std::abs(value))) break;
    }
    return u;
}

} // namespace detail

/// Minimize 1/2 sum |tau_i|^2 subject to |f_FK(q) - target| <= tolerance and
/// the state bounds. Every position-IK attempt that reaches the target seeds
/// one constrained solve; the best feasible candidate (including the seeds
/// themselves) is returned.
inline IkSolution solve_min_torque_ik(const RobotDesign& design, const Vec3& target, const LoadModel& load,
                                      const IkOptions& opts) {
    opts.validate();
    detail::check_bounds(design);
    if (!target.allFinite()) throw ParameterError("IK target must be finite");
    const detail::StateScaling scaling(design);
    const detail::TorqueProblem problem(design, scaling, target, load);

    std::optional<IkSolution> best_feasible;
    IkSolution best_any;
    auto consider = [&](const Eigen::VectorXd& u) {
        IkSolution candidate;
        candidate.config = Configuration::from_flat(scaling.to_state(u));
        const auto value = problem.evaluate(u);
        candidate.residual = value.constraint.norm();
        candidate.converged = candidate.residual <= opts.tolerance;
        fill_torques(candidate, design, load);
        if (candidate.converged) {
            if (!best_feasible || candidate.objective < best_feasible->objective) best_feasible = candidate;
        } else if (candidate.residual < best_any.residual) {
            best_any = candidate;
        }
    };

    constexpr int outer_iterations = 12;
    constexpr int inner_iterations = 40;
    const double constraint_tol = 1e-3 * opts.tolerance;

    for (int attempt = 0; attempt < opts.restarts; ++attempt) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(attempt)));
        const auto start = detail::random_scaled_start(design.joints.size(), rng);
        const auto seed_result = detail::dls_attempt(design, scaling, target, start, opts, opts.tolerance);
        consider(seed_result.u);
        if (seed_result.residual > opts.tolerance) continue;

        Eigen::VectorXd u = seed_result.u;
        const double start_objective = problem.evaluate(u).objective;
        detail::AugmentedLagrangian lagrangian{problem, start_objective > 1e-12 ? start_objective : 1.0,
                                               Vec3::Zero(), 10.0};
        double previous_violation = std::numeric_limits<double>::infinity();
        for (int outer = 0; outer < outer_iterations; ++outer) {
            u = detail::minimize_projected_bfgs(lagrangian, u, inner_iterations, opts.step_limit);
            const Vec3 c = problem.evaluate(u).constraint;
            const double violation = c.norm();
            if (violation <= constraint_tol && outer > 0) break;
            lagrangian.multipliers += lagrangian.penalty * c;
            if (violation > 0.25 * previous_violation) lagrangian.penalty = std::min(lagrangian.penalty * 10.0, 1e8);
            previous_violation = violation;
        }
        consider(u);
    }
    return best_feasible ? *best_feasible : best_any;
}

} // namespace continuum
