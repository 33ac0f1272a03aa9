#pragma once

// Reachability fraction of a design over a target set: Monte-Carlo forward
// kinematics marks targets hit by sampled end-effector positions, then
// position IK settles the remaining targets when the estimate is close to the
// requirement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "continuum/ik_solver.hpp"
#include "continuum/parallel.hpp"
#include "continuum/workspace_io.hpp"

namespace continuum {

struct SamplingBudget {
    std::size_t fk_samples = 100000;
    double window_lo = 0.9;  // IK refinement runs when lo <= fk_theta < hi
    double window_hi = 0.95;
    std::uint64_t seed = 0;

    void validate() const {
        if (fk_samples == 0) throw ParameterError("fk_samples must be positive");
        if (!(0.0 <= window_lo && window_lo <= window_hi && window_hi <= 1.0)) {
            throw ParameterError("refinement window must satisfy 0 <= lo <= hi <= 1");
        }
    }
};

struct ReachabilityReport {
    double theta = 0.0;
    double fk_theta = 0.0;
    std::vector<std::uint8_t> reached_mask;
    std::size_t ik_checked = 0;
    std::vector<double> per_point_torque; // N m per target (NaN when unreached); torque runs only
    double total_torque = 0.0;            // sum over reached targets of sum_i |tau_i|

    std::size_t reached_count() const {
        return static_cast<std::size_t>(std::count(reached_mask.begin(), reached_mask.end(), std::uint8_t{1}));
    }
};

inline double reached_fraction(const std::vector<std::uint8_t>& mask) {
    if (mask.empty()) return 0.0;
    const auto n = std::count(mask.begin(), mask.end(), std::uint8_t{1});
    return static_cast<double>(n) / static_cast<double>(mask.size());
}

/// Configurations in FK batch b come from Rng(derive_seed(seed, b)); each
/// sample draws (kappa_1, theta_1, kappa_2, ...) as sample_configuration does.
inline constexpr std::size_t kFkBatchSize = 4096;

namespace detail {

/// Maps an end-effector position to every target it reaches.
class TargetLookup {
public:
    explicit TargetLookup(const TargetSet& targets) : targets_(targets) {
        if (targets.from_grid()) {
            cell_to_target_.assign(targets.lattice->cell_count(), -1);
            for (std::size_t j = 0; j < targets.size(); ++j) {
                cell_to_target_[targets.cells[j]] = static_cast<std::int32_t>(j);
            }
        } else {
            inv_cell_ = 1.0 / targets.tolerance;
            for (std::size_t j = 0; j < targets.size(); ++j) {
                buckets_[key(cell_of(targets.points[j]))].push_back(static_cast<std::uint32_t>(j));
            }
        }
    }

    template <class Visit>
    void visit(const Vec3& p, Visit&& mark) const {
        if (targets_.from_grid()) {
            if (auto cell = targets_.lattice->locate(p)) {
                const auto j = cell_to_target_[*cell];
                if (j >= 0) mark(static_cast<std::size_t>(j));
            }
            return;
        }
        const auto c = cell_of(p);
        const double tol2 = targets_.tolerance * targets_.tolerance;
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
                    if (it == buckets_.end()) continue;
                    for (auto j : it->second) {
                        if ((targets_.points[j] - p).squaredNorm() <= tol2) mark(static_cast<std::size_t>(j));
                    }
                }
            }
        }
    }

private:
    std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() * inv_cell_)),
                static_cast<std::int64_t>(std::floor(p.y() * inv_cell_)),
                static_cast<std::int64_t>(std::floor(p.z() * inv_cell_))};
    }
    static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
        std::uint64_t h = mix64(static_cast<std::uint64_t>(c[0]));
        h = mix64(h ^ static_cast<std::uint64_t>(c[1]));
        return mix64(h ^ static_cast<std::uint64_t>(c[2]));
    }

    const TargetSet& targets_;
    std::vector<std::int32_t> cell_to_target_;
    double inv_cell_ = 1.0;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

struct FkStage {
    std::vector<std::uint8_t> mask;
    Vec3 cloud_centroid = Vec3::Zero();
};

inline FkStage run_fk_stage(const RobotDesign& design, const TargetSet& targets, const SamplingBudget& budget) {
    targets.validate();
    budget.validate();
    detail::check_bounds(design);
    const TargetLookup lookup(targets);
    const std::size_t joints = design.joints.size();
    const std::size_t batches = (budget.fk_samples + kFkBatchSize - 1) / kFkBatchSize;

    struct BatchResult {
        std::vector<std::uint32_t> hits;
        Vec3 position_sum = Vec3::Zero();
    };
    std::vector<BatchResult> results(batches);
    parallel_for(batches, [&](std::size_t b) {
        Rng rng(derive_seed(budget.seed, b));
        const std::size_t count = std::min(kFkBatchSize, budget.fk_samples - b * kFkBatchSize);
        std::vector<double> q(2 * joints);
        std::vector<std::uint8_t> local(targets.size(), 0);
        auto& out = results[b];
        for (std::size_t s = 0; s < count; ++s) {
            for (std::size_t i = 0; i < joints; ++i) {
                q[2 * i] = rng.uniform(0.0, design.joints[i].max_curvature());
                q[2 * i + 1] = rng.uniform(0.0, kTwoPi);
            }
            const Vec3 p = end_effector_position(design, std::span<const double>(q));
            out.position_sum += p;
            lookup.visit(p, [&](std::size_t j) {
                if (!local[j]) {
                    local[j] = 1;
                    out.hits.push_back(static_cast<std::uint32_t>(j));
                }
            });
        }
    });

    FkStage stage;
    stage.mask.assign(targets.size(), 0);
    Vec3 sum = Vec3::Zero();
    for (const auto& r : results) {
        for (auto j : r.hits) stage.mask[j] = 1;
        sum += r.position_sum;
    }
    stage.cloud_centroid = sum / static_cast<double>(budget.fk_samples);
    return stage;
}

} // namespace detail

/// FK Monte-Carlo stage. Grid targets are reached when a sample lands in
/// their voxel, point targets when a sample lands within the tolerance ball.
inline std::vector<std::uint8_t> estimate_reachability_fk(const RobotDesign& design, const TargetSet& targets,
                                                          const SamplingBudget& budget) {
    return detail::run_fk_stage(design, targets, budget).mask;
}

/// Runs position IK (tolerance = the target tolerance) on every unreached
/// target and marks the converged ones. Targets are visited in ascending
/// distance from `order_origin`; each solve uses its own stream derived from
/// (opts.seed, target index), so the order never changes the result.
inline std::vector<std::uint8_t> refine_with_ik(const RobotDesign& design, const TargetSet& targets,
                                                std::vector<std::uint8_t> mask, const IkOptions& opts,
                                                const Vec3& order_origin, std::size_t* ik_calls = nullptr) {
    if (mask.size() != targets.size()) throw ParameterError("mask length does not match the target set");
    std::vector<std::size_t> pending;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j]) pending.push_back(j);
    }
    std::stable_sort(pending.begin(), pending.end(), [&](std::size_t a, std::size_t b) {
        return (targets.points[a] - order_origin).squaredNorm() < (targets.points[b] - order_origin).squaredNorm();
    });
    IkOptions point_opts = opts;
    point_opts.tolerance = targets.tolerance;
    std::vector<std::uint8_t> confirmed(pending.size(), 0);
    parallel_for(pending.size(), [&](std::size_t k) {
        IkOptions local = point_opts;
        local.seed = derive_seed(opts.seed, pending[k]);
        confirmed[k] = solve_position_ik(design, targets.points[pending[k]], local).converged ? 1 : 0;
    });
    for (std::size_t k = 0; k < pending.size(); ++k) {
        if (confirmed[k]) mask[pending[k]] = 1;
    }
    if (ik_calls) *ik_calls = pending.size();
    return mask;
}

inline std::vector<std::uint8_t> refine_with_ik(const RobotDesign& design, const TargetSet& targets,
                                                std::vector<std::uint8_t> mask, const IkOptions& opts) {
    return refine_with_ik(design, targets, std::move(mask), opts, design.base_position);
}

inline ReachabilityReport hybrid_reachability(const RobotDesign& design, const TargetSet& targets,
                                              const SamplingBudget& budget, const IkOptions& opts) {
    auto stage = detail::run_fk_stage(design, targets, budget);
    ReachabilityReport report;
    report.fk_theta = reached_fraction(stage.mask);
    if (report.fk_theta >= budget.window_lo && report.fk_theta < budget.window_hi) {
        stage.mask = refine_with_ik(design, targets, std::move(stage.mask), opts, stage.cloud_centroid,
                                    &report.ik_checked);
    }
    report.reached_mask = std::move(stage.mask);
    report.theta = reached_fraction(report.reached_mask);
    return report;
}

/// Minimum-torque IK on every target. theta counts the targets reached within
/// the tolerance; total_torque sums the per-target sum_i |tau_i| over them.
inline ReachabilityReport min_torque_reachability(const RobotDesign& design, const TargetSet& targets,
                                                  const LoadModel& load, const IkOptions& opts) {
    targets.validate();
    IkOptions point_opts = opts;
    point_opts.tolerance = targets.tolerance;
    std::vector<IkSolution> solutions(targets.size());
    parallel_for(targets.size(), [&](std::size_t j) {
        IkOptions local = point_opts;
        local.seed = derive_seed(opts.seed, j);
        solutions[j] = solve_min_torque_ik(design, targets.points[j], load, local);
    });
    ReachabilityReport report;
    report.reached_mask.assign(targets.size(), 0);
    report.per_point_torque.assign(targets.size(), std::numeric_limits<double>::quiet_NaN());
    report.ik_checked = targets.size();
    for (std::size_t j = 0; j < targets.size(); ++j) {
        if (!solutions[j].converged) continue;
        report.reached_mask[j] = 1;
        report.per_point_torque[j] = solutions[j].torque_total;
        report.total_torque += solutions[j].torque_total;
    }
    report.theta = reached_fraction(report.reached_mask);
    return report;
}

} // namespace continuum
