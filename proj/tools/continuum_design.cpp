// continuum_design: command-line front end for design optimization,
// reachability checks, IK, FK and voxelization.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "continuum/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace continuum;

namespace {

/// Bad flags or flag combinations found after CLI11 parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadedProblem {
    ProblemSpec spec;
    fs::path base_dir;
};

LoadedProblem resolve_problem(const std::string& arg, const std::optional<std::string>& scale) {
    const bool is_builtin = arg == "mobile_platform" || arg == "deep_sea" || arg == "spot_welding";
    if (is_builtin && !fs::exists(arg)) {
        return {builtin_problem(arg, scale ? parse_scale(*scale) : Scale::Desk), {}};
    }
    if (scale) throw UsageError("--scale applies to builtin problem names; set \"scale\" in the config file instead");
    return {load_problem(arg), fs::path(arg).parent_path()};
}

std::vector<double> design_vector(const ProblemSpec& spec, const std::vector<double>& x) {
    const auto vars = spec.robot.variables();
    if (x.size() != vars.size()) {
        std::string names;
        for (const auto& v : vars) names += (names.empty() ? "" : " ") + v.name;
        throw UsageError("--design needs " + std::to_string(vars.size()) + " values (" + names + "), got " +
                         std::to_string(x.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < vars[i].lower || x[i] > vars[i].upper) {
            throw UsageError("--design value for " + vars[i].name + " is outside [" + std::to_string(vars[i].lower) +
                             ", " + std::to_string(vars[i].upper) + "]");
        }
    }
    return x;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json design_json(const ProblemSpec& spec, const std::vector<double>& x) {
    json out = json::object();
    const auto vars = spec.robot.variables();
    for (std::size_t i = 0; i < vars.size(); ++i) out[vars[i].name] = x[i];
    return out;
}

json config_json(const Configuration& config) {
    json out = json::array();
    for (const auto& s : config.states) out.push_back({{"curvature", s.curvature}, {"rotation", s.rotation}});
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

// ---------------------------------------------------------------------------

struct OptimizeArgs {
    std::string problem;
    std::string algorithm = "eda";
    std::uint64_t seed = 0;
    std::optional<std::size_t> iterations, population, fk_samples;
    bool select_generation = false;
    std::size_t repeats = 1;
    std::string out_dir = "results";
    std::optional<std::string> scale;
};

int cmd_optimize(const OptimizeArgs& a) {
    auto [spec, base_dir] = resolve_problem(a.problem, a.scale);
    if (a.iterations) spec.optimizer.max_iterations = *a.iterations;
    if (a.population) spec.optimizer.population_size = *a.population;
    if (a.fk_samples) spec.sampling.fk_samples = *a.fk_samples;
    if (a.select_generation) spec.optimizer.select_generation = true;

    std::vector<Algorithm> algorithms;
    if (a.algorithm == "eda" || a.algorithm == "both") algorithms.push_back(Algorithm::Eda);
    if (a.algorithm == "ga" || a.algorithm == "both") algorithms.push_back(Algorithm::Ga);
    if (spec.optimizer.select_generation && a.algorithm == "ga") {
        throw UsageError("--select-generation only applies to the eda algorithm");
    }
    spec.validate(base_dir);

    const auto targets = build_targets(spec, base_dir);
    const auto problem = make_optimization_problem(spec, targets);
    const fs::path out_dir(a.out_dir);
    ensure_dir(out_dir);

    for (std::size_t k = 0; k < a.repeats; ++k) {
        const std::uint64_t seed = a.seed + k;
        for (Algorithm alg : algorithms) {
            OptimizerParams params = spec.optimizer;
            params.seed = seed;
            if (alg == Algorithm::Ga) params.select_generation = false;
            const auto start = std::chrono::steady_clock::now();
            const RunState state = run(problem, params, alg);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            const std::string stem = std::string(algorithm_name(alg)) + "_seed" + std::to_string(seed);
            const fs::path log_path = out_dir / (stem + "_log.csv");
            write_text(log_path, log_to_csv(state, problem.lower.size()));
            if (params.select_generation) {
                std::string audit = "iteration,objective,f_best,accepted\n";
                for (const auto& e : state.select_audit) {
                    audit += std::to_string(e.iteration) + "," + detail::format_number(e.objective) + "," +
                             detail::format_number(e.f_best) + "," + (e.accepted ? "1" : "0") + "\n";
                }
                write_text(out_dir / (stem + "_select_audit.csv"), audit);
            }

            json result = {
                {"problem", spec.name},
                {"algorithm", algorithm_name(alg)},
                {"seed", seed},
                {"feasible", state.best_feasible.has_value()},
                {"evaluations", state.evaluations},
                {"log", log_path.filename().string()},
                {"wall_time_s", wall},
                {"params", json::parse(serialize_problem(spec))},
            };
            result["params"]["optimizer"]["select_generation"] = params.select_generation;
            if (state.best_feasible) {
                result["x"] = state.best_feasible->x;
                result["design"] = design_json(spec, state.best_feasible->x);
                result["objective"] = state.best_feasible->objective;
                result["theta"] = state.best_feasible->theta;
            } else {
                result["x"] = nullptr;
                result["objective"] = nullptr;
                result["theta"] = nullptr;
            }
            write_text(out_dir / (stem + "_result.json"), result.dump(2) + "\n");

            std::printf("%s seed %llu: %s objective %s theta %s (%zu evaluations, %.1f s)\n", algorithm_name(alg),
                        static_cast<unsigned long long>(seed), state.best_feasible ? "feasible" : "no feasible design,",
                        state.best_feasible ? detail::format_number(state.best_feasible->objective).c_str() : "-",
                        state.best_feasible ? detail::format_number(state.best_feasible->theta).c_str() : "-",
                        state.evaluations, wall);
        }
    }
    return 0;
}

struct ReachArgs {
    std::string problem;
    std::vector<double> design;
    std::uint64_t seed = 0;
    std::vector<double> window;
    std::optional<std::size_t> fk_samples;
    bool min_torque = false;
    std::string out_dir;
    std::optional<std::string> scale;
};

int cmd_reach(const ReachArgs& a) {
    auto [spec, base_dir] = resolve_problem(a.problem, a.scale);
    if (a.fk_samples) spec.sampling.fk_samples = *a.fk_samples;
    if (!a.window.empty()) {
        spec.sampling.window_lo = a.window[0];
        spec.sampling.window_hi = a.window[1];
    }
    spec.validate(base_dir);
    const auto x = design_vector(spec, a.design);
    const auto design = spec.robot.instantiate(x);
    const auto targets = build_targets(spec, base_dir);

    IkOptions ik = spec.ik;
    ik.seed = derive_seed(a.seed, 0x696b);
    ReachabilityReport report;
    if (a.min_torque) {
        report = min_torque_reachability(design, targets, spec.load, ik);
    } else {
        SamplingBudget budget = spec.sampling;
        budget.seed = derive_seed(a.seed, 0x666b);
        report = hybrid_reachability(design, targets, budget, ik);
    }

    json out = {
        {"problem", spec.name},
        {"seed", a.seed},
        {"design", design_json(spec, x)},
        {"targets", targets.size()},
        {"reached", report.reached_count()},
        {"theta", report.theta},
        {"required", spec.alpha},
        {"meets_requirement", report.theta >= spec.alpha},
        {"ik_checked", report.ik_checked},
    };
    if (a.min_torque) {
        out["total_torque"] = report.total_torque;
        out["per_point_torque"] = report.per_point_torque; // NaN (unreached) becomes null
    } else {
        out["fk_theta"] = report.fk_theta;
        out["fk_samples"] = spec.sampling.fk_samples;
        out["window"] = json::array({spec.sampling.window_lo, spec.sampling.window_hi});
    }
    const std::string text = out.dump(2) + "\n";
    std::cout << text;

    if (!a.out_dir.empty()) {
        const fs::path dir(a.out_dir);
        ensure_dir(dir);
        std::vector<Vec3> reached, missed;
        for (std::size_t j = 0; j < targets.size(); ++j) {
            (report.reached_mask[j] ? reached : missed).push_back(targets.points[j]);
        }
        write_text(dir / "reach_report.json", text);
        write_text(dir / "reached.csv", encode_points_csv(reached));
        write_text(dir / "unreached.csv", encode_points_csv(missed));
    }
    return 0;
}

struct IkArgs {
    std::string problem;
    std::vector<double> design;
    std::vector<double> target;
    bool min_torque = false;
    std::uint64_t seed = 0;
    std::optional<std::string> scale;
};

int cmd_ik(const IkArgs& a) {
    auto [spec, base_dir] = resolve_problem(a.problem, a.scale);
    spec.validate(base_dir);
    const auto x = design_vector(spec, a.design);
    const auto design = spec.robot.instantiate(x);
    const Vec3 target(a.target[0], a.target[1], a.target[2]);
    IkOptions ik = spec.ik;
    ik.seed = a.seed;
    const IkSolution sol =
        a.min_torque ? solve_min_torque_ik(design, target, spec.load, ik) : solve_position_ik(design, target, ik);
    const auto torques = static_torques(design, sol.config, spec.load);
    json tau = json::array();
    for (const auto& t : torques) tau.push_back(vec_json(t));
    const json out = {
        {"target", vec_json(target)},
        {"converged", sol.converged},
        {"residual", sol.residual},
        {"tolerance", ik.tolerance},
        {"q", config_json(sol.config)},
        {"end_effector", vec_json(end_effector_position(design, sol.config.flat()))},
        {"torques", tau},
        {"torque_total", torque_total(torques)},
        {"objective", torque_objective(torques)},
    };
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct FkArgs {
    std::string problem;
    std::vector<double> design;
    std::vector<double> q;
    std::optional<std::string> scale;
};

int cmd_fk(const FkArgs& a) {
    auto [spec, base_dir] = resolve_problem(a.problem, a.scale);
    const auto x = design_vector(spec, a.design);
    const auto design = spec.robot.instantiate(x);
    if (a.q.size() != 2 * design.joints.size()) {
        throw UsageError("--config needs " + std::to_string(2 * design.joints.size()) +
                         " values (curvature and rotation per joint)");
    }
    Eigen::VectorXd q(static_cast<Eigen::Index>(a.q.size()));
    for (std::size_t i = 0; i < a.q.size(); ++i) q[static_cast<Eigen::Index>(i)] = a.q[i];
    const auto config = Configuration::from_flat(q);
    const auto chain = forward_kinematics(design, config);
    json frames = json::array();
    for (const auto& f : chain.joint_frames) {
        frames.push_back({{"origin", vec_json(f.origin)}, {"tangent", vec_json(f.tangent)}, {"normal", vec_json(f.normal)}});
    }
    const auto torques = static_torques(chain, design, config, spec.load);
    json tau = json::array();
    for (const auto& t : torques) tau.push_back(vec_json(t));
    const json out = {
        {"end_effector", vec_json(chain.end_effector.origin)},
        {"end_tangent", vec_json(chain.end_effector.tangent)},
        {"joint_frames", frames},
        {"torques", tau},
        {"torque_total", torque_total(torques)},
    };
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct VoxelizeArgs {
    std::string stl;
    double voxel_size = 3.0;
    std::string csv;
};

int cmd_voxelize(const VoxelizeArgs& a) {
    const auto mesh = load_stl(a.stl);
    const auto grid = voxelize_mesh(mesh, a.voxel_size);
    const auto& L = grid.lattice;
    std::printf("%zu occupied\n", grid.occupied_count());
    std::printf("voxel size %s cm, lattice %d x %d x %d, origin %s %s %s\n",
                detail::format_number(L.voxel_size).c_str(), L.dims[0], L.dims[1], L.dims[2],
                detail::format_number(L.origin.x()).c_str(), detail::format_number(L.origin.y()).c_str(),
                detail::format_number(L.origin.z()).c_str());
    std::printf("occupied volume %s cm^3, mesh volume %s cm^3, %zu triangles\n",
                detail::format_number(static_cast<double>(grid.occupied_count()) * std::pow(L.voxel_size, 3)).c_str(),
                detail::format_number(mesh.volume()).c_str(), mesh.size());
    if (!a.csv.empty()) {
        std::vector<Vec3> centers;
        for (int k = 0; k < L.dims[2]; ++k)
            for (int j = 0; j < L.dims[1]; ++j)
                for (int i = 0; i < L.dims[0]; ++i)
                    if (grid.occupied[L.index(i, j, k)]) centers.push_back(L.center(i, j, k));
        write_text(a.csv, encode_points_csv(centers));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dimension optimization for multi-joint continuum robots"};
    app.require_subcommand(1);
    std::size_t workers = 0;
    app.add_option("--workers", workers, "Worker threads for parallel maps (default: CONTINUUM_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);

    auto add_problem = [](CLI::App* cmd, std::string& problem, std::optional<std::string>& scale) {
        cmd->add_option("problem", problem, "Config file, or a builtin problem name")->required();
        cmd->add_option("--scale", scale, "Budget profile for builtin problems")
            ->check(CLI::IsMember({"desk", "paper"}));
    };

    OptimizeArgs opt;
    auto* optimize = app.add_subcommand("optimize", "Optimize the design variables of a problem");
    add_problem(optimize, opt.problem, opt.scale);
    optimize->add_option("--algorithm", opt.algorithm, "eda, ga or both")->check(CLI::IsMember({"eda", "ga", "both"}));
    optimize->add_option("--seed", opt.seed, "Base seed; repeat k uses seed + k");
    optimize->add_option("--iterations", opt.iterations, "Override the iteration count")->check(CLI::PositiveNumber);
    optimize->add_option("--population", opt.population, "Override the population size")->check(CLI::Range(2, 1000000));
    optimize->add_option("--fk-samples", opt.fk_samples, "Override the FK sample budget")->check(CLI::PositiveNumber);
    optimize->add_flag("--select-generation", opt.select_generation, "Enable select generation (eda only)");
    optimize->add_option("--repeats", opt.repeats, "Independent runs per algorithm")->check(CLI::PositiveNumber);
    optimize->add_option("--out-dir", opt.out_dir, "Directory for logs and results");

    ReachArgs reach;
    auto* reach_cmd = app.add_subcommand("reach", "Reachability of one design");
    add_problem(reach_cmd, reach.problem, reach.scale);
    reach_cmd->add_option("--design", reach.design, "Design vector x")->expected(0, -1);
    reach_cmd->add_option("--seed", reach.seed, "Seed for FK sampling and IK starts");
    reach_cmd->add_option("--window", reach.window, "IK refinement window lo hi")->expected(2);
    reach_cmd->add_option("--fk-samples", reach.fk_samples, "Override the FK sample budget")->check(CLI::PositiveNumber);
    reach_cmd->add_flag("--min-torque", reach.min_torque, "Solve min-torque IK on every target instead");
    reach_cmd->add_option("--out-dir", reach.out_dir, "Also write the report and reached/unreached point CSVs");

    IkArgs ik;
    auto* ik_cmd = app.add_subcommand("ik", "Inverse kinematics for one target");
    add_problem(ik_cmd, ik.problem, ik.scale);
    ik_cmd->add_option("--design", ik.design, "Design vector x")->expected(0, -1);
    ik_cmd->add_option("--target", ik.target, "Target x y z in cm")->expected(3)->required();
    ik_cmd->add_flag("--min-torque", ik.min_torque, "Minimize actuation torque among solutions");
    ik_cmd->add_option("--seed", ik.seed, "Seed for random restarts");

    FkArgs fk;
    auto* fk_cmd = app.add_subcommand("fk", "Forward kinematics of one configuration");
    add_problem(fk_cmd, fk.problem, fk.scale);
    fk_cmd->add_option("--design", fk.design, "Design vector x")->expected(0, -1);
    fk_cmd->add_option("--config", fk.q, "kappa_1 theta_1 kappa_2 theta_2 ...")->expected(1, -1)->required();

    VoxelizeArgs vox;
    auto* vox_cmd = app.add_subcommand("voxelize", "Voxelize a closed STL mesh");
    vox_cmd->add_option("stl", vox.stl, "STL file (ASCII or binary)")->required()->check(CLI::ExistingFile);
    vox_cmd->add_option("--voxel-size", vox.voxel_size, "Voxel edge length in cm");
    vox_cmd->add_option("--csv", vox.csv, "Write occupied voxel centers to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (workers > 0) set_default_workers(workers);

    try {
        if (optimize->parsed()) return cmd_optimize(opt);
        if (reach_cmd->parsed()) return cmd_reach(reach);
        if (ik_cmd->parsed()) return cmd_ik(ik);
        if (fk_cmd->parsed()) return cmd_fk(fk);
        if (vox_cmd->parsed()) return cmd_voxelize(vox);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ConfigurationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "parameter error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 2;
    } catch (const IngestionError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
