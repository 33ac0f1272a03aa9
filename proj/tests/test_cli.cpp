#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "continuum/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace continuum;

namespace {

struct Outcome {
    int code = -1;
    std::string out; // stdout and stderr interleaved
};

Outcome run_cli(const std::string& args) {
    const std::string cmd = std::string(CONTINUUM_CLI_PATH) + " " + args + " 2>&1";
    Outcome result;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return result;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.out.append(buf, n);
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("continuum_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

json parse_json_output(const std::string& out) {
    const auto start = out.find('{');
    return json::parse(out.substr(start == std::string::npos ? 0 : start));
}

const std::string kDesign = "--design 20 20 20 20 20 20 50";

} // namespace

TEST(CliVoxelize, CubeGivesTwentySevenVoxels) {
    const auto dir = fresh_dir("vox");
    write_file(dir / "cube.stl", encode_stl_binary(make_box_mesh(Vec3(0, 0, 0), Vec3(9, 9, 9))));
    const auto r = run_cli("voxelize " + (dir / "cube.stl").string() + " --voxel-size 3 --csv " +
                           (dir / "centers.csv").string());
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("27 occupied"), std::string::npos) << r.out;
    EXPECT_EQ(load_points_csv(dir / "centers.csv").size(), 27u);
}

TEST(CliVoxelize, BadInputsExitTwo) {
    const auto dir = fresh_dir("vox_bad");
    write_file(dir / "bad.stl", "solid broken\n facet normal 0 0 1\n  outer loop\n   vertex 1 2\n");
    write_file(dir / "cube.stl", encode_stl_ascii(make_box_mesh(Vec3(0, 0, 0), Vec3(9, 9, 9))));
    EXPECT_EQ(run_cli("voxelize " + (dir / "bad.stl").string()).code, 2);
    const auto zero = run_cli("voxelize " + (dir / "cube.stl").string() + " --voxel-size 0");
    EXPECT_EQ(zero.code, 2);
    EXPECT_NE(zero.out.find("voxel size"), std::string::npos) << zero.out;
    EXPECT_EQ(run_cli("voxelize " + (dir / "missing.stl").string()).code, 2);
}

TEST(CliUsage, UnknownCommandsAndFlagsExitTwo) {
    EXPECT_EQ(run_cli("").code, 2);
    EXPECT_EQ(run_cli("teleport").code, 2);
    EXPECT_EQ(run_cli("optimize deep_sea --algorithm simplex").code, 2);
    EXPECT_EQ(run_cli("reach deep_sea --design 1 2 3").code, 2);
    EXPECT_EQ(run_cli("reach deep_sea " + kDesign + " --window 0.95 0.5").code, 2);
    EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(CliConfig, InvalidConfigReportsLocation) {
    const auto dir = fresh_dir("badcfg");
    write_file(dir / "syntax.json", "{\n  \"preset\": \"deep_sea\",\n  \"alpha\": 0.9,,\n}\n");
    const auto syntax = run_cli("reach " + (dir / "syntax.json").string() + " " + kDesign);
    EXPECT_EQ(syntax.code, 2);
    EXPECT_NE(syntax.out.find("syntax.json:3:"), std::string::npos) << syntax.out;

    write_file(dir / "field.json", R"({"preset": "deep_sea", "optimizer": {"population_size": "many"}})");
    const auto field = run_cli("optimize " + (dir / "field.json").string());
    EXPECT_EQ(field.code, 2);
    EXPECT_NE(field.out.find("/optimizer/population_size"), std::string::npos) << field.out;

    EXPECT_EQ(run_cli("optimize " + (dir / "absent.json").string()).code, 2);
    EXPECT_EQ(run_cli("optimize " + (dir / "field.json").string() + " --scale paper").code, 2);
}

TEST(CliOptimize, SelectGenerationRejectedOnTorqueProblem) {
    const auto dir = fresh_dir("torque_select");
    const auto ga = run_cli("optimize spot_welding --algorithm ga --select-generation --out-dir " + dir.string());
    EXPECT_EQ(ga.code, 2);
    EXPECT_NE(ga.out.find("select"), std::string::npos) << ga.out;
    const auto eda = run_cli("optimize spot_welding --algorithm eda --select-generation --out-dir " + dir.string());
    EXPECT_EQ(eda.code, 2);
    EXPECT_NE(eda.out.find("select generation"), std::string::npos) << eda.out;
}

TEST(CliOptimize, RepeatsAreReproducibleAcrossRunsAndWorkers) {
    const std::string common =
        "optimize deep_sea --algorithm both --repeats 2 --seed 11 --population 8 --iterations 3 --fk-samples 3000 "
        "--select-generation --out-dir ";
    const auto a = fresh_dir("repro_a");
    const auto b = fresh_dir("repro_b");
    ASSERT_EQ(run_cli("--workers 1 " + common + a.string()).code, 0);
    ASSERT_EQ(run_cli("--workers 3 " + common + b.string()).code, 0);
    for (const char* stem : {"eda_seed11", "eda_seed12", "ga_seed11", "ga_seed12"}) {
        const auto log = std::string(stem) + "_log.csv";
        ASSERT_TRUE(fs::exists(a / log)) << log;
        EXPECT_EQ(read_file(a / log), read_file(b / log)) << log;
        const auto ra = json::parse(read_file(a / (std::string(stem) + "_result.json")));
        const auto rb = json::parse(read_file(b / (std::string(stem) + "_result.json")));
        EXPECT_EQ(ra["x"], rb["x"]);
        EXPECT_EQ(ra["seed"].get<int>(), std::string(stem).back() == '1' ? 11 : 12);
    }
    EXPECT_EQ(read_file(a / "eda_seed11_select_audit.csv"), read_file(b / "eda_seed11_select_audit.csv"));
    EXPECT_NE(read_file(a / "eda_seed11_log.csv"), read_file(a / "eda_seed12_log.csv"));
}

TEST(CliOptimize, ResultRespectsBoundsAndEchoesParams) {
    const auto dir = fresh_dir("result");
    write_file(dir / "near.csv", "x,y,z\n0,10,60\n5,0,70\n");
    write_file(dir / "problem.json", R"({"preset": "deep_sea", "alpha": 1.0, "objective": "total_length",
        "workspace": {"csv": "near.csv"}, "sampling": {"fk_samples": 2000, "window": [0, 1]},
        "optimizer": {"population_size": 10, "max_iterations": 3}})");
    const auto r = run_cli("optimize " + (dir / "problem.json").string() + " --seed 3 --out-dir " + (dir / "out").string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto result = json::parse(read_file(dir / "out" / "eda_seed3_result.json"));
    ASSERT_TRUE(result["feasible"].get<bool>()) << result.dump();
    const auto spec = builtin_problem("deep_sea");
    const auto lb = spec.robot.lower_bounds(), ub = spec.robot.upper_bounds();
    const auto x = result["x"].get<std::vector<double>>();
    ASSERT_EQ(x.size(), lb.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_GE(x[i], lb[i]);
        EXPECT_LE(x[i], ub[i]);
    }
    EXPECT_DOUBLE_EQ(result["theta"].get<double>(), 1.0);
    EXPECT_EQ(result["params"]["optimizer"]["population_size"].get<int>(), 10);
    EXPECT_EQ(result["algorithm"], "eda");
    EXPECT_EQ(result["log"], "eda_seed3_log.csv");
}

TEST(CliReach, ShortDesignReachesNothing) {
    const auto dir = fresh_dir("reach_far");
    write_file(dir / "far.csv", "x,y,z\n0,0,400\n300,0,0\n");
    write_file(dir / "problem.json", R"({"preset": "deep_sea", "workspace": {"csv": "far.csv"}})");
    const auto r = run_cli("reach " + (dir / "problem.json").string() + " " + kDesign + " --window 0 1");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = parse_json_output(r.out);
    EXPECT_DOUBLE_EQ(report["theta"].get<double>(), 0.0);
    EXPECT_EQ(report["ik_checked"].get<int>(), 2);
}

TEST(CliReach, WindowForcesIkAndSeedsOnlyMoveFkNoise) {
    const auto dir = fresh_dir("reach_window");
    const std::string base = "reach deep_sea " + kDesign + " --fk-samples 20000 --window 0 1 ";
    const auto a = run_cli(base + "--seed 1 --out-dir " + (dir / "a").string());
    const auto b = run_cli(base + "--seed 2 --out-dir " + (dir / "b").string());
    ASSERT_EQ(a.code, 0) << a.out;
    ASSERT_EQ(b.code, 0) << b.out;
    const auto ra = parse_json_output(a.out), rb = parse_json_output(b.out);
    const auto n = ra["targets"].get<int>();
    const auto fk_reached = static_cast<int>(std::lround(ra["fk_theta"].get<double>() * n));
    EXPECT_EQ(ra["ik_checked"].get<int>(), n - fk_reached);
    EXPECT_GE(ra["theta"].get<double>(), ra["fk_theta"].get<double>());
    // after IK on every remaining target the two seeds agree closely
    EXPECT_NEAR(ra["theta"].get<double>(), rb["theta"].get<double>(), 0.01);
    const auto reached = load_points_csv(dir / "a" / "reached.csv");
    const auto missed = load_points_csv(dir / "a" / "unreached.csv");
    EXPECT_EQ(static_cast<int>(reached.size() + missed.size()), n);
    EXPECT_EQ(static_cast<int>(reached.size()), ra["reached"].get<int>());
}

TEST(CliIk, ReachableUnreachableAndZeroGravity) {
    const auto ok = run_cli("ik deep_sea " + kDesign + " --target 0 0 170");
    ASSERT_EQ(ok.code, 0) << ok.out;
    const auto sol = parse_json_output(ok.out);
    EXPECT_TRUE(sol["converged"].get<bool>());
    EXPECT_LE(sol["residual"].get<double>(), 1.0);

    const auto far = run_cli("ik deep_sea " + kDesign + " --target 0 0 500");
    ASSERT_EQ(far.code, 0) << far.out;
    EXPECT_FALSE(parse_json_output(far.out)["converged"].get<bool>());

    const auto dir = fresh_dir("ik_zero_g");
    write_file(dir / "problem.json", R"({"preset": "deep_sea", "load": {"gravity": [0, 0, 0]}})");
    const auto zero = run_cli("ik " + (dir / "problem.json").string() + " " + kDesign + " --target 30 0 140 --min-torque");
    ASSERT_EQ(zero.code, 0) << zero.out;
    const auto z = parse_json_output(zero.out);
    EXPECT_TRUE(z["converged"].get<bool>());
    EXPECT_EQ(z["objective"].get<double>(), 0.0);
}

TEST(CliFk, StraightConfigurationPointsAlongTheBaseTangent) {
    const auto r = run_cli("fk deep_sea " + kDesign + " --config 0 0 0 0 0 0");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto out = parse_json_output(r.out);
    const auto p = out["end_effector"].get<std::vector<double>>();
    EXPECT_NEAR(p[0], 0.0, 1e-12);
    EXPECT_NEAR(p[1], 0.0, 1e-12);
    EXPECT_NEAR(p[2], 170.0, 1e-9);
    EXPECT_EQ(run_cli("fk deep_sea " + kDesign + " --config 0 0").code, 2);
}
