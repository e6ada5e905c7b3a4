#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "endogede/geometry.hpp"
#include "endogede/io_image.hpp"
#include "endogede/io_npy.hpp"
#include "endogede/mole.hpp"
#include "endogede/rng.hpp"
#include "endogede/synth.hpp"
#include "endogede/tensor.hpp"

using namespace endogede;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(ENDOGEDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("endogede_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Tensor pareto_diag_layer(double alpha, int m, int n, Rng& rng) {
    Tensor w(Shape{m, n});
    int k = std::min(m, n);
    for (int i = 0; i < k; ++i)
        w.data()[i * n + i] =
            static_cast<float>(0.05 * std::pow(1.0 - rng.uniform(), -1.0 / alpha));
    return w;
}

} // namespace

TEST_CASE("unknown subcommand and missing flags exit with usage code 2") {
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("eval-depth") == 2);
    CHECK(run_cli("") == 2);
}

TEST_CASE("data errors exit with code 1") {
    fs::path dir = fresh_dir("dataerr");
    CHECK(run_cli("eval-depth --pred " + dir.string() + " --gt " + dir.string()) == 1);
    CHECK(run_cli("eval-pose --pred /nonexistent.txt --gt /nonexistent.txt") == 1);
    CHECK(run_cli("allocate --weights " + dir.string() + " --blocks /nonexistent.json") == 1);
}

TEST_CASE("synth writes frames, depth, trajectory and scene metadata") {
    fs::path dir = fresh_dir("synth");
    CHECK(run_cli("synth --seed 5 --frames 3 --size 24x32 --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "frame_000.ppm"));
    CHECK(fs::exists(dir / "frame_002.ppm"));
    CHECK(fs::exists(dir / "depth_001.pfm"));
    CHECK(fs::exists(dir / "shading_000.pfm"));
    CHECK(fs::exists(dir / "trajectory.txt"));
    CHECK(fs::exists(dir / "scene.json"));
    Intrinsics k = read_intrinsics_json((dir / "intrinsics.json").string());
    CHECK(k.fx > 0.0);

    Tensor depth = read_pfm((dir / "depth_000.pfm").string());
    CHECK(depth.dim(0) == 24);
    CHECK(depth.dim(1) == 32);
    auto traj = read_tum_trajectory((dir / "trajectory.txt").string());
    CHECK(traj.size() == 3);

    nlohmann::json meta;
    std::ifstream(dir / "scene.json") >> meta;
    CHECK(meta["intrinsics"].contains("fx"));
    CHECK(meta["gains"].size() == 3);
}

TEST_CASE("eval-depth on identical directories reports zeros") {
    fs::path scene_dir = fresh_dir("evald_scene");
    REQUIRE(run_cli("synth --seed 8 --frames 2 --size 20x24 --out " + scene_dir.string()) == 0);
    fs::path pred = fresh_dir("evald_pred");
    fs::path gt = fresh_dir("evald_gt");
    for (int i = 0; i < 2; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "depth_%03d.pfm", i);
        fs::copy_file(scene_dir / name, pred / name);
        fs::copy_file(scene_dir / name, gt / name);
    }
    fs::path out = fresh_dir("evald_out") / "report.json";
    CHECK(run_cli("eval-depth --pred " + pred.string() + " --gt " + gt.string() +
                  " --cap 150 --scaling median --out " + out.string()) == 0);
    nlohmann::json r;
    std::ifstream(out) >> r;
    CHECK(r["schema"] == "endogede-eval/1");
    CHECK(r["frames"].size() == 2);
    CHECK(r["mean"]["abs_rel"].get<double>() == doctest::Approx(0.0));
    CHECK(r["mean"]["delta"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("eval-pose on the same trajectory reports zero ate") {
    fs::path dir = fresh_dir("evalp");
    REQUIRE(run_cli("synth --seed 4 --frames 5 --size 16x20 --out " + dir.string()) == 0);
    fs::path out = dir / "pose.json";
    CHECK(run_cli("eval-pose --pred " + (dir / "trajectory.txt").string() + " --gt " +
                  (dir / "trajectory.txt").string() + " --out " + out.string()) == 0);
    nlohmann::json r;
    std::ifstream(out) >> r;
    CHECK(r["ate"].get<double>() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r["n_poses"] == 5);
}

TEST_CASE("allocate gives the heavy-tailed block more experts than the Gaussian one") {
    fs::path dir = fresh_dir("alloc");
    Rng rng(321);
    // block 0: power-law singular values; block 1: two Gaussian scales
    write_npy((dir / "h0.npy").string(), pareto_diag_layer(6.0, 256, 64, rng));
    write_npy((dir / "h1.npy").string(), pareto_diag_layer(6.0, 256, 64, rng));
    write_npy((dir / "g0.npy").string(), rand_normal(rng, Shape{256, 64}, 0.0, 0.05));
    write_npy((dir / "g1.npy").string(), rand_normal(rng, Shape{256, 64}, 0.0, 0.12));
    std::ofstream(dir / "blocks.json")
        << R"({"blocks": [{"name": "b0", "layers": ["h0.npy", "h1.npy"]},)"
        << R"({"name": "b1", "layers": ["g0.npy", "g1.npy"]}]})";
    fs::path plan = dir / "plan.json";
    CHECK(run_cli("allocate --weights " + dir.string() + " --blocks " +
                  (dir / "blocks.json").string() + " --experts 10 --out " + plan.string()) == 0);
    nlohmann::json p;
    std::ifstream(plan) >> p;
    CHECK(p["total_experts"] == 10);
    CHECK(p["per_block"].size() == 2);
    CHECK(p["per_block"][0].get<int>() + p["per_block"][1].get<int>() == 10);
    CHECK(p["per_block"][0].get<int>() > p["per_block"][1].get<int>());
    CHECK(p["taus"][0].get<double>() > p["taus"][1].get<double>());
    CHECK(p["fits"][0].contains("lambda_hat"));
    CHECK(p["fits"][0].contains("ks_distance"));
    CHECK(p["fits"][0].contains("threshold_index"));
}

TEST_CASE("allocate output is byte-identical across runs") {
    fs::path dir = fresh_dir("alloc_det");
    Rng rng(654);
    write_npy((dir / "a.npy").string(), pareto_diag_layer(5.0, 128, 64, rng));
    write_npy((dir / "b.npy").string(), rand_normal(rng, Shape{128, 64}, 0.0, 0.08));
    std::ofstream(dir / "blocks.json")
        << R"({"blocks": [{"layers": ["a.npy"]}, {"layers": ["a.npy", "b.npy"]}]})";
    fs::path p1 = dir / "p1.json";
    fs::path p2 = dir / "p2.json";
    REQUIRE(run_cli("allocate --weights " + dir.string() + " --blocks " +
                    (dir / "blocks.json").string() + " --experts 7 --out " + p1.string()) == 0);
    REQUIRE(run_cli("allocate --weights " + dir.string() + " --blocks " +
                    (dir / "blocks.json").string() + " --experts 7 --out " + p2.string()) == 0);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(!slurp(p1).empty());
}

TEST_CASE("demo-train produces a schema-tagged, byte-deterministic report") {
    fs::path dir = fresh_dir("demo");
    std::ofstream(dir / "cfg.json") << R"({
        "seed": 77, "interval": 1, "frames": 3, "width": 20, "height": 16,
        "epochs": 1, "stage1_steps": 6, "stage2_steps": 6, "stage3_steps": 6
    })";
    fs::path r1 = dir / "r1.json";
    fs::path r2 = dir / "r2.json";
    CHECK(run_cli("demo-train --config " + (dir / "cfg.json").string() + " --out " +
                  r1.string()) == 0);
    CHECK(run_cli("demo-train --config " + (dir / "cfg.json").string() + " --out " +
                  r2.string()) == 0);
    CHECK(slurp(r1) == slurp(r2));
    nlohmann::json r;
    std::ifstream(r1) >> r;
    CHECK(r["schema"] == "endogede-eval/1");
    CHECK(r["epochs"].size() == 1);
    CHECK(r["depth"].contains("abs_rel"));
}

TEST_CASE("demo-train with the toy head reports routing statistics") {
    fs::path dir = fresh_dir("demo_toy");
    std::ofstream(dir / "cfg.json") << R"({
        "seed": 3, "interval": 1, "frames": 3, "width": 16, "height": 12,
        "epochs": 1, "stage1_steps": 4, "stage2_steps": 4, "stage3_steps": 4,
        "mole_toy": true, "mole_toy_steps": 60
    })";
    fs::path out = dir / "report.json";
    CHECK(run_cli("demo-train --config " + (dir / "cfg.json").string() + " --out " +
                  out.string()) == 0);
    nlohmann::json r;
    std::ifstream(out) >> r;
    CHECK(r.contains("mole_toy"));
    CHECK(r["mole_toy"].contains("error_reduction"));
    CHECK(r["mole_toy"].contains("routing_tv_max"));
    CHECK(r["mole_toy"]["family0_frequency"].size() == 3);
}

TEST_CASE("route-stats emits frequencies, mean weights and the raw matrix") {
    fs::path adapter_dir = fresh_dir("rs_adapter");
    fs::path data_dir = fresh_dir("rs_data");
    {
        Rng rng(99);
        MoLEAdapter a = make_adapter(6, 4, 3, 2, rng);
        save_adapter(adapter_dir.string(), a);
        write_npy((data_dir / "batch0.npy").string(), rand_uniform(rng, Shape{5, 6}, -1, 1));
        write_npy((data_dir / "batch1.npy").string(), rand_uniform(rng, Shape{7, 6}, -1, 1));
    }
    fs::path out = adapter_dir / "stats.json";
    CHECK(run_cli("route-stats --adapters " + adapter_dir.string() + " --data " +
                  data_dir.string() + " --out " + out.string()) == 0);
    nlohmann::json r;
    std::ifstream(out) >> r;
    CHECK(r["schema"] == "endogede-eval/1");
    REQUIRE(r["adapters"].size() == 1);
    CHECK(r["adapters"][0]["frequency"].size() == 3);
    CHECK(r["adapters"][0]["weights"].size() == 12);  // 5 + 7 samples
    double freq_total = 0.0;
    for (const auto& v : r["adapters"][0]["frequency"]) freq_total += v.get<double>();
    CHECK(freq_total == doctest::Approx(2.0).epsilon(1e-6));  // k = 2 picks per token
}
