// Command-line surface: expert allocation from weight spectra, depth/pose
// evaluation, synthetic scene generation, the desk-scale training demo and
// routing statistics export.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "endogede/geometry.hpp"
#include "endogede/io_image.hpp"
#include "endogede/io_npy.hpp"
#include "endogede/json_writer.hpp"
#include "endogede/metrics.hpp"
#include "endogede/mole.hpp"
#include "endogede/spectral.hpp"
#include "endogede/synth.hpp"
#include "endogede/train.hpp"

namespace fs = std::filesystem;
using namespace endogede;

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    try {
        nlohmann::json j;
        f >> j;
        return j;
    } catch (const std::exception& e) {
        throw IoError("bad json in " + path + ": " + e.what());
    }
}

// Depth maps for evaluation: .pfm or .npy, matched across directories by stem.
Tensor load_depth_file(const fs::path& p) {
    Tensor t = p.extension() == ".npy" ? read_npy(p.string()) : read_pfm(p.string());
    if (t.rank() == 3) {
        if (t.dim(2) != 1) throw ValueError("depth file has multiple channels: " + p.string());
        t = reshape(t, Shape{t.dim(0), t.dim(1)});
    }
    return t;
}

std::vector<fs::path> depth_files(const std::string& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension();
        if (ext == ".pfm" || ext == ".npy") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("no .pfm/.npy depth files in " + dir);
    return out;
}

Json eval_to_json(const EvalReport& r) {
    Json j = Json::object();
    j.set("abs_rel", r.abs_rel);
    j.set("sq_rel", r.sq_rel);
    j.set("rmse", r.rmse);
    j.set("rmse_log", r.rmse_log);
    j.set("delta", r.delta);
    j.set("n_pixels", r.n_pixels);
    j.set("scale_applied", r.scale_applied);
    return j;
}

int cmd_allocate(const std::string& weights_dir, const std::string& blocks_path,
                 int experts, const std::string& out_path) {
    nlohmann::json manifest = load_json(blocks_path);
    if (!manifest.contains("blocks") || !manifest["blocks"].is_array())
        throw IoError("block manifest needs a 'blocks' array: " + blocks_path);

    std::vector<SpectralFit> fits;
    std::vector<double> taus;
    for (const auto& blk : manifest["blocks"]) {
        std::vector<Tensor> layers;
        for (const auto& layer : blk.at("layers"))
            layers.push_back(read_npy((fs::path(weights_dir) / layer.get<std::string>()).string()));
        SpectralFit fit = block_fit(layers);
        taus.push_back(fit.tau);
        fits.push_back(fit);
    }
    AllocationPlan plan = allocate_experts(taus, experts);

    Json j = Json::object();
    j.set("total_experts", plan.total_experts);
    Json per_block = Json::array();
    for (int e : plan.per_block) per_block.push(e);
    j.set("per_block", std::move(per_block));
    Json jt = Json::array();
    for (double t : plan.taus) jt.push(t);
    j.set("taus", std::move(jt));
    Json jk = Json::array();
    for (int k : plan.top_k) jk.push(k);
    j.set("top_k", std::move(jk));
    Json jf = Json::array();
    for (const SpectralFit& f : fits) {
        Json e = Json::object();
        e.set("lambda_hat", f.lambda_hat);
        e.set("ks_distance", f.ks_distance);
        e.set("threshold_index", f.threshold_index);
        jf.push(std::move(e));
    }
    j.set("fits", std::move(jf));
    write_text_file(out_path, j.dump(2));
    return 0;
}

int cmd_eval_depth(const std::string& pred_dir, const std::string& gt_dir, double cap,
                   const std::string& scaling, const std::string& out_path) {
    if (scaling != "median" && scaling != "none")
        throw ConfigError("--scaling must be 'median' or 'none'");
    DepthScaling mode = scaling == "median" ? DepthScaling::Median : DepthScaling::None;

    auto preds = depth_files(pred_dir);
    auto gts = depth_files(gt_dir);
    if (preds.size() != gts.size())
        throw ValueError("frame count mismatch: " + std::to_string(preds.size()) + " pred vs " +
                         std::to_string(gts.size()) + " gt");

    Json frames = Json::array();
    double sum_abs = 0, sum_sq = 0, sum_rmse = 0, sum_log = 0, sum_delta = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        EvalReport r = depth_metrics(load_depth_file(preds[i]), load_depth_file(gts[i]), cap, mode);
        Json jf = eval_to_json(r);
        jf.set("name", preds[i].filename().string());
        frames.push(std::move(jf));
        sum_abs += r.abs_rel;
        sum_sq += r.sq_rel;
        sum_rmse += r.rmse;
        sum_log += r.rmse_log;
        sum_delta += r.delta;
    }
    double n = static_cast<double>(preds.size());
    Json mean = Json::object();
    mean.set("abs_rel", sum_abs / n);
    mean.set("sq_rel", sum_sq / n);
    mean.set("rmse", sum_rmse / n);
    mean.set("rmse_log", sum_log / n);
    mean.set("delta", sum_delta / n);

    Json root = Json::object();
    root.set("schema", "endogede-eval/1");
    root.set("cap", cap);
    root.set("scaling", scaling);
    root.set("frames", std::move(frames));
    root.set("mean", std::move(mean));
    std::string text = root.dump(2);
    if (out_path.empty())
        std::cout << text;
    else
        write_text_file(out_path, text);
    return 0;
}

int cmd_eval_pose(const std::string& pred_path, const std::string& gt_path,
                  const std::string& out_path) {
    AteReport r = ate(read_tum_trajectory(pred_path), read_tum_trajectory(gt_path));
    Json root = Json::object();
    root.set("schema", "endogede-eval/1");
    root.set("ate", r.ate);
    root.set("n_poses", r.n_poses);
    root.set("scale", r.scale);
    std::string text = root.dump(2);
    if (out_path.empty())
        std::cout << text;
    else
        write_text_file(out_path, text);
    return 0;
}

int cmd_synth(std::uint64_t seed, int frames, const std::string& size,
              int specular, const std::string& out_dir) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.frames = frames;
    cfg.max_specular = specular;
    if (std::sscanf(size.c_str(), "%dx%d", &cfg.height, &cfg.width) != 2)
        throw ConfigError("--size must look like 64x80 (HxW)");
    SceneBundle scene = gen_scene(cfg);

    fs::create_directories(out_dir);
    char name[64];
    std::vector<TimedPose> traj;
    for (size_t f = 0; f < scene.frames.size(); ++f) {
        const SceneFrame& fr = scene.frames[f];
        std::snprintf(name, sizeof(name), "/frame_%03zu.ppm", f);
        write_ppm(out_dir + name, fr.image);
        std::snprintf(name, sizeof(name), "/depth_%03zu.pfm", f);
        write_pfm(out_dir + name, fr.depth);
        std::snprintf(name, sizeof(name), "/shading_%03zu.pfm", f);
        write_pfm(out_dir + name, fr.shading);
        std::snprintf(name, sizeof(name), "/albedo_%03zu.ppm", f);
        write_ppm(out_dir + name, fr.albedo);
        traj.push_back({0.1 * static_cast<double>(f), fr.cam_to_world});
    }
    write_tum_trajectory(out_dir + "/trajectory.txt", traj);
    write_intrinsics_json(out_dir + "/intrinsics.json", scene.intrinsics);

    Json root = Json::object();
    Json k = Json::object();
    k.set("fx", scene.intrinsics.fx).set("fy", scene.intrinsics.fy);
    k.set("cx", scene.intrinsics.cx).set("cy", scene.intrinsics.cy);
    root.set("intrinsics", std::move(k));
    Json gains = Json::array();
    for (const SceneFrame& fr : scene.frames) gains.push(fr.gain);
    root.set("gains", std::move(gains));
    Json jt = Json::array();
    for (const TimedPose& tp : traj) {
        Json p = Json::object();
        p.set("timestamp", tp.timestamp);
        Json tr = Json::array();
        for (double v : tp.pose.translation) tr.push(v);
        p.set("translation", std::move(tr));
        Json aa = Json::array();
        for (double v : tp.pose.axis_angle) aa.push(v);
        p.set("axis_angle", std::move(aa));
        jt.push(std::move(p));
    }
    root.set("trajectory", std::move(jt));
    write_text_file(out_dir + "/scene.json", root.dump(2));
    return 0;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.seed = j.value("seed", 0ULL);
    cfg.epochs = j.value("epochs", 1);
    cfg.interval = j.value("interval", 4);
    cfg.stage1_steps = j.value("stage1_steps", 120);
    cfg.stage2_steps = j.value("stage2_steps", 150);
    cfg.stage3_steps = j.value("stage3_steps", 250);
    cfg.lr1 = j.value("lr1", 1e-4);
    cfg.lr2 = j.value("lr2", 1e-4);
    cfg.lr3 = j.value("lr3", 1e-4);
    cfg.lr_decay = j.value("lr_decay", 0.1);
    cfg.lr_decay_epoch = j.value("lr_decay_epoch", 10);
    cfg.optimize_intrinsics = j.value("optimize_intrinsics", false);
    cfg.stage3_gt_triples = j.value("stage3_gt_triples", false);
    cfg.stage3_gt_flows = j.value("stage3_gt_flows", false);
    cfg.scene.width = j.value("width", 80);
    cfg.scene.height = j.value("height", 64);
    cfg.scene.frames = j.value("frames", 2 * cfg.interval + 1);
    cfg.scene.max_specular = j.value("specular", 0);
    cfg.scene.gain_lo = j.value("gain_lo", 1.0);
    cfg.scene.gain_hi = j.value("gain_hi", 1.0);
    return cfg;
}

int cmd_demo_train(const std::string& config_path, const std::string& out_path) {
    TrainConfig cfg = train_config_from_json(load_json(config_path));
    nlohmann::json j = load_json(config_path);
    TrainReport report = run_training(cfg);
    Json root = report.to_json();

    if (j.value("mole_toy", false)) {
        AllocationPlan plan = allocate_experts(
            std::vector<double>(3, 2.0), j.value("mole_toy_experts", 8));
        ToyTaskConfig tcfg;
        tcfg.seed = cfg.seed;
        tcfg.steps = j.value("mole_toy_steps", 400);
        ToyTaskReport toy = mole_toy_task(plan, tcfg);
        root.set("mole_toy", toy.to_json());
    }
    write_text_file(out_path, root.dump(2));
    return 0;
}

int cmd_route_stats(const std::string& adapters_dir, const std::string& data_dir,
                    const std::string& out_path) {
    // a single adapter directory (manifest.json present) or a directory of them
    std::vector<fs::path> adapter_dirs;
    if (fs::exists(fs::path(adapters_dir) / "manifest.json")) {
        adapter_dirs.push_back(adapters_dir);
    } else {
        for (const auto& e : fs::directory_iterator(adapters_dir))
            if (e.is_directory() && fs::exists(e.path() / "manifest.json"))
                adapter_dirs.push_back(e.path());
        std::sort(adapter_dirs.begin(), adapter_dirs.end());
    }
    if (adapter_dirs.empty()) throw IoError("no adapter manifests under " + adapters_dir);

    std::vector<Tensor> batches;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.path().extension() == ".npy") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) batches.push_back(read_npy(f.string()));
    if (batches.empty()) throw IoError("no .npy token batches in " + data_dir);

    Json root = Json::object();
    root.set("schema", "endogede-eval/1");
    Json out_adapters = Json::array();
    for (const auto& dir : adapter_dirs) {
        MoLEAdapter adapter = load_adapter(dir.string());
        RoutingStats stats = routing_stats(adapter, batches);
        Json ja = Json::object();
        ja.set("name", dir.filename().string());
        Json freq = Json::array();
        for (double v : stats.frequency) freq.push(v);
        ja.set("frequency", std::move(freq));
        Json ma = Json::array();
        for (double v : stats.mean_alpha) ma.push(v);
        ja.set("mean_alpha", std::move(ma));
        Json weights = Json::array();
        for (const auto& row : stats.weights) {
            Json jr = Json::array();
            for (double v : row) jr.push(v);
            weights.push(std::move(jr));
        }
        ja.set("weights", std::move(weights));
        out_adapters.push(std::move(ja));
    }
    root.set("adapters", std::move(out_adapters));
    write_text_file(out_path, root.dump(2));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale depth-estimation toolkit: spectral expert allocation, "
                 "self-supervised losses, synthetic scenes and evaluation"};
    app.require_subcommand(1);

    // allocate
    auto* alloc = app.add_subcommand("allocate", "Fit block spectra and allocate experts");
    std::string weights_dir, blocks_path, alloc_out = "plan.json";
    int experts = 55;
    alloc->add_option("--weights", weights_dir, "Directory of per-layer .npy weights")->required();
    alloc->add_option("--blocks", blocks_path, "JSON manifest grouping layers into blocks")->required();
    alloc->add_option("--experts", experts, "Total expert budget");
    alloc->add_option("--out", alloc_out, "Output plan path");

    // eval-depth
    auto* evd = app.add_subcommand("eval-depth", "Depth metrics against ground truth");
    std::string pred_dir, gt_dir, evd_out, scaling = "median";
    double cap = 150.0;
    evd->add_option("--pred", pred_dir, "Directory of predicted depth (.pfm/.npy)")->required();
    evd->add_option("--gt", gt_dir, "Directory of ground-truth depth")->required();
    evd->add_option("--cap", cap, "Exclude gt pixels deeper than this");
    evd->add_option("--scaling", scaling, "median | none");
    evd->add_option("--out", evd_out, "Output path (stdout when omitted)");

    // eval-pose
    auto* evp = app.add_subcommand("eval-pose", "Trajectory ATE after similarity alignment");
    std::string pred_traj, gt_traj, evp_out;
    evp->add_option("--pred", pred_traj, "Predicted TUM trajectory")->required();
    evp->add_option("--gt", gt_traj, "Ground-truth TUM trajectory")->required();
    evp->add_option("--out", evp_out, "Output path (stdout when omitted)");

    // synth
    auto* syn = app.add_subcommand("synth", "Generate a synthetic scene");
    std::uint64_t seed = 1;
    int frames = 3, specular = 0;
    std::string size = "64x80", syn_out = "scene";
    syn->add_option("--seed", seed, "Scene seed");
    syn->add_option("--frames", frames, "Number of frames");
    syn->add_option("--size", size, "HxW, e.g. 64x80");
    syn->add_option("--specular", specular, "Max specular spots per frame");
    syn->add_option("--out", syn_out, "Output directory")->required();

    // demo-train
    auto* dt = app.add_subcommand("demo-train", "Run the three-stage training demo");
    std::string cfg_path, dt_out = "report.json";
    dt->add_option("--config", cfg_path, "Training config json")->required();
    dt->add_option("--out", dt_out, "Report path");

    // route-stats
    auto* rs = app.add_subcommand("route-stats", "Export routing statistics for adapters");
    std::string adapters_dir, data_dir, rs_out = "stats.json";
    rs->add_option("--adapters", adapters_dir, "Adapter directory (or directory of them)")->required();
    rs->add_option("--data", data_dir, "Directory of .npy token batches")->required();
    rs->add_option("--out", rs_out, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*alloc) return cmd_allocate(weights_dir, blocks_path, experts, alloc_out);
        if (*evd) return cmd_eval_depth(pred_dir, gt_dir, cap, scaling, evd_out);
        if (*evp) return cmd_eval_pose(pred_traj, gt_traj, evp_out);
        if (*syn) return cmd_synth(seed, frames, size, specular, syn_out);
        if (*dt) return cmd_demo_train(cfg_path, dt_out);
        if (*rs) return cmd_route_stats(adapters_dir, data_dir, rs_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
