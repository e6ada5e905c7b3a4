#include "endogede/train.hpp"

#include <cmath>

#include "endogede/gradcheck.hpp"

namespace endogede {

namespace {

Tensor logit_of(const Tensor& t) {
    Tensor out = t.detach();
    float* p = out.data();
    for (long long i = 0; i < out.size(); ++i) {
        double v = std::min(1.0 - 1e-5, std::max(1e-5, static_cast<double>(p[i])));
        p[i] = static_cast<float>(std::log(v / (1.0 - v)));
    }
    return out;
}

Tensor softplus_inv_of(const Tensor& t) {
    Tensor out = t.detach();
    float* p = out.data();
    for (long long i = 0; i < out.size(); ++i) {
        double v = std::max(1e-5, static_cast<double>(p[i]));
        p[i] = static_cast<float>(v > 20.0 ? v : std::log(std::expm1(v)));
    }
    return out;
}

Tensor log_of(const Tensor& t, double scale) {
    Tensor out = t.detach();
    float* p = out.data();
    for (long long i = 0; i < out.size(); ++i)
        p[i] = static_cast<float>(std::log(std::max(1e-6, scale * static_cast<double>(p[i]))));
    return out;
}

} // namespace

const TripleParams& DirectParams::triple_for(int frame) const {
    for (const TripleParams& t : triples)
        if (t.frame == frame) return t;
    throw ConfigError("no intrinsic triple for frame " + std::to_string(frame));
}

TripleParams& DirectParams::triple_for(int frame) {
    for (TripleParams& t : triples)
        if (t.frame == frame) return t;
    throw ConfigError("no intrinsic triple for frame " + std::to_string(frame));
}

Tensor decode_albedo(const TripleParams& t) { return sigmoid(t.albedo_raw); }
Tensor decode_shading(const TripleParams& t) { return softplus(t.shading_raw); }
Tensor decode_mask(const TripleParams& t) { return sigmoid(t.mask_raw); }

DirectParams init_params(const SceneBundle& scene, int target, int interval,
                         const InitOptions& opt) {
    const int F = static_cast<int>(scene.frames.size());
    if (target - interval < 0 || target + interval >= F)
        throw ConfigError("target " + std::to_string(target) + " with interval " +
                          std::to_string(interval) + " leaves the trajectory of " +
                          std::to_string(F) + " frames");
    const int H = scene.config.height, W = scene.config.width;
    Rng rng(opt.noise_seed);

    DirectParams p;
    p.target = target;
    p.log_depth = log_of(scene.frames[static_cast<size_t>(target)].depth, opt.depth_scale);
    p.k4 = scene.intrinsics.to_tensor();

    for (int source : {target - interval, target + interval}) {
        PairParams pair;
        pair.source = source;
        pair.flow_fwd = opt.flows_from_gt ? scene.gt_flow(target, source)
                                          : Tensor::zeros(Shape{H, W, 2});
        pair.flow_bwd = opt.flows_from_gt ? scene.gt_flow(source, target)
                                          : Tensor::zeros(Shape{H, W, 2});
        pair.appearance = Tensor::zeros(Shape{H, W, 1});
        RigidPose rel = scene.relative_pose(target, source);
        Tensor aa(Shape{3}), tr(Shape{3});
        for (int a = 0; a < 3; ++a) {
            aa.data()[a] = static_cast<float>(rel.axis_angle[static_cast<size_t>(a)] +
                                              rng.uniform(-opt.pose_noise_rot, opt.pose_noise_rot));
            tr.data()[a] = static_cast<float>(
                rel.translation[static_cast<size_t>(a)] +
                rng.uniform(-opt.pose_noise_trans, opt.pose_noise_trans));
        }
        pair.pose_aa = aa;
        pair.pose_t = tr;
        p.pairs.push_back(std::move(pair));
    }

    for (int frame : {target, target - interval, target + interval}) {
        const SceneFrame& f = scene.frames[static_cast<size_t>(frame)];
        TripleParams t;
        t.frame = frame;
        if (opt.triples_from_gt) {
            t.albedo_raw = logit_of(f.albedo);
            t.shading_raw = softplus_inv_of(f.shading);
            t.mask_raw = logit_of(f.mask);
        } else {
            t.albedo_raw = Tensor::zeros(Shape{H, W, 3});                // sigmoid -> 0.5
            t.shading_raw = Tensor::full(Shape{H, W, 1}, -0.87f);        // softplus -> ~0.35
            t.mask_raw = Tensor::zeros(Shape{H, W, 1});                  // sigmoid -> 0.5
        }
        p.triples.push_back(std::move(t));
    }
    return p;
}

// ---- Trainer ------------------------------------------------------------------

namespace {

std::vector<Tensor> stage1_params(DirectParams& p) {
    std::vector<Tensor> out;
    for (PairParams& pair : p.pairs) {
        out.push_back(pair.flow_fwd);
        out.push_back(pair.flow_bwd);
    }
    return out;
}

std::vector<Tensor> stage2_params(DirectParams& p) {
    std::vector<Tensor> out;
    for (TripleParams& t : p.triples) {
        out.push_back(t.albedo_raw);
        out.push_back(t.shading_raw);
        out.push_back(t.mask_raw);
    }
    return out;
}

std::vector<Tensor> stage3_params(DirectParams& p, bool with_k) {
    std::vector<Tensor> out{p.log_depth};
    for (PairParams& pair : p.pairs) {
        out.push_back(pair.pose_aa);
        out.push_back(pair.pose_t);
        out.push_back(pair.appearance);
    }
    if (with_k) out.push_back(p.k4);
    return out;
}

} // namespace

Trainer::Trainer(SceneBundle scene, DirectParams params, TrainConfig cfg)
    : scene_(std::move(scene)),
      params_(std::move(params)),
      cfg_(cfg),
      opt1_(stage1_params(params_), cfg.lr1),
      opt2_(stage2_params(params_), cfg.lr2),
      opt3_(stage3_params(params_, cfg.optimize_intrinsics), cfg.lr3),
      aug_rng_(cfg.seed ^ 0xa5a5a5a5ULL) {}

void Trainer::set_stage_lrs(double lr1, double lr2, double lr3) {
    opt1_.set_lr(lr1);
    opt2_.set_lr(lr2);
    opt3_.set_lr(lr3);
}

StageTrace Trainer::run_stage1(int steps) {
    StageTrace trace;
    const int H = scene_.config.height, W = scene_.config.width;
    const Tensor& target_img = scene_.frames[static_cast<size_t>(params_.target)].image;
    // out-of-view samples are neutralized with the comparison frame; the
    // stage-1 loss itself runs with its full-ones mask
    auto fill_invalid = [&](const WarpResult& w, const Tensor& reference) {
        Tensor m3 = reshape(w.valid, Shape{H, W, 1});
        return w.image * m3 + reference * (1.0f - m3);
    };
    for (int s = 0; s < steps; ++s) {
        opt1_.zero_grad();
        Tape tape;
        Tensor loss = Tensor::scalar(0.0f);
        for (PairParams& pair : params_.pairs) {
            const Tensor& src_img = scene_.frames[static_cast<size_t>(pair.source)].image;
            WarpResult fwd = flow_warp(src_img, pair.flow_fwd);
            loss = loss + flow_loss(target_img, fill_invalid(fwd, target_img), pair.flow_fwd,
                                    target_img, cfg_.weights);
            WarpResult bwd = flow_warp(target_img, pair.flow_bwd);
            loss = loss + flow_loss(src_img, fill_invalid(bwd, src_img), pair.flow_bwd,
                                    src_img, cfg_.weights);
        }
        double lv = loss.item();
        if (!std::isfinite(lv)) throw ValueError("stage 1 diverged at step " + std::to_string(s));
        trace.losses.push_back(lv);
        tape.backward(loss);
        opt1_.step();
    }
    frozen_ready_ = false;
    return trace;
}

StageTrace Trainer::run_stage2(int steps) {
    StageTrace trace;
    for (int s = 0; s < steps; ++s) {
        double n = 2.0 * (aug_rng_.uniform() * (1.0 - 2e-6) + 1e-6);
        opt2_.zero_grad();
        Tape tape;
        Tensor loss = Tensor::scalar(0.0f);
        for (TripleParams& t : params_.triples) {
            const SceneFrame& f = scene_.frames[static_cast<size_t>(t.frame)];
            loss = loss + stage2_frame_loss(decode_albedo(t), decode_shading(t), decode_mask(t),
                                            f.image, n, cfg_.weights);
        }
        loss = loss / static_cast<float>(params_.triples.size());
        double lv = loss.item();
        if (!std::isfinite(lv)) throw ValueError("stage 2 diverged at step " + std::to_string(s));
        trace.losses.push_back(lv);
        tape.backward(loss);
        opt2_.step();
    }
    frozen_ready_ = false;
    return trace;
}

void Trainer::refresh_stage3_constants() {
    frozen_.clear();
    const int tgt = params_.target;
    if (cfg_.stage3_gt_triples) {
        frozen_target_albedo_ = scene_.frames[static_cast<size_t>(tgt)].albedo.detach();
    } else {
        frozen_target_albedo_ = decode_albedo(params_.triple_for(tgt)).detach();
    }
    for (PairParams& pair : params_.pairs) {
        FrozenSource fs;
        const SceneFrame& sf = scene_.frames[static_cast<size_t>(pair.source)];
        if (cfg_.stage3_gt_triples) {
            fs.albedo = sf.albedo.detach();
            fs.shading = sf.shading.detach();
        } else {
            fs.albedo = decode_albedo(params_.triple_for(pair.source)).detach();
            fs.shading = decode_shading(params_.triple_for(pair.source)).detach();
        }
        Tensor flow_fwd = cfg_.stage3_gt_flows ? scene_.gt_flow(tgt, pair.source)
                                               : pair.flow_fwd.detach();
        Tensor flow_bwd = cfg_.stage3_gt_flows ? scene_.gt_flow(pair.source, tgt)
                                               : pair.flow_bwd.detach();
        fs.visibility = visibility_mask(flow_fwd, flow_bwd);
        fs.flow_warped_image = flow_warp(sf.image, flow_fwd).image.detach();
        frozen_.push_back(std::move(fs));
    }
    frozen_ready_ = true;
}

Tensor Trainer::stage3_loss_once(LossBreakdown* breakdown) {
    const int tgt = params_.target;
    const Tensor& target_img = scene_.frames[static_cast<size_t>(tgt)].image;
    Tensor depth = params_.depth();
    Tensor k4 = cfg_.optimize_intrinsics ? params_.k4 : params_.k4.detach();

    std::vector<WarpedSource> sources;
    for (size_t pi = 0; pi < params_.pairs.size(); ++pi) {
        PairParams& pair = params_.pairs[pi];
        const FrozenSource& fs = frozen_[pi];
        const SceneFrame& sf = scene_.frames[static_cast<size_t>(pair.source)];
        PoseMat pose = pose_exp(pair.pose_aa, pair.pose_t);
        WarpGrid grid = rigid_warp_grid(depth, pose, k4);
        SampleResult img = bilinear_sample(sf.image, grid.coords);
        SampleResult alb = bilinear_sample(fs.albedo, grid.coords);
        SampleResult shd = bilinear_sample(fs.shading, grid.coords);
        WarpedSource ws;
        ws.image = img.values;
        ws.albedo = alb.values;
        ws.shading = shd.values;
        ws.valid = mul(img.mask, grid.in_front);
        ws.visibility = fs.visibility;
        ws.flow_warped_image = fs.flow_warped_image;
        ws.appearance = pair.appearance;
        sources.push_back(std::move(ws));
    }
    return stage3_loss(target_img, frozen_target_albedo_, depth, sources, cfg_.weights,
                       breakdown);
}

StageTrace Trainer::run_stage3(int steps) {
    if (!frozen_ready_) refresh_stage3_constants();
    StageTrace trace;
    for (int s = 0; s < steps; ++s) {
        opt3_.zero_grad();
        Tape tape;
        Tensor loss = stage3_loss_once(nullptr);
        double lv = loss.item();
        if (!std::isfinite(lv)) throw ValueError("stage 3 diverged at step " + std::to_string(s));
        trace.losses.push_back(lv);
        tape.backward(loss);
        opt3_.step();
    }
    return trace;
}

Tensor Trainer::stage3_loss_value() {
    if (!frozen_ready_) refresh_stage3_constants();
    return stage3_loss_once(nullptr);
}

LossBreakdown Trainer::stage3_breakdown() {
    if (!frozen_ready_) refresh_stage3_constants();
    LossBreakdown bd;
    Tensor loss = stage3_loss_once(&bd);
    bd["stage3_total"] = loss.item();
    return bd;
}

double Trainer::stage3_grad_norm() {
    if (!frozen_ready_) refresh_stage3_constants();
    opt3_.zero_grad();
    double worst = 0.0;
    {
        Tape tape;
        Tensor loss = stage3_loss_once(nullptr);
        tape.backward(loss);
    }
    for (const Tensor& p : opt3_.params()) {
        const float* g = p.grad_data();
        double acc = 0.0;
        for (long long i = 0; i < p.size(); ++i) acc += static_cast<double>(g[i]) * g[i];
        worst = std::max(worst, std::sqrt(acc / static_cast<double>(p.size())));
    }
    opt3_.zero_grad();
    return worst;
}

Json TrainReport::to_json() const {
    Json root = Json::object();
    root.set("schema", "endogede-eval/1");
    Json eps = Json::array();
    for (const EpochReport& e : epochs) {
        Json je = Json::object();
        je.set("stage1_first", e.stage1_first).set("stage1_last", e.stage1_last);
        je.set("stage2_first", e.stage2_first).set("stage2_last", e.stage2_last);
        je.set("stage3_first", e.stage3_first).set("stage3_last", e.stage3_last);
        eps.push(std::move(je));
    }
    root.set("epochs", std::move(eps));
    Json depth = Json::object();
    depth.set("abs_rel", depth_eval.abs_rel);
    depth.set("sq_rel", depth_eval.sq_rel);
    depth.set("rmse", depth_eval.rmse);
    depth.set("rmse_log", depth_eval.rmse_log);
    depth.set("delta", depth_eval.delta);
    depth.set("n_pixels", depth_eval.n_pixels);
    depth.set("scale_applied", depth_eval.scale_applied);
    root.set("depth", std::move(depth));
    Json terms = Json::object();
    for (const auto& [k, v] : final_breakdown) terms.set(k, v);
    root.set("final_terms", std::move(terms));
    return root;
}

TrainReport run_training(const TrainConfig& cfg_in) {
    TrainConfig cfg = cfg_in;
    cfg.scene.seed = cfg.scene.seed ? cfg.scene.seed : cfg.seed + 1;
    cfg.scene.frames = std::max(cfg.scene.frames, 2 * cfg.interval + 1);
    SceneBundle scene = gen_scene(cfg.scene);

    InitOptions init;
    init.depth_scale = 1.0;
    init.noise_seed = cfg.seed + 17;
    DirectParams params = init_params(scene, cfg.interval, cfg.interval, init);
    // from-scratch fields: flat depth, identity poses
    {
        float flat = static_cast<float>(std::log(cfg.scene.base_depth));
        float* p = params.log_depth.data();
        for (long long i = 0; i < params.log_depth.size(); ++i) p[i] = flat;
        for (PairParams& pair : params.pairs) {
            std::fill(pair.pose_aa.data(), pair.pose_aa.data() + 3, 0.0f);
            std::fill(pair.pose_t.data(), pair.pose_t.data() + 3, 0.0f);
        }
    }

    Trainer trainer(std::move(scene), std::move(params), cfg);
    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == cfg.lr_decay_epoch)
            trainer.set_stage_lrs(cfg.lr1 * cfg.lr_decay, cfg.lr2 * cfg.lr_decay,
                                  cfg.lr3 * cfg.lr_decay);
        EpochReport er;
        StageTrace t1 = trainer.run_stage1(cfg.stage1_steps);
        er.stage1_first = t1.first();
        er.stage1_last = t1.last();
        StageTrace t2 = trainer.run_stage2(cfg.stage2_steps);
        er.stage2_first = t2.first();
        er.stage2_last = t2.last();
        StageTrace t3 = trainer.run_stage3(cfg.stage3_steps);
        er.stage3_first = t3.first();
        er.stage3_last = t3.last();
        report.epochs.push_back(er);
    }

    const SceneBundle& sc = trainer.scene();
    report.depth_eval = depth_metrics(trainer.current_depth(),
                                      sc.frames[static_cast<size_t>(trainer.params().target)].depth,
                                      150.0, DepthScaling::Median);
    report.final_breakdown = trainer.stage3_breakdown();
    return report;
}

// ---- MoLE toy task -----------------------------------------------------------------

namespace {

struct ToyNet {
    std::vector<MoLEAdapter> adapters;

    Tensor forward(const Tensor& tokens, Rng& rng,
                   std::vector<RoutingRecord>* records = nullptr) const {
        Tensor h = tokens;
        for (size_t b = 0; b < adapters.size(); ++b) {
            MoleOutput out = mole_forward(h, adapters[b], rng);
            if (records) records->push_back(out.routing);
            h = b + 1 < adapters.size() ? tanh(out.values) : out.values;
        }
        return h;
    }
};

struct ToyData {
    Tensor inputs;   // [n, patch^2]
    Tensor targets;  // [n, target_patch^2]
};

// Two visually distinct families over the same kind of terrain: family 0 is
// a bright coarse-textured scene where near tissue is brighter, family 1 a
// dim fine-textured one where brightness grows with distance. The opposite
// depth-brightness relations make shared weights a poor fit, and the
// brightness offset lets the router separate the families.
ToyData sample_family(int family, int count, const ToyTaskConfig& cfg, Rng& rng) {
    const int P = cfg.patch, T = cfg.target_patch;
    ToyData d{Tensor(Shape{count, P * P}), Tensor(Shape{count, T * T})};
    std::uint64_t tex_seed = 0x51ed00dULL + static_cast<std::uint64_t>(family) * 977;
    std::uint64_t dep_seed = 0xdeb70aULL + static_cast<std::uint64_t>(family) * 1409;
    const double tex_freq = family == 0 ? 0.6 : 1.7;
    float* pi = d.inputs.data();
    float* pt = d.targets.data();
    for (int s = 0; s < count; ++s) {
        double ox = rng.uniform(0.0, 500.0), oy = rng.uniform(0.0, 500.0);
        for (int y = 0; y < P; ++y)
            for (int x = 0; x < P; ++x) {
                double wx = ox + x * 0.22, wy = oy + y * 0.22;
                double dn = fbm_noise(dep_seed, wx * 0.5, wy * 0.5, 2);   // [0,1]
                double tex = 0.5 + 0.5 * fbm_noise(tex_seed, wx * tex_freq, wy * tex_freq, 3);
                double val = family == 0 ? tex * (1.15 - 0.9 * dn)
                                         : 0.55 * tex * (0.25 + 0.9 * dn);
                pi[(s * P + y) * P + x] = static_cast<float>(val - 0.45);
            }
        int off = (P - T) / 2;
        for (int y = 0; y < T; ++y)
            for (int x = 0; x < T; ++x) {
                double wx = ox + (x + off) * 0.22, wy = oy + (y + off) * 0.22;
                double dn = fbm_noise(dep_seed, wx * 0.5, wy * 0.5, 2);
                pt[(s * T + y) * T + x] = static_cast<float>(dn - 0.5);
            }
    }
    return d;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    int ca = a.dim(1);
    Tensor out(Shape{a.dim(0) + b.dim(0), ca});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

double eval_mse(const ToyNet& net, const Tensor& inputs, const Tensor& targets) {
    Rng unused(0);
    Tensor pred = net.forward(inputs, unused);
    Tensor diff = pred - targets;
    return mean(square(diff)).item();
}

std::vector<double> family_freqs(const ToyNet& net, const Tensor& inputs, int block,
                                 std::vector<double>* dense_rows = nullptr) {
    Rng unused(0);
    std::vector<RoutingRecord> recs;
    net.forward(inputs, unused, &recs);
    const RoutingRecord& r = recs[static_cast<size_t>(block)];
    std::vector<double> freq(static_cast<size_t>(r.num_experts), 0.0);
    int n = inputs.dim(0);
    for (int i = 0; i < n * r.k; ++i) freq[static_cast<size_t>(r.indices[static_cast<size_t>(i)])] += 1.0;
    for (double& f : freq) f /= static_cast<double>(n);
    (void)dense_rows;
    return freq;
}

} // namespace

Json ToyTaskReport::to_json() const {
    Json root = Json::object();
    root.set("baseline_mse", baseline_mse);
    root.set("trained_mse", trained_mse);
    root.set("error_reduction", error_reduction);
    root.set("routing_tv_max", routing_tv_max);
    root.set("routing_tv_mean", routing_tv_mean);
    for (int f = 0; f < 2; ++f) {
        Json fam = Json::array();
        for (const auto& per_adapter : family_frequency[f]) {
            Json freqs = Json::array();
            for (double v : per_adapter) freqs.push(v);
            fam.push(std::move(freqs));
        }
        root.set("family" + std::to_string(f) + "_frequency", std::move(fam));
    }
    return root;
}

ToyTaskReport mole_toy_task(const AllocationPlan& plan, const ToyTaskConfig& cfg) {
    if (plan.per_block.empty()) throw ConfigError("toy task needs a nonempty allocation plan");
    Rng master(cfg.seed + 0x70f1);
    Rng data_rng = master.fork(1);
    Rng init_rng = master.fork(2);
    Rng noise_rng = master.fork(3);

    ToyData train0 = sample_family(0, cfg.train_per_family, cfg, data_rng);
    ToyData train1 = sample_family(1, cfg.train_per_family, cfg, data_rng);
    ToyData hold0 = sample_family(0, cfg.holdout_per_family, cfg, data_rng);
    ToyData hold1 = sample_family(1, cfg.holdout_per_family, cfg, data_rng);
    Tensor train_x = concat_rows(train0.inputs, train1.inputs);
    Tensor train_y = concat_rows(train0.targets, train1.targets);
    Tensor hold_x = concat_rows(hold0.inputs, hold1.inputs);
    Tensor hold_y = concat_rows(hold0.targets, hold1.targets);

    const int n_blocks = std::min(cfg.blocks, static_cast<int>(plan.per_block.size()));
    std::vector<int> dims{cfg.patch * cfg.patch};
    for (int b = 0; b + 1 < n_blocks; ++b) dims.push_back(32);
    dims.push_back(cfg.target_patch * cfg.target_patch);

    ToyNet net;
    const int warmup = cfg.steps / 2;
    for (int b = 0; b < n_blocks; ++b)
        net.adapters.push_back(make_adapter(dims[static_cast<size_t>(b)],
                                            dims[static_cast<size_t>(b + 1)],
                                            plan.per_block[static_cast<size_t>(b)],
                                            plan.top_k[static_cast<size_t>(b)], init_rng,
                                            cfg.rank, warmup));

    ToyTaskReport report;
    report.baseline_mse = eval_mse(net, hold_x, hold_y);

    auto make_opt = [&](long long step) {
        std::vector<Tensor> params;
        for (const MoLEAdapter& a : net.adapters) {
            auto s = trainable_set(a, step);
            params.insert(params.end(), s.begin(), s.end());
        }
        return Adam(std::move(params), cfg.lr);
    };

    for (MoLEAdapter& a : net.adapters) a.router.delta = 1;   // noisy routing while training
    std::unique_ptr<Adam> opt = std::make_unique<Adam>(make_opt(0));
    for (int step = 0; step < cfg.steps; ++step) {
        if (step == warmup) opt = std::make_unique<Adam>(make_opt(step));
        opt->zero_grad();
        Tape tape;
        Tensor pred = net.forward(train_x, noise_rng);
        Tensor loss = mean(square(pred - train_y));
        if (!std::isfinite(loss.item()))
            throw ValueError("toy task diverged at step " + std::to_string(step));
        tape.backward(loss);
        opt->step();
    }
    for (MoLEAdapter& a : net.adapters) a.router.delta = 0;

    report.trained_mse = eval_mse(net, hold_x, hold_y);
    report.error_reduction = 1.0 - report.trained_mse / report.baseline_mse;

    double tv_sum = 0.0, tv_max = 0.0;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<double> f0 = family_freqs(net, hold0.inputs, b);
        std::vector<double> f1 = family_freqs(net, hold1.inputs, b);
        // frequencies sum to k; normalize to distributions before TV
        double s0 = 0.0, s1 = 0.0;
        for (double v : f0) s0 += v;
        for (double v : f1) s1 += v;
        double tv = 0.0;
        for (size_t e = 0; e < f0.size(); ++e) tv += std::fabs(f0[e] / s0 - f1[e] / s1);
        tv *= 0.5;
        tv_sum += tv;
        tv_max = std::max(tv_max, tv);
        report.family_frequency[0].push_back(std::move(f0));
        report.family_frequency[1].push_back(std::move(f1));
    }
    report.routing_tv_mean = tv_sum / n_blocks;
    report.routing_tv_max = tv_max;
    return report;
}

} // namespace endogede
