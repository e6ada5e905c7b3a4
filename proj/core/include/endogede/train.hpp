#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "endogede/json_writer.hpp"
#include "endogede/losses.hpp"
#include "endogede/metrics.hpp"
#include "endogede/mole.hpp"
#include "endogede/optim.hpp"
#include "endogede/spectral.hpp"
#include "endogede/synth.hpp"

namespace endogede {

// Direct parameter fields standing in for the networks: a log-depth grid,
// per-pair pose/flow/appearance fields and per-frame intrinsic triples.
struct PairParams {
    int source = 0;
    Tensor flow_fwd;     // target -> source displacement [H,W,2]
    Tensor flow_bwd;     // source -> target
    Tensor appearance;   // additive brightness field [H,W,1]
    Tensor pose_aa;      // [3] axis-angle, target -> source
    Tensor pose_t;       // [3]
};

struct TripleParams {
    int frame = 0;
    Tensor albedo_raw;   // decoded via sigmoid -> (0,1)
    Tensor shading_raw;  // decoded via softplus -> (0,inf)
    Tensor mask_raw;     // decoded via sigmoid
};

struct DirectParams {
    int target = 0;
    Tensor log_depth;    // target-frame depth field, decoded exp + clamp
    std::vector<PairParams> pairs;
    std::vector<TripleParams> triples;   // target first, then sources
    Tensor k4;           // optional trainable intrinsics (fx, fy, cx, cy)
    double depth_min = 0.5, depth_max = 10.0;

    Tensor depth() const { return clamp(exp(log_depth), static_cast<float>(depth_min),
                                        static_cast<float>(depth_max)); }
    const TripleParams& triple_for(int frame) const;
    TripleParams& triple_for(int frame);
};

Tensor decode_albedo(const TripleParams& t);
Tensor decode_shading(const TripleParams& t);
Tensor decode_mask(const TripleParams& t);

struct InitOptions {
    double depth_scale = 1.0;      // multiplies the ground-truth depth
    bool triples_from_gt = false;  // else mid-gray / flat init
    bool flows_from_gt = false;    // else zero
    double pose_noise_rot = 0.0;   // radians, uniform per component
    double pose_noise_trans = 0.0;
    std::uint64_t noise_seed = 1;
};

DirectParams init_params(const SceneBundle& scene, int target, int interval,
                         const InitOptions& opt = {});

struct TrainConfig {
    std::uint64_t seed = 0;
    int epochs = 1;
    int interval = 4;               // source frames at target +- interval
    int stage1_steps = 120;
    int stage2_steps = 150;
    int stage3_steps = 250;
    double lr1 = 1e-4, lr2 = 1e-4, lr3 = 1e-4;
    double lr_decay = 0.1;
    int lr_decay_epoch = 10;
    bool optimize_intrinsics = false;
    bool stage3_gt_triples = false;  // freeze stage-3 triples at ground truth
    bool stage3_gt_flows = false;    // visibility/warp refs from GT rigid flow
    LossWeights weights{};
    SceneConfig scene{};
};

struct StageTrace {
    std::vector<double> losses;
    double first() const { return losses.empty() ? 0.0 : losses.front(); }
    double last() const { return losses.empty() ? 0.0 : losses.back(); }
};

// Owns the scene, the parameter fields and one Adam per stage; each stage
// touches only the parameters it owns.
class Trainer {
public:
    Trainer(SceneBundle scene, DirectParams params, TrainConfig cfg);

    StageTrace run_stage1(int steps);
    StageTrace run_stage2(int steps);
    StageTrace run_stage3(int steps);

    const SceneBundle& scene() const { return scene_; }
    const DirectParams& params() const { return params_; }
    DirectParams& params() { return params_; }
    const TrainConfig& config() const { return cfg_; }

    void set_stage_lrs(double lr1, double lr2, double lr3);
    // Per-parameter-block RMS of the stage-3 gradient at the current state.
    double stage3_grad_norm();
    // Term values of the stage-3 objective at the current parameters.
    LossBreakdown stage3_breakdown();
    // Stage-3 objective rebuilt from the current parameters; records on the
    // caller's active tape, so it can feed gradient checks.
    Tensor stage3_loss_value();

    Tensor current_depth() const { return params_.depth().detach(); }

private:
    Tensor stage3_loss_once(LossBreakdown* breakdown);
    void refresh_stage3_constants();

    SceneBundle scene_;
    DirectParams params_;
    TrainConfig cfg_;
    Adam opt1_, opt2_, opt3_;
    Rng aug_rng_;

    struct FrozenSource {
        Tensor albedo, shading;       // source-frame triple (constant)
        Tensor visibility;            // [H,W]
        Tensor flow_warped_image;     // I^opt_{s->t} (constant)
    };
    Tensor frozen_target_albedo_;
    std::vector<FrozenSource> frozen_;
    bool frozen_ready_ = false;
};

struct EpochReport {
    double stage1_first = 0, stage1_last = 0;
    double stage2_first = 0, stage2_last = 0;
    double stage3_first = 0, stage3_last = 0;
};

struct TrainReport {
    std::vector<EpochReport> epochs;
    EvalReport depth_eval;           // median-scaled against ground truth
    LossBreakdown final_breakdown;
    Json to_json() const;
};

TrainReport run_training(const TrainConfig& cfg);

// ---- MoLE toy task --------------------------------------------------------

struct ToyTaskConfig {
    std::uint64_t seed = 0;
    int blocks = 3;                 // adapters built from the plan's first blocks
    int train_per_family = 400;
    int holdout_per_family = 100;
    int steps = 600;
    double lr = 4e-3;
    int rank = 4;
    int patch = 8;                  // gray input patch edge
    int target_patch = 4;           // central depth patch edge
};

struct ToyTaskReport {
    double baseline_mse = 0, trained_mse = 0;
    double error_reduction = 0;     // 1 - trained/baseline
    double routing_tv_max = 0, routing_tv_mean = 0;
    std::vector<std::vector<double>> family_frequency[2];  // per adapter
    Json to_json() const;
};

ToyTaskReport mole_toy_task(const AllocationPlan& plan, const ToyTaskConfig& cfg);

} // namespace endogede
