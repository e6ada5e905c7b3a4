#pragma once

#include <string>
#include <vector>

#include "endogede/rng.hpp"
#include "endogede/tensor.hpp"

namespace endogede {

// One dynamic low-rank expert: the additive update diag(V) B diag(U) A x.
// With B = 0 the contribution is identically zero, so a fresh adapter
// reproduces the frozen base map bit-exactly.
struct LowRankExpert {
    Tensor down;     // A: [r, d_in]
    Tensor up;       // B: [d_out, r]
    Tensor u_scale;  // U: [r]
    Tensor v_scale;  // V: [d_out] diagonal scaling of the update output
    int rank() const { return down.dim(0); }
};

// Router producing per-expert logits plus a noise-scale head.
// delta gates the noise: 1 during training draws, 0 at inference.
struct Router {
    Tensor weight;        // [E, d_in]
    Tensor noise_weight;  // [E, d_in]
    int k = 2;
    int delta = 0;
};

struct MoLEAdapter {
    Tensor base_weight;   // frozen [d_out, d_in]
    Tensor base_bias;     // frozen [d_out]; zero when absent
    std::vector<LowRankExpert> experts;
    Router router;
    int warmup_steps = 20000;

    int d_in() const { return base_weight.dim(1); }
    int d_out() const { return base_weight.dim(0); }
    int num_experts() const { return static_cast<int>(experts.size()); }
};

// Per-token routing outcome: exactly k experts, weights normalized by a
// softmax over the selected logits.
struct RoutingRecord {
    std::vector<int> indices;  // [n_tokens * k]
    Tensor alphas;             // [n_tokens, k], differentiable
    int k = 0;
    int num_experts = 0;
};

// Builds an adapter with A ~ N(0, 1/d_in), B = 0, U = V = ones and small
// random router maps. rank default 4.
MoLEAdapter make_adapter(int d_in, int d_out, int num_experts, int top_k, Rng& rng,
                         int rank = 4, int warmup_steps = 20000);

// Gamma = R(x) + delta * softplus(N(x)) * eps, top-k by logit (ties toward
// the lower expert index), softmax over the selected logits.
RoutingRecord route(const Tensor& tokens, const Router& router, Rng& rng);

// diag(V) B diag(U) A x for a single vector [d_in], rank-first evaluation.
Tensor expert_delta(const Tensor& x, const LowRankExpert& e);

struct MoleOutput {
    Tensor values;   // [n_tokens, d_out]
    RoutingRecord routing;
};

// Y' = base(X) + sum over routed experts of alpha_i * delta_i(X).
MoleOutput mole_forward(const Tensor& tokens, const MoLEAdapter& adapter, Rng& rng);

// DV-LoRA schedule: before warmup_steps {A, B, router} train with U, V
// frozen at ones; afterwards {U, V, router} train. Base weights never.
std::vector<Tensor> trainable_set(const MoLEAdapter& adapter, long long step);
std::vector<std::string> trainable_names(const MoLEAdapter& adapter, long long step);

// Deterministic usage statistics over a dataset (delta forced to 0).
struct RoutingStats {
    std::vector<double> frequency;            // per expert selection rate
    std::vector<double> mean_alpha;           // per expert mean routed weight
    std::vector<std::vector<double>> weights; // per sample dense weight vector
};
RoutingStats routing_stats(const MoLEAdapter& adapter, const std::vector<Tensor>& batches);

// Serialization: a directory of npy files plus manifest.json
// {d_in, d_out, rank, experts, k, warmup_steps}.
void save_adapter(const std::string& dir, const MoLEAdapter& adapter);
MoLEAdapter load_adapter(const std::string& dir);

} // namespace endogede
