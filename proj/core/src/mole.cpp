#include "endogede/mole.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "endogede/io_npy.hpp"
#include "endogede/json_writer.hpp"

namespace endogede {

MoLEAdapter make_adapter(int d_in, int d_out, int num_experts, int top_k, Rng& rng,
                         int rank, int warmup_steps) {
    if (num_experts < 1) throw ConfigError("adapter needs at least one expert");
    if (num_experts == 1) top_k = 1;
    if (top_k < 1 || top_k > num_experts)
        throw ConfigError("top_k=" + std::to_string(top_k) + " invalid for E=" +
                          std::to_string(num_experts));
    MoLEAdapter a;
    a.base_weight = rand_normal(rng, Shape{d_out, d_in}, 0.0, 1.0 / std::sqrt(d_in));
    a.base_bias = Tensor::zeros(Shape{d_out});
    a.warmup_steps = warmup_steps;
    for (int e = 0; e < num_experts; ++e) {
        LowRankExpert ex;
        ex.down = rand_normal(rng, Shape{rank, d_in}, 0.0, 1.0 / std::sqrt(d_in));
        ex.up = Tensor::zeros(Shape{d_out, rank});   // zero init keeps the base map exact
        ex.u_scale = Tensor::ones(Shape{rank});
        ex.v_scale = Tensor::ones(Shape{d_out});
        a.experts.push_back(std::move(ex));
    }
    a.router.weight = rand_normal(rng, Shape{num_experts, d_in}, 0.0, 0.01);
    a.router.noise_weight = rand_normal(rng, Shape{num_experts, d_in}, 0.0, 0.01);
    a.router.k = top_k;
    a.router.delta = 0;
    return a;
}

RoutingRecord route(const Tensor& tokens, const Router& router, Rng& rng) {
    if (tokens.rank() != 2)
        throw ShapeError("route expects [n,d_in] tokens, got " + shape_str(tokens.shape()));
    const int E = router.weight.dim(0);
    const int n = tokens.dim(0);
    const int k = E == 1 ? 1 : router.k;   // a single expert forces k = 1
    if (k > E)
        throw ConfigError("top_k=" + std::to_string(k) + " exceeds expert count " +
                          std::to_string(E));

    Tensor logits = matmul(tokens, transpose(router.weight));   // [n,E]
    if (router.delta != 0) {
        Tensor scale = softplus(matmul(tokens, transpose(router.noise_weight)));
        Tensor eps = rand_normal(rng, Shape{n, E});
        logits = logits + scale * eps;
    }

    // top-k on values with ties broken toward the lower expert index
    RoutingRecord rec;
    rec.k = k;
    rec.num_experts = E;
    rec.indices.resize(static_cast<size_t>(n) * k);
    const float* pl = logits.data();
    std::vector<int> order(static_cast<size_t>(E));
    for (int r = 0; r < n; ++r) {
        for (int e = 0; e < E; ++e) order[static_cast<size_t>(e)] = e;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return pl[r * E + a] > pl[r * E + b];
        });
        for (int j = 0; j < k; ++j)
            rec.indices[static_cast<size_t>(r * k + j)] = order[static_cast<size_t>(j)];
    }
    rec.alphas = softmax_lastdim(gather_cols(logits, rec.indices, k));
    return rec;
}

Tensor expert_delta(const Tensor& x, const LowRankExpert& e) {
    Tensor col = reshape(x, Shape{1, static_cast<int>(x.size())});
    Tensor h = matmul(col, transpose(e.down));            // [1,r]
    h = h * reshape(e.u_scale, Shape{1, e.rank()});
    Tensor out = matmul(h, transpose(e.up));              // [1,d_out]
    out = out * reshape(e.v_scale, Shape{1, e.up.dim(0)});
    return reshape(out, Shape{e.up.dim(0)});
}

MoleOutput mole_forward(const Tensor& tokens, const MoLEAdapter& adapter, Rng& rng) {
    if (tokens.rank() != 2 || tokens.dim(1) != adapter.d_in())
        throw ShapeError("mole_forward expects [n," + std::to_string(adapter.d_in()) +
                         "] tokens, got " + shape_str(tokens.shape()));
    const int n = tokens.dim(0);
    const int E = adapter.num_experts();

    Tensor base = matmul(tokens, transpose(adapter.base_weight)) +
                  reshape(adapter.base_bias, Shape{1, adapter.d_out()});

    MoleOutput out;
    out.routing = route(tokens, adapter.router, rng);
    Tensor dense_alpha = scatter_cols(out.routing.alphas, out.routing.indices, E);  // [n,E]

    Tensor acc = base;
    for (int e = 0; e < E; ++e) {
        const LowRankExpert& ex = adapter.experts[static_cast<size_t>(e)];
        // skip experts no token routed to; the zero column contributes no
        // value and no gradient either way
        bool used = false;
        const float* da = dense_alpha.data();
        for (int r = 0; r < n; ++r)
            if (da[r * E + e] != 0.0f) { used = true; break; }
        if (!used) continue;
        Tensor h = matmul(tokens, transpose(ex.down));                 // [n,r]
        h = h * reshape(ex.u_scale, Shape{1, ex.rank()});
        Tensor d = matmul(h, transpose(ex.up));                        // [n,d_out]
        d = d * reshape(ex.v_scale, Shape{1, adapter.d_out()});
        acc = acc + narrow_lastdim(dense_alpha, e, 1) * d;
    }
    out.values = acc;
    return out;
}

std::vector<Tensor> trainable_set(const MoLEAdapter& adapter, long long step) {
    std::vector<Tensor> set;
    bool warmup = step < adapter.warmup_steps;
    for (const LowRankExpert& e : adapter.experts) {
        if (warmup) {
            set.push_back(e.down);
            set.push_back(e.up);
        } else {
            set.push_back(e.u_scale);
            set.push_back(e.v_scale);
        }
    }
    set.push_back(adapter.router.weight);
    set.push_back(adapter.router.noise_weight);
    return set;
}

std::vector<std::string> trainable_names(const MoLEAdapter& adapter, long long step) {
    std::vector<std::string> names;
    bool warmup = step < adapter.warmup_steps;
    for (size_t e = 0; e < adapter.experts.size(); ++e) {
        std::string p = "expert" + std::to_string(e) + ".";
        if (warmup) {
            names.push_back(p + "A");
            names.push_back(p + "B");
        } else {
            names.push_back(p + "U");
            names.push_back(p + "V");
        }
    }
    names.push_back("router.weight");
    names.push_back("router.noise_weight");
    return names;
}

RoutingStats routing_stats(const MoLEAdapter& adapter, const std::vector<Tensor>& batches) {
    Router frozen = adapter.router;
    frozen.delta = 0;
    Rng unused(0);
    RoutingStats stats;
    const int E = adapter.num_experts();
    stats.frequency.assign(static_cast<size_t>(E), 0.0);
    stats.mean_alpha.assign(static_cast<size_t>(E), 0.0);
    long long total = 0;
    for (const Tensor& batch : batches) {
        RoutingRecord rec = route(batch, frozen, unused);
        const int n = batch.dim(0);
        const float* al = rec.alphas.data();
        for (int r = 0; r < n; ++r) {
            std::vector<double> dense(static_cast<size_t>(E), 0.0);
            for (int j = 0; j < rec.k; ++j) {
                int e = rec.indices[static_cast<size_t>(r * rec.k + j)];
                dense[static_cast<size_t>(e)] = al[r * rec.k + j];
                stats.frequency[static_cast<size_t>(e)] += 1.0;
                stats.mean_alpha[static_cast<size_t>(e)] += al[r * rec.k + j];
            }
            stats.weights.push_back(std::move(dense));
            ++total;
        }
    }
    for (int e = 0; e < E; ++e) {
        if (stats.frequency[static_cast<size_t>(e)] > 0.0)
            stats.mean_alpha[static_cast<size_t>(e)] /= stats.frequency[static_cast<size_t>(e)];
        if (total > 0) stats.frequency[static_cast<size_t>(e)] /= static_cast<double>(total);
    }
    return stats;
}

void save_adapter(const std::string& dir, const MoLEAdapter& adapter) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Json manifest = Json::object();
    manifest.set("d_in", adapter.d_in());
    manifest.set("d_out", adapter.d_out());
    manifest.set("rank", adapter.experts.empty() ? 0 : adapter.experts[0].rank());
    manifest.set("experts", static_cast<long long>(adapter.experts.size()));
    manifest.set("k", adapter.router.k);
    manifest.set("warmup_steps", adapter.warmup_steps);
    write_text_file(dir + "/manifest.json", manifest.dump(2));

    write_npy(dir + "/base_weight.npy", adapter.base_weight);
    write_npy(dir + "/base_bias.npy", adapter.base_bias);
    write_npy(dir + "/router_weight.npy", adapter.router.weight);
    write_npy(dir + "/router_noise.npy", adapter.router.noise_weight);
    for (size_t e = 0; e < adapter.experts.size(); ++e) {
        std::string p = dir + "/expert" + std::to_string(e);
        write_npy(p + "_A.npy", adapter.experts[e].down);
        write_npy(p + "_B.npy", adapter.experts[e].up);
        write_npy(p + "_U.npy", adapter.experts[e].u_scale);
        write_npy(p + "_V.npy", adapter.experts[e].v_scale);
    }
}

MoLEAdapter load_adapter(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    if (!f) throw IoError("cannot open adapter manifest: " + dir + "/manifest.json");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("bad adapter manifest: " + std::string(e.what()));
    }
    MoLEAdapter a;
    int experts = j.at("experts").get<int>();
    a.warmup_steps = j.at("warmup_steps").get<int>();
    a.base_weight = read_npy(dir + "/base_weight.npy");
    a.base_bias = read_npy(dir + "/base_bias.npy");
    a.router.weight = read_npy(dir + "/router_weight.npy");
    a.router.noise_weight = read_npy(dir + "/router_noise.npy");
    a.router.k = j.at("k").get<int>();
    for (int e = 0; e < experts; ++e) {
        std::string p = dir + "/expert" + std::to_string(e);
        LowRankExpert ex;
        ex.down = read_npy(p + "_A.npy");
        ex.up = read_npy(p + "_B.npy");
        ex.u_scale = read_npy(p + "_U.npy");
        ex.v_scale = read_npy(p + "_V.npy");
        a.experts.push_back(std::move(ex));
    }
    if (a.d_in() != j.at("d_in").get<int>() || a.d_out() != j.at("d_out").get<int>())
        throw IoError("adapter manifest disagrees with stored arrays: " + dir);
    return a;
}

} // namespace endogede
