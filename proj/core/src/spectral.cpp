#include "endogede/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace endogede {

std::vector<double> sym_eigenvalues(std::vector<double> a, int n) {
    // Cyclic Jacobi. Adequate for the Gram matrices seen here (n <= ~512).
    auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24 * static_cast<double>(n) * n) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                double app = at(p, p), aqq = at(q, q);
                double theta = 0.5 * (aqq - app) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

EigenSpectrum eigenvalues_of(const Tensor& weight) {
    if (weight.rank() != 2)
        throw ShapeError("eigenvalues_of expects a matrix, got " + shape_str(weight.shape()));
    int m = weight.dim(0), n = weight.dim(1);
    if (std::min(m, n) < 8)
        throw ValueError("matrix too small for spectral analysis: " + shape_str(weight.shape()));
    if (!all_finite(weight)) throw ValueError("weight matrix has non-finite entries");

    // Gram matrix of the smaller side; its eigenvalues are the squared
    // singular values of W.
    const float* w = weight.data();
    int k = std::min(m, n);
    std::vector<double> gram(static_cast<size_t>(k) * k, 0.0);
    if (n <= m) {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double acc = 0.0;
                for (int r = 0; r < m; ++r)
                    acc += static_cast<double>(w[r * n + i]) * w[r * n + j];
                gram[static_cast<size_t>(i) * n + j] = acc;
                gram[static_cast<size_t>(j) * n + i] = acc;
            }
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double acc = 0.0;
                for (int c = 0; c < n; ++c)
                    acc += static_cast<double>(w[i * n + c]) * w[j * n + c];
                gram[static_cast<size_t>(i) * m + j] = acc;
                gram[static_cast<size_t>(j) * m + i] = acc;
            }
    }
    EigenSpectrum spec;
    spec.values = sym_eigenvalues(std::move(gram), k);
    for (double& v : spec.values)
        if (v < 0.0 && v > -1e-9) v = 0.0;  // numerical negatives
    return spec;
}

double peak_lambda(const EigenSpectrum& spec, int n_bins) {
    const auto& v = spec.values;
    if (static_cast<int>(v.size()) < 8)
        throw ValueError("spectrum too small: N=" + std::to_string(v.size()));
    double lo = 0.0, hi = 0.0;
    for (double x : v)
        if (x > 0.0) {
            lo = lo == 0.0 ? x : std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (lo == 0.0 || hi <= lo)
        throw ValueError("degenerate spectrum: no positive spread for histogram");
    double llo = std::log(lo), lhi = std::log(hi);
    std::vector<int> counts(static_cast<size_t>(n_bins), 0);
    for (double x : v) {
        if (x <= 0.0) continue;
        int b = static_cast<int>((std::log(x) - llo) / (lhi - llo) * n_bins);
        if (b < 0) b = 0;
        if (b >= n_bins) b = n_bins - 1;
        counts[static_cast<size_t>(b)]++;
    }
    int best = 0;
    for (int b = 1; b < n_bins; ++b)
        if (counts[static_cast<size_t>(b)] > counts[static_cast<size_t>(best)]) best = b;
    // geometric bin center; argmax with ties toward smaller lambda
    double w = (lhi - llo) / n_bins;
    return std::exp(llo + (best + 0.5) * w);
}

double hill_tau(const EigenSpectrum& spec, int j) {
    const auto& v = spec.values;
    int N = static_cast<int>(v.size());
    if (j < 1 || j > N - 1)
        throw ValueError("hill_tau index out of range: j=" + std::to_string(j) +
                         ", N=" + std::to_string(N));
    double lj = v[static_cast<size_t>(j - 1)];
    if (lj <= 0.0) throw ValueError("hill_tau threshold eigenvalue must be positive");
    double denom = 0.0;
    for (int i = 1; i <= j; ++i)
        denom += std::log10(v[static_cast<size_t>(N - i)] / lj);
    if (denom <= 1e-12)
        throw ValueError("degenerate tail: near-equal eigenvalues at j=" + std::to_string(j));
    return 1.0 + static_cast<double>(N - j) / denom;
}

SpectralFit fix_finger(const EigenSpectrum& spec, double window_lo, double window_hi,
                       double lambda_hat) {
    const auto& v = spec.values;
    int N = static_cast<int>(v.size());
    if (N < 8) throw ValueError("spectrum too small: N=" + std::to_string(N));

    SpectralFit best;
    best.ks_distance = std::numeric_limits<double>::infinity();
    bool any_candidate = false, any_fit = false;
    for (int t = 1; t <= N - 1; ++t) {
        double lt = v[static_cast<size_t>(t - 1)];
        if (!(lt > window_lo && lt < window_hi)) continue;
        any_candidate = true;
        double tau;
        try {
            tau = hill_tau(spec, t);
        } catch (const ValueError&) {
            continue;  // degenerate candidate
        }
        // deviation between tail CDF model and the empirical counts
        double dev = 0.0;
        for (int i = 0; i <= N - t; ++i) {
            double li = v[static_cast<size_t>(t - 1 + i)];
            double model = 1.0 - std::pow(li / lt, -tau + 1.0);
            double emp = static_cast<double>(i) / static_cast<double>(N - t);
            dev = std::max(dev, std::fabs(model - emp));
        }
        if (dev < best.ks_distance) {  // strict <: ties keep the smaller t
            best.tau = tau;
            best.threshold_index = t;
            best.ks_distance = dev;
            any_fit = true;
        }
    }
    if (!any_candidate)
        throw ValueError("fix_finger: no threshold candidate inside window (" +
                         std::to_string(window_lo) + ", " + std::to_string(window_hi) + ")");
    if (!any_fit) throw ValueError("fix_finger: all candidates degenerate");
    best.lambda_hat = lambda_hat;
    best.window_lo = window_lo;
    best.window_hi = window_hi;
    return best;
}

namespace {

EigenSpectrum pool_layers(const std::vector<Tensor>& layer_weights) {
    if (layer_weights.empty()) throw ValueError("block has no layers");
    EigenSpectrum pooled;
    for (const Tensor& w : layer_weights) {
        EigenSpectrum s = eigenvalues_of(w);
        pooled.values.insert(pooled.values.end(), s.values.begin(), s.values.end());
    }
    // drop non-positive eigenvalues; they carry no tail information
    std::erase_if(pooled.values, [](double x) { return x <= 0.0; });
    std::sort(pooled.values.begin(), pooled.values.end());
    if (static_cast<int>(pooled.values.size()) < 8)
        throw ValueError("pooled spectrum too small after dropping non-positive values");
    return pooled;
}

} // namespace

SpectralFit block_fit(const std::vector<Tensor>& layer_weights, int n_bins) {
    EigenSpectrum pooled = pool_layers(layer_weights);
    double peak = peak_lambda(pooled, n_bins);
    return fix_finger(pooled, 0.95 * peak, 1.5 * peak, peak);
}

double block_tau(const std::vector<Tensor>& layer_weights, int n_bins) {
    return block_fit(layer_weights, n_bins).tau;
}

AllocationPlan allocate_experts(const std::vector<double>& taus, int total_experts) {
    int B = static_cast<int>(taus.size());
    if (B == 0) throw ConfigError("allocate_experts: no blocks");
    if (total_experts < B)
        throw ConfigError("allocate_experts: E0=" + std::to_string(total_experts) +
                          " infeasible for " + std::to_string(B) + " blocks");
    double tau_sum = 0.0;
    for (double t : taus) {
        if (!(t > 1.0) || !std::isfinite(t))
            throw ValueError("allocate_experts: every tau must be finite and > 1");
        tau_sum += t;
    }

    AllocationPlan plan;
    plan.total_experts = total_experts;
    plan.taus = taus;
    plan.per_block.resize(static_cast<size_t>(B));
    std::vector<double> frac(static_cast<size_t>(B));
    std::vector<bool> raised(static_cast<size_t>(B), false);
    int assigned = 0;
    for (int b = 0; b < B; ++b) {
        double share = taus[static_cast<size_t>(b)] / tau_sum * total_experts;
        int fl = static_cast<int>(std::floor(share));
        frac[static_cast<size_t>(b)] = share - fl;
        if (fl == 0) {
            fl = 1;
            raised[static_cast<size_t>(b)] = true;
        }
        plan.per_block[static_cast<size_t>(b)] = fl;
        assigned += fl;
    }

    int leftover = total_experts - assigned;
    if (leftover > 0) {
        // one each by descending fractional part; raised blocks already hold
        // more than their share and are skipped; ties -> lower block index
        std::vector<int> order(static_cast<size_t>(B));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return frac[static_cast<size_t>(a)] > frac[static_cast<size_t>(b)];
        });
        for (int b : order) {
            if (leftover == 0) break;
            if (raised[static_cast<size_t>(b)]) continue;
            plan.per_block[static_cast<size_t>(b)] += 1;
            --leftover;
        }
        // only raised blocks remain (pathological); give them the rest
        for (int b : order) {
            if (leftover == 0) break;
            plan.per_block[static_cast<size_t>(b)] += 1;
            --leftover;
        }
    } else if (leftover < 0) {
        // raising zero-blocks overdrew the budget; reclaim from the largest
        while (leftover < 0) {
            int donor = -1;
            for (int b = 0; b < B; ++b)
                if (plan.per_block[static_cast<size_t>(b)] > 1 &&
                    (donor < 0 || plan.per_block[static_cast<size_t>(b)] >
                                      plan.per_block[static_cast<size_t>(donor)]))
                    donor = b;
            if (donor < 0) throw ConfigError("allocate_experts: cannot satisfy E_b >= 1");
            plan.per_block[static_cast<size_t>(donor)] -= 1;
            ++leftover;
        }
    }

    plan.top_k.resize(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b)
        plan.top_k[static_cast<size_t>(b)] = std::min(2, plan.per_block[static_cast<size_t>(b)]);
    return plan;
}

} // namespace endogede
