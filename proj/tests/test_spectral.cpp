#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "endogede/rng.hpp"
#include "endogede/spectral.hpp"

#include "oracles.hpp"

using namespace endogede;

namespace {

EigenSpectrum spectrum_of(std::vector<double> vals) {
    std::sort(vals.begin(), vals.end());
    EigenSpectrum s;
    s.values = std::move(vals);
    return s;
}

// Spectrum whose tail CDF above the threshold is exactly the power law
// (lambda/lambda_t)^-(tau-1); head filled with a dense bulk below.
std::vector<double> exact_power_tail(double tau, int head, int tail, double lt) {
    std::vector<double> v;
    for (int i = 0; i < head; ++i)
        v.push_back(lt * (0.2 + 0.75 * (i + 0.5) / head));
    for (int m = 0; m <= tail; ++m)
        v.push_back(lt * std::pow(1.0 - static_cast<double>(m) / (tail + 1), -1.0 / (tau - 1.0)));
    std::sort(v.begin(), v.end());
    return v;
}

// Pareto-like eigenvalues with survival exponent alpha: lambda = u^(-1/alpha).
std::vector<double> pareto_sample(double alpha, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(std::pow(1.0 - rng.uniform(), -1.0 / alpha));
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("eigenvalues of a diagonal matrix are the squared entries") {
    Tensor w(Shape{8, 8});
    float diag[8] = {1, 2, 3, 0.5f, 1.5f, 2.5f, 0.25f, 4};
    for (int i = 0; i < 8; ++i) w.data()[i * 8 + i] = diag[i];
    EigenSpectrum s = eigenvalues_of(w);
    std::vector<double> expect;
    for (float d : diag) expect.push_back(static_cast<double>(d) * d);
    std::sort(expect.begin(), expect.end());
    REQUIRE(s.values.size() == 8);
    for (int i = 0; i < 8; ++i)
        CHECK(s.values[static_cast<size_t>(i)] == doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-8));
}

TEST_CASE("zero matrix yields an all-zero spectrum that downstream fits reject") {
    Tensor w(Shape{8, 8});
    EigenSpectrum s = eigenvalues_of(w);
    for (double v : s.values) CHECK(v == doctest::Approx(0.0));
    CHECK_THROWS_AS(peak_lambda(s), ValueError);
}

TEST_CASE("sum of eigenvalues equals the squared Frobenius norm") {
    Rng rng(77);
    Tensor w = rand_normal(rng, Shape{64, 64});
    EigenSpectrum s = eigenvalues_of(w);
    double total = 0.0;
    for (double v : s.values) total += v;
    double fro = 0.0;
    for (long long i = 0; i < w.size(); ++i)
        fro += static_cast<double>(w.data()[i]) * w.data()[i];
    CHECK(total == doctest::Approx(fro).epsilon(1e-4));
}

TEST_CASE("eigenvalues_of rejects bad input") {
    Tensor small(Shape{4, 100});
    CHECK_THROWS_AS(eigenvalues_of(small), ValueError);
    Tensor nan(Shape{8, 8});
    nan.data()[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(eigenvalues_of(nan), ValueError);
}

TEST_CASE("peak_lambda finds the dominant cluster") {
    std::vector<double> vals;
    for (int i = 0; i < 1000; ++i) vals.push_back(1.0 + 1e-3 * (i % 7));
    for (int i = 0; i < 10; ++i) vals.push_back(100.0 + i);
    double peak = peak_lambda(spectrum_of(vals));
    CHECK(peak > 0.8);
    CHECK(peak < 1.3);
}

TEST_CASE("peak_lambda matches a brute-force histogram on a Gaussian bulk") {
    Rng rng(123);
    Tensor w = rand_normal(rng, Shape{256, 256}, 0.0, 1.0 / 16.0);
    EigenSpectrum s = eigenvalues_of(w);
    double peak = peak_lambda(s);
    double expect = oracle::histogram_peak(s.values, 100);
    CHECK(peak == doctest::Approx(expect).epsilon(1e-9));
    // inside the Marchenko-Pastur support (0, 4 sigma^2 n] for square matrices
    CHECK(peak > 0.0);
    CHECK(peak < 4.0 * 256.0 / 256.0);
    // a finer-grained independent histogram localizes the same bulk region
    double fine = oracle::histogram_peak(s.values, 400);
    CHECK(std::fabs(std::log(peak / fine)) < 0.5);
}

TEST_CASE("peak_lambda tie-break goes to the smaller bin") {
    // two equal-mass clusters at 1 and 10
    std::vector<double> vals;
    for (int i = 0; i < 50; ++i) {
        vals.push_back(1.0 + 1e-6 * i);
        vals.push_back(10.0 + 1e-5 * i);
    }
    double peak = peak_lambda(spectrum_of(vals));
    CHECK(peak < 2.0);
}

TEST_CASE("hill estimator hand examples are exact") {
    EigenSpectrum s = spectrum_of({1, 10, 100});
    CHECK(hill_tau(s, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(hill_tau(s, 2) == doctest::Approx(2.0).epsilon(1e-12));
    EigenSpectrum flat = spectrum_of({3, 3, 3, 3, 3, 3, 3, 3});
    CHECK_THROWS_AS(hill_tau(flat, 4), ValueError);
    CHECK_THROWS_AS(hill_tau(s, 0), ValueError);
    CHECK_THROWS_AS(hill_tau(s, 3), ValueError);
}

TEST_CASE("hill estimator is scale invariant; histogram peak is covariant") {
    Rng rng(7);
    std::vector<double> vals = pareto_sample(2.0, 400, 99);
    EigenSpectrum s = spectrum_of(vals);
    std::vector<double> scaled;
    for (double v : vals) scaled.push_back(3.7 * v);
    EigenSpectrum s2 = spectrum_of(scaled);
    for (int j : {2, 30, 150})
        CHECK(hill_tau(s, j) == doctest::Approx(hill_tau(s2, j)).epsilon(1e-9));
    CHECK(peak_lambda(s2) == doctest::Approx(3.7 * peak_lambda(s)).epsilon(1e-6));
}

TEST_CASE("fix_finger on an exact power tail agrees with a windowed brute force") {
    auto vals = exact_power_tail(2.5, 300, 1700, 1.0);
    EigenSpectrum s = spectrum_of(vals);
    double peak = peak_lambda(s);
    SpectralFit fit = fix_finger(s, 0.95 * peak, 1.5 * peak, peak);
    CHECK(fit.lambda_hat == doctest::Approx(peak));

    // independent windowed search: every t whose lambda lies in the window
    const int N = static_cast<int>(vals.size());
    double best_dev = 1e300, best_tau = 0;
    int best_t = -1;
    for (int t = 1; t <= N - 1; ++t) {
        double lt = vals[static_cast<size_t>(t - 1)];
        if (!(lt > 0.95 * peak && lt < 1.5 * peak)) continue;
        double denom = 0.0;
        for (int i = 1; i <= t; ++i) denom += std::log10(vals[static_cast<size_t>(N - i)] / lt);
        if (denom <= 1e-12) continue;
        double tau = 1.0 + static_cast<double>(N - t) / denom;
        double dev = 0.0;
        for (int i = 0; i <= N - t; ++i)
            dev = std::max(dev, std::fabs(1.0 - std::pow(vals[static_cast<size_t>(t - 1 + i)] / lt, 1.0 - tau) -
                                          static_cast<double>(i) / (N - t)));
        if (dev < best_dev) {
            best_dev = dev;
            best_tau = tau;
            best_t = t;
        }
    }
    CHECK(fit.threshold_index == best_t);
    CHECK(fit.tau == doctest::Approx(best_tau).epsilon(1e-12));
    CHECK(fit.ks_distance == doctest::Approx(best_dev).epsilon(1e-12));
}

TEST_CASE("fix_finger tracks an exhaustive-threshold oracle on Pareto tails") {
    double total_dev = 0.0;
    const int seeds = 6;
    for (int seed = 0; seed < seeds; ++seed) {
        auto vals = pareto_sample(1.5, 2000, 1000 + static_cast<std::uint64_t>(seed));
        EigenSpectrum s = spectrum_of(vals);
        double peak = peak_lambda(s);
        SpectralFit fit = fix_finger(s, 0.95 * peak, 1.5 * peak, peak);
        oracle::TailFit of = oracle::exhaustive_tail_fit(vals);
        total_dev += std::fabs(fit.tau - of.tau);
    }
    CHECK(total_dev / seeds < 0.3);
}

TEST_CASE("fix_finger errors: empty window, degenerate candidates") {
    EigenSpectrum s = spectrum_of({1, 2, 3, 4, 5, 6, 7, 8});
    CHECK_THROWS_AS(fix_finger(s, 100.0, 200.0), ValueError);
    EigenSpectrum flat = spectrum_of({2, 2, 2, 2, 2, 2, 2, 2});
    CHECK_THROWS_AS(fix_finger(flat, 1.0, 3.0), ValueError);
}

TEST_CASE("block_tau of a single layer equals fix_finger on its spectrum") {
    Rng rng(31);
    Tensor w = rand_normal(rng, Shape{96, 48}, 0.0, 0.1);
    EigenSpectrum s = eigenvalues_of(w);
    double peak = peak_lambda(s);
    SpectralFit direct = fix_finger(s, 0.95 * peak, 1.5 * peak, peak);
    CHECK(block_tau({w}) == doctest::Approx(direct.tau).epsilon(1e-12));
}

TEST_CASE("block_tau pooling two copies of a layer changes nearly nothing") {
    // Duplicating every eigenvalue doubles the threshold index; the hill
    // value at the doubled index is exactly the single-copy value and the
    // window argmin lands within one discretization step of it.
    Tensor w(Shape{256, 128});
    auto sv = pareto_sample(2.5, 128, 2024);
    for (int i = 0; i < 128; ++i)
        w.data()[i * 128 + i] = static_cast<float>(0.05 * sv[static_cast<size_t>(i)]);
    EigenSpectrum single = eigenvalues_of(w);
    EigenSpectrum dup;
    dup.values = single.values;
    dup.values.insert(dup.values.end(), single.values.begin(), single.values.end());
    std::sort(dup.values.begin(), dup.values.end());
    for (int t : {4, 17, 40})
        CHECK(hill_tau(dup, 2 * t) == doctest::Approx(hill_tau(single, t)).epsilon(1e-12));

    double one = block_tau({w});
    double two = block_tau({w, w});
    CHECK(std::fabs(two - one) < 0.2);
}

TEST_CASE("pooled heavy and bulk layers sit between the individual fits") {
    for (int seed = 0; seed < 3; ++seed) {
        Tensor heavy(Shape{128, 64});
        {
            auto sv = pareto_sample(4.0, 64, 2024 + static_cast<std::uint64_t>(seed));
            for (int i = 0; i < 64; ++i)
                heavy.data()[i * 64 + i] =
                    static_cast<float>(0.05 * std::sqrt(sv[static_cast<size_t>(i)]));
        }
        // bulk block pools two scales so its histogram peak sits low
        Rng rng(600 + static_cast<std::uint64_t>(seed));
        Tensor bulk1 = rand_normal(rng, Shape{128, 64}, 0.0, 0.05);
        Tensor bulk2 = rand_normal(rng, Shape{128, 64}, 0.0, 0.12);
        double tau_heavy = block_tau({heavy});
        double tau_bulk = block_tau({bulk1, bulk2});
        double tau_pool = block_tau({heavy, bulk1, bulk2});

        // brute-force fit of the pooled multiset restricted to the same window
        EigenSpectrum pooled;
        for (const Tensor* t : {&heavy, &bulk1, &bulk2}) {
            EigenSpectrum s = eigenvalues_of(*t);
            pooled.values.insert(pooled.values.end(), s.values.begin(), s.values.end());
        }
        std::erase_if(pooled.values, [](double v) { return v <= 0.0; });
        std::sort(pooled.values.begin(), pooled.values.end());
        double peak = peak_lambda(pooled);
        SpectralFit expect = fix_finger(pooled, 0.95 * peak, 1.5 * peak, peak);
        CHECK(tau_pool == doctest::Approx(expect.tau).epsilon(1e-12));
        CHECK(tau_pool >= std::min(tau_heavy, tau_bulk) - 1e-9);
        CHECK(tau_pool <= std::max(tau_heavy, tau_bulk) + 1e-9);
    }
}

TEST_CASE("allocation: symmetric case") {
    AllocationPlan p = allocate_experts({1.5, 1.5, 1.5}, 6);
    CHECK(p.per_block == std::vector<int>{2, 2, 2});
    CHECK(p.top_k == std::vector<int>{2, 2, 2});
}

TEST_CASE("allocation: 12 equal blocks, 55 experts") {
    AllocationPlan p = allocate_experts(std::vector<double>(12, 2.0), 55);
    int total = 0;
    for (int b = 0; b < 12; ++b) {
        CHECK(p.per_block[static_cast<size_t>(b)] == (b < 7 ? 5 : 4));
        total += p.per_block[static_cast<size_t>(b)];
    }
    CHECK(total == 55);
    for (int k : p.top_k) CHECK(k == 2);
}

TEST_CASE("allocation matches the independent largest-remainder oracle") {
    Rng rng(2025);
    for (int trial = 0; trial < 100; ++trial) {
        int blocks = rng.uniform_int(2, 14);
        int total = blocks + rng.uniform_int(0, 60);
        std::vector<double> taus;
        for (int b = 0; b < blocks; ++b) taus.push_back(1.0 + rng.uniform(0.01, 9.0));
        AllocationPlan p = allocate_experts(taus, total);
        auto expect = oracle::largest_remainder(taus, total);
        int sum = 0;
        for (size_t b = 0; b < taus.size(); ++b) {
            CHECK(p.per_block[b] == expect[b]);
            CHECK(p.per_block[b] >= 1);
            CHECK(p.top_k[b] == std::min(2, p.per_block[b]));
            sum += p.per_block[b];
        }
        CHECK(sum == total);
    }
}

TEST_CASE("allocation is monotone in a block's tau") {
    Rng rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        int blocks = rng.uniform_int(3, 10);
        int total = blocks + rng.uniform_int(0, 50);
        std::vector<double> taus;
        for (int b = 0; b < blocks; ++b) taus.push_back(1.0 + rng.uniform(0.01, 5.0));
        int bump = rng.uniform_int(0, blocks - 1);
        AllocationPlan before = allocate_experts(taus, total);
        taus[static_cast<size_t>(bump)] += rng.uniform(0.05, 3.0);
        AllocationPlan after = allocate_experts(taus, total);
        CHECK(after.per_block[static_cast<size_t>(bump)] >=
              before.per_block[static_cast<size_t>(bump)]);
    }
}

TEST_CASE("allocation is permutation-equivariant") {
    Rng rng(555);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> taus;
        for (int b = 0; b < 7; ++b) taus.push_back(1.0 + rng.uniform(0.01, 4.0));
        AllocationPlan p = allocate_experts(taus, 23);
        std::vector<double> rev(taus.rbegin(), taus.rend());
        AllocationPlan q = allocate_experts(rev, 23);
        for (int b = 0; b < 7; ++b)
            CHECK(p.per_block[static_cast<size_t>(b)] == q.per_block[static_cast<size_t>(6 - b)]);
    }
}

TEST_CASE("allocation rejects infeasible budgets and bad taus") {
    CHECK_THROWS_AS(allocate_experts({2.0, 2.0, 2.0}, 2), ConfigError);
    CHECK_THROWS_AS(allocate_experts({0.5, 2.0}, 8), ValueError);
    CHECK_THROWS_AS(allocate_experts({}, 8), ConfigError);
}

TEST_CASE("fitted tau stabilizes as N grows and orders by tail weight") {
    // The estimator's seed-to-seed spread shrinks with N, and a heavier
    // Pareto tail (smaller survival exponent) maps to a smaller fitted tau.
    const int seeds = 8;
    auto spread = [&](double alpha, int n) {
        std::vector<double> taus;
        for (int seed = 0; seed < seeds; ++seed) {
            auto vals = pareto_sample(alpha, n, 31 + static_cast<std::uint64_t>(seed));
            EigenSpectrum s = spectrum_of(vals);
            double peak = peak_lambda(s);
            taus.push_back(fix_finger(s, 0.95 * peak, 1.5 * peak, peak).tau);
        }
        double mean = 0, var = 0;
        for (double t : taus) mean += t / seeds;
        for (double t : taus) var += (t - mean) * (t - mean) / seeds;
        return std::pair{mean, std::sqrt(var)};
    };
    auto [mean_small, sd_small] = spread(1.5, 200);
    auto [mean_large, sd_large] = spread(1.5, 2000);
    CHECK(sd_large < sd_small);
    CHECK(std::fabs(mean_large - mean_small) < 0.5);

    auto [mean_heavier, sd_h] = spread(1.0, 2000);
    CHECK(mean_heavier < mean_large);  // heavier tail, smaller fitted tau
}
