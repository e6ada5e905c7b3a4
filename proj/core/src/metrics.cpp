#include "endogede/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace endogede {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n == 0) throw ValueError("median of empty set");
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Jacobi eigendecomposition of a symmetric 3x3, eigenvalues descending.
void sym_eig3(const std::array<double, 9>& a_in, std::array<double, 3>& eval,
              std::array<double, 9>& evec) {
    std::array<double, 9> a = a_in;
    std::array<double, 9> v{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
        if (off < 1e-30) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                double apq = a[static_cast<size_t>(p * 3 + q)];
                if (std::fabs(apq) < 1e-300) continue;
                double app = a[static_cast<size_t>(p * 3 + p)];
                double aqq = a[static_cast<size_t>(q * 3 + q)];
                double theta = 0.5 * (aqq - app) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    double akp = a[static_cast<size_t>(k * 3 + p)];
                    double akq = a[static_cast<size_t>(k * 3 + q)];
                    a[static_cast<size_t>(k * 3 + p)] = c * akp - s * akq;
                    a[static_cast<size_t>(k * 3 + q)] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    double apk = a[static_cast<size_t>(p * 3 + k)];
                    double aqk = a[static_cast<size_t>(q * 3 + k)];
                    a[static_cast<size_t>(p * 3 + k)] = c * apk - s * aqk;
                    a[static_cast<size_t>(q * 3 + k)] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    double vkp = v[static_cast<size_t>(k * 3 + p)];
                    double vkq = v[static_cast<size_t>(k * 3 + q)];
                    v[static_cast<size_t>(k * 3 + p)] = c * vkp - s * vkq;
                    v[static_cast<size_t>(k * 3 + q)] = s * vkp + c * vkq;
                }
            }
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        return a[static_cast<size_t>(x * 3 + x)] > a[static_cast<size_t>(y * 3 + y)];
    });
    for (int i = 0; i < 3; ++i) {
        eval[static_cast<size_t>(i)] = a[static_cast<size_t>(order[static_cast<size_t>(i)] * 4)];
        for (int r = 0; r < 3; ++r)
            evec[static_cast<size_t>(r * 3 + i)] =
                v[static_cast<size_t>(r * 3 + order[static_cast<size_t>(i)])];
    }
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double det3(const std::array<double, 9>& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

// SVD m = U diag(s) V^T for 3x3 via the Gram-matrix eigendecomposition,
// completing degenerate columns of U with cross products.
void svd3(const std::array<double, 9>& m, std::array<double, 9>& u, std::array<double, 3>& s,
          std::array<double, 9>& v) {
    std::array<double, 9> mtm{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k)
                acc += m[static_cast<size_t>(k * 3 + i)] * m[static_cast<size_t>(k * 3 + j)];
            mtm[static_cast<size_t>(i * 3 + j)] = acc;
        }
    std::array<double, 3> ev;
    sym_eig3(mtm, ev, v);
    for (int i = 0; i < 3; ++i) s[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, ev[static_cast<size_t>(i)]));

    double smax = std::max({s[0], s[1], s[2], 1e-300});
    std::array<std::array<double, 3>, 3> ucols;
    int good = 0;
    for (int i = 0; i < 3; ++i) {
        if (s[static_cast<size_t>(i)] > 1e-12 * smax) {
            for (int r = 0; r < 3; ++r) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k)
                    acc += m[static_cast<size_t>(r * 3 + k)] * v[static_cast<size_t>(k * 3 + i)];
                ucols[static_cast<size_t>(i)][static_cast<size_t>(r)] = acc / s[static_cast<size_t>(i)];
            }
            good = i + 1;
        }
    }
    if (good == 0) {
        ucols[0] = {1, 0, 0};
        good = 1;
    }
    if (good == 1) {
        // any unit vector orthogonal to ucols[0]
        std::array<double, 3> ref = std::fabs(ucols[0][0]) < 0.9 ? std::array<double, 3>{1, 0, 0}
                                                                 : std::array<double, 3>{0, 1, 0};
        auto c = cross(ucols[0], ref);
        double nrm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
        ucols[1] = {c[0] / nrm, c[1] / nrm, c[2] / nrm};
        good = 2;
    }
    if (good == 2) ucols[2] = cross(ucols[0], ucols[1]);
    for (int i = 0; i < 3; ++i)
        for (int r = 0; r < 3; ++r) u[static_cast<size_t>(r * 3 + i)] = ucols[static_cast<size_t>(i)][static_cast<size_t>(r)];
}

} // namespace

EvalReport depth_metrics(const Tensor& pred, const Tensor& gt, double cap, DepthScaling scaling) {
    if (pred.shape() != gt.shape())
        throw ShapeError("depth_metrics shape mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(gt.shape()));
    const float* pp = pred.data();
    const float* pg = gt.data();
    std::vector<double> dp, dg;
    for (long long i = 0; i < pred.size(); ++i) {
        double g = pg[i];
        if (g > 0.0 && g <= cap) {
            dg.push_back(g);
            dp.push_back(std::max(static_cast<double>(pp[i]), 1e-6));
        }
    }
    if (dg.empty()) throw ValueError("depth_metrics: empty valid set (gt > 0 and gt <= cap)");

    EvalReport r;
    r.cap = cap;
    r.n_pixels = static_cast<long long>(dg.size());
    if (scaling == DepthScaling::Median) {
        r.scale_applied = median_of(dg) / median_of(dp);
        for (double& d : dp) d *= r.scale_applied;
    }
    double abs_rel = 0.0, sq_rel = 0.0, mse = 0.0, mse_log = 0.0, hits = 0.0;
    for (size_t i = 0; i < dg.size(); ++i) {
        double d = dg[i], dh = dp[i];
        double err = std::fabs(d - dh);
        abs_rel += err / d;
        sq_rel += err * err / d;
        mse += err * err;
        double le = std::log(d) - std::log(dh);
        mse_log += le * le;
        if (std::max(d / dh, dh / d) < 1.25) hits += 1.0;
    }
    double n = static_cast<double>(dg.size());
    r.abs_rel = abs_rel / n;
    r.sq_rel = sq_rel / n;
    r.rmse = std::sqrt(mse / n);
    r.rmse_log = std::sqrt(mse_log / n);
    r.delta = hits / n;
    return r;
}

std::array<double, 3> SimilarityTransform::apply(const std::array<double, 3>& p) const {
    const auto& r = rotation;
    return {scale * (r[0] * p[0] + r[1] * p[1] + r[2] * p[2]) + translation[0],
            scale * (r[3] * p[0] + r[4] * p[1] + r[5] * p[2]) + translation[1],
            scale * (r[6] * p[0] + r[7] * p[1] + r[8] * p[2]) + translation[2]};
}

SimilarityTransform umeyama_alignment(const std::vector<std::array<double, 3>>& src,
                                      const std::vector<std::array<double, 3>>& dst) {
    if (src.size() != dst.size() || src.size() < 3)
        throw ValueError("similarity alignment needs >= 3 paired points");
    const double n = static_cast<double>(src.size());
    std::array<double, 3> mu_s{0, 0, 0}, mu_d{0, 0, 0};
    for (size_t i = 0; i < src.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            mu_s[static_cast<size_t>(a)] += src[i][static_cast<size_t>(a)] / n;
            mu_d[static_cast<size_t>(a)] += dst[i][static_cast<size_t>(a)] / n;
        }
    double var_s = 0.0;
    std::array<double, 9> cov{};   // dst-centered x src-centered^T
    for (size_t i = 0; i < src.size(); ++i) {
        std::array<double, 3> xs, xd;
        for (int a = 0; a < 3; ++a) {
            xs[static_cast<size_t>(a)] = src[i][static_cast<size_t>(a)] - mu_s[static_cast<size_t>(a)];
            xd[static_cast<size_t>(a)] = dst[i][static_cast<size_t>(a)] - mu_d[static_cast<size_t>(a)];
            var_s += xs[static_cast<size_t>(a)] * xs[static_cast<size_t>(a)] / n;
        }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                cov[static_cast<size_t>(r * 3 + c)] += xd[static_cast<size_t>(r)] * xs[static_cast<size_t>(c)] / n;
    }

    std::array<double, 9> u, v;
    std::array<double, 3> s;
    svd3(cov, u, s, v);
    std::array<double, 3> d{1, 1, 1};
    if (det3(u) * det3(v) < 0) d[2] = -1;

    SimilarityTransform out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k)
                acc += u[static_cast<size_t>(r * 3 + k)] * d[static_cast<size_t>(k)] *
                       v[static_cast<size_t>(c * 3 + k)];
            out.rotation[static_cast<size_t>(r * 3 + c)] = acc;
        }
    // coincident source points cannot determine a scale; fall back to 1
    out.scale = var_s > 1e-18 ? (s[0] * d[0] + s[1] * d[1] + s[2] * d[2]) / var_s : 1.0;
    for (int a = 0; a < 3; ++a) {
        double rm = 0.0;
        for (int k = 0; k < 3; ++k)
            rm += out.rotation[static_cast<size_t>(a * 3 + k)] * mu_s[static_cast<size_t>(k)];
        out.translation[static_cast<size_t>(a)] = mu_d[static_cast<size_t>(a)] - out.scale * rm;
    }
    return out;
}

AteReport ate(const std::vector<TimedPose>& pred, const std::vector<TimedPose>& gt,
              double max_dt) {
    // one-to-one association by nearest timestamp within max_dt
    std::vector<std::array<double, 3>> ps, gs;
    size_t j = 0;
    for (const TimedPose& p : pred) {
        while (j + 1 < gt.size() &&
               std::fabs(gt[j + 1].timestamp - p.timestamp) <= std::fabs(gt[j].timestamp - p.timestamp))
            ++j;
        if (j < gt.size() && std::fabs(gt[j].timestamp - p.timestamp) <= max_dt) {
            ps.push_back(p.pose.translation);
            gs.push_back(gt[j].pose.translation);
            ++j;
            if (j >= gt.size()) break;
        }
    }
    if (ps.size() < 3)
        throw ValueError("ate: fewer than 3 associated poses (" + std::to_string(ps.size()) + ")");

    SimilarityTransform T = umeyama_alignment(ps, gs);
    double se = 0.0;
    for (size_t i = 0; i < ps.size(); ++i) {
        auto a = T.apply(ps[i]);
        for (int c = 0; c < 3; ++c) {
            double d = a[static_cast<size_t>(c)] - gs[i][static_cast<size_t>(c)];
            se += d * d;
        }
    }
    AteReport r;
    r.n_poses = static_cast<long long>(ps.size());
    r.scale = T.scale;
    r.ate = std::sqrt(se / static_cast<double>(ps.size()));
    return r;
}

} // namespace endogede
