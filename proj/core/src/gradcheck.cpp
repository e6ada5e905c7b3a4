#include "endogede/gradcheck.hpp"

#include <cmath>

namespace endogede {

GradCheckReport check_gradients(
    const std::function<Tensor()>& fn,
    const std::vector<std::pair<std::string, Tensor>>& leaves,
    GradCheckOptions opt) {
    for (auto& [name, leaf] : leaves) {
        (void)name;
        const_cast<Tensor&>(leaf).set_requires_grad(true);
        const_cast<Tensor&>(leaf).zero_grad();
    }

    double f0;
    {
        Tape tape;
        Tensor loss = fn();
        f0 = loss.item();
        if (!std::isfinite(f0)) throw ValueError("check_gradients: loss is not finite");
        tape.backward(loss);
    }

    GradCheckReport report;
    for (auto& [name, leaf] : leaves) {
        LeafReport lr;
        lr.name = name;
        lr.n_checked = leaf.size();
        Tensor& t = const_cast<Tensor&>(leaf);
        const float* ad = t.grad_data();
        float* vals = t.data();
        for (long long i = 0; i < t.size(); ++i) {
            float orig = vals[i];
            double eps = opt.eps;
            vals[i] = static_cast<float>(orig + eps);
            double eps_p = static_cast<double>(vals[i]) - orig;   // as actually stored
            double fp = fn().item();
            vals[i] = static_cast<float>(orig - eps);
            double eps_m = static_cast<double>(orig) - vals[i];
            double fm = fn().item();
            vals[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw ValueError("check_gradients: perturbed loss is not finite");
            double fd = (fp - fm) / (eps_p + eps_m);
            double a = ad[i];
            double denom = std::max({std::fabs(fd), std::fabs(a), opt.denom_floor});
            double atol = opt.noise_ulps * std::fabs(f0) * 1.1920929e-7 / (eps_p + eps_m);
            double rel = std::max(0.0, std::fabs(fd - a) - atol) / denom;
            if (rel >= opt.kink_guard) {
                // Piecewise-smooth losses (L1 terms, top-k swaps) kink inside
                // the probe interval; a central difference then averages two
                // different slopes. The adjoint is accepted when it lies in
                // the one-sided slope interval, the valid subgradient range.
                double right = (fp - f0) / eps_p;
                double left = (f0 - fm) / eps_m;
                double lo = std::min(left, right), hi = std::max(left, right);
                double margin =
                    std::max(0.05 * (hi - lo), 0.02 * std::max(std::fabs(lo), std::fabs(hi))) +
                    1e-6;
                double outside = std::max({0.0, lo - a - margin, a - hi - margin});
                if (outside == 0.0) {
                    rel = 0.0;
                    ++lr.n_kinks;
                }
            }
            if (rel > lr.max_rel_error) {
                lr.max_rel_error = rel;
                lr.worst_index = i;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, lr.max_rel_error);
        report.leaves.push_back(std::move(lr));
    }
    return report;
}

} // namespace endogede
