#include "endogede/optim.hpp"

#include <cmath>

namespace endogede {

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Tensor& p : params_) {
        p.set_requires_grad(true);
        m_.emplace_back(static_cast<size_t>(p.size()), 0.0);
        v_.emplace_back(static_cast<size_t>(p.size()), 0.0);
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        const float* g = p.grad_data();
        float* x = p.data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (long long j = 0; j < p.size(); ++j) {
            double gj = g[j];
            m[static_cast<size_t>(j)] = beta1_ * m[static_cast<size_t>(j)] + (1.0 - beta1_) * gj;
            v[static_cast<size_t>(j)] = beta2_ * v[static_cast<size_t>(j)] + (1.0 - beta2_) * gj * gj;
            double mh = m[static_cast<size_t>(j)] / bc1;
            double vh = v[static_cast<size_t>(j)] / bc2;
            x[j] = static_cast<float>(x[j] - lr_ * mh / (std::sqrt(vh) + eps_));
        }
    }
}

} // namespace endogede
