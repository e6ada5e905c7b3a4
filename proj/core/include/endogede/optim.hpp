#pragma once

#include <vector>

#include "endogede/tensor.hpp"

namespace endogede {

// Adam with float64 moment buffers for deterministic, drift-free updates.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, double lr = 1e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
};

} // namespace endogede
