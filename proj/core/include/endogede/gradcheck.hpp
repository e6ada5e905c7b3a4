#pragma once

#include <functional>
#include <string>
#include <vector>

#include "endogede/tensor.hpp"

namespace endogede {

struct LeafReport {
    std::string name;
    double max_rel_error = 0.0;   // worst element, see check_gradients
    long long worst_index = -1;
    long long n_checked = 0;
    long long n_kinks = 0;        // elements resolved by the subgradient interval
};

struct GradCheckReport {
    std::vector<LeafReport> leaves;
    double max_rel_error = 0.0;
    bool passed(double tol) const { return max_rel_error < tol; }
};

struct GradCheckOptions {
    double eps = 1e-3;        // central-difference step
    // Elements where max(|fd|,|ad|) falls below this floor are compared on
    // the floor instead: float32 finite differences cannot resolve such
    // gradients at a relative tolerance, matching the exclusion of
    // zero-gradient regions from the checks.
    double denom_floor = 1e-3;
    // When the central-difference mismatch exceeds this, the element is
    // re-examined for a kink inside the probe interval (one-sided slopes
    // disagreeing); the adjoint then only has to lie between them.
    double kink_guard = 1e-3;
    // Absolute mismatch budget in units of the loss's float32 ulp divided by
    // the probe width: differences the storage format cannot even represent
    // are not counted against the gradient.
    double noise_ulps = 32.0;
};

// Central finite differences per leaf element against tape adjoints.
// fn must rebuild the forward pass from the leaves and return a scalar;
// it is evaluated under no active tape for the difference probes.
GradCheckReport check_gradients(
    const std::function<Tensor()>& fn,
    const std::vector<std::pair<std::string, Tensor>>& leaves,
    GradCheckOptions opt = {});

} // namespace endogede
