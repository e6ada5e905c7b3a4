#pragma once

#include <limits>
#include <string>
#include <vector>

#include "endogede/tensor.hpp"

namespace endogede {

// Eigenvalues (squared singular values) of one weight matrix or of a block's
// pooled layers, ascending. Zero/negative values are dropped before fitting.
struct EigenSpectrum {
    std::vector<double> values;          // ascending, >= 0
    int source_block = -1;
    std::vector<std::string> source_layers;
};

// Power-law tail fit of a spectrum: density log10(D(lambda)) ~ lambda^-tau
// over the window (0.95*peak, 1.5*peak); tail CDF model (x/x_t)^-(tau-1).
struct SpectralFit {
    double tau = 0.0;
    double lambda_hat = 0.0;             // histogram peak; NaN when not supplied
    int threshold_index = -1;            // 1-based index into the ascending values
    double ks_distance = 0.0;            // minimized max deviation
    double window_lo = 0.0, window_hi = 0.0;
};

struct AllocationPlan {
    int total_experts = 0;
    std::vector<int> per_block;
    std::vector<double> taus;
    std::vector<int> top_k;              // min(2, E_b)
};

// Squared singular values via the Gram matrix of the smaller side,
// ascending. Requires finite entries and min(m,n) >= 8.
EigenSpectrum eigenvalues_of(const Tensor& weight);

// Most populated bin of a log-spaced histogram over (min positive, max];
// returns the geometric bin center, ties broken toward smaller lambda.
double peak_lambda(const EigenSpectrum& spec, int n_bins = 100);

// tau_j = 1 + (N-j) / sum_{i=1..j} log10(lambda_{N-i+1} / lambda_j).
double hill_tau(const EigenSpectrum& spec, int j);

// Threshold search minimizing the max deviation between the empirical tail
// CDF and the fitted power law, restricted to candidates inside the window.
// lambda_hat is carried into the fit when supplied.
SpectralFit fix_finger(const EigenSpectrum& spec, double window_lo, double window_hi,
                       double lambda_hat = std::numeric_limits<double>::quiet_NaN());

// Pools the layers' eigenvalues, finds the peak, fits inside
// (0.95*peak, 1.5*peak). n_bins feeds peak_lambda.
SpectralFit block_fit(const std::vector<Tensor>& layer_weights, int n_bins = 100);
double block_tau(const std::vector<Tensor>& layer_weights, int n_bins = 100);

// E_b = floor(tau_b / sum(tau) * E0), zero blocks raised to one, leftovers
// by largest fractional part (ties toward the lower block index).
AllocationPlan allocate_experts(const std::vector<double>& taus, int total_experts);

// Symmetric eigenvalues by cyclic Jacobi, ascending. Exposed for reuse and
// testing; input is row-major n*n.
std::vector<double> sym_eigenvalues(std::vector<double> a, int n);

} // namespace endogede
