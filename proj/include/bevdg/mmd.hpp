#pragma once

#include <cstddef>
#include <vector>

#include "bevdg/errors.hpp"

namespace bevdg {

// n latent vectors of dimension d, row-major.
struct FeatureBatch {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> rows;

    FeatureBatch() = default;
    FeatureBatch(std::size_t n_, std::size_t d_) : n(n_), d(d_), rows(n_ * d_, 0.0) {}

    const double* row(std::size_t i) const { return rows.data() + i * d; }
    double* row(std::size_t i) { return rows.data() + i * d; }
};

struct KernelParams {
    double sigma = 1.0; // Gaussian bandwidth, > 0
};

// k(x,y) = exp(-||x-y||^2 / (2 sigma^2)), in (0,1].
double rbf_kernel(const double* x, const double* y, std::size_t d, const KernelParams& kp);
double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y,
                  const KernelParams& kp);

// sigma^2 = median of pairwise squared distances over the pooled batch,
// halved. Falls back to sigma = 1 when the pool is degenerate (median below
// 1e-12). Requires at least two pooled points.
KernelParams median_bandwidth(const FeatureBatch& zs, const FeatureBatch& zt);

// Squared MMD between the batches. The default is the biased V-statistic
// with i=j terms kept; pass unbiased=true for the U-statistic variant
// (requires n >= 2 on both sides).
double mmd2(const FeatureBatch& zs, const FeatureBatch& zt, const KernelParams& kp,
            bool unbiased = false);

// Analytic gradient of the biased mmd2 w.r.t. each z_t row; the bandwidth is
// treated as a constant. Returns an n_t x d matrix, row-major.
std::vector<double> mmd2_grad(const FeatureBatch& zs, const FeatureBatch& zt,
                              const KernelParams& kp);

} // namespace bevdg
