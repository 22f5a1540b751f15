#include "bevdg/mmd.hpp"

#include <algorithm>
#include <cmath>

namespace bevdg {

namespace {

double sq_dist(const double* x, const double* y, std::size_t d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double diff = x[k] - y[k];
        acc += diff * diff;
    }
    return acc;
}

void check_batches(const FeatureBatch& zs, const FeatureBatch& zt) {
    if (zs.n < 1 || zt.n < 1)
        throw InvalidArgument("mmd: batches must be nonempty");
    if (zs.d != zt.d)
        throw InvalidArgument("mmd: feature dimensions disagree");
    if (zs.rows.size() != zs.n * zs.d || zt.rows.size() != zt.n * zt.d)
        throw InvalidArgument("mmd: batch storage inconsistent with n*d");
}

} // namespace

double rbf_kernel(const double* x, const double* y, std::size_t d, const KernelParams& kp) {
    if (!(kp.sigma > 0.0))
        throw InvalidArgument("rbf_kernel: sigma must be positive");
    return std::exp(-sq_dist(x, y, d) / (2.0 * kp.sigma * kp.sigma));
}

double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y,
                  const KernelParams& kp) {
    if (x.size() != y.size())
        throw InvalidArgument("rbf_kernel: vector dimensions disagree");
    return rbf_kernel(x.data(), y.data(), x.size(), kp);
}

KernelParams median_bandwidth(const FeatureBatch& zs, const FeatureBatch& zt) {
    check_batches(zs, zt);
    std::size_t total = zs.n + zt.n;
    if (total < 2)
        throw InvalidArgument("median_bandwidth: pooled batch needs at least 2 points");

    auto pooled_row = [&](std::size_t i) {
        return i < zs.n ? zs.row(i) : zt.row(i - zs.n);
    };
    std::vector<double> dists;
    dists.reserve(total * (total - 1) / 2);
    for (std::size_t i = 0; i < total; ++i)
        for (std::size_t j = i + 1; j < total; ++j)
            dists.push_back(sq_dist(pooled_row(i), pooled_row(j), zs.d));

    std::sort(dists.begin(), dists.end());
    std::size_t m = dists.size();
    double median = (m % 2 == 1) ? dists[m / 2]
                                 : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);

    KernelParams kp;
    kp.sigma = median < 1e-12 ? 1.0 : std::sqrt(median / 2.0);
    return kp;
}

double mmd2(const FeatureBatch& zs, const FeatureBatch& zt, const KernelParams& kp,
            bool unbiased) {
    check_batches(zs, zt);
    double ns = static_cast<double>(zs.n);
    double nt = static_cast<double>(zt.n);

    double kss = 0.0, ktt = 0.0, kst = 0.0;
    for (std::size_t i = 0; i < zs.n; ++i)
        for (std::size_t j = 0; j < zs.n; ++j) {
            if (unbiased && i == j) continue;
            kss += rbf_kernel(zs.row(i), zs.row(j), zs.d, kp);
        }
    for (std::size_t i = 0; i < zt.n; ++i)
        for (std::size_t j = 0; j < zt.n; ++j) {
            if (unbiased && i == j) continue;
            ktt += rbf_kernel(zt.row(i), zt.row(j), zt.d, kp);
        }
    for (std::size_t i = 0; i < zs.n; ++i)
        for (std::size_t j = 0; j < zt.n; ++j)
            kst += rbf_kernel(zs.row(i), zt.row(j), zs.d, kp);

    double value;
    if (unbiased) {
        if (zs.n < 2 || zt.n < 2)
            throw InvalidArgument("mmd2: unbiased estimator needs n >= 2 per batch");
        value = kss / (ns * (ns - 1.0)) + ktt / (nt * (nt - 1.0)) - 2.0 * kst / (ns * nt);
        return value; // the U-statistic may legitimately be negative
    }
    value = kss / (ns * ns) + ktt / (nt * nt) - 2.0 * kst / (ns * nt);
    // The V-statistic is a squared RKHS norm; only rounding can push it below 0.
    return value < 0.0 ? 0.0 : value;
}

std::vector<double> mmd2_grad(const FeatureBatch& zs, const FeatureBatch& zt,
                              const KernelParams& kp) {
    check_batches(zs, zt);
    if (!(kp.sigma > 0.0))
        throw InvalidArgument("mmd2_grad: sigma must be positive");
    double ns = static_cast<double>(zs.n);
    double nt = static_cast<double>(zt.n);
    double inv_sigma2 = 1.0 / (kp.sigma * kp.sigma);

    std::vector<double> grad(zt.n * zt.d, 0.0);
    for (std::size_t j = 0; j < zt.n; ++j) {
        double* gj = grad.data() + j * zt.d;
        const double* tj = zt.row(j);
        // d/dz_j of (1/nt^2) sum_{i,l} k(z_i^t, z_l^t): row j appears on both
        // sides of the kernel, giving a factor 2.
        for (std::size_t i = 0; i < zt.n; ++i) {
            const double* ti = zt.row(i);
            double k = rbf_kernel(ti, tj, zt.d, kp);
            double coef = 2.0 / (nt * nt) * k * inv_sigma2;
            for (std::size_t c = 0; c < zt.d; ++c) gj[c] += coef * (ti[c] - tj[c]);
        }
        // cross term -(2/(ns nt)) sum_i k(z_i^s, z_j^t)
        for (std::size_t i = 0; i < zs.n; ++i) {
            const double* si = zs.row(i);
            double k = rbf_kernel(si, tj, zs.d, kp);
            double coef = -2.0 / (ns * nt) * k * inv_sigma2;
            for (std::size_t c = 0; c < zt.d; ++c) gj[c] += coef * (si[c] - tj[c]);
        }
    }
    return grad;
}

} // namespace bevdg
