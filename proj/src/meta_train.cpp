#include "bevdg/meta_train.hpp"

#include <cmath>
#include <string>

namespace bevdg {

namespace {

void validate_config(const MetaConfig& cfg) {
    if (cfg.inner_lr < 0.0 || cfg.outer_lr < 0.0 || cfg.beta < 0.0)
        throw InvalidArgument("MetaConfig: learning rates and beta must be nonnegative");
    if (!(cfg.mask_ratio >= 0.0 && cfg.mask_ratio < 1.0))
        throw InvalidArgument("MetaConfig: mask_ratio must be in [0,1)");
    if (cfg.epochs < 0)
        throw InvalidArgument("MetaConfig: epochs must be nonnegative");
}

void check_finite(double v, const char* what, int iter) {
    if (!std::isfinite(v))
        throw InvalidArgument(std::string("training: non-finite ") + what +
                              " at iteration " + std::to_string(iter));
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

// Gradient of the source CE at a shifted parameter point; used by the
// finite-difference Hessian-vector product.
std::vector<double> ce_grad_at(const ModelParams& base, const std::vector<double>& theta,
                               const Scene& scene) {
    ModelParams p = base;
    p.theta = theta;
    auto [probs, trace] = forward(p, scene.cav_images);
    return backward(p, trace, scene.label);
}

// AmpAug'd copy of a scene: one bank amplitude drives every CAV image.
Scene make_target(const Scene& source, const AmplitudeBank* bank, double mask_ratio,
                  Rng& iter_rng) {
    if (!bank) return source;
    const std::vector<double>& amp = bank->sample(iter_rng);
    Scene target;
    target.scene_seed = source.scene_seed;
    target.domain_tag = source.domain_tag;
    target.label = source.label;
    target.cav_images.reserve(source.cav_images.size());
    for (const Image& img : source.cav_images)
        target.cav_images.push_back(ampaug_with_amplitude(img, amp, mask_ratio));
    return target;
}

} // namespace

InnerUpdate inner_update(const ModelParams& params, const Scene& source, double inner_lr) {
    InnerUpdate up;
    auto [probs, trace] = forward(params, source.cav_images);
    up.loss = cross_entropy(probs, source.label);
    if (!std::isfinite(up.loss))
        throw InvalidArgument("inner_update: non-finite loss");
    up.grad = backward(params, trace, source.label);
    up.params_prime = sgd_step(params, up.grad, inner_lr);
    up.trace_source = std::move(trace);
    return up;
}

MetaObjective meta_objective(const ModelParams& params_prime, const MetaBatch& batch,
                             const ForwardTrace& source_trace, double beta,
                             std::optional<KernelParams> kp) {
    MetaObjective mo;
    auto [probs_t, trace_t] = forward(params_prime, batch.target.cav_images);
    mo.ce = cross_entropy(probs_t, batch.target.label);

    std::size_t d = source_trace.z.size();
    FeatureBatch zs(1, d), zt(1, d);
    std::copy(source_trace.z.begin(), source_trace.z.end(), zs.rows.begin());
    std::copy(trace_t.z.begin(), trace_t.z.end(), zt.rows.begin());
    if (kp) {
        mo.kernel_used = *kp;
    } else if (zs.n + zt.n < 4) {
        // A two-point pool cannot estimate a bandwidth: the median heuristic
        // would pin the kernel argument at -1, making the loss a constant
        // with a gradient that blows up as the latents approach each other.
        // Use the heuristic's own degenerate-pool fallback instead.
        mo.kernel_used = KernelParams{1.0};
    } else {
        mo.kernel_used = median_bandwidth(zs, zt);
    }
    mo.cons = mmd2(zs, zt, mo.kernel_used);

    mo.value = mo.ce + beta * mo.cons;
    mo.grad = backward_with_consistency(params_prime, source_trace, trace_t,
                                        batch.target.label, beta, mo.kernel_used);
    return mo;
}

std::pair<ModelParams, TrainRecord> outer_update(const ModelParams& params,
                                                 const MetaBatch& batch,
                                                 const MetaConfig& cfg, int iter,
                                                 int epoch) {
    validate_config(cfg);
    InnerUpdate inner = inner_update(params, batch.source, cfg.inner_lr);
    MetaObjective mo = meta_objective(inner.params_prime, batch, inner.trace_source,
                                      cfg.beta);
    check_finite(inner.loss, "meta-train loss", iter);
    check_finite(mo.ce, "meta-test loss", iter);
    check_finite(mo.cons, "consistency loss", iter);

    // d/dtheta [ L_CE(x_s; theta) + L_meta(...; theta') ]. First order treats
    // dtheta'/dtheta as the identity; second order subtracts
    // inner_lr * H(L_CE) * g_meta, with H*v by central differences.
    std::vector<double> combined = add(inner.grad, mo.grad);
    if (cfg.second_order && cfg.inner_lr != 0.0) {
        double vnorm = 0.0;
        for (double g : mo.grad) vnorm += g * g;
        vnorm = std::sqrt(vnorm);
        if (vnorm > 0.0) {
            double eps = 1e-5 / std::max(1.0, vnorm);
            std::vector<double> plus = params.theta, minus = params.theta;
            for (std::size_t i = 0; i < plus.size(); ++i) {
                plus[i] += eps * mo.grad[i];
                minus[i] -= eps * mo.grad[i];
            }
            std::vector<double> gp = ce_grad_at(params, plus, batch.source);
            std::vector<double> gm = ce_grad_at(params, minus, batch.source);
            for (std::size_t i = 0; i < combined.size(); ++i)
                combined[i] -= cfg.inner_lr * (gp[i] - gm[i]) / (2.0 * eps);
        }
    }

    ModelParams updated = sgd_step(params, combined, cfg.outer_lr);
    TrainRecord rec;
    rec.iter = iter;
    rec.epoch = epoch;
    rec.l_ce_train = inner.loss;
    rec.l_ce_test = mo.ce;
    rec.l_cons = mo.cons;
    return {std::move(updated), rec};
}

std::pair<ModelParams, TrainLog> train(const std::vector<Scene>& dataset,
                                       const AmplitudeBank* bank, const MetaConfig& cfg,
                                       ModelParams initial, const TrainSink& sink) {
    validate_config(cfg);
    if (dataset.empty())
        throw InvalidArgument("train: dataset is empty");

    ModelParams params = std::move(initial);
    TrainLog log;
    log.reserve(static_cast<std::size_t>(cfg.epochs) * dataset.size());
    int iter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t idx = 0; idx < dataset.size(); ++idx) {
            Rng iter_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), idx));
            MetaBatch batch;
            batch.source = dataset[idx];
            batch.target = make_target(dataset[idx], bank, cfg.mask_ratio, iter_rng);
            auto [updated, rec] = outer_update(params, batch, cfg, iter, epoch);
            params = std::move(updated);
            log.push_back(rec);
            if (sink) sink(rec);
            ++iter;
        }
    }
    return {std::move(params), std::move(log)};
}

std::pair<ModelParams, TrainLog> train(const std::vector<Scene>& dataset,
                                       const AmplitudeBank* bank, const MetaConfig& cfg,
                                       const TrainSink& sink) {
    return train(dataset, bank, cfg, init_params(ArchConfig{}, cfg.seed), sink);
}

std::pair<ModelParams, TrainLog> train_erm(const std::vector<Scene>& dataset,
                                           const AmplitudeBank* bank, const MetaConfig& cfg,
                                           int epochs, ModelParams initial,
                                           const TrainSink& sink) {
    validate_config(cfg);
    if (dataset.empty())
        throw InvalidArgument("train_erm: dataset is empty");

    ModelParams params = std::move(initial);
    TrainLog log;
    int iter = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t idx = 0; idx < dataset.size(); ++idx) {
            Rng iter_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), idx));
            const Scene& scene = dataset[idx];
            auto [probs, trace] = forward(params, scene.cav_images);
            double loss = cross_entropy(probs, scene.label);
            check_finite(loss, "loss", iter);
            std::vector<double> grad = backward(params, trace, scene.label);

            double aug_loss = loss;
            if (bank) {
                Scene aug = make_target(scene, bank, cfg.mask_ratio, iter_rng);
                auto [probs_a, trace_a] = forward(params, aug.cav_images);
                aug_loss = cross_entropy(probs_a, aug.label);
                check_finite(aug_loss, "augmented loss", iter);
                grad = add(grad, backward(params, trace_a, aug.label));
            }
            params = sgd_step(params, grad, cfg.outer_lr);

            TrainRecord rec;
            rec.iter = iter;
            rec.epoch = epoch;
            rec.l_ce_train = loss;
            rec.l_ce_test = aug_loss;
            rec.l_cons = 0.0;
            log.push_back(rec);
            if (sink) sink(rec);
            ++iter;
        }
    }
    return {std::move(params), std::move(log)};
}

} // namespace bevdg
