#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "bevdg/domains.hpp"
#include "bevdg/model.hpp"
#include "bevdg/spectral.hpp"

namespace bevdg {

struct MetaConfig {
    double inner_lr = 1e-3;  // inner-loop step size
    double outer_lr = 0.02;  // combined-update step size (SGD scale; see README)
    double beta = 0.1;       // consistency weight
    int epochs = 20;
    std::uint64_t seed = 0;
    double mask_ratio = 0.01;
    bool second_order = false; // exact curvature term via finite-difference HVP
};

// One meta-iteration's data: the raw source scene and its frequency-domain
// counterpart. Labels are shared (the augmentation is label-preserving).
struct MetaBatch {
    Scene source;
    Scene target;
};

struct TrainRecord {
    int iter = 0;
    int epoch = 0;
    double l_ce_train = 0.0;
    double l_ce_test = 0.0;
    double l_cons = 0.0;
};
using TrainLog = std::vector<TrainRecord>;
using TrainSink = std::function<void(const TrainRecord&)>;

struct InnerUpdate {
    ModelParams params_prime;  // stepped copy; the originals are untouched
    ForwardTrace trace_source; // carries the meta-train latent z_s
    std::vector<double> grad;  // gradient the step was taken along
    double loss = 0.0;
};

// One full-batch CE step on the source scene at inner_lr.
InnerUpdate inner_update(const ModelParams& params, const Scene& source, double inner_lr);

struct MetaObjective {
    double value = 0.0; // ce + beta * cons
    double ce = 0.0;
    double cons = 0.0;
    KernelParams kernel_used;
    std::vector<double> grad; // w.r.t. params_prime
};

// Meta-test CE plus weighted consistency loss, evaluated under the inner
// update's parameters. z_s comes from the meta-train trace, z_t from the
// meta-test forward done here. When kp is not supplied the bandwidth is the
// median heuristic over the pooled latents, frozen for this iteration's
// backward pass; pools too small for the heuristic (fewer than four points)
// fall back to sigma = 1.
MetaObjective meta_objective(const ModelParams& params_prime, const MetaBatch& batch,
                             const ForwardTrace& source_trace, double beta,
                             std::optional<KernelParams> kp = std::nullopt);

struct OuterUpdate {
    ModelParams params;  // the stepped parameters
    TrainRecord record;
    // pooled latents of the two branches, for bandwidth tracking
    std::vector<double> z_source;
    std::vector<double> z_target;
};

// Full meta-iteration: inner step, meta objective, combined update of the
// original parameters. First-order by default; cfg.second_order adds the
// curvature term through the inner step via a finite-difference
// Hessian-vector product. kp overrides the consistency kernel bandwidth
// (the training loop passes a windowed median; absent that, meta_objective's
// own fallback applies).
OuterUpdate outer_update(const ModelParams& params, const MetaBatch& batch,
                         const MetaConfig& cfg, int iter = 0, int epoch = 0,
                         std::optional<KernelParams> kp = std::nullopt);

// Meta-consistency training over the dataset. Each iteration samples one
// amplitude bank entry per scene from a per-iteration RNG stream; a null bank
// makes the target branch the source itself. The consistency kernel
// bandwidth is the median heuristic over a sliding window of recent branch
// latents, recomputed each iteration and frozen inside that iteration's
// backward pass (singleton batches carry too little scale information on
// their own). Deterministic per cfg.seed.
std::pair<ModelParams, TrainLog> train(const std::vector<Scene>& dataset,
                                       const AmplitudeBank* bank, const MetaConfig& cfg,
                                       ModelParams initial, const TrainSink& sink = {});

// Convenience: initializes from cfg.seed with the default architecture.
std::pair<ModelParams, TrainLog> train(const std::vector<Scene>& dataset,
                                       const AmplitudeBank* bank, const MetaConfig& cfg,
                                       const TrainSink& sink = {});

// Plain ERM at outer_lr for the given number of epochs. When a bank is
// supplied each scene's augmented counterpart is trained on as well (the
// augmentation-as-data path used when the meta scheme is switched off).
std::pair<ModelParams, TrainLog> train_erm(const std::vector<Scene>& dataset,
                                           const AmplitudeBank* bank, const MetaConfig& cfg,
                                           int epochs, ModelParams initial,
                                           const TrainSink& sink = {});

} // namespace bevdg
